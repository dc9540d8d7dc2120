//! Scenario files: a TOML description of a chart, a family of fields, the LB
//! bound record and a list of commands.
//!
//! ```toml
//! name = "heisenberg-rectangle"
//! tol = 1e-9
//! seed = 7
//!
//! [[fields]]
//! kind = "builtin"
//! name = "heisenberg"
//!
//! [lb]
//! radius = 10.0
//!
//! [[commands]]
//! kind = "flow"
//! label = "rectangle"
//! point = [0.0, 0.0, 0.0]
//! pieces = [{ duration = 1.0, coeffs = [[0, 1.0]] }, { duration = 1.0, coeffs = [[1, 1.0]] }]
//! ```
//!
//! Member indices in `coeffs`, `tau` and `axes` refer to the command's family:
//! all fields in declaration order, or the subset named by `members`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::catalog::{self, AffineLinear, Polynomial};
use crate::error::{Error, Result};
use crate::fields::{FieldFamily, DEFAULT_SAFETY};
use crate::space::{ChartSpace, L1Coefficients, NormKind, Point};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_LB_ORDER: usize = 2;
pub const DEFAULT_LB_RADIUS: f64 = 10.0;

fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_safety() -> f64 {
    DEFAULT_SAFETY
}
fn default_order() -> usize {
    DEFAULT_LB_ORDER
}
fn default_radius() -> f64 {
    DEFAULT_LB_RADIUS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, rename = "unsafe")]
    pub allow_unsafe: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    pub fields: Vec<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb: Option<LbSpec>,
    #[serde(default)]
    pub commands: Vec<CommandSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormKind>,
    #[serde(default)]
    pub truncation_of_l1: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// A catalog family selected by `name`.
    Builtin,
    /// One field with polynomial `components`, named by `label`.
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Polynomial>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<AffineLinear>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    /// Rows of the polynomial operator Φ(x) for operator-family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<Vec<Vec<Polynomial>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<f64>>>,
}

impl FieldSpec {
    pub fn builtin(name: impl Into<String>) -> Self {
        Self {
            kind: FieldKind::Builtin,
            name: Some(name.into()),
            label: None,
            components: None,
            dim: None,
            span: None,
            count: None,
            linear: None,
            decay: None,
            operator: None,
            vectors: None,
        }
    }

    pub fn polynomial(label: impl Into<String>, components: Vec<Polynomial>) -> Self {
        Self {
            kind: FieldKind::Polynomial,
            label: Some(label.into()),
            components: Some(components),
            name: None,
            ..Self::builtin("")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbSpec {
    #[serde(default = "default_order")]
    pub order: usize,
    /// Declared bound k; skips sampling when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared: Option<f64>,
    /// Region center (origin when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

impl Default for LbSpec {
    fn default() -> Self {
        Self {
            order: DEFAULT_LB_ORDER,
            declared: None,
            center: None,
            radius: DEFAULT_LB_RADIUS,
            samples: DEFAULT_SAMPLES,
            safety: DEFAULT_SAFETY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Flow,
    Compose,
    Invert,
    Slice,
    BracketChain,
    CertifyHprime,
    OrbitSample,
    Verdict,
    CheckLb,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Flow => "flow",
            Self::Compose => "compose",
            Self::Invert => "invert",
            Self::Slice => "slice",
            Self::BracketChain => "bracket-chain",
            Self::CertifyHprime => "certify-hprime",
            Self::OrbitSample => "orbit-sample",
            Self::Verdict => "verdict",
            Self::CheckLb => "check-lb",
        }
    }

    fn produces_point(self) -> bool {
        matches!(self, Self::Flow | Self::Compose | Self::Invert)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub duration: f64,
    pub coeffs: Vec<(usize, f64)>,
}

/// τ_i = first·ratio^i for i < count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricSpec {
    #[serde(default = "one")]
    pub first: f64,
    pub ratio: f64,
    pub count: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandSpec {
    pub kind: CommandKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// Use the endpoint of an earlier flow, compose or invert command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<String>>,
    #[serde(default, rename = "unsafe", skip_serializing_if = "Option::is_none")]
    pub allow_unsafe: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variational: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<(usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_geometric: Option<GeometricSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_tail: Option<f64>,
    /// Explicit truncation level; the tail bound is then reported, not enforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_word_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_word_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl CommandSpec {
    pub fn new(kind: CommandKind, label: impl Into<String>) -> Self {
        Self {
            kind,
            label: label.into(),
            point: None,
            point_from: None,
            members: None,
            allow_unsafe: None,
            tol: None,
            pieces: None,
            t0: None,
            variational: None,
            tau: None,
            tau_geometric: None,
            tau_tail: None,
            truncation: None,
            rho: None,
            grid: None,
            axes: None,
            k_max: None,
            radius: None,
            budget: None,
            max_word_len: None,
            min_word_len: None,
            d_max: None,
            order: None,
            samples: None,
        }
    }

    /// τ from `tau`, `tau_geometric` and `tau_tail`.
    pub fn tau_coefficients(&self) -> Result<L1Coefficients> {
        let mut entries: Vec<(usize, f64)> = self.tau.clone().unwrap_or_default();
        if let Some(g) = &self.tau_geometric {
            entries.extend((0..g.count).map(|i| (i, g.first * g.ratio.powi(i as i32))));
        }
        L1Coefficients::new(entries, self.tau_tail.unwrap_or(0.0))
    }
}

/// Line and column (1-based) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |p| offset - p - 1) + 1;
    (line, column)
}

/// Position of the `nth` occurrence of `needle`, or the start of the text.
fn locate(text: &str, needle: &str, nth: usize) -> (usize, usize) {
    text.match_indices(needle)
        .nth(nth)
        .map_or((1, 1), |(i, _)| line_col(text, i))
}

fn parse_error(at: (usize, usize), message: impl Into<String>) -> Error {
    Error::Parse {
        line: at.0,
        column: at.1,
        message: message.into(),
    }
}

fn label_position(text: &str, label: &str, nth: usize) -> (usize, usize) {
    let quoted = format!("\"{label}\"");
    locate(text, &quoted, nth)
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let at = e.span().map_or((1, 1), |s| line_col(text, s.start));
        parse_error(at, e.message().trim().to_string())
    })?;
    validate(&scenario, text)?;
    Ok(scenario)
}

/// Canonical text of a scenario; `parse_scenario(emit_scenario(s))` re-emits identically.
pub fn emit_scenario(scenario: &Scenario) -> Result<String> {
    toml::to_string(scenario).map_err(|e| Error::InvalidArgument(format!("cannot emit scenario: {e}")))
}

fn validate(s: &Scenario, text: &str) -> Result<()> {
    if !(s.tol > 0.0) {
        return Err(parse_error(locate(text, "tol", 0), "tol must be positive"));
    }
    let family = s.build_family_located(text)?;
    let n = family.dimension();
    if let Some(lb) = &s.lb {
        if let Some(c) = &lb.center {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
        }
        if !(lb.radius > 0.0) || !(lb.safety >= 1.0) || lb.samples == 0 {
            return Err(parse_error(
                locate(text, "[lb]", 0),
                "lb needs radius > 0, safety >= 1 and samples >= 1",
            ));
        }
    }
    let mut seen: HashSet<&str> = HashSet::new();
    let mut point_labels: HashSet<&str> = HashSet::new();
    for cmd in &s.commands {
        let at = label_position(text, &cmd.label, 0);
        if !seen.insert(cmd.label.as_str()) {
            return Err(parse_error(
                label_position(text, &cmd.label, 1),
                format!("duplicate command label `{}`", cmd.label),
            ));
        }
        match (&cmd.point, &cmd.point_from) {
            (Some(p), None) => {
                if p.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: p.len(),
                    });
                }
            }
            (None, Some(from)) => {
                if !point_labels.contains(from.as_str()) {
                    return Err(parse_error(
                        at,
                        format!("`{}` takes its point from `{from}`, which is not an earlier flow, compose or invert command", cmd.label),
                    ));
                }
            }
            (Some(_), Some(_)) => {
                return Err(parse_error(at, format!("`{}` gives both point and point_from", cmd.label)));
            }
            (None, None) if cmd.kind != CommandKind::CheckLb => {
                return Err(parse_error(at, format!("`{}` needs a point or point_from", cmd.label)));
            }
            (None, None) => {}
        }
        let size = match &cmd.members {
            Some(names) => {
                for name in names {
                    if family.index_of(name).is_none() {
                        return Err(parse_error(at, format!("`{}` names unknown field `{name}`", cmd.label)));
                    }
                }
                names.len()
            }
            None => family.len(),
        };
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(parse_error(at, format!("`{}` ({}) needs {what}", cmd.label, cmd.kind.name())))
            }
        };
        let check_index = |i: usize| -> Result<()> {
            if i < size {
                Ok(())
            } else {
                Err(parse_error(
                    at,
                    format!("`{}` refers to member {i}, but its family has {size}", cmd.label),
                ))
            }
        };
        match cmd.kind {
            CommandKind::Flow => {
                need(cmd.pieces.is_some(), "pieces")?;
                for p in cmd.pieces.iter().flatten() {
                    need(p.duration >= 0.0 && p.duration.is_finite(), "non-negative piece durations")?;
                    for &(i, _) in &p.coeffs {
                        check_index(i)?;
                    }
                }
            }
            CommandKind::Compose | CommandKind::Invert => {
                need(cmd.tau.is_some() || cmd.tau_geometric.is_some(), "tau or tau_geometric")?;
                let tau = cmd.tau_coefficients().map_err(|e| parse_error(at, e.to_string()))?;
                if let Some(i) = tau.max_index() {
                    check_index(i)?;
                }
            }
            CommandKind::Slice => {
                need(cmd.rho.is_some(), "rho")?;
                need(cmd.axes.as_ref().is_some_and(|a| !a.is_empty() && a.len() <= 3), "1 to 3 axes")?;
                for &i in cmd.axes.iter().flatten() {
                    check_index(i)?;
                }
            }
            CommandKind::OrbitSample => need(cmd.budget.is_some_and(|b| b > 0), "a positive budget")?,
            CommandKind::BracketChain | CommandKind::Verdict => {
                need(cmd.k_max.is_none_or(|k| k > 0), "k_max >= 1")?
            }
            CommandKind::CertifyHprime => need(cmd.radius.is_none_or(|r| r > 0.0), "a positive radius")?,
            CommandKind::CheckLb => {}
        }
        if cmd.kind.produces_point() {
            point_labels.insert(cmd.label.as_str());
        }
    }
    Ok(())
}

impl Scenario {
    /// Family made of all fields in declaration order.
    pub fn build_family(&self) -> Result<FieldFamily> {
        self.build_family_located("")
    }

    fn build_family_located(&self, text: &str) -> Result<FieldFamily> {
        if self.fields.is_empty() {
            return Err(parse_error(locate(text, "fields", 0), "scenario declares no fields"));
        }
        let mut family: Option<FieldFamily> = None;
        for (idx, spec) in self.fields.iter().enumerate() {
            let part = build_field_spec(spec, self.space.as_ref())?;
            match family.as_mut() {
                None => family = Some(part),
                Some(f) => {
                    if part.dimension() != f.dimension() {
                        return Err(Error::DimensionMismatch {
                            expected: f.dimension(),
                            got: part.dimension(),
                        });
                    }
                    for m in part.members() {
                        if f.index_of(m.label()).is_some() {
                            let at = match (&spec.kind, &spec.label) {
                                (FieldKind::Polynomial, Some(label)) => label_position(text, label, 0),
                                _ => locate(text, "[[fields]]", idx),
                            };
                            return Err(parse_error(at, format!("duplicate field label `{}`", m.label())));
                        }
                        f.push(m.clone())?;
                    }
                }
            }
        }
        let family = family.expect("at least one field");
        let mut labels = HashSet::new();
        for m in family.members() {
            if !labels.insert(m.label()) {
                return Err(parse_error(locate(text, m.label(), 1), format!("duplicate field label `{}`", m.label())));
            }
        }
        if let Some(space) = &self.space {
            if space.dimension != family.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: space.dimension,
                    got: family.dimension(),
                });
            }
            // put every member on the declared chart so jets use its norm
            let chart = self.chart(&family)?;
            let members = family
                .members()
                .iter()
                .map(|m| {
                    let d = m.domain();
                    let domain = crate::space::Ball::new(d.center.clone(), d.radius, chart.norm_kind())?;
                    Ok(m.clone().with_domain(domain))
                })
                .collect::<Result<Vec<_>>>()?;
            return FieldFamily::new(chart, members);
        }
        Ok(family)
    }

    /// The chart the scenario works on.
    pub fn chart(&self, family: &FieldFamily) -> Result<ChartSpace> {
        match &self.space {
            Some(s) => {
                let norm = s.norm.unwrap_or(if s.truncation_of_l1 { NormKind::L1 } else { NormKind::Euclidean });
                ChartSpace::with_norm(s.dimension, norm, s.truncation_of_l1)
            }
            None => Ok(family.space().clone()),
        }
    }

    pub fn lb_spec(&self) -> LbSpec {
        self.lb.clone().unwrap_or_default()
    }
}

fn build_field_spec(spec: &FieldSpec, space: Option<&SpaceSpec>) -> Result<FieldFamily> {
    let missing = |what: &str| Error::InvalidArgument(format!("{} field spec needs `{what}`", match spec.kind {
        FieldKind::Builtin => "builtin",
        FieldKind::Polynomial => "polynomial",
    }));
    match spec.kind {
        FieldKind::Builtin => {
            let name = spec.name.as_deref().ok_or_else(|| missing("name"))?;
            let dim = spec.dim.or(space.map(|s| s.dimension));
            match name {
                "heisenberg" => Ok(catalog::heisenberg()),
                "grushin" => Ok(catalog::grushin()),
                "commuting-constants" => {
                    let d = dim.unwrap_or(2);
                    catalog::commuting_constants(d, spec.span.unwrap_or(d))
                }
                "affine-l1" => {
                    let d = dim.unwrap_or(8);
                    catalog::affine_l1(
                        d,
                        spec.count.unwrap_or(d),
                        spec.decay.unwrap_or(0.5),
                        spec.linear.unwrap_or(AffineLinear::Identity),
                    )
                }
                "operator-family" => {
                    let d = dim.ok_or_else(|| missing("dim"))?;
                    let op = spec.operator.as_ref().ok_or_else(|| missing("operator"))?;
                    let vs = spec.vectors.as_ref().ok_or_else(|| missing("vectors"))?;
                    catalog::operator_family(&ChartSpace::euclidean(d), op, vs)
                }
                other => Err(Error::UnknownBuiltin(other.to_string())),
            }
        }
        FieldKind::Polynomial => {
            let label = spec.label.as_deref().ok_or_else(|| missing("label"))?;
            let components = spec.components.as_ref().ok_or_else(|| missing("components"))?;
            let d = space.map(|s| s.dimension).unwrap_or(components.len());
            if components.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: components.len(),
                });
            }
            let s = match space {
                Some(sp) => ChartSpace::new(d, sp.truncation_of_l1)?,
                None => ChartSpace::euclidean(d),
            };
            let field = catalog::polynomial_field(&s, label, components.clone())?;
            FieldFamily::new(s, vec![field])
        }
    }
}

/// Point of a command given already computed endpoints.
pub fn command_point(cmd: &CommandSpec, endpoints: &[(String, Point)], fallback: &Point) -> Result<Point> {
    if let Some(p) = &cmd.point {
        return Ok(Point::from_vec(p.clone()));
    }
    if let Some(from) = &cmd.point_from {
        return endpoints
            .iter()
            .find(|(l, _)| l == from)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| Error::InvalidArgument(format!("`{from}` produced no endpoint")));
    }
    Ok(fallback.clone())
}
