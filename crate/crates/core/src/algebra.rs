//! Lie brackets, pushforwards of fields through flow words, the enlarged family,
//! bracket chains and least-squares structure constants.
//!
//! Convention: [X, Y] = DY·X − DX·Y. With it, (φ^X_s)_*Y = Y − s[X, Y] + O(s²),
//! so the flow diagnostic below uses ((φ^X_{−t})_*Y − (φ^X_t)_*Y)/(2t).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{eval_jet_norm, FieldFamily, LbRecord, VectorField, MAX_NUMERIC_ORDER};
use crate::flow::{flow_single, FlowConfig};
use crate::linalg::{columns, least_squares, numerical_rank};
use crate::orbit::{BracketChain, DistributionBasis};
use crate::space::{Ball, Point};

/// Tolerance used for the word integrations inside an enlarged field's eval.
pub const ENLARGED_EVAL_TOL: f64 = 1e-12;
/// Brackets kept per generation of a chain.
pub const MAX_GENERATION_FIELDS: usize = 256;

/// Φ = φ^{X_p}_{t_p}∘⋯∘φ^{X_1}_{t_1}; `letters[0]` is applied first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowWord {
    letters: Vec<(usize, f64)>,
}

impl FlowWord {
    pub fn new(letters: Vec<(usize, f64)>) -> Result<Self> {
        if letters.iter().any(|(_, t)| !t.is_finite()) {
            return Err(Error::InvalidArgument("flow word durations must be finite".into()));
        }
        Ok(Self { letters })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn letters(&self) -> &[(usize, f64)] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.letters.iter().map(|(_, t)| t.abs()).sum()
    }

    /// Φ⁻¹: reversed letters with negated durations.
    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|&(i, t)| (i, -t)).collect(),
        }
    }

    /// Ψ∘Φ where `self` = Φ runs first.
    pub fn then(&self, other: &FlowWord) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Self { letters }
    }

    pub fn validate(&self, family: &FieldFamily) -> Result<()> {
        for &(i, _) in &self.letters {
            family.member(i)?;
        }
        Ok(())
    }
}

fn not_integrable(e: Error) -> Error {
    match e {
        Error::WordNotIntegrable { .. } | Error::IndexOutOfFamily { .. } => e,
        other => Error::WordNotIntegrable {
            detail: other.to_string(),
        },
    }
}

/// Φ(x) for a flow word.
pub fn apply_word(family: &FieldFamily, word: &FlowWord, x: &Point, tol: f64) -> Result<Point> {
    let cfg = FlowConfig::with_tol(tol).recording(false);
    let mut p = x.clone();
    for &(i, t) in word.letters() {
        p = flow_single(family.member(i)?, &p, t, &cfg).map_err(not_integrable)?.endpoint;
    }
    Ok(p)
}

/// Φ(x) together with DΦ(x).
pub fn apply_word_with_jacobian(family: &FieldFamily, word: &FlowWord, x: &Point, tol: f64) -> Result<(Point, DMatrix<f64>)> {
    let cfg = FlowConfig::with_tol(tol).recording(false).variational(true);
    let n = x.len();
    let mut p = x.clone();
    let mut jac = DMatrix::identity(n, n);
    for &(i, t) in word.letters() {
        let r = flow_single(family.member(i)?, &p, t, &cfg).map_err(not_integrable)?;
        jac = r.final_variational.expect("variational requested") * jac;
        p = r.endpoint;
    }
    Ok((p, jac))
}

/// (Φ_*(ν·Y))(p) = DΦ(q)·ν·Y(q) with q = Φ⁻¹(p).
pub fn pushforward_eval(family: &FieldFamily, word: &FlowWord, field: &VectorField, nu: f64, p: &Point, tol: f64) -> Result<Point> {
    let q = apply_word(family, &word.inverse(), p, tol)?;
    let (_, jac) = apply_word_with_jacobian(family, word, &q, tol)?;
    let y = field.eval(&q);
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::WordNotIntegrable {
            detail: format!("{} is not finite at the pulled-back point", field.label()),
        });
    }
    Ok(jac * y * nu)
}

/// A member of the enlarged family: Φ_*(ν·X_base).
#[derive(Debug, Clone)]
pub struct EnlargedField {
    pub base_index: usize,
    pub word: FlowWord,
    pub scale: f64,
    pub field: VectorField,
    /// Anchor used for membership screening (the LB region center).
    pub anchor: Point,
    /// Jet order actually screened (capped by the numeric differentiation limit).
    pub screened_order: usize,
    pub anchor_jet_norm: f64,
    /// Set when the anchor jet norm exceeds the family bound k.
    pub excluded: bool,
}

impl EnlargedField {
    pub fn eval(&self, p: &Point) -> Point {
        self.field.eval(p)
    }

    /// Like `eval` but reports a failed word integration.
    pub fn try_eval(&self, p: &Point) -> Result<Point> {
        let v = self.field.eval(p);
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Error::WordNotIntegrable {
                detail: format!("backward word not integrable from {:?}", p.as_slice()),
            })
        }
    }

    /// Ψ_*(μ·Φ_*(ν·X)) = (Ψ∘Φ)_*(μν·X).
    pub fn enlarge(&self, family: &FieldFamily, outer: &FlowWord, mu: f64, lb: &LbRecord) -> Result<EnlargedField> {
        enlarge_field(family, &self.word.then(outer), self.base_index, self.scale * mu, lb)
    }
}

/// Builds Φ_*(ν·X_base) for the word Φ; its flow is Φ∘φ^X_{νt}∘Φ⁻¹.
pub fn enlarge_field(family: &FieldFamily, word: &FlowWord, base_index: usize, nu: f64, lb: &LbRecord) -> Result<EnlargedField> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {nu}")));
    }
    word.validate(family)?;
    let base = family.member(base_index)?.clone();
    let label = if word.is_empty() && nu == 1.0 {
        base.label().to_string()
    } else {
        format!("push[{}]({}*{})", word_label(family, word), nu, base.label())
    };
    let field = if word.is_empty() {
        if nu == 1.0 {
            base.clone()
        } else {
            base.scaled(nu)
        }
        .relabeled(label)
    } else {
        let fam = family.clone();
        let w = word.clone();
        let b = base.clone();
        let n = family.dimension();
        let domain = family.common_domain().clone();
        VectorField::from_parts(
            label,
            domain,
            Arc::new(move |p: &Point| {
                pushforward_eval(&fam, &w, &b, nu, p, ENLARGED_EVAL_TOL)
                    .unwrap_or_else(|_| Point::from_element(n, f64::NAN))
            }),
            None,
        )
    };
    let anchor = lb.region.center.clone();
    let screened_order = lb.order_s.min(MAX_NUMERIC_ORDER);
    let anchor_jet_norm = eval_jet_norm(&field, &anchor, screened_order)?;
    if !anchor_jet_norm.is_finite() {
        return Err(Error::WordNotIntegrable {
            detail: "enlarged field is not defined at the anchor".into(),
        });
    }
    Ok(EnlargedField {
        base_index,
        word: word.clone(),
        scale: nu,
        field,
        anchor,
        screened_order,
        anchor_jet_norm,
        excluded: anchor_jet_norm > lb.bound_k,
    })
}

fn word_label(family: &FieldFamily, word: &FlowWord) -> String {
    word.letters()
        .iter()
        .map(|&(i, t)| format!("{}:{}", family.members()[i].label(), t))
        .collect::<Vec<_>>()
        .join(",")
}

/// [X, Y](x) = DY(x)·X(x) − DX(x)·Y(x).
pub fn lie_bracket(x_field: &VectorField, y_field: &VectorField, x: &Point) -> Result<Point> {
    x_field.check_domain(x)?;
    y_field.check_domain(x)?;
    Ok(bracket_unchecked(x_field, y_field, x))
}

fn bracket_unchecked(x_field: &VectorField, y_field: &VectorField, x: &Point) -> Point {
    let xv = x_field.eval(x);
    let yv = y_field.eval(x);
    y_field.jvp(x, &xv) - x_field.jvp(x, &yv)
}

/// The bracket as a field of its own (numeric Jacobian), domain = the smaller domain.
pub fn bracket_field(x_field: &VectorField, y_field: &VectorField) -> VectorField {
    let domain = if x_field.domain().is_inside(y_field.domain()) {
        x_field.domain().clone()
    } else {
        y_field.domain().clone()
    };
    let a = x_field.clone();
    let b = y_field.clone();
    VectorField::new(format!("[{},{}]", x_field.label(), y_field.label()), domain, move |p: &Point| {
        bracket_unchecked(&a, &b, p)
    })
}

/// Flow-based estimate ((φ^X_{−t})_*Y − (φ^X_t)_*Y)(x)/(2t) of [X, Y](x).
pub fn bracket_by_flows(x_field: &VectorField, y_field: &VectorField, x: &Point, t: f64, tol: f64) -> Result<Point> {
    x_field.check_domain(x)?;
    y_field.check_domain(x)?;
    let cfg = FlowConfig::with_tol(tol).recording(false);
    let vcfg = cfg.variational(true);
    let push = |s: f64| -> Result<Point> {
        let q = flow_single(x_field, x, -s, &cfg)?.endpoint;
        let r = flow_single(x_field, &q, s, &vcfg)?;
        Ok(r.final_variational.expect("variational requested") * y_field.eval(&q))
    };
    Ok((push(-t)? - push(t)?) / (2.0 * t))
}

/// 𝒳¹ = members, 𝒳² adds [X_i, X_j] (i < j), generation k ≥ 3 adds [X_i, Y] for Y
/// new in generation k − 1. Ranks are recorded per generation; building stops once
/// the rank reaches the chart dimension.
pub fn bracket_chain(family: &FieldFamily, x: &Point, k_max: usize) -> Result<BracketChain> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    for m in family.members() {
        m.check_domain(x)?;
    }
    let n = family.dimension();
    let mut fields: Vec<VectorField> = family.members().to_vec();
    let mut generation_of = vec![1usize; fields.len()];
    let mut vectors: Vec<Point> = fields.iter().map(|f| f.eval(x)).collect();
    let mut generations = vec![DistributionBasis::new(
        x.clone(),
        vectors.clone(),
        fields.iter().map(|f| f.label().to_string()).collect(),
    )];
    let mut previous: Vec<usize> = (0..fields.len()).collect();
    let members = family.len();
    for k in 2..=k_max {
        if generations.last().map(|g| g.rank) == Some(n) {
            break;
        }
        let mut new_fields = Vec::new();
        if k == 2 {
            for i in 0..members {
                for j in i + 1..members {
                    new_fields.push(bracket_field(&fields[i], &fields[j]));
                }
            }
        } else {
            for &p in &previous {
                for i in 0..members {
                    new_fields.push(bracket_field(&fields[i], &fields[p]));
                }
            }
        }
        new_fields.truncate(MAX_GENERATION_FIELDS);
        let new_vectors: Vec<Point> = new_fields.par_iter().map(|f| f.eval(x)).collect();
        previous = (fields.len()..fields.len() + new_fields.len()).collect();
        for f in new_fields {
            fields.push(f);
            generation_of.push(k);
        }
        vectors.extend(new_vectors);
        generations.push(DistributionBasis::new(
            x.clone(),
            vectors.clone(),
            fields.iter().map(|f| f.label().to_string()).collect(),
        ));
    }
    Ok(BracketChain::new(x.clone(), generations, fields, generation_of))
}

/// Coefficients, residuals, bracket norms and rank deficiency at one grid point.
type PointFit = (Vec<DVector<f64>>, Vec<f64>, Vec<f64>, bool);

/// Sampled certification that brackets close on the family: at each grid
/// point, [Y_λ, Y_μ] is fitted by Σ_ν c_ν Y_ν in the least-squares sense.
#[derive(Debug, Clone)]
pub struct StructureReport {
    pub grid: Vec<Point>,
    pub pairs: Vec<(usize, usize)>,
    /// `coefficients[g][p]` holds c_ν for grid point g and pair p.
    pub coefficients: Vec<Vec<DVector<f64>>>,
    pub residuals: Vec<Vec<f64>>,
    pub bracket_norms: Vec<Vec<f64>>,
    /// Grid points where the dictionary {Y_ν(y)} is rank deficient.
    pub rank_deficient: Vec<bool>,
    pub bound_c: f64,
    pub max_residual: f64,
    pub tol: f64,
    pub certified: bool,
    pub note: &'static str,
}

impl StructureReport {
    /// C^ν_{λμ} at grid point g.
    pub fn constant(&self, g: usize, lambda: usize, mu: usize, nu: usize) -> Option<f64> {
        let p = self.pairs.iter().position(|&pr| pr == (lambda, mu))?;
        self.coefficients.get(g).map(|c| c[p][nu])
    }
}

/// Grid of `grid_size` points per axis over the first min(n, 3) axes of the region,
/// restricted to the ball.
pub fn region_grid(region: &Ball, grid_size: usize) -> Result<Vec<Point>> {
    if region.is_global() {
        return Err(Error::InvalidArgument("certification needs a bounded region".into()));
    }
    if grid_size <= 1 {
        return Ok(vec![region.center.clone()]);
    }
    let n = region.dimension();
    let axes = n.min(3);
    let ticks: Vec<f64> = (0..grid_size)
        .map(|i| -region.radius + 2.0 * region.radius * i as f64 / (grid_size - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let total = grid_size.pow(axes as u32);
    for flat in 0..total {
        let mut p = region.center.clone();
        let mut rem = flat;
        for a in 0..axes {
            p[a] += ticks[rem % grid_size];
            rem /= grid_size;
        }
        if region.contains_with_slack(&p, 1e-12) {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn certify_h_prime(family: &FieldFamily, region: &Ball, grid_size: usize, tol: f64) -> Result<StructureReport> {
    if !region.is_inside(family.common_domain()) {
        return Err(Error::OutOfDomain {
            label: "common domain".into(),
        });
    }
    let grid = region_grid(region, grid_size)?;
    let m = family.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|l| (l + 1..m).map(move |u| (l, u))).collect();
    let n = family.dimension();
    let per_point: Vec<PointFit> = grid
        .par_iter()
        .map(|y| {
            let dict: Vec<Point> = family.members().iter().map(|f| f.eval(y)).collect();
            let a = columns(&dict, n);
            let deficient = numerical_rank(&a) < m;
            let mut coeffs = Vec::with_capacity(pairs.len());
            let mut res = Vec::with_capacity(pairs.len());
            let mut norms = Vec::with_capacity(pairs.len());
            for &(l, u) in &pairs {
                let b = bracket_unchecked(&family.members()[l], &family.members()[u], y);
                let ls = least_squares(&a, &b);
                norms.push(b.norm());
                res.push(ls.residual);
                coeffs.push(ls.coefficients);
            }
            (coeffs, res, norms, deficient)
        })
        .collect();
    let mut report = StructureReport {
        grid,
        pairs,
        coefficients: Vec::new(),
        residuals: Vec::new(),
        bracket_norms: Vec::new(),
        rank_deficient: Vec::new(),
        bound_c: 0.0,
        max_residual: 0.0,
        tol,
        certified: true,
        note: "sampled certification",
    };
    for (coeffs, res, norms, deficient) in per_point {
        for ((c, r), b) in coeffs.iter().zip(&res).zip(&norms) {
            report.bound_c = report.bound_c.max(c.iter().map(|v| v.abs()).sum());
            report.max_residual = report.max_residual.max(*r);
            if *r > tol * (1.0 + b) {
                report.certified = false;
            }
        }
        report.coefficients.push(coeffs);
        report.residuals.push(res);
        report.bracket_norms.push(norms);
        report.rank_deficient.push(deficient);
    }
    if !report.bound_c.is_finite() {
        report.certified = false;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::fields::estimate_lb_bound;
    use crate::space::ChartSpace;

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn bracket_examples() {
        let h = catalog::heisenberg();
        let g = catalog::grushin();
        for p in [pt(&[0.0, 0.0, 0.0]), pt(&[1.5, -2.0, 0.3])] {
            let b = lie_bracket(&h.members()[0], &h.members()[1], &p).unwrap();
            assert!((b - pt(&[0.0, 0.0, 1.0])).amax() < 1e-12);
            let z = lie_bracket(&h.members()[1], &h.members()[1], &p).unwrap();
            assert_eq!(z.amax(), 0.0);
        }
        let b = lie_bracket(&g.members()[0], &g.members()[1], &pt(&[0.7, 3.0])).unwrap();
        assert!((b - pt(&[0.0, 1.0])).amax() < 1e-12);
    }

    #[test]
    fn bracket_by_flows_matches_jacobian_formula() {
        let fields = catalog::analytic_catalog();
        let p = pt(&[0.3, -0.4]);
        let planar: Vec<&VectorField> = fields.iter().filter(|f| f.dimension() == 2).collect();
        for a in &planar {
            for b in &planar {
                let exact = lie_bracket(a, b, &p).unwrap();
                let approx = bracket_by_flows(a, b, &p, 1e-3, 1e-13).unwrap();
                assert!((exact.clone() - approx).amax() < 1e-5 * (1.0 + exact.amax()), "{} {}", a.label(), b.label());
            }
        }
    }

    #[test]
    fn translation_pushforward() {
        // family {∂x, x∂y} on R²; push x∂y forward by the unit translation along ∂x
        let s = ChartSpace::euclidean(2);
        let fam = FieldFamily::new(s.clone(), vec![catalog::unit_field(&s, "dx", 0), catalog::grushin().members()[1].clone()]).unwrap();
        let region = Ball::in_space(&s, Point::zeros(2), 3.0).unwrap();
        let lb = estimate_lb_bound(&fam, &region, 2, 32).unwrap();
        let word = FlowWord::new(vec![(0, 1.0)]).unwrap();
        let e = enlarge_field(&fam, &word, 1, 1.0, &lb).unwrap();
        for p in [pt(&[0.0, 0.0]), pt(&[2.0, -1.0]), pt(&[-0.5, 0.5])] {
            let v = e.eval(&p);
            assert!((v - pt(&[0.0, p[0] - 1.0])).amax() < 1e-9);
        }
        let id = enlarge_field(&fam, &FlowWord::empty(), 1, 1.0, &lb).unwrap();
        assert_eq!(id.eval(&pt(&[2.0, 1.0])), pt(&[0.0, 2.0]));
    }

    #[test]
    fn heisenberg_pushforward_closed_form() {
        // φ^{X1}_s(x, y, z) = (x + s, y, z), so (φ^{X1}_s)_* X2 (p) = (0, 1, x − s)
        let fam = catalog::heisenberg();
        let region = Ball::in_space(fam.space(), Point::zeros(3), 4.0).unwrap();
        let lb = estimate_lb_bound(&fam, &region, 2, 32).unwrap();
        let e = enlarge_field(&fam, &FlowWord::new(vec![(0, 1.0)]).unwrap(), 1, 1.0, &lb).unwrap();
        let p = pt(&[0.4, -0.3, 0.2]);
        assert!((e.eval(&p) - pt(&[0.0, 1.0, 0.4 - 1.0])).amax() < 1e-9);
        assert!(!e.excluded);
    }

    #[test]
    fn chain_examples() {
        let h = catalog::heisenberg();
        assert_eq!(bracket_chain(&h, &Point::zeros(3), 2).unwrap().rank_profile, vec![2, 3]);
        let c = catalog::commuting_constants(3, 2).unwrap();
        assert_eq!(bracket_chain(&c, &Point::zeros(3), 3).unwrap().rank_profile, vec![2, 2, 2]);
        let g = catalog::grushin();
        assert_eq!(bracket_chain(&g, &Point::zeros(2), 2).unwrap().rank_profile, vec![1, 2]);
    }

    #[test]
    fn structure_constants() {
        let region = Ball::in_space(&ChartSpace::euclidean(3), Point::zeros(3), 0.1).unwrap();
        let c = catalog::commuting_constants(3, 2).unwrap();
        let r = certify_h_prime(&c, &region, 3, 1e-8).unwrap();
        assert!(r.certified);
        assert_eq!(r.bound_c, 0.0);

        let h = catalog::heisenberg();
        let r = certify_h_prime(&h, &region, 3, 1e-8).unwrap();
        assert!(!r.certified);
        assert!(r.residuals.iter().flatten().all(|&v| (v - 1.0).abs() < 0.01));

        let h3 = catalog::heisenberg_with_center();
        let r = certify_h_prime(&h3, &region, 3, 1e-8).unwrap();
        assert!(r.certified);
        for g in 0..r.grid.len() {
            assert!((r.constant(g, 0, 1, 2).unwrap() - 1.0).abs() < 1e-8);
        }
        assert!((r.bound_c - 1.0).abs() < 1e-8);
    }
}
