//! Local vector fields on a chart, indexed families of them, and the local
//! jet bound (LB(s)) that powers every existence radius downstream.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{operator_norm, operator_norm_with_argmax};
use crate::space::{Ball, ChartSpace, NormKind, Point};

pub type EvalFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;

/// Safety factor applied to sampled jet maxima.
pub const DEFAULT_SAFETY: f64 = 1.25;
/// Number of random unit tuples used to seed multilinear norm estimates.
pub const DEFAULT_UNIT_TUPLES: usize = 64;
pub const DEFAULT_JET_SEED: u64 = 0x5eed_0001;
pub const DEFAULT_LB_SEED: u64 = 0x5eed_0002;
/// Highest jet order we differentiate numerically.
pub const MAX_NUMERIC_ORDER: usize = 3;

/// A smooth local vector field on a chart.
#[derive(Clone)]
pub struct VectorField {
    label: String,
    domain: Ball,
    eval: EvalFn,
    jacobian: Option<JacobianFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new<F>(label: impl Into<String>, domain: Ball, eval: F) -> Self
    where
        F: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            domain,
            eval: Arc::new(eval),
            jacobian: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn from_parts(label: String, domain: Ball, eval: EvalFn, jacobian: Option<JacobianFn>) -> Self {
        Self {
            label,
            domain,
            eval,
            jacobian,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn domain(&self) -> &Ball {
        &self.domain
    }

    pub fn with_domain(mut self, domain: Ball) -> Self {
        self.domain = domain;
        self
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Evaluates without a domain check (used inside integrators and stencils).
    #[inline]
    pub fn eval(&self, x: &Point) -> Point {
        (self.eval)(x)
    }

    pub fn try_eval(&self, x: &Point) -> Result<Point> {
        self.check_domain(x)?;
        Ok(self.eval(x))
    }

    pub fn check_domain(&self, x: &Point) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        if !self.domain.contains_with_slack(x, 1e-12) {
            return Err(Error::OutOfDomain {
                label: self.label.clone(),
            });
        }
        Ok(())
    }

    /// Analytic Jacobian when supplied, otherwise a fourth-order central stencil.
    pub fn jacobian(&self, x: &Point) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(x),
            None => fd_jacobian_fourth_order(&*self.eval, x),
        }
    }

    /// Directional derivative DX(x)·v.
    pub fn jvp(&self, x: &Point, v: &Point) -> Point {
        match &self.jacobian {
            Some(j) => j(x) * v,
            None => fd_directional_fourth_order(&*self.eval, x, v),
        }
    }

    /// The field ν·X.
    pub fn scaled(&self, nu: f64) -> Self {
        let eval = self.eval.clone();
        let jac = self.jacobian.clone();
        Self {
            label: format!("{}*{}", nu, self.label),
            domain: self.domain.clone(),
            eval: Arc::new(move |x| eval(x) * nu),
            jacobian: jac.map(|j| -> JacobianFn { Arc::new(move |x| j(x) * nu) }),
        }
    }

    pub fn eval_fn(&self) -> &EvalFn {
        &self.eval
    }
}

fn stencil_step(x: &Point) -> f64 {
    1e-3 * (1.0 + x.amax())
}

fn fd_jacobian_fourth_order(f: &(dyn Fn(&Point) -> Point + Send + Sync), x: &Point) -> DMatrix<f64> {
    let n = x.len();
    let h = stencil_step(x);
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        let xj = x[j];
        probe[j] = xj + 2.0 * h;
        let f2p = f(&probe);
        probe[j] = xj + h;
        let f1p = f(&probe);
        probe[j] = xj - h;
        let f1m = f(&probe);
        probe[j] = xj - 2.0 * h;
        let f2m = f(&probe);
        probe[j] = xj;
        let col = (f1p - f1m) * (8.0 / (12.0 * h)) - (f2p - f2m) * (1.0 / (12.0 * h));
        jac.set_column(j, &col);
    }
    jac
}

fn fd_directional_fourth_order(f: &(dyn Fn(&Point) -> Point + Send + Sync), x: &Point, v: &Point) -> Point {
    let vn = v.amax();
    if vn == 0.0 {
        return Point::zeros(x.len());
    }
    let h = stencil_step(x) / vn;
    let at = |s: f64| f(&(x + v * s));
    (at(h) - at(-h)) * (8.0 / (12.0 * h)) - (at(2.0 * h) - at(-2.0 * h)) * (1.0 / (12.0 * h))
}

/// Indexed family ξ = {X_α}. Index order is the order of `members`.
#[derive(Debug, Clone)]
pub struct FieldFamily {
    space: ChartSpace,
    members: Vec<VectorField>,
    common_domain: Ball,
    declared_bound: Option<f64>,
}

impl FieldFamily {
    /// Family whose common domain is the largest member domain contained in all
    /// of them when the members share a center; otherwise pass it explicitly via
    /// [`FieldFamily::with_common_domain`].
    pub fn new(space: ChartSpace, members: Vec<VectorField>) -> Result<Self> {
        let common = members
            .iter()
            .map(|m| m.domain().clone())
            .min_by(|a, b| a.radius.total_cmp(&b.radius))
            .unwrap_or_else(|| Ball::whole(&space));
        Self::with_common_domain(space, members, common)
    }

    pub fn with_common_domain(space: ChartSpace, members: Vec<VectorField>, common_domain: Ball) -> Result<Self> {
        space.check_point(&common_domain.center)?;
        for m in &members {
            if m.dimension() != space.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: space.dimension(),
                    got: m.dimension(),
                });
            }
            if !common_domain.is_inside(m.domain()) {
                return Err(Error::InvalidArgument(format!(
                    "common domain is not inside the domain of `{}`",
                    m.label()
                )));
            }
        }
        Ok(Self {
            space,
            members,
            common_domain,
            declared_bound: None,
        })
    }

    /// Finite truncation of a countable family given by a generator.
    pub fn from_generator<G>(space: ChartSpace, count: usize, generator: G) -> Result<Self>
    where
        G: FnMut(usize) -> VectorField,
    {
        Self::new(space, (0..count).map(generator).collect())
    }

    /// Attaches an analytic LB bound, passed through by [`estimate_lb_bound`].
    pub fn with_declared_bound(mut self, k: f64) -> Self {
        self.declared_bound = Some(k);
        self
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.declared_bound
    }

    pub fn space(&self) -> &ChartSpace {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    pub fn members(&self) -> &[VectorField] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, index: usize) -> Result<&VectorField> {
        self.members.get(index).ok_or(Error::IndexOutOfFamily {
            index,
            size: self.members.len(),
        })
    }

    pub fn common_domain(&self) -> &Ball {
        &self.common_domain
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.members.iter().position(|m| m.label() == label)
    }

    /// Members selected by index, in the given order.
    pub fn subfamily(&self, indices: &[usize]) -> Result<Self> {
        let members = indices
            .iter()
            .map(|&i| self.member(i).cloned())
            .collect::<Result<Vec<_>>>()?;
        let mut sub = Self::with_common_domain(self.space.clone(), members, self.common_domain.clone())?;
        sub.declared_bound = self.declared_bound;
        Ok(sub)
    }

    pub fn push(&mut self, field: VectorField) -> Result<()> {
        if field.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: field.dimension(),
            });
        }
        self.members.push(field);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LbMethod {
    Declared,
    Sampled,
}

/// Certified (or declared) bound on the s-jets of a family over a region.
#[derive(Debug, Clone, PartialEq)]
pub struct LbRecord {
    pub order_s: usize,
    pub bound_k: f64,
    pub region: Ball,
    pub method: LbMethod,
    /// Largest sampled jet norm before the safety factor (0 for declared bounds).
    pub sampled_max: f64,
    pub samples: usize,
    pub safety: f64,
}

impl LbRecord {
    pub fn declared(order_s: usize, bound_k: f64, region: Ball) -> Result<Self> {
        if !(bound_k > 0.0) {
            return Err(Error::InvalidArgument("declared bound must be positive".into()));
        }
        Ok(Self {
            order_s,
            bound_k,
            region,
            method: LbMethod::Declared,
            sampled_max: 0.0,
            samples: 0,
            safety: 1.0,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JetOptions {
    pub unit_tuples: usize,
    pub seed: u64,
}

impl Default for JetOptions {
    fn default() -> Self {
        Self {
            unit_tuples: DEFAULT_UNIT_TUPLES,
            seed: DEFAULT_JET_SEED,
        }
    }
}

/// Finite-difference steps per derivative order.
fn jet_step(order: usize, x: &Point, kind: NormKind) -> f64 {
    let scale = 1.0 + kind.norm(x.as_slice());
    match order {
        1 => 1e-5 * scale,
        2 => 1e-3 * scale,
        _ => 1e-2 * scale,
    }
}

fn central_jacobian(field: &VectorField, x: &Point, h: f64) -> DMatrix<f64> {
    if let Some(j) = &field.jacobian {
        return j(x);
    }
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for j in 0..n {
        let xj = x[j];
        probe[j] = xj + h;
        let fp = field.eval(&probe);
        probe[j] = xj - h;
        let fm = field.eval(&probe);
        probe[j] = xj;
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// Second derivative as slices: `t[l]` = ∂J/∂x_l, so D²X[h, k] = Σ_l k_l t[l] h.
fn second_derivative(field: &VectorField, x: &Point, kind: NormKind) -> Vec<DMatrix<f64>> {
    let h1 = jet_step(1, x, kind);
    let h2 = jet_step(2, x, kind);
    let mut probe = x.clone();
    (0..x.len())
        .map(|l| {
            let xl = x[l];
            probe[l] = xl + h2;
            let jp = central_jacobian(field, &probe, h1);
            probe[l] = xl - h2;
            let jm = central_jacobian(field, &probe, h1);
            probe[l] = xl;
            (jp - jm) / (2.0 * h2)
        })
        .collect()
}

/// Third derivative slices: `t[l][m]` = ∂²J/∂x_l∂x_m.
fn third_derivative(field: &VectorField, x: &Point, kind: NormKind) -> Vec<Vec<DMatrix<f64>>> {
    let h1 = jet_step(1, x, kind);
    let h3 = jet_step(3, x, kind);
    let n = x.len();
    let jac_at = |dl: (usize, f64), dm: (usize, f64)| {
        let mut p = x.clone();
        p[dl.0] += dl.1;
        p[dm.0] += dm.1;
        central_jacobian(field, &p, h1)
    };
    let mut out = vec![Vec::<DMatrix<f64>>::with_capacity(n); n];
    for l in 0..n {
        for m in 0..n {
            let t = if m < l {
                out[m][l].clone()
            } else {
                (jac_at((l, h3), (m, h3)) - jac_at((l, h3), (m, -h3)) - jac_at((l, -h3), (m, h3))
                    + jac_at((l, -h3), (m, -h3)))
                    / (4.0 * h3 * h3)
            };
            out[l].push(t);
        }
    }
    out
}

fn random_unit(n: usize, kind: NormKind, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v = match kind {
        NormKind::Euclidean => DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng))),
        NormKind::Sup => DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..=1.0))),
        NormKind::L1 => DVector::from_iterator(
            n,
            (0..n).map(|_| {
                let e: f64 = Exp1.sample(rng);
                if rng.random_bool(0.5) {
                    e
                } else {
                    -e
                }
            }),
        ),
    };
    let norm = kind.norm(v.as_slice());
    if norm > 0.0 {
        v / norm
    } else {
        let mut e = DVector::zeros(n);
        e[0] = 1.0;
        e
    }
}

/// Norm of a symmetric multilinear map given by its matrix slices.
///
/// Random unit tuples seed an alternating ascent in which each slot is
/// maximized exactly (the map is linear in one slot with the others fixed).
enum Multilinear<'a> {
    Bilinear(&'a [DMatrix<f64>]),
    Trilinear(&'a [Vec<DMatrix<f64>>]),
}

impl Multilinear<'_> {
    fn arity(&self) -> usize {
        match self {
            Multilinear::Bilinear(_) => 2,
            Multilinear::Trilinear(_) => 3,
        }
    }

    /// Matrix of the map as a function of slot `slot`, others fixed.
    fn slot_matrix(&self, args: &[DVector<f64>], slot: usize, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        match self {
            Multilinear::Bilinear(t) => {
                // B(h, k) = Σ_l k_l t[l] h
                if slot == 0 {
                    for (l, tl) in t.iter().enumerate() {
                        m += tl * args[1][l];
                    }
                } else {
                    for (l, tl) in t.iter().enumerate() {
                        m.set_column(l, &(tl * &args[0]));
                    }
                }
            }
            Multilinear::Trilinear(t) => {
                // C(h, k, w) = Σ_{l,m} k_l w_m t[l][m] h
                match slot {
                    0 => {
                        for (l, row) in t.iter().enumerate() {
                            for (mm, tlm) in row.iter().enumerate() {
                                m += tlm * (args[1][l] * args[2][mm]);
                            }
                        }
                    }
                    1 => {
                        for (l, row) in t.iter().enumerate() {
                            let mut col = DVector::zeros(n);
                            for (mm, tlm) in row.iter().enumerate() {
                                col += (tlm * &args[0]) * args[2][mm];
                            }
                            m.set_column(l, &col);
                        }
                    }
                    _ => {
                        for mm in 0..n {
                            let mut col = DVector::zeros(n);
                            for (l, row) in t.iter().enumerate() {
                                col += (&row[mm] * &args[0]) * args[1][l];
                            }
                            m.set_column(mm, &col);
                        }
                    }
                }
            }
        }
        m
    }

    fn value(&self, args: &[DVector<f64>], n: usize, kind: NormKind) -> f64 {
        let m = self.slot_matrix(args, 0, n);
        kind.norm((m * &args[0]).as_slice())
    }

    fn norm(&self, n: usize, kind: NormKind, opts: &JetOptions) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let arity = self.arity();
        let mut starts: Vec<(f64, Vec<DVector<f64>>)> = (0..opts.unit_tuples.max(1))
            .map(|_| {
                let args: Vec<_> = (0..arity).map(|_| random_unit(n, kind, &mut rng)).collect();
                (self.value(&args, n, kind), args)
            })
            .collect();
        starts.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best = starts.first().map(|s| s.0).unwrap_or(0.0);
        for (mut value, mut args) in starts.into_iter().take(4) {
            for _ in 0..50 {
                let before = value;
                for slot in 0..arity {
                    let m = self.slot_matrix(&args, slot, n);
                    let (v, arg) = operator_norm_with_argmax(&m, kind);
                    if v > value {
                        value = v;
                        args[slot] = arg;
                    }
                }
                if value - before <= 1e-13 * (1.0 + value) {
                    break;
                }
            }
            best = best.max(value);
        }
        best
    }
}

/// Σ_{j ≤ s} ‖D^j X(x)‖ in the norm of the field's chart.
pub fn eval_jet_norm(field: &VectorField, x: &Point, s: usize) -> Result<f64> {
    eval_jet_norm_with(field, x, s, &JetOptions::default())
}

pub fn eval_jet_norm_with(field: &VectorField, x: &Point, s: usize, opts: &JetOptions) -> Result<f64> {
    if s > MAX_NUMERIC_ORDER {
        return Err(Error::OrderTooHigh { order: s });
    }
    field.check_domain(x)?;
    let kind = field.domain().norm_kind;
    let n = x.len();
    let mut total = kind.norm(field.eval(x).as_slice());
    if s >= 1 {
        let j = central_jacobian(field, x, jet_step(1, x, kind));
        total += operator_norm(&j, kind);
    }
    if s >= 2 {
        let t2 = second_derivative(field, x, kind);
        total += Multilinear::Bilinear(&t2).norm(n, kind, opts);
    }
    if s >= 3 {
        let t3 = third_derivative(field, x, kind);
        total += Multilinear::Trilinear(&t3).norm(n, kind, opts);
    }
    Ok(total)
}

/// Deterministic sample of `count` points in `region` (the center first).
pub fn sample_points(region: &Ball, count: usize, seed: u64) -> Result<Vec<Point>> {
    if region.is_global() {
        return Err(Error::InvalidArgument("cannot sample an unbounded region".into()));
    }
    let n = region.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(count.max(1));
    pts.push(region.center.clone());
    while pts.len() < count.max(1) {
        let offset = match region.norm_kind {
            // the sup ball is a cube: independent coordinates
            NormKind::Sup => DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..=1.0))),
            kind => {
                let dir = random_unit(n, kind, &mut rng);
                let u: f64 = rng.random_range(0.0..1.0);
                dir * u.powf(1.0 / n as f64)
            }
        };
        pts.push(&region.center + offset * region.radius);
    }
    Ok(pts)
}

/// Sampled LB(s) bound: the largest jet norm over members and sample points,
/// inflated by the safety factor. Declared family bounds pass through.
pub fn estimate_lb_bound(family: &FieldFamily, region: &Ball, s: usize, samples: usize) -> Result<LbRecord> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    if let Some(k) = family.declared_bound() {
        check_region(family, region)?;
        let mut rec = LbRecord::declared(s, k, region.clone())?;
        rec.samples = 0;
        return Ok(rec);
    }
    let points = sample_points(region, samples, DEFAULT_LB_SEED)?;
    estimate_lb_bound_at(family, region, s, &points, DEFAULT_SAFETY)
}

fn check_region(family: &FieldFamily, region: &Ball) -> Result<()> {
    if !region.is_inside(family.common_domain()) {
        return Err(Error::OutOfDomain {
            label: "common domain".into(),
        });
    }
    Ok(())
}

/// Same as [`estimate_lb_bound`] over explicitly given points.
pub fn estimate_lb_bound_at(
    family: &FieldFamily,
    region: &Ball,
    s: usize,
    points: &[Point],
    safety: f64,
) -> Result<LbRecord> {
    check_region(family, region)?;
    if s > MAX_NUMERIC_ORDER {
        return Err(Error::OrderTooHigh { order: s });
    }
    let opts = JetOptions::default();
    let maxima = points
        .par_iter()
        .map(|p| {
            family
                .members()
                .iter()
                .map(|m| eval_jet_norm_with(m, p, s, &opts))
                .try_fold(0.0_f64, |acc, v| v.map(|v| acc.max(v)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let sampled_max = maxima.into_iter().fold(0.0_f64, f64::max);
    // a family of identically zero fields still needs a positive k
    let bound_k = (sampled_max * safety).max(f64::MIN_POSITIVE);
    Ok(LbRecord {
        order_s: s,
        bound_k,
        region: region.clone(),
        method: LbMethod::Sampled,
        sampled_max,
        samples: points.len(),
        safety,
    })
}
