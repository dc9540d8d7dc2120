//! Characteristic distributions, lower trivializations, slices through the
//! orbit, Monte-Carlo orbit clouds and accessibility verdicts.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::{bracket_chain, enlarge_field, EnlargedField, FlowWord};
use crate::compose::{composition_guard, compose_flows, d_psi};
use crate::error::{Error, Result};
use crate::fields::{FieldFamily, LbRecord, VectorField};
use crate::flow::{check_existence_with_horizon, flow_in_region, flow_single, FlowConfig};
use crate::linalg::{columns, condition_number, least_squares, numerical_rank};
use crate::space::{L1Coefficients, Point};

/// Condition-number ceiling for the finite shadow of an unconditional basis.
pub const MAX_BASIS_CONDITION: f64 = 1e6;

/// Spanning vectors Y(x) of a distribution at one point.
#[derive(Debug, Clone)]
pub struct DistributionBasis {
    pub anchor: Point,
    pub vectors: Vec<Point>,
    pub source_labels: Vec<String>,
    pub rank: usize,
}

/// Least-norm coefficients of a vector in a spanning set.
#[derive(Debug, Clone)]
pub struct Representation {
    pub coefficients: L1Coefficients,
    pub residual: f64,
}

impl DistributionBasis {
    pub fn new(anchor: Point, vectors: Vec<Point>, source_labels: Vec<String>) -> Self {
        let rank = numerical_rank(&columns(&vectors, anchor.len()));
        Self {
            anchor,
            vectors,
            source_labels,
            rank,
        }
    }

    pub fn dimension(&self) -> usize {
        self.anchor.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        columns(&self.vectors, self.dimension())
    }

    /// Least-norm l1 coefficients reconstructing `v`, indexed like `vectors`.
    pub fn solve(&self, v: &Point) -> Representation {
        let ls = least_squares(&self.matrix(), v);
        Representation {
            coefficients: L1Coefficients::from_dense(ls.coefficients.as_slice()),
            residual: ls.residual,
        }
    }

    /// Distance of `v` from the span relative to ‖v‖ (0 for v = 0).
    pub fn relative_residual(&self, v: &Point) -> f64 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        least_squares(&self.matrix(), v).residual / norm
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.matrix())
    }

    /// Independent vectors with a well-conditioned coefficient solve.
    pub fn unconditional_shadow(&self) -> bool {
        self.rank == self.vectors.len() && self.condition_number() < MAX_BASIS_CONDITION
    }
}

/// 𝒟¹ ⊆ 𝒟² ⊆ … at one point.
#[derive(Debug, Clone)]
pub struct BracketChain {
    pub anchor: Point,
    pub generations: Vec<DistributionBasis>,
    pub rank_profile: Vec<usize>,
    /// Every field of the chain, members first.
    pub fields: Vec<VectorField>,
    pub generation_of: Vec<usize>,
}

impl BracketChain {
    pub fn new(anchor: Point, generations: Vec<DistributionBasis>, fields: Vec<VectorField>, generation_of: Vec<usize>) -> Self {
        let rank_profile = generations.iter().map(|g| g.rank).collect();
        Self {
            anchor,
            generations,
            rank_profile,
            fields,
            generation_of,
        }
    }

    pub fn final_rank(&self) -> usize {
        self.rank_profile.last().copied().unwrap_or(0)
    }

    /// First generation whose rank equals `n`.
    pub fn saturation(&self, n: usize) -> Option<usize> {
        self.rank_profile.iter().position(|&r| r == n).map(|i| i + 1)
    }
}

/// Values of the members (and of any given enlarged fields) at `x`.
pub fn distribution_at(family: &FieldFamily, x: &Point, include_enlarged: &[EnlargedField]) -> Result<DistributionBasis> {
    let mut vectors = Vec::with_capacity(family.len() + include_enlarged.len());
    let mut labels = Vec::with_capacity(vectors.capacity());
    for m in family.members() {
        vectors.push(m.try_eval(x)?);
        labels.push(m.label().to_string());
    }
    for e in include_enlarged {
        e.field.check_domain(x)?;
        vectors.push(e.try_eval(x)?);
        labels.push(e.field.label().to_string());
    }
    Ok(DistributionBasis::new(x.clone(), vectors, labels))
}

/// Lower trivialization Ψ(w, y) = Σ w_α X_α(y).
pub fn trivialization_eval(basis: &DistributionBasis, family: &FieldFamily, w: &L1Coefficients, y: &Point) -> Result<Point> {
    if let Some(i) = w.max_index() {
        if i >= basis.vectors.len().min(family.len()) {
            return Err(Error::IndexOutOfFamily {
                index: i,
                size: family.len(),
            });
        }
    }
    family.space().check_point(y)?;
    let mut out = Point::zeros(y.len());
    for &(i, v) in w.entries() {
        let field = &family.members()[i];
        out += field.try_eval(y)? * v;
    }
    Ok(out)
}

/// One enlargement level: (φ^{X_j}_{±s})_* X_i for all members i, j.
pub fn one_level_enlargement(family: &FieldFamily, lb: &LbRecord, s: f64) -> Result<Vec<EnlargedField>> {
    let m = family.len();
    let mut out = Vec::with_capacity(2 * m * m);
    for i in 0..m {
        for j in 0..m {
            for t in [s, -s] {
                out.push(enlarge_field(family, &FlowWord::new(vec![(j, t)])?, i, 1.0, lb)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SliceResult {
    pub axes: Vec<usize>,
    pub rho: f64,
    /// r/k at the center.
    pub guard_radius: f64,
    pub params: Vec<Vec<f64>>,
    pub points: Vec<Point>,
    /// Grid parameters with ‖w‖₁ ≥ r/k (evaluated with the guard overridden).
    pub beyond_guard: Vec<bool>,
    pub jacobian_rank: usize,
}

/// Θ(w) = φ^ξ_{Σ w_a e_{axes[a]}}(x) over the grid |w_a| ≤ rho.
#[allow(clippy::too_many_arguments)]
pub fn slice(
    family: &FieldFamily,
    lb: &LbRecord,
    x: &Point,
    rho: f64,
    grid_per_axis: usize,
    axes: &[usize],
    cfg: &FlowConfig,
) -> Result<SliceResult> {
    if axes.is_empty() || axes.len() > 3 {
        return Err(Error::InvalidArgument("slice needs 1 to 3 axes".into()));
    }
    for &a in axes {
        family.member(a)?;
    }
    let one_axis = L1Coefficients::finite([(axes[0], rho)])?;
    let cert = composition_guard(family, lb, &one_axis, x)?;
    let guard_radius = cert.time_bound();
    if !(rho < guard_radius) && !cfg.allow_unsafe {
        return Err(Error::GuardViolated {
            detail: format!("slice radius {rho} is not below r/k = {guard_radius}"),
        });
    }
    let g = grid_per_axis.max(1);
    let ticks: Vec<f64> = if g == 1 {
        vec![0.0]
    } else {
        (0..g).map(|i| -rho + 2.0 * rho * i as f64 / (g - 1) as f64).collect()
    };
    let total = g.pow(axes.len() as u32);
    let params: Vec<Vec<f64>> = (0..total)
        .map(|flat| {
            let mut rem = flat;
            axes.iter()
                .map(|_| {
                    let t = ticks[rem % g];
                    rem /= g;
                    t
                })
                .collect()
        })
        .collect();
    let evaluated: Vec<(Point, bool)> = params
        .par_iter()
        .map(|w| {
            let mut entries: Vec<(usize, f64)> = axes.iter().copied().zip(w.iter().copied()).collect();
            entries.sort_by_key(|e| e.0);
            let tau = L1Coefficients::finite(entries)?;
            let beyond = w.iter().map(|v| v.abs()).sum::<f64>() >= guard_radius;
            let c = FlowConfig {
                allow_unsafe: cfg.allow_unsafe || beyond,
                ..*cfg
            };
            Ok((compose_flows(family, lb, &tau, x, &c)?.endpoint, beyond))
        })
        .collect::<Result<_>>()?;
    let mut jac_cols = Vec::with_capacity(axes.len());
    for &a in axes {
        jac_cols.push(d_psi(family, lb, x, &L1Coefficients::zero(), &L1Coefficients::unit(a), cfg)?);
    }
    let (points, beyond_guard) = evaluated.into_iter().unzip();
    Ok(SliceResult {
        axes: axes.to_vec(),
        rho,
        guard_radius,
        params,
        points,
        beyond_guard,
        jacobian_rank: numerical_rank(&columns(&jac_cols, x.len())),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitPoint {
    pub point: Point,
    /// Letters actually applied (member index, signed duration).
    pub word: Vec<(usize, f64)>,
    /// The generated word was cut short at a guard failure or a domain exit.
    pub truncated: bool,
    /// Some letter ran past its existence guard under the unsafe override.
    pub unsafe_override: bool,
}

#[derive(Debug, Clone)]
pub struct OrbitSample {
    pub seed_point: Point,
    pub rng_seed: u64,
    pub d_max: f64,
    pub labels: Vec<String>,
    pub cloud: Vec<OrbitPoint>,
    pub budget_used: usize,
}

impl OrbitSample {
    pub fn truncated_count(&self) -> usize {
        self.cloud.iter().filter(|p| p.truncated).count()
    }

    pub fn unsafe_count(&self) -> usize {
        self.cloud.iter().filter(|p| p.unsafe_override).count()
    }

    /// Word of a cloud point with field labels.
    pub fn labeled_word(&self, i: usize) -> Vec<(String, f64)> {
        self.cloud[i]
            .word
            .iter()
            .map(|&(j, t)| (self.labels[j].clone(), t))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    pub tol: f64,
    /// Overrides the default duration scale 0.5·r/k at the seed.
    pub d_max: Option<f64>,
    /// Word lengths are drawn uniformly from min_word_len..=max_word_len.
    pub min_word_len: usize,
    /// Integrate letters that fail their guard instead of truncating the word.
    pub allow_unsafe: bool,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            tol: crate::flow::DEFAULT_TOL,
            d_max: None,
            min_word_len: 1,
            allow_unsafe: false,
        }
    }
}

/// Random words from the seed; one cloud point per word. Each letter is checked
/// against the existence guard at its starting point; a failing letter or a domain
/// exit ends the word at the last valid point.
pub fn orbit_sample(
    family: &FieldFamily,
    lb: &LbRecord,
    x: &Point,
    budget: usize,
    max_word_len: usize,
    rng_seed: u64,
    opts: &OrbitOptions,
) -> Result<OrbitSample> {
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be >= 1".into()));
    }
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    let seed_cert = composition_guard(family, lb, &L1Coefficients::zero(), x)?;
    let d_max = opts.d_max.unwrap_or(0.5 * seed_cert.margin);
    if !(d_max.is_finite() && d_max >= 0.0) {
        return Err(Error::InvalidArgument(format!("duration scale {d_max} is not usable")));
    }
    let min_len = opts.min_word_len.clamp(1, max_word_len.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let words: Vec<Vec<(usize, f64)>> = (0..budget)
        .map(|_| {
            let len = if max_word_len == 0 { 0 } else { rng.random_range(min_len..=max_word_len) };
            (0..len)
                .map(|_| {
                    let i = rng.random_range(0..family.len());
                    let t = if d_max > 0.0 { rng.random_range(-d_max..=d_max) } else { 0.0 };
                    (i, t)
                })
                .collect()
        })
        .collect();
    let cfg = FlowConfig::with_tol(opts.tol).recording(false);
    let cloud: Vec<OrbitPoint> = words
        .par_iter()
        .map(|word| run_word(family, lb, x, word, &cfg, opts.allow_unsafe))
        .collect();
    Ok(OrbitSample {
        seed_point: x.clone(),
        rng_seed,
        d_max,
        labels: family.members().iter().map(|m| m.label().to_string()).collect(),
        budget_used: cloud.len(),
        cloud,
    })
}

fn run_word(
    family: &FieldFamily,
    lb: &LbRecord,
    x: &Point,
    word: &[(usize, f64)],
    cfg: &FlowConfig,
    allow_unsafe: bool,
) -> OrbitPoint {
    let mut out = OrbitPoint {
        point: x.clone(),
        word: Vec::with_capacity(word.len()),
        truncated: false,
        unsafe_override: false,
    };
    for &(i, t) in word {
        let admissible = check_existence_with_horizon(family, lb, 1.0, &out.point, t.abs(), f64::INFINITY)
            .map(|c| c.satisfied)
            .unwrap_or(false);
        if !admissible {
            if !allow_unsafe {
                out.truncated = true;
                return out;
            }
            out.unsafe_override = true;
        }
        match flow_in_region(&family.members()[i], &out.point, t, &lb.region, cfg) {
            Ok(r) => {
                out.point = r.endpoint;
                out.word.push((i, t));
            }
            Err(_) => {
                out.truncated = true;
                return out;
            }
        }
    }
    out
}

/// Replays a stored word from the seed.
pub fn replay_word(family: &FieldFamily, x: &Point, word: &[(usize, f64)], tol: f64) -> Result<Point> {
    let cfg = FlowConfig::with_tol(tol).recording(false);
    let mut p = x.clone();
    for &(i, t) in word {
        p = flow_single(family.member(i)?, &p, t, &cfg)?.endpoint;
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    ExactlyControllable,
    ApproximatelyControllable,
    RankDeficient,
}

impl VerdictKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExactlyControllable => "exactly_controllable",
            Self::ApproximatelyControllable => "approximately_controllable",
            Self::RankDeficient => "rank_deficient",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub chart_dimension: usize,
    pub rank_profile: Vec<usize>,
    /// Generation at which the rank reached the chart dimension.
    pub saturation_k: Option<usize>,
    pub limiting_rank: usize,
    /// (member count N, final chain rank) per truncation level, l1 charts only.
    pub truncation_levels: Vec<(usize, usize)>,
    /// Mean distance of the coordinate axes from the largest level's span.
    pub density_residual: Option<f64>,
}

/// Saturation of the bracket chain decides exact controllability on the chart.
/// On l1 truncations a chain whose rank grows strictly across member counts
/// N, N + 5, N + 10 (N = count − 10) is read as approximate controllability.
pub fn accessibility_verdict(family: &FieldFamily, lb: &LbRecord, x: &Point, k_max: usize) -> Result<Verdict> {
    family.space().check_point(x)?;
    if !lb.region.contains_with_slack(x, 1e-12) {
        return Err(Error::OutOfDomain {
            label: "lb region".into(),
        });
    }
    let n = family.dimension();
    let chain = bracket_chain(family, x, k_max)?;
    let mut verdict = Verdict {
        kind: VerdictKind::RankDeficient,
        chart_dimension: n,
        rank_profile: chain.rank_profile.clone(),
        saturation_k: chain.saturation(n),
        limiting_rank: chain.final_rank(),
        truncation_levels: Vec::new(),
        density_residual: None,
    };
    if verdict.saturation_k.is_some() {
        verdict.kind = VerdictKind::ExactlyControllable;
        return Ok(verdict);
    }
    if family.space().truncation_of_l1() {
        let count = family.len();
        let base = count.saturating_sub(10).max(1);
        let mut levels: Vec<usize> = [base, base + 5, base + 10].iter().map(|&l| l.min(count)).collect();
        levels.dedup();
        let mut last_chain = None;
        for &level in &levels {
            let idx: Vec<usize> = (0..level).collect();
            let sub = family.subfamily(&idx)?;
            let c = bracket_chain(&sub, x, k_max)?;
            verdict.truncation_levels.push((level, c.final_rank()));
            last_chain = Some(c);
        }
        let growing = levels.len() >= 2 && verdict.truncation_levels.windows(2).all(|w| w[1].1 > w[0].1);
        if let Some(c) = last_chain {
            let basis = c.generations.last().expect("at least one generation");
            let mean = (0..n)
                .map(|j| basis.relative_residual(&DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 })))
                .sum::<f64>()
                / n as f64;
            verdict.density_residual = Some(mean);
        }
        if growing {
            verdict.kind = VerdictKind::ApproximatelyControllable;
        }
    }
    Ok(verdict)
}

#[derive(Debug, Clone)]
pub struct InvarianceCheck {
    pub source: Point,
    pub target: Point,
    /// Relative distance of each pushed vector from the span at the target.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub rank_source: usize,
    pub rank_target: usize,
}

/// Pushes the distribution at `x` by Dφ^{X_i}_t(x) and measures how far the pushed
/// vectors leave the distribution at φ^{X_i}_t(x). Invariance means residual 0.
pub fn invariance_residual(
    family: &FieldFamily,
    x: &Point,
    field_index: usize,
    t: f64,
    enlarged: &[EnlargedField],
    tol: f64,
) -> Result<InvarianceCheck> {
    let cfg = FlowConfig::with_tol(tol).recording(false).variational(true);
    let r = flow_single(family.member(field_index)?, x, t, &cfg)?;
    let jac = r.final_variational.expect("variational requested");
    let source = distribution_at(family, x, enlarged)?;
    let target = distribution_at(family, &r.endpoint, enlarged)?;
    let residuals: Vec<f64> = source
        .vectors
        .iter()
        .map(|v| target.relative_residual(&(&jac * v)))
        .collect();
    Ok(InvarianceCheck {
        source: x.clone(),
        target: r.endpoint,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
        rank_source: source.rank,
        rank_target: target.rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, AffineLinear};
    use crate::fields::estimate_lb_bound;
    use crate::space::Ball;

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    fn lb_for(fam: &FieldFamily, center: Point, radius: f64) -> LbRecord {
        let region = Ball::in_space(fam.space(), center, radius).unwrap();
        estimate_lb_bound(fam, &region, 2, 64).unwrap()
    }

    #[test]
    fn grushin_distribution_ranks() {
        let g = catalog::grushin();
        assert_eq!(distribution_at(&g, &pt(&[0.0, 1.0]), &[]).unwrap().rank, 1);
        assert_eq!(distribution_at(&g, &pt(&[1.0, 0.0]), &[]).unwrap().rank, 2);
        let b = distribution_at(&g, &pt(&[1.0, 0.0]), &[]).unwrap();
        let rep = b.solve(&pt(&[2.0, -3.0]));
        assert!(rep.residual < 1e-12);
        assert!(b.unconditional_shadow());
    }

    #[test]
    fn trivialization_basics() {
        let h = catalog::heisenberg();
        let x = pt(&[0.5, 0.0, 0.0]);
        let b = distribution_at(&h, &x, &[]).unwrap();
        let v = trivialization_eval(&b, &h, &L1Coefficients::unit(1), &x).unwrap();
        assert_eq!(v, h.members()[1].eval(&x));
        assert_eq!(trivialization_eval(&b, &h, &L1Coefficients::zero(), &x).unwrap(), Point::zeros(3));
        let c = catalog::commuting_constants(3, 2).unwrap();
        let b = distribution_at(&c, &Point::zeros(3), &[]).unwrap();
        let w = L1Coefficients::finite([(0, 2.0), (1, -1.0)]).unwrap();
        for y in [pt(&[0.0, 0.0, 0.0]), pt(&[5.0, 1.0, -2.0])] {
            assert_eq!(trivialization_eval(&b, &c, &w, &y).unwrap(), pt(&[2.0, -1.0, 0.0]));
        }
    }

    #[test]
    fn flat_and_curved_slices() {
        let c = catalog::commuting_constants(3, 2).unwrap();
        let lb = lb_for(&c, Point::zeros(3), 4.0);
        let s = slice(&c, &lb, &Point::zeros(3), 0.5, 3, &[0, 1], &FlowConfig::default()).unwrap();
        assert_eq!(s.jacobian_rank, 2);
        for (w, p) in s.params.iter().zip(&s.points) {
            assert!((p - pt(&[w[0], w[1], 0.0])).amax() < 1e-12);
        }
        let h = catalog::heisenberg();
        let lb = lb_for(&h, Point::zeros(3), 5.0);
        let s = slice(&h, &lb, &Point::zeros(3), 0.3, 3, &[0, 1], &FlowConfig::default()).unwrap();
        assert_eq!(s.jacobian_rank, 2);
        for (w, p) in s.params.iter().zip(&s.points) {
            assert!((p - pt(&[w[0], w[1], w[0] * w[1]])).amax() < 1e-8);
        }
        assert!(s.beyond_guard.iter().any(|&b| b));
        assert!(slice(&h, &lb, &Point::zeros(3), 1.0, 3, &[0, 1], &FlowConfig::default()).is_err());
    }

    #[test]
    fn orbit_sampling_basics() {
        let c = catalog::commuting_constants(3, 2).unwrap();
        let lb = lb_for(&c, Point::zeros(3), 4.0);
        let one = orbit_sample(&c, &lb, &Point::zeros(3), 1, 0, 7, &OrbitOptions::default()).unwrap();
        assert_eq!(one.cloud.len(), 1);
        assert_eq!(one.cloud[0].point, Point::zeros(3));
        let s = orbit_sample(&c, &lb, &Point::zeros(3), 300, 6, 7, &OrbitOptions::default()).unwrap();
        assert!(s.cloud.iter().all(|p| p.point[2].abs() < 1e-9));
        let again = orbit_sample(&c, &lb, &Point::zeros(3), 300, 6, 7, &OrbitOptions::default()).unwrap();
        assert_eq!(s.cloud, again.cloud);
        for p in s.cloud.iter().step_by(20) {
            let q = replay_word(&c, &Point::zeros(3), &p.word, 1e-9).unwrap();
            assert!((q - &p.point).amax() < 1e-8);
        }
    }

    #[test]
    fn verdicts() {
        let h = catalog::heisenberg();
        let lb = lb_for(&h, Point::zeros(3), 4.0);
        let v = accessibility_verdict(&h, &lb, &Point::zeros(3), 4).unwrap();
        assert_eq!(v.kind, VerdictKind::ExactlyControllable);
        assert_eq!(v.saturation_k, Some(2));
        let c = catalog::commuting_constants(3, 2).unwrap();
        let lb = lb_for(&c, Point::zeros(3), 4.0);
        let v = accessibility_verdict(&c, &lb, &Point::zeros(3), 3).unwrap();
        assert_eq!(v.kind, VerdictKind::RankDeficient);
        assert_eq!(v.limiting_rank, 2);
        let a = catalog::affine_l1(32, 24, 0.5, AffineLinear::Identity).unwrap();
        let lb = lb_for(&a, Point::zeros(32), 1.0);
        let x = Point::from_fn(32, |i, _| 0.01 * (i as f64 + 1.0) / 32.0);
        let v = accessibility_verdict(&a, &lb, &x, 2).unwrap();
        assert_eq!(v.kind, VerdictKind::ApproximatelyControllable, "{:?}", v.truncation_levels);
    }

    #[test]
    fn invariance_detects_non_integrable_distribution() {
        let c = catalog::commuting_constants(3, 2).unwrap();
        let r = invariance_residual(&c, &pt(&[0.2, 0.1, 0.0]), 0, 0.3, &[], 1e-10).unwrap();
        assert!(r.max_residual <= 1e-5);
        let g = catalog::grushin();
        let r = invariance_residual(&g, &pt(&[0.5, 0.0]), 0, -0.5, &[], 1e-10).unwrap();
        assert!(r.max_residual > 0.1);
        let h = catalog::heisenberg();
        let lb = lb_for(&h, Point::zeros(3), 4.0);
        let level = one_level_enlargement(&h, &lb, 0.5).unwrap();
        let r = invariance_residual(&h, &pt(&[0.1, 0.2, 0.0]), 1, 0.3, &level, 1e-10).unwrap();
        assert!(r.max_residual <= 1e-5);
    }
}
