//! Controlled flows of Z(t, x, u) = Σ u_α(t) X_α(x).
//!
//! Controls are piecewise constant with l1 coefficient vectors on each piece.
//! Integration uses an embedded Dormand–Prince 5(4) pair and restarts at every
//! piece boundary, so no step ever straddles a discontinuity of the control.
//! The variational matrix D₂Φ is co-integrated on request.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::{FieldFamily, LbRecord, VectorField};
use crate::space::{norm1, Ball, L1Coefficients, Point};

pub const DEFAULT_TOL: f64 = 1e-9;
const MAX_STEPS: usize = 2_000_000;
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlPiece {
    pub start: f64,
    pub end: f64,
    pub coeffs: L1Coefficients,
}

/// Piecewise-constant bounded control u: [start, end] → R^A.
/// Gaps between pieces, and all times outside the interval, carry the zero control.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    start: f64,
    end: f64,
    pieces: Vec<ControlPiece>,
}

impl Control {
    pub fn new(start: f64, end: f64, pieces: Vec<ControlPiece>) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(Error::InvalidArgument(format!("bad control interval [{start}, {end}]")));
        }
        let mut last = start;
        for p in &pieces {
            if !(p.start < p.end) {
                return Err(Error::InvalidArgument(format!("empty control piece [{}, {}]", p.start, p.end)));
            }
            if p.start < last || p.end > end {
                return Err(Error::InvalidArgument(format!(
                    "control piece [{}, {}] overlaps or leaves [{start}, {end}]",
                    p.start, p.end
                )));
            }
            if p.coeffs.tail_bound() > 0.0 {
                return Err(Error::InvalidArgument(
                    "control coefficients must be finitely supported (tail bound 0)".into(),
                ));
            }
            last = p.end;
        }
        Ok(Self { start, end, pieces })
    }

    pub fn constant(start: f64, end: f64, coeffs: L1Coefficients) -> Result<Self> {
        if start == end {
            return Self::new(start, end, Vec::new());
        }
        Self::new(start, end, vec![ControlPiece { start, end, coeffs }])
    }

    pub fn zero(start: f64, end: f64) -> Result<Self> {
        Self::new(start, end, Vec::new())
    }

    /// Consecutive pieces of the given durations starting at `start`.
    pub fn sequence(start: f64, pieces: impl IntoIterator<Item = (f64, L1Coefficients)>) -> Result<Self> {
        let mut t = start;
        let mut out = Vec::new();
        for (len, coeffs) in pieces {
            if len > 0.0 {
                out.push(ControlPiece {
                    start: t,
                    end: t + len,
                    coeffs,
                });
                t += len;
            }
        }
        Self::new(start, t, out)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn pieces(&self) -> &[ControlPiece] {
        &self.pieces
    }

    /// ‖u‖_∞ = max over pieces of ‖u(t)‖₁.
    pub fn norm_inf(&self) -> f64 {
        self.pieces.iter().map(|p| norm1(&p.coeffs)).fold(0.0, f64::max)
    }

    /// ‖u‖₁ = ∫ ‖u(t)‖₁ dt.
    pub fn norm_1(&self) -> f64 {
        self.pieces.iter().map(|p| norm1(&p.coeffs) * (p.end - p.start)).sum()
    }

    /// Coefficients active at `t` (pieces are half-open [start, end)).
    pub fn at(&self, t: f64) -> Option<&L1Coefficients> {
        self.pieces.iter().find(|p| p.start <= t && t < p.end).map(|p| &p.coeffs)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.pieces.iter().filter_map(|p| p.coeffs.max_index()).max()
    }
}

/// The quantities of the existence guard T₀ < min(r/(k c), T′).
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceCertificate {
    pub r: f64,
    pub k: f64,
    pub c: f64,
    pub t_prime: f64,
    pub t0: f64,
    pub satisfied: bool,
    pub margin: f64,
    /// Radius of B₀ = B(x₀, r − k c T₀).
    pub b0_radius: f64,
}

impl ExistenceCertificate {
    /// min(r/(k c), T′) with r/(k c) = +∞ when c = 0.
    pub fn time_bound(&self) -> f64 {
        let kc = self.k * self.c;
        let ratio = if kc == 0.0 { f64::INFINITY } else { self.r / kc };
        ratio.min(self.t_prime)
    }
}

/// Pure guard evaluation; `T′` is taken as +∞ because controls are extended by
/// zero outside their interval.
pub fn check_existence(
    family: &FieldFamily,
    lb: &LbRecord,
    u: &Control,
    x0: &Point,
    t0: f64,
) -> Result<ExistenceCertificate> {
    check_existence_with_horizon(family, lb, u.norm_inf(), x0, t0, f64::INFINITY)
}

pub fn check_existence_with_horizon(
    family: &FieldFamily,
    lb: &LbRecord,
    c: f64,
    x0: &Point,
    t0: f64,
    t_prime: f64,
) -> Result<ExistenceCertificate> {
    family.space().check_point(x0)?;
    if !lb.region.is_inside(family.common_domain()) {
        return Err(Error::OutOfDomain {
            label: "common domain".into(),
        });
    }
    let r = if lb.region.is_global() {
        f64::INFINITY
    } else {
        (lb.region.radius - lb.region.distance_from_center(x0)) / 2.0
    };
    if !(r > 0.0) {
        return Err(Error::DomainTooSmall);
    }
    let mut cert = ExistenceCertificate {
        r,
        k: lb.bound_k,
        c,
        t_prime,
        t0,
        satisfied: false,
        margin: 0.0,
        b0_radius: r - lb.bound_k * c * t0,
    };
    cert.margin = cert.time_bound() - t0;
    cert.satisfied = cert.margin > 0.0;
    Ok(cert)
}

#[derive(Debug, Clone, Copy)]
pub struct FlowConfig {
    /// Local error target per unit time, relative to 1 + |x|.
    pub tol: f64,
    pub with_variational: bool,
    /// Integrate even when the existence guard fails (recorded in the result).
    pub allow_unsafe: bool,
    pub record_trajectory: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            with_variational: false,
            allow_unsafe: false,
            record_trajectory: true,
        }
    }
}

impl FlowConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn variational(mut self, on: bool) -> Self {
        self.with_variational = on;
        self
    }

    pub fn unsafe_override(mut self, on: bool) -> Self {
        self.allow_unsafe = on;
        self
    }

    pub fn recording(mut self, on: bool) -> Self {
        self.record_trajectory = on;
        self
    }
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    /// Sample times, monotone in the direction of integration.
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub endpoint: Point,
    pub variational: Option<Vec<DMatrix<f64>>>,
    /// D₂Φ at the final time (present whenever the variational equations ran).
    pub final_variational: Option<DMatrix<f64>>,
    pub steps_taken: usize,
    pub rejected_steps: usize,
    /// Sum of accepted local error estimates on the state.
    pub est_local_error: f64,
    pub certificate: Option<ExistenceCertificate>,
    pub unsafe_override: bool,
}

/// Integrates ẋ = Σ u_α(t) X_α(x) from (t0, x0) over the signed `duration`.
pub fn flow_control(
    family: &FieldFamily,
    lb: &LbRecord,
    u: &Control,
    x0: &Point,
    t0: f64,
    duration: f64,
    cfg: &FlowConfig,
) -> Result<FlowResult> {
    family.space().check_point(x0)?;
    if let Some(i) = u.max_index() {
        family.member(i)?;
    }
    let guard = check_existence(family, lb, u, x0, duration.abs());
    let mut unsafe_override = false;
    let certificate = match guard {
        Ok(c) if c.satisfied => Some(c),
        Ok(c) => {
            if !cfg.allow_unsafe {
                return Err(Error::GuardViolated {
                    detail: format!(
                        "T0 = {} is not below min(r/(k c), T') = {} (r = {}, k = {}, c = {})",
                        c.t0,
                        c.time_bound(),
                        c.r,
                        c.k,
                        c.c
                    ),
                });
            }
            unsafe_override = true;
            Some(c)
        }
        Err(Error::DomainTooSmall) if cfg.allow_unsafe => {
            unsafe_override = true;
            None
        }
        Err(e) => return Err(e),
    };

    let t_end = t0 + duration;
    let (lo, hi) = if duration >= 0.0 { (t0, t_end) } else { (t_end, t0) };
    let mut cuts: Vec<f64> = u
        .pieces()
        .iter()
        .flat_map(|p| [p.start, p.end])
        .filter(|&t| t > lo && t < hi)
        .collect();
    cuts.push(t0);
    cuts.push(t_end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    if duration < 0.0 {
        cuts.reverse();
    }
    let segments: Vec<Segment> = cuts
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let terms = u
                .at(mid)
                .map(|c| {
                    c.entries()
                        .iter()
                        .map(|&(i, v)| (v, &family.members()[i]))
                        .collect()
                })
                .unwrap_or_default();
            Segment {
                t_from: w[0],
                t_to: w[1],
                terms,
            }
        })
        .collect();
    let mut result = integrate(&segments, t0, x0, &lb.region, cfg)?;
    result.certificate = certificate;
    result.unsafe_override = unsafe_override;
    Ok(result)
}

/// φ^X_t(x0); negative `t` integrates backward. Only the field's own domain is
/// enforced here (a single flow has no family guard).
pub fn flow_single(field: &VectorField, x0: &Point, t: f64, cfg: &FlowConfig) -> Result<FlowResult> {
    field.check_domain(x0)?;
    let seg = Segment {
        t_from: 0.0,
        t_to: t,
        terms: vec![(1.0, field)],
    };
    integrate(std::slice::from_ref(&seg), 0.0, x0, field.domain(), cfg)
}

/// φ^X_t(x0) confined to `region` instead of the field's own domain.
pub fn flow_in_region(field: &VectorField, x0: &Point, t: f64, region: &Ball, cfg: &FlowConfig) -> Result<FlowResult> {
    let seg = Segment {
        t_from: 0.0,
        t_to: t,
        terms: vec![(1.0, field)],
    };
    integrate(std::slice::from_ref(&seg), 0.0, x0, region, cfg)
}

/// One interval on which the control is constant.
pub(crate) struct Segment<'a> {
    pub t_from: f64,
    pub t_to: f64,
    pub terms: Vec<(f64, &'a VectorField)>,
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// difference between the 5th and embedded 4th order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Rhs<'a> {
    terms: &'a [(f64, &'a VectorField)],
    n: usize,
    with_var: bool,
}

impl Rhs<'_> {
    fn eval(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let x = y.rows(0, n).into_owned();
        let mut out = DVector::zeros(y.len());
        for &(c, f) in self.terms {
            let v = f.eval(&x);
            for i in 0..n {
                out[i] += c * v[i];
            }
        }
        if self.with_var {
            let mut jz = DMatrix::zeros(n, n);
            for &(c, f) in self.terms {
                jz += f.jacobian(&x) * c;
            }
            let v = DMatrix::from_column_slice(n, n, &y.as_slice()[n..]);
            let dv = jz * v;
            out.as_mut_slice()[n..].copy_from_slice(dv.as_slice());
        }
        out
    }
}

pub(crate) fn integrate(
    segments: &[Segment],
    t0: f64,
    x0: &Point,
    region: &Ball,
    cfg: &FlowConfig,
) -> Result<FlowResult> {
    let n = x0.len();
    if !region.contains_with_slack(x0, DOMAIN_SLACK) {
        return Err(Error::LeftDomain { t: t0 });
    }
    let mut y = if cfg.with_variational {
        let mut y = DVector::zeros(n + n * n);
        y.rows_mut(0, n).copy_from(x0);
        for i in 0..n {
            y[n + i * n + i] = 1.0;
        }
        y
    } else {
        x0.clone()
    };
    let mut out = FlowResult {
        times: vec![t0],
        points: vec![x0.clone()],
        endpoint: x0.clone(),
        variational: cfg.with_variational.then(|| vec![DMatrix::identity(n, n)]),
        final_variational: None,
        steps_taken: 0,
        rejected_steps: 0,
        est_local_error: 0.0,
        certificate: None,
        unsafe_override: false,
    };
    let mut t = t0;
    let mut h_hint: Option<f64> = None;
    for seg in segments {
        let span = seg.t_to - seg.t_from;
        if span == 0.0 {
            continue;
        }
        if seg.terms.is_empty() || seg.terms.iter().all(|&(c, _)| c == 0.0) {
            t = seg.t_to;
            record(&mut out, cfg, t, &y, n);
            continue;
        }
        let rhs = Rhs {
            terms: &seg.terms,
            n,
            with_var: cfg.with_variational,
        };
        h_hint = Some(integrate_segment(&rhs, seg, &mut t, &mut y, region, cfg, &mut out, h_hint)?);
    }
    out.endpoint = y.rows(0, n).into_owned();
    if cfg.with_variational {
        out.final_variational = Some(DMatrix::from_column_slice(n, n, &y.as_slice()[n..]));
    }
    if out.times.last() != Some(&t) {
        record(&mut out, cfg, t, &y, n);
    }
    Ok(out)
}

fn record(out: &mut FlowResult, cfg: &FlowConfig, t: f64, y: &DVector<f64>, n: usize) {
    if !cfg.record_trajectory {
        return;
    }
    out.times.push(t);
    out.points.push(y.rows(0, n).into_owned());
    if let Some(vs) = out.variational.as_mut() {
        vs.push(DMatrix::from_column_slice(n, n, &y.as_slice()[n..]));
    }
}

#[allow(clippy::too_many_arguments)]
fn integrate_segment(
    rhs: &Rhs,
    seg: &Segment,
    t: &mut f64,
    y: &mut DVector<f64>,
    region: &Ball,
    cfg: &FlowConfig,
    out: &mut FlowResult,
    h_hint: Option<f64>,
) -> Result<f64> {
    let n = rhs.n;
    let dir = (seg.t_to - seg.t_from).signum();
    let span = (seg.t_to - seg.t_from).abs();
    *t = seg.t_from;
    let mut k1 = rhs.eval(y);
    let mut h = match h_hint {
        Some(h) => h.min(span),
        None => {
            let d0 = y.amax().max(1.0);
            let d1 = k1.amax();
            if d1 > 1e-12 {
                (0.01 * d0 / d1).min(span)
            } else {
                span
            }
        }
    };
    let mut last_accepted = h;
    let mut steps = 0usize;
    loop {
        let remaining = (seg.t_to - *t) * dir;
        if remaining <= span * 1e-15 {
            *t = seg.t_to;
            return Ok(last_accepted);
        }
        // land exactly on the boundary instead of leaving a sliver
        if h >= remaining || remaining - h < 1e-12 * span {
            h = remaining;
        }
        let hs = h * dir;
        let mut ks: Vec<DVector<f64>> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in ks.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    ys.axpy(hs * a, kj, 1.0);
                }
            }
            ks.push(rhs.eval(&ys));
            if s == 6 {
                // stage 7 is evaluated at the 5th order solution (FSAL)
                let y_new = ys;
                let mut err_max: f64 = 0.0;
                let mut err_abs: f64 = 0.0;
                let floor = (cfg.tol * h).max(64.0 * f64::EPSILON);
                for i in 0..y.len() {
                    let mut e = 0.0;
                    for (j, kj) in ks.iter().enumerate() {
                        e += E[j] * kj[i];
                    }
                    let e = (hs * e).abs();
                    let sc = floor * (1.0 + y[i].abs().max(y_new[i].abs()));
                    err_max = err_max.max(e / sc);
                    if i < n {
                        err_abs = err_abs.max(e);
                    }
                }
                if err_max <= 1.0 {
                    *t += hs;
                    steps += 1;
                    out.steps_taken += 1;
                    out.est_local_error += err_abs;
                    *y = y_new;
                    k1 = ks.pop().expect("seven stages");
                    last_accepted = h;
                    let x = y.rows(0, n).into_owned();
                    if !x.iter().all(|v| v.is_finite()) || !region.contains_with_slack(&x, DOMAIN_SLACK) {
                        return Err(Error::LeftDomain { t: *t });
                    }
                    record(out, cfg, *t, y, n);
                    let fac = if err_max == 0.0 {
                        5.0
                    } else {
                        (0.9 * err_max.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    h *= fac;
                } else {
                    out.rejected_steps += 1;
                    h *= (0.9 * err_max.powf(-0.2)).clamp(0.1, 0.9);
                }
            }
        }
        if h < 1e-14 * (1.0 + t.abs()) || steps > MAX_STEPS {
            return Err(Error::StepUnderflow { t: *t, h });
        }
    }
}
