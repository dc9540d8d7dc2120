//! l1-compositions of flows φ^ξ_τ = lim φ^{X_m}_{τ_m}∘⋯∘φ^{X_1}_{τ_1}, their
//! inverses, the chart map Ψ^x(τ) = φ^ξ_τ(x) and its differential.
//!
//! Tail bound. Let ψ_n(x) be the composition over the first n letters and ψ the
//! full limit. The letters past n move a point by at most Σ_{i>n} |τ_i| ‖X_i‖ ≤ k·tail
//! because every member is bounded by k on the guard region. The letters before n
//! are flows of fields with Lipschitz constant ≤ k, so the remaining composition can
//! only amplify that displacement by e^{k‖τ‖₁} (Gronwall along Γ^τ). Hence
//! ‖ψ(x) − ψ_n(x)‖ ≤ k·e^{k‖τ‖₁}·tail, which is the bound reported here. It is
//! looser than the displacement estimate alone, so it is a valid upper bound.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::{FieldFamily, LbRecord};
use crate::flow::{
    check_existence_with_horizon, flow_control, flow_in_region, flow_single, Control, ControlPiece,
    ExistenceCertificate, FlowConfig,
};
use crate::space::{norm1, truncate, L1Coefficients, Point};

/// Human-readable form of the tail bound, echoed in reports.
pub const TAIL_BOUND_RULE: &str = "k*exp(k*|tau|_1)*tail";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Γ^τ: switch through X_1, X_2, … in index order.
    Forward,
    /// Γ̂^τ(s) = Γ^τ(‖τ‖₁ − s).
    Reverse,
}

#[derive(Debug, Clone)]
pub struct BangBangControl {
    pub tau: L1Coefficients,
    pub direction: Direction,
    pub control: Control,
}

impl BangBangControl {
    pub fn length(&self) -> f64 {
        self.control.end() - self.control.start()
    }
}

/// Bang-bang control over the finite entries of `tau` (the tail is not realizable).
pub fn gamma_control(tau: &L1Coefficients, direction: Direction) -> BangBangControl {
    let mut pieces = Vec::with_capacity(tau.support_len());
    let mut s = 0.0;
    for &(i, v) in tau.entries() {
        let len = v.abs();
        let coeff = L1Coefficients::finite([(i, v.signum())]).expect("unit coefficient");
        pieces.push(ControlPiece {
            start: s,
            end: s + len,
            coeffs: coeff,
        });
        s += len;
    }
    let total = s;
    if direction == Direction::Reverse {
        pieces = pieces
            .into_iter()
            .rev()
            .map(|p| ControlPiece {
                start: total - p.end,
                end: total - p.start,
                coeffs: p.coeffs,
            })
            .collect();
    }
    let control = Control::new(0.0, total, pieces).expect("pieces are consecutive");
    BangBangControl {
        tau: tau.clone(),
        direction,
        control,
    }
}

#[derive(Debug, Clone)]
pub struct CompositionResult {
    pub start: Point,
    pub endpoint: Point,
    pub truncation_n: usize,
    pub tail_error_bound: f64,
    /// Realized letters (member index, signed duration) in application order.
    pub word: Vec<(usize, f64)>,
    pub certificate: ExistenceCertificate,
    pub unsafe_override: bool,
    pub steps_taken: usize,
}

impl CompositionResult {
    pub fn word_length(&self) -> f64 {
        self.word.iter().map(|(_, t)| t.abs()).sum()
    }
}

/// Smallness guard ‖τ‖₁ < r/k, i.e. the flow guard with c = 1 and T₀ = ‖τ‖₁.
pub fn composition_guard(family: &FieldFamily, lb: &LbRecord, tau: &L1Coefficients, x: &Point) -> Result<ExistenceCertificate> {
    check_existence_with_horizon(family, lb, 1.0, x, norm1(tau), f64::INFINITY)
}

fn guarded(family: &FieldFamily, lb: &LbRecord, tau: &L1Coefficients, x: &Point, allow_unsafe: bool) -> Result<(ExistenceCertificate, bool)> {
    let cert = composition_guard(family, lb, tau, x)?;
    if cert.satisfied {
        return Ok((cert, false));
    }
    if allow_unsafe {
        return Ok((cert, true));
    }
    Err(Error::GuardViolated {
        detail: format!(
            "|tau|_1 = {} is not below r/k = {} (r = {}, k = {})",
            cert.t0,
            cert.time_bound(),
            cert.r,
            cert.k
        ),
    })
}

/// k·e^{k‖τ‖₁}·tail.
pub fn tail_error_bound(k: f64, tau_norm: f64, tail: f64) -> f64 {
    if tail == 0.0 {
        0.0
    } else {
        k * (k * tau_norm).exp() * tail
    }
}

/// Smallest truncation level whose tail bound is within `tol`.
pub fn choose_truncation(k: f64, tau: &L1Coefficients, tol: f64) -> Result<usize> {
    let total = norm1(tau);
    let irreducible = tail_error_bound(k, total, tau.tail_bound());
    if irreducible > tol {
        return Err(Error::TailNotSummable {
            tail: tau.tail_bound(),
            tol,
        });
    }
    let entries = tau.entries();
    // suffix sums of dropped mass
    let mut tail = tau.tail_bound();
    let mut n = entries.len();
    for i in (0..entries.len()).rev() {
        let t = tail + entries[i].1.abs();
        if tail_error_bound(k, total, t) > tol {
            break;
        }
        tail = t;
        n = i;
    }
    Ok(n)
}

/// φ^ξ_τ(x) with the truncation level chosen so the tail bound is ≤ `cfg.tol`.
pub fn compose_flows(family: &FieldFamily, lb: &LbRecord, tau: &L1Coefficients, x: &Point, cfg: &FlowConfig) -> Result<CompositionResult> {
    guarded(family, lb, tau, x, cfg.allow_unsafe)?;
    let n = choose_truncation(lb.bound_k, tau, cfg.tol)?;
    compose_flows_truncated(family, lb, tau, n, x, cfg)
}

/// Composition over the first `n` letters of τ; the tail bound is reported, not enforced.
pub fn compose_flows_truncated(
    family: &FieldFamily,
    lb: &LbRecord,
    tau: &L1Coefficients,
    n: usize,
    x: &Point,
    cfg: &FlowConfig,
) -> Result<CompositionResult> {
    let (certificate, unsafe_override) = guarded(family, lb, tau, x, cfg.allow_unsafe)?;
    let (kept, tail) = truncate(tau, n);
    let gamma = gamma_control(&kept, Direction::Forward);
    let fcfg = FlowConfig {
        with_variational: false,
        record_trajectory: false,
        ..*cfg
    };
    let flow = flow_control(family, lb, &gamma.control, x, 0.0, gamma.length(), &fcfg)?;
    Ok(CompositionResult {
        start: x.clone(),
        endpoint: flow.endpoint,
        truncation_n: kept.support_len(),
        tail_error_bound: tail_error_bound(lb.bound_k, norm1(tau), tail),
        word: kept.entries().to_vec(),
        certificate,
        unsafe_override,
        steps_taken: flow.steps_taken,
    })
}

/// φ̂^ξ_τ(y) = Φ^ξ_τ(−‖τ‖₁, y): the Γ^τ flow run backward from time ‖τ‖₁.
pub fn compose_inverse(family: &FieldFamily, lb: &LbRecord, tau: &L1Coefficients, y: &Point, cfg: &FlowConfig) -> Result<CompositionResult> {
    guarded(family, lb, tau, y, cfg.allow_unsafe)?;
    let n = choose_truncation(lb.bound_k, tau, cfg.tol)?;
    compose_inverse_truncated(family, lb, tau, n, y, cfg)
}

pub fn compose_inverse_truncated(
    family: &FieldFamily,
    lb: &LbRecord,
    tau: &L1Coefficients,
    n: usize,
    y: &Point,
    cfg: &FlowConfig,
) -> Result<CompositionResult> {
    let (certificate, unsafe_override) = guarded(family, lb, tau, y, cfg.allow_unsafe)?;
    let (kept, tail) = truncate(tau, n);
    let gamma = gamma_control(&kept, Direction::Forward);
    let fcfg = FlowConfig {
        with_variational: false,
        record_trajectory: false,
        ..*cfg
    };
    let len = gamma.length();
    let flow = flow_control(family, lb, &gamma.control, y, len, -len, &fcfg)?;
    Ok(CompositionResult {
        start: y.clone(),
        endpoint: flow.endpoint,
        truncation_n: kept.support_len(),
        tail_error_bound: tail_error_bound(lb.bound_k, norm1(tau), tail),
        word: kept.entries().iter().rev().map(|&(i, t)| (i, -t)).collect(),
        certificate,
        unsafe_override,
        steps_taken: flow.steps_taken,
    })
}

/// Applies the letters one flow at a time; the cross-check path for `compose_flows`.
pub fn compose_sequential(family: &FieldFamily, word: &[(usize, f64)], x: &Point, cfg: &FlowConfig) -> Result<Point> {
    let fcfg = FlowConfig {
        with_variational: false,
        record_trajectory: false,
        ..*cfg
    };
    let mut p = x.clone();
    for &(i, t) in word {
        p = flow_single(family.member(i)?, &p, t, &fcfg)?.endpoint;
    }
    Ok(p)
}

/// Ψ^x(τ) = φ^ξ_τ(x).
pub fn psi_chart(family: &FieldFamily, lb: &LbRecord, x: &Point, tau: &L1Coefficients, cfg: &FlowConfig) -> Result<Point> {
    Ok(compose_flows(family, lb, tau, x, cfg)?.endpoint)
}

/// One letter φ^{X_i}_t(p) with its Jacobian, confined to the LB region.
fn letter_with_jacobian(family: &FieldFamily, lb: &LbRecord, i: usize, t: f64, p: &Point, cfg: &FlowConfig) -> Result<(Point, DMatrix<f64>)> {
    let fcfg = FlowConfig {
        with_variational: true,
        record_trajectory: false,
        ..*cfg
    };
    let r = flow_in_region(family.member(i)?, p, t, &lb.region, &fcfg)?;
    let v = r.final_variational.expect("variational requested");
    Ok((r.endpoint, v))
}

/// L(τ)(σ) = ΔΨ(τ)∘ℛ(τ)(σ), the directional derivative of Ψ^x at τ along σ.
///
/// With ψ_p the point after letter p and M_p the variational matrix of the first p
/// letters, ℛ(τ)σ = Σ_p σ_p M_p⁻¹ X_p(ψ_p). Pushing forward by the full variational
/// ΔΨ(τ) = M_m turns each term into (suffix product after p)·X_p(ψ_p), which is
/// evaluated here without forming any inverse. Letters run over the union of the
/// supports of τ and σ in index order; letters with τ_p = 0 contribute identity
/// matrices, so ℛ(0) is exactly the identity.
pub fn d_psi(
    family: &FieldFamily,
    lb: &LbRecord,
    x: &Point,
    tau: &L1Coefficients,
    sigma: &L1Coefficients,
    cfg: &FlowConfig,
) -> Result<Point> {
    guarded(family, lb, tau, x, cfg.allow_unsafe)?;
    if tau.tail_bound() > 0.0 || sigma.tail_bound() > 0.0 {
        return Err(Error::InvalidArgument(
            "d_psi needs finitely supported tau and sigma".into(),
        ));
    }
    let mut letters: Vec<usize> = tau
        .entries()
        .iter()
        .chain(sigma.entries())
        .map(|&(i, _)| i)
        .collect();
    letters.sort_unstable();
    letters.dedup();

    let n = x.len();
    let mut p = x.clone();
    let mut jacobians = Vec::with_capacity(letters.len());
    let mut tangents = Vec::with_capacity(letters.len());
    for &i in &letters {
        let t = tau.get(i);
        let (q, v) = if t == 0.0 {
            (p.clone(), DMatrix::identity(n, n))
        } else {
            letter_with_jacobian(family, lb, i, t, &p, cfg)?
        };
        p = q;
        let s = sigma.get(i);
        tangents.push(if s == 0.0 {
            None
        } else {
            Some(family.members()[i].eval(&p) * s)
        });
        jacobians.push(v);
    }
    let mut out = Point::zeros(n);
    let mut suffix = DMatrix::identity(n, n);
    for (v, w) in jacobians.iter().zip(&tangents).rev() {
        if let Some(w) = w {
            out += &suffix * w;
        }
        suffix *= v;
    }
    Ok(out)
}

/// A sampled l1-integral curve γ on [0, ‖τ‖₁] through the letters of a word.
#[derive(Debug, Clone)]
pub struct L1Curve {
    /// Subdivision t_k = Σ_{j≤k} |τ_j| (starting with 0).
    pub knots: Vec<f64>,
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    /// Largest distance at a knot between the sub-sampled segment end and a one-shot
    /// flow of the same letter.
    pub max_knot_gap: f64,
}

/// Samples γ(s) = φ^{X_{α_k}}_{s − t_{k−1}}(x_{k−1}) along the realized word.
pub fn extract_l1_curve(
    family: &FieldFamily,
    result: &CompositionResult,
    samples_per_piece: usize,
    cfg: &FlowConfig,
) -> Result<L1Curve> {
    let samples = samples_per_piece.max(1);
    let fcfg = FlowConfig {
        with_variational: false,
        record_trajectory: false,
        ..*cfg
    };
    let mut curve = L1Curve {
        knots: vec![0.0],
        times: vec![0.0],
        points: vec![result.start.clone()],
        max_knot_gap: 0.0,
    };
    let mut s = 0.0;
    let mut p = result.start.clone();
    for &(i, t) in &result.word {
        let field = family.member(i)?;
        let dt = t / samples as f64;
        let knot_start = p.clone();
        for j in 1..=samples {
            p = flow_single(field, &p, dt, &fcfg)?.endpoint;
            curve.times.push(s + t.abs() * j as f64 / samples as f64);
            curve.points.push(p.clone());
        }
        let direct = flow_single(field, &knot_start, t, &fcfg)?.endpoint;
        curve.max_knot_gap = curve.max_knot_gap.max((direct - &p).amax());
        s += t.abs();
        curve.knots.push(s);
    }
    Ok(curve)
}
