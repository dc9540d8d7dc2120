//! Infinite compositions of flows on a truncated l1 chart: truncation levels,
//! the tail error bound and the inverse composition.

use orbitkit::catalog::{self, AffineLinear};
use orbitkit::compose::{compose_flows, compose_flows_truncated, compose_inverse, TAIL_BOUND_RULE};
use orbitkit::fields::estimate_lb_bound;
use orbitkit::{Ball, FlowConfig, L1Coefficients, Point};

fn main() -> orbitkit::Result<()> {
    let dim = 24;
    let fam = catalog::affine_l1(dim, dim, 1.0, AffineLinear::Zero)?;
    let lb = estimate_lb_bound(&fam, &Ball::in_space(fam.space(), Point::zeros(dim), 8.0)?, 2, 32)?;
    let tau = L1Coefficients::finite((0..dim).map(|i| (i, 0.5f64.powi(i as i32))))?;
    let x = Point::zeros(dim);
    let limit = Point::from_fn(dim, |i, _| 0.5f64.powi(i as i32));
    let cfg = FlowConfig::with_tol(1e-9);

    println!("tail bound rule: {TAIL_BOUND_RULE}");
    for n in [4, 8, 12, 16, 20] {
        let r = compose_flows_truncated(&fam, &lb, &tau, n, &x, &cfg)?;
        let err = fam.space().distance(&r.endpoint, &limit);
        println!("n = {n:2}  error {err:.3e}  bound {:.3e}", r.tail_error_bound);
    }

    let full = compose_flows(&fam, &lb, &tau, &x, &cfg)?;
    let back = compose_inverse(&fam, &lb, &tau, &full.endpoint, &cfg)?;
    println!("automatic truncation keeps {} letters", full.truncation_n);
    println!("round trip returns to the seed within {:.1e}", back.endpoint.amax());
    Ok(())
}
