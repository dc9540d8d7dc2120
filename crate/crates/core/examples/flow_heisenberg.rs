//! Controlled flow around the Heisenberg commutator rectangle, with its
//! existence certificate and variational matrix.

use orbitkit::catalog;
use orbitkit::fields::estimate_lb_bound;
use orbitkit::flow::{check_existence, flow_control};
use orbitkit::{Ball, Control, FlowConfig, L1Coefficients, Point};

fn main() -> orbitkit::Result<()> {
    let h = catalog::heisenberg();
    let region = Ball::in_space(h.space(), Point::zeros(3), 10.0)?;
    let lb = estimate_lb_bound(&h, &region, 2, 64)?;
    println!("LB bound k = {:.3} over a ball of radius 10", lb.bound_k);

    let e = L1Coefficients::unit;
    let u = Control::sequence(0.0, [(1.0, e(0)), (1.0, e(1)), (1.0, e(0).negated()), (1.0, e(1).negated())])?;
    let x0 = Point::zeros(3);
    let cert = check_existence(&h, &lb, &u, &x0, 4.0)?;
    println!("guard: r = {}, T0 = {}, bound r/(kc) = {:.3}, satisfied = {}", cert.r, cert.t0, cert.time_bound(), cert.satisfied);

    // the rectangle is longer than the guard allows, so it runs under the override
    let cfg = FlowConfig::with_tol(1e-10).variational(true).unsafe_override(true);
    let r = flow_control(&h, &lb, &u, &x0, 0.0, 4.0, &cfg)?;
    println!("endpoint {:?} after {} steps (unsafe override: {})", r.endpoint.as_slice(), r.steps_taken, r.unsafe_override);
    println!("D2 Phi at t = 4:{}", r.final_variational.expect("requested"));

    // a short square stays inside the guard
    let s = 0.09;
    let small = Control::sequence(0.0, [(s, e(0)), (s, e(1)), (s, e(0).negated()), (s, e(1).negated())])?;
    let r = flow_control(&h, &lb, &small, &x0, 0.0, 4.0 * s, &FlowConfig::with_tol(1e-10))?;
    println!("square of side {s}: z = {:.12} (expected {:.12})", r.endpoint[2], s * s);
    Ok(())
}
