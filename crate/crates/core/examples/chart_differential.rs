//! The chart map Psi(tau) = phi_tau(x) and its differential, checked against
//! central finite differences.

use orbitkit::catalog;
use orbitkit::compose::{d_psi, psi_chart};
use orbitkit::fields::estimate_lb_bound;
use orbitkit::{Ball, FlowConfig, L1Coefficients, Point};

fn main() -> orbitkit::Result<()> {
    let h = catalog::heisenberg();
    let lb = estimate_lb_bound(&h, &Ball::in_space(h.space(), Point::zeros(3), 10.0)?, 2, 64)?;
    let cfg = FlowConfig::with_tol(1e-12);
    let x = Point::from_vec(vec![0.2, -0.1, 0.05]);
    let tau = L1Coefficients::finite([(0, 0.12), (1, -0.08)])?;
    let sigma = L1Coefficients::finite([(0, 0.3), (1, 1.0)])?;

    let d = d_psi(&h, &lb, &x, &tau, &sigma, &cfg)?;
    let step = 1e-5;
    let plus = psi_chart(&h, &lb, &x, &tau.add(&sigma.scaled(step)), &cfg)?;
    let minus = psi_chart(&h, &lb, &x, &tau.add(&sigma.scaled(-step)), &cfg)?;
    let fd = (plus - minus) / (2.0 * step);
    println!("d_psi            {:?}", d.as_slice());
    println!("finite diff      {:?}", fd.as_slice());
    println!("max difference   {:.2e}", (&d - &fd).amax());

    for a in 0..h.len() {
        let e = d_psi(&h, &lb, &x, &L1Coefficients::zero(), &L1Coefficients::unit(a), &cfg)?;
        println!("d_psi(0, e_{a}) = {:?}, X_{a}(x) = {:?}", e.as_slice(), h.members()[a].eval(&x).as_slice());
    }
    Ok(())
}
