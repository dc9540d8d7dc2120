//! Sampled certification that brackets close on the family with bounded
//! structure constants.

use orbitkit::algebra::certify_h_prime;
use orbitkit::catalog;
use orbitkit::{Ball, FieldFamily, Point};

fn report(name: &str, fam: &FieldFamily) -> orbitkit::Result<()> {
    let region = Ball::in_space(fam.space(), Point::zeros(fam.dimension()), 0.1)?;
    let r = certify_h_prime(fam, &region, 3, 1e-8)?;
    println!(
        "{name:>22}: certified {}, bound C = {:.3}, max residual {:.2e} over {} points",
        r.certified,
        r.bound_c,
        r.max_residual,
        r.grid.len()
    );
    Ok(())
}

fn main() -> orbitkit::Result<()> {
    report("commuting", &catalog::commuting_constants(3, 2)?)?;
    report("heisenberg X1, X2", &catalog::heisenberg())?;
    let closed = catalog::heisenberg_with_center();
    report("heisenberg X1, X2, X3", &closed)?;
    let region = Ball::in_space(closed.space(), Point::zeros(3), 0.1)?;
    let r = certify_h_prime(&closed, &region, 3, 1e-8)?;
    println!("C^3_12 at the first grid point: {:?}", r.constant(0, 0, 1, 2));
    Ok(())
}
