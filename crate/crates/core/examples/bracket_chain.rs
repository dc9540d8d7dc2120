//! Bracket chains, rank profiles and accessibility verdicts across the catalog.

use orbitkit::algebra::{bracket_by_flows, bracket_chain, lie_bracket};
use orbitkit::catalog::{self, AffineLinear};
use orbitkit::fields::estimate_lb_bound;
use orbitkit::orbit::accessibility_verdict;
use orbitkit::{Ball, FieldFamily, Point};

fn verdict(name: &str, fam: &FieldFamily, radius: f64) -> orbitkit::Result<()> {
    let n = fam.dimension();
    let lb = estimate_lb_bound(fam, &Ball::in_space(fam.space(), Point::zeros(n), radius)?, 2, 32)?;
    let v = accessibility_verdict(fam, &lb, &Point::zeros(n), 4)?;
    println!("{name:>12}: ranks {:?} -> {} (limiting rank {})", v.rank_profile, v.kind.name(), v.limiting_rank);
    if let Some(r) = v.density_residual {
        println!("{:>12}  truncation levels {:?}, density residual {r:.3}", "", v.truncation_levels);
    }
    Ok(())
}

fn main() -> orbitkit::Result<()> {
    let h = catalog::heisenberg();
    let x = Point::from_vec(vec![0.3, 0.0, 0.0]);
    let (a, b) = (&h.members()[0], &h.members()[1]);
    println!("[X1, X2](x) = {:?}", lie_bracket(a, b, &x)?.as_slice());
    println!("flow estimate  {:?}", bracket_by_flows(a, b, &x, 1e-3, 1e-12)?.as_slice());

    let chain = bracket_chain(&h, &Point::zeros(3), 3)?;
    for (k, g) in chain.generations.iter().enumerate() {
        println!("generation {}: {:?}", k + 1, g.source_labels);
    }

    verdict("heisenberg", &h, 10.0)?;
    verdict("grushin", &catalog::grushin(), 4.0)?;
    verdict("commuting", &catalog::commuting_constants(3, 2)?, 4.0)?;
    verdict("affine-l1", &catalog::affine_l1(32, 24, 0.5, AffineLinear::Identity)?, 4.0)?;
    Ok(())
}
