//! Orbit sampling from the Heisenberg origin, grid coverage and an
//! integral-manifold slice of the commuting plane.

use std::collections::HashSet;

use orbitkit::catalog;
use orbitkit::fields::estimate_lb_bound;
use orbitkit::orbit::{orbit_sample, slice, OrbitOptions};
use orbitkit::{Ball, FlowConfig, Point};

fn main() -> orbitkit::Result<()> {
    let h = catalog::heisenberg();
    let lb = estimate_lb_bound(&h, &Ball::in_space(h.space(), Point::zeros(3), 50.0)?, 2, 64)?;
    let opts = OrbitOptions {
        min_word_len: 80,
        ..OrbitOptions::default()
    };
    let s = orbit_sample(&h, &lb, &Point::zeros(3), 5000, 120, 2024, &opts)?;
    let cells: HashSet<Vec<usize>> = s
        .cloud
        .iter()
        .filter(|p| p.point.iter().all(|v| v.abs() <= 0.5))
        .map(|p| p.point.iter().map(|v| (((v + 0.5) / 0.2) as usize).min(4)).collect())
        .collect();
    println!("{} points, duration scale {:.4}, {} truncated", s.cloud.len(), s.d_max, s.truncated_count());
    println!("coverage of the 5x5x5 grid on [-0.5, 0.5]^3: {:.3}", cells.len() as f64 / 125.0);

    let c = catalog::commuting_constants(3, 2)?;
    let clb = estimate_lb_bound(&c, &Ball::in_space(c.space(), Point::zeros(3), 4.0)?, 2, 32)?;
    let sl = slice(&c, &clb, &Point::zeros(3), 0.5, 3, &[0, 1], &FlowConfig::with_tol(1e-10))?;
    println!("slice of rank {} through the origin:", sl.jacobian_rank);
    for p in &sl.points {
        println!("  {:?}", p.as_slice());
    }
    Ok(())
}
