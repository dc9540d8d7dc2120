//! Enlarged fields: pushforwards of members through flow words, their flows,
//! membership screening and composition of enlargements.

use orbitkit::algebra::{apply_word, enlarge_field, FlowWord};
use orbitkit::catalog;
use orbitkit::fields::estimate_lb_bound;
use orbitkit::flow::flow_single;
use orbitkit::{Ball, FlowConfig, Point};

fn main() -> orbitkit::Result<()> {
    let h = catalog::heisenberg();
    let lb = estimate_lb_bound(&h, &Ball::in_space(h.space(), Point::zeros(3), 10.0)?, 2, 64)?;
    let word = FlowWord::new(vec![(0, 0.2), (1, -0.1)])?;
    let e = enlarge_field(&h, &word, 1, 1.5, &lb)?;
    let p = Point::from_vec(vec![0.1, 0.2, 0.3]);
    println!("pushed X2 at {:?}: {:?}", p.as_slice(), e.eval(&p).as_slice());
    println!("anchor jet norm {:.3} vs k = {:.3}, excluded: {}", e.anchor_jet_norm, lb.bound_k, e.excluded);

    let t = 0.25;
    let cfg = FlowConfig::with_tol(1e-10);
    let direct = flow_single(&e.field, &p, t, &cfg)?.endpoint;
    let q = apply_word(&h, &word.inverse(), &p, 1e-12)?;
    let q = flow_single(&h.members()[1], &q, 1.5 * t, &cfg)?.endpoint;
    let conjugated = apply_word(&h, &word, &q, 1e-12)?;
    println!("flow of the enlarged field   {:?}", direct.as_slice());
    println!("conjugated flow of X2        {:?}", conjugated.as_slice());

    let outer = FlowWord::new(vec![(0, -0.3)])?;
    let twice = e.enlarge(&h, &outer, 2.0, &lb)?;
    println!("enlarging again composes words ({} letters) and scales ({})", twice.word.len(), twice.scale);
    Ok(())
}
