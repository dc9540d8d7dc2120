//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use orbitkit::algebra::{apply_word, certify_h_prime, enlarge_field, pushforward_eval, FlowWord};
use orbitkit::catalog::{self, AffineLinear};
use orbitkit::cli::{parse_scenario, run, RunOptions};
use orbitkit::compose::{compose_flows, compose_flows_truncated, compose_inverse, compose_sequential, d_psi, psi_chart};
use orbitkit::fields::estimate_lb_bound;
use orbitkit::flow::{flow_control, flow_single};
use orbitkit::orbit::{accessibility_verdict, invariance_residual, one_level_enlargement, orbit_sample, replay_word, OrbitOptions, VerdictKind};
use orbitkit::{Ball, Control, FieldFamily, FlowConfig, L1Coefficients, LbRecord, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn pt(v: &[f64]) -> Point {
    Point::from_vec(v.to_vec())
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Point {
    Point::from_fn(n, |_, _| rng.random_range(-half_width..=half_width))
}

fn lb(fam: &FieldFamily, radius: f64, samples: usize) -> LbRecord {
    let region = Ball::in_space(fam.space(), Point::zeros(fam.dimension()), radius).expect("region");
    estimate_lb_bound(fam, &region, 2, samples).expect("lb")
}

fn cfg() -> FlowConfig {
    FlowConfig::with_tol(TOL).recording(false)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Exact Heisenberg flows: X1 = ∂x, X2 = ∂y + x∂z.
fn heisenberg_exact(mut p: [f64; 3], word: &[(usize, f64)]) -> [f64; 3] {
    for &(i, t) in word {
        if i == 0 {
            p[0] += t;
        } else {
            p[1] += t;
            p[2] += p[0] * t;
        }
    }
    p
}

/// Family whose members are the letters of a word over `base`, in word order.
fn word_family(base: &FieldFamily, letters: &[usize]) -> FieldFamily {
    let members = letters
        .iter()
        .enumerate()
        .map(|(j, &i)| base.members()[i].clone().relabeled(format!("L{j}")))
        .collect();
    FieldFamily::new(base.space().clone(), members).expect("word family")
}

/// Random signed durations with Σ|t| = total.
fn durations(rng: &mut ChaCha8Rng, len: usize, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter()
        .map(|r| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * r / s * total
        })
        .collect()
}

fn flow_engine() -> Outcome {
    let c = cfg();
    let fields = catalog::analytic_catalog();
    let translation = &fields[0];
    let decay = &fields[2];

    let x = pt(&[0.3, -0.7]);
    let got = flow_single(translation, &x, 1.75, &c).map_err(err)?.endpoint;
    let want = pt(&[2.05, -0.7]);
    let e_trans = (got - want).amax();

    let got = flow_single(decay, &pt(&[1.5]), 2.0, &c).map_err(err)?.endpoint;
    let e_decay = (got[0] - 1.5 * (-2.0f64).exp()).abs();

    let h = catalog::heisenberg();
    let hlb = lb(&h, 10.0, 64);
    let unit = |i| L1Coefficients::unit(i);
    let pieces = vec![
        (1.0, unit(0)),
        (1.0, unit(1)),
        (1.0, unit(0).negated()),
        (1.0, unit(1).negated()),
    ];
    let u = Control::sequence(0.0, pieces).map_err(err)?;
    // unit-time pieces exceed the guard on any ball, so the override is required
    let r = flow_control(&h, &hlb, &u, &Point::zeros(3), 0.0, 4.0, &c.unsafe_override(true)).map_err(err)?;
    let want = heisenberg_exact([0.0; 3], &[(0, 1.0), (1, 1.0), (0, -1.0), (1, -1.0)]);
    let e_rect = (&r.endpoint - pt(&want)).amax();
    ensure(e_trans <= 1e-6 && e_decay <= 1e-6 && e_rect <= 1e-6, || {
        format!("oracle errors translation {e_trans:.1e}, decay {e_decay:.1e}, rectangle {e_rect:.1e}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_group: f64 = 0.0;
    let mut worst_inverse: f64 = 0.0;
    for _ in 0..50 {
        let f = &fields[rng.random_range(0..fields.len())];
        let x = random_point(&mut rng, f.dimension(), 1.0);
        let s = rng.random_range(-0.5..0.5);
        let t = rng.random_range(-0.5..0.5);
        let a = flow_single(f, &flow_single(f, &x, s, &c).map_err(err)?.endpoint, t, &c).map_err(err)?.endpoint;
        let b = flow_single(f, &x, s + t, &c).map_err(err)?.endpoint;
        worst_group = worst_group.max((a - b).amax());
        let fwd = flow_single(f, &x, t, &c).map_err(err)?.endpoint;
        let back = flow_single(f, &fwd, -t, &c).map_err(err)?.endpoint;
        worst_inverse = worst_inverse.max((back - &x).amax());
    }
    ensure(worst_group <= 10.0 * TOL && worst_inverse <= 10.0 * TOL, || {
        format!("group law {worst_group:.1e}, inverse law {worst_inverse:.1e} (limit {:.0e})", 10.0 * TOL)
    })?;
    Ok(format!(
        "rectangle z = {:.9}, max oracle error {:.1e}, group {worst_group:.1e}, inverse {worst_inverse:.1e}",
        r.endpoint[2],
        e_trans.max(e_decay).max(e_rect)
    ))
}

fn variational() -> Outcome {
    let fine = FlowConfig::with_tol(1e-12).recording(false);
    let fields = catalog::analytic_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = &fields[rng.random_range(0..fields.len())];
        let n = f.dimension();
        let x = random_point(&mut rng, n, 1.0);
        let t = rng.random_range(-1.0..1.0);
        let v = flow_single(f, &x, t, &fine.variational(true))
            .map_err(err)?
            .final_variational
            .ok_or("no variational matrix")?;
        let mut fd = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (flow_single(f, &xp, t, &fine).map_err(err)?.endpoint - flow_single(f, &xm, t, &fine).map_err(err)?.endpoint) / (2.0 * h);
            fd.set_column(j, &col);
        }
        worst = worst.max((&v - fd).amax() / v.amax().max(1.0));
    }
    ensure(worst <= 1e-4, || format!("relative deviation {worst:.1e} > 1e-4"))?;
    Ok(format!("20 cases, max relative deviation {worst:.1e}"))
}

fn l1_composition() -> Outcome {
    let c = cfg();
    let fam = catalog::affine_l1(24, 24, 1.0, AffineLinear::Zero).map_err(err)?;
    let flb = lb(&fam, 8.0, 32);
    let tau = L1Coefficients::finite((0..24).map(|i| (i, 0.5f64.powi(i as i32)))).map_err(err)?;
    let x = Point::from_fn(24, |i, _| 0.01 * i as f64 - 0.1);
    let exact = &x + Point::from_fn(24, |i, _| 0.5f64.powi(i as i32));
    let mut lines = Vec::new();
    let mut previous = f64::INFINITY;
    for n in [4, 8, 12, 16, 20] {
        let r = compose_flows_truncated(&fam, &flb, &tau, n, &x, &c).map_err(err)?;
        let e = fam.space().distance(&r.endpoint, &exact);
        ensure(e <= r.tail_error_bound, || format!("n = {n}: error {e:.2e} exceeds bound {:.2e}", r.tail_error_bound))?;
        ensure(e < previous, || format!("n = {n}: error {e:.2e} did not decrease"))?;
        previous = e;
        lines.push(format!("n{n} {e:.1e}<={:.1e}", r.tail_error_bound));
    }
    let full = compose_flows(&fam, &flb, &tau, &x, &c).map_err(err)?;
    let back = compose_inverse(&fam, &flb, &tau, &full.endpoint, &c).map_err(err)?;
    let trip = (back.endpoint - &x).amax();
    ensure(trip <= 1e-7, || format!("round trip error {trip:.1e}"))?;
    Ok(format!("{}; round trip {trip:.1e}", lines.join(", ")))
}

fn gamma_paths() -> Outcome {
    let c = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for (base, radius, total) in [(catalog::heisenberg(), 10.0, 0.3), (catalog::grushin(), 4.0, 0.25)] {
        for _ in 0..10 {
            let len = rng.random_range(3..=6);
            let letters: Vec<usize> = (0..len).map(|_| rng.random_range(0..base.len())).collect();
            let fam = word_family(&base, &letters);
            let flb = lb(&fam, radius, 64);
            let ts = durations(&mut rng, len, total);
            let word: Vec<(usize, f64)> = ts.iter().copied().enumerate().collect();
            let tau = L1Coefficients::finite(word.clone()).map_err(err)?;
            let x = random_point(&mut rng, fam.dimension(), 0.5);
            let gamma = compose_flows(&fam, &flb, &tau, &x, &c).map_err(err)?;
            let seq = compose_sequential(&fam, &word, &x, &c).map_err(err)?;
            worst = worst.max((gamma.endpoint - seq).amax());
        }
    }
    ensure(worst <= 10.0 * TOL, || format!("path gap {worst:.1e} > {:.0e}", 10.0 * TOL))?;
    Ok(format!("20 words, max gap {worst:.1e}"))
}

fn chart_differential() -> Outcome {
    let fine = FlowConfig::with_tol(1e-12).recording(false);
    let base = catalog::heisenberg();
    let fam = word_family(&base, &[0, 1, 0, 1]);
    let flb = lb(&fam, 10.0, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = random_point(&mut rng, 3, 0.5);
        let tau = L1Coefficients::finite(durations(&mut rng, 4, 0.25).into_iter().enumerate()).map_err(err)?;
        let sigma = L1Coefficients::finite((0..4).map(|i| (i, rng.random_range(-1.0..1.0)))).map_err(err)?;
        let d = d_psi(&fam, &flb, &x, &tau, &sigma, &fine).map_err(err)?;
        let plus = psi_chart(&fam, &flb, &x, &tau.add(&sigma.scaled(h)), &fine).map_err(err)?;
        let minus = psi_chart(&fam, &flb, &x, &tau.add(&sigma.scaled(-h)), &fine).map_err(err)?;
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((&d - fd).amax() / d.amax().max(1.0));
    }
    ensure(worst <= 1e-4, || format!("d_psi deviates from finite differences by {worst:.1e}"))?;
    let x = pt(&[0.3, -0.2, 0.1]);
    let mut id_err: f64 = 0.0;
    for a in 0..fam.len() {
        let d = d_psi(&fam, &flb, &x, &L1Coefficients::zero(), &L1Coefficients::unit(a), &fine).map_err(err)?;
        let want = fam.members()[a].eval(&x);
        id_err = id_err.max((d - &want).amax() / want.amax().max(1.0));
    }
    ensure(id_err <= 4.0 * f64::EPSILON, || format!("R(0) deviates from identity by {id_err:.1e}"))?;
    Ok(format!("10 cases, max deviation {worst:.1e}; R(0) error {id_err:.1e}"))
}

fn random_word(rng: &mut ChaCha8Rng, members: usize) -> FlowWord {
    let len = rng.random_range(1..=3);
    FlowWord::new((0..len).map(|_| (rng.random_range(0..members), rng.random_range(-0.3..0.3))).collect()).expect("word")
}

fn enlargement() -> Outcome {
    let c = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut worst_flow: f64 = 0.0;
    let mut worst_idem: f64 = 0.0;
    for (case, fam) in [catalog::heisenberg(), catalog::heisenberg(), catalog::grushin()].iter().cycle().take(10).enumerate() {
        let flb = lb(fam, if case % 3 == 2 { 4.0 } else { 10.0 }, 32);
        let word = random_word(&mut rng, fam.len());
        let i = rng.random_range(0..fam.len());
        let nu = rng.random_range(0.5..2.0);
        let x = random_point(&mut rng, fam.dimension(), 0.5);
        let t = rng.random_range(-0.3..0.3);
        let e = enlarge_field(fam, &word, i, nu, &flb).map_err(err)?;
        let lhs = flow_single(&e.field, &x, t, &c).map_err(err)?.endpoint;
        let q = apply_word(fam, &word.inverse(), &x, 1e-12).map_err(err)?;
        let q = flow_single(&fam.members()[i], &q, nu * t, &FlowConfig::with_tol(1e-12).recording(false)).map_err(err)?.endpoint;
        let rhs = apply_word(fam, &word, &q, 1e-12).map_err(err)?;
        worst_flow = worst_flow.max((lhs - rhs).amax());

        let outer = random_word(&mut rng, fam.len());
        let mu = rng.random_range(0.5..2.0);
        let twice = e.enlarge(fam, &outer, mu, &flb).map_err(err)?;
        for _ in 0..3 {
            let p = random_point(&mut rng, fam.dimension(), 0.5);
            let nested = pushforward_eval(fam, &outer, &e.field, mu, &p, 1e-12).map_err(err)?;
            worst_idem = worst_idem.max((twice.eval(&p) - nested).amax());
        }
    }
    ensure(worst_flow <= 10.0 * TOL && worst_idem <= 10.0 * TOL, || {
        format!("conjugation {worst_flow:.1e}, idempotence {worst_idem:.1e} (limit {:.0e})", 10.0 * TOL)
    })?;
    Ok(format!("10 words, conjugation {worst_flow:.1e}, idempotence {worst_idem:.1e}"))
}

fn verdicts() -> Outcome {
    let start = Instant::now();
    let h = catalog::heisenberg();
    let g = catalog::grushin();
    let c = catalog::commuting_constants(3, 2).map_err(err)?;
    let vh = accessibility_verdict(&h, &lb(&h, 10.0, 64), &Point::zeros(3), 4).map_err(err)?;
    let vg = accessibility_verdict(&g, &lb(&g, 4.0, 64), &Point::zeros(2), 4).map_err(err)?;
    let vc = accessibility_verdict(&c, &lb(&c, 4.0, 64), &Point::zeros(3), 3).map_err(err)?;
    let elapsed = start.elapsed();
    ensure(vh.rank_profile == [2, 3] && vh.kind == VerdictKind::ExactlyControllable, || format!("heisenberg {:?} {:?}", vh.rank_profile, vh.kind))?;
    ensure(vg.rank_profile == [1, 2] && vg.kind == VerdictKind::ExactlyControllable, || format!("grushin {:?} {:?}", vg.rank_profile, vg.kind))?;
    ensure(vc.kind == VerdictKind::RankDeficient && vc.limiting_rank == 2, || format!("commuting {:?} rank {}", vc.kind, vc.limiting_rank))?;
    ensure(elapsed < Duration::from_secs(2), || format!("took {elapsed:.2?}"))?;
    Ok(format!(
        "heisenberg {:?} {}, grushin {:?} {}, commuting {:?} {} in {elapsed:.2?}",
        vh.rank_profile,
        vh.kind.name(),
        vg.rank_profile,
        vg.kind.name(),
        vc.rank_profile,
        vc.kind.name()
    ))
}

fn structure_constants() -> Outcome {
    let tol = 1e-8;
    let c = catalog::commuting_constants(3, 2).map_err(err)?;
    let rc = certify_h_prime(&c, &Ball::in_space(c.space(), Point::zeros(3), 0.5).map_err(err)?, 3, tol).map_err(err)?;
    ensure(rc.certified && rc.bound_c == 0.0, || format!("commuting: certified {} bound {}", rc.certified, rc.bound_c))?;

    let h = catalog::heisenberg();
    let region = Ball::in_space(h.space(), Point::zeros(3), 0.1).map_err(err)?;
    let rh = certify_h_prime(&h, &region, 3, tol).map_err(err)?;
    ensure(!rh.certified && (rh.max_residual - 1.0).abs() < 0.01, || format!("pair: certified {} residual {}", rh.certified, rh.max_residual))?;

    let hc = catalog::heisenberg_with_center();
    let rz = certify_h_prime(&hc, &region, 3, tol).map_err(err)?;
    ensure(rz.certified, || format!("with X3: residual {}", rz.max_residual))?;
    let mut worst: f64 = 0.0;
    for g in 0..rz.grid.len() {
        let c312 = rz.constant(g, 0, 1, 2).ok_or("missing pair (X1, X2)")?;
        worst = worst.max((c312 - 1.0).abs());
    }
    ensure(worst <= 1e-8, || format!("C^3_12 deviates from 1 by {worst:.1e}"))?;
    Ok(format!(
        "commuting bound 0; pair refused (residual {:.4}); with X3 certified, C^3_12 within {worst:.1e} on {} points",
        rh.max_residual,
        rz.grid.len()
    ))
}

fn invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut worst: f64 = 0.0;
    let c = catalog::commuting_constants(3, 2).map_err(err)?;
    let h = catalog::heisenberg();
    for (fam, radius) in [(&c, 4.0), (&h, 10.0)] {
        let flb = lb(fam, radius, 32);
        let level = one_level_enlargement(fam, &flb, 0.2).map_err(err)?;
        for _ in 0..5 {
            let x = random_point(&mut rng, 3, 0.5);
            let i = rng.random_range(0..fam.len());
            let t = rng.random_range(-0.3..0.3);
            let r = invariance_residual(fam, &x, i, t, &level, 1e-10).map_err(err)?;
            worst = worst.max(r.max_residual);
        }
    }
    ensure(worst <= 1e-5, || format!("integrable catalog residual {worst:.1e}"))?;
    let g = catalog::grushin();
    let r = invariance_residual(&g, &pt(&[-0.1, 0.0]), 0, 0.1, &[], 1e-10).map_err(err)?;
    ensure(r.max_residual > 0.1, || format!("grushin residual {:.2e} not detected", r.max_residual))?;
    Ok(format!("integrable max {worst:.1e}; grushin across x = 0 {:.3}", r.max_residual))
}

fn orbit_density() -> Outcome {
    let start = Instant::now();
    let h = catalog::heisenberg();
    let hlb = lb(&h, 50.0, 64);
    let opts = OrbitOptions {
        min_word_len: 80,
        ..OrbitOptions::default()
    };
    let s = orbit_sample(&h, &hlb, &Point::zeros(3), 5000, 120, 2024, &opts).map_err(err)?;
    let mut cells = std::collections::HashSet::new();
    for p in &s.cloud {
        if p.point.iter().all(|v| v.abs() <= 0.5) {
            let idx: Vec<usize> = p.point.iter().map(|v| (((v + 0.5) / 0.2) as usize).min(4)).collect();
            cells.insert(idx);
        }
    }
    let coverage = cells.len() as f64 / 125.0;
    let mut gap: f64 = 0.0;
    for p in s.cloud.iter().step_by(20) {
        gap = gap.max((replay_word(&h, &s.seed_point, &p.word, TOL).map_err(err)? - &p.point).amax());
    }

    let g = catalog::grushin();
    let gs = orbit_sample(&g, &lb(&g, 4.0, 64), &Point::zeros(2), 2000, 4, 17, &OrbitOptions::default()).map_err(err)?;
    let left = gs.cloud.iter().filter(|p| p.point[0] < 0.0).count();
    let right = gs.cloud.iter().filter(|p| p.point[0] > 0.0).count();
    let elapsed = start.elapsed();
    ensure(coverage >= 0.95, || format!("coverage {coverage:.3} < 0.95"))?;
    ensure(gap <= 10.0 * TOL, || format!("replay gap {gap:.1e}"))?;
    ensure(left > 0 && right > 0, || format!("grushin half-planes {left} / {right}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.2?}"))?;
    Ok(format!(
        "coverage {coverage:.3} (d_max {:.4}), replay gap {gap:.1e}, grushin x<0: {left}, x>0: {right}, {elapsed:.2?}",
        s.d_max
    ))
}

fn strip_timestamp(report: &str) -> String {
    report.lines().filter(|l| !l.starts_with("timestamp")).collect::<Vec<_>>().join("\n")
}

fn determinism() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    ensure(!files.is_empty(), || "no scenarios found".into())?;
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(err)?;
    let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().map_err(err)?;
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(err)?;
        let scenario = parse_scenario(&text).map_err(err)?;
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        let a = serial.install(|| run(&scenario, stem, &RunOptions::default()));
        let b = parallel.install(|| run(&scenario, stem, &RunOptions::default()));
        ensure(strip_timestamp(&a.report) == strip_timestamp(&b.report), || format!("{stem}: reports differ"))?;
        ensure(a.artifacts == b.artifacts, || format!("{stem}: point clouds differ"))?;
    }
    Ok(format!("{} scenarios identical across 1 and 4 worker threads", files.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("flow engine oracles, group and inverse laws", flow_engine),
        ("variational equations vs finite differences", variational),
        ("l1 composition within tail bound", l1_composition),
        ("control path equals sequential path", gamma_paths),
        ("chart differential vs finite differences", chart_differential),
        ("enlargement conjugation and idempotence", enlargement),
        ("bracket chains and verdicts", verdicts),
        ("structure-constant certification", structure_constants),
        ("invariance residual", invariance),
        ("orbit density proxy", orbit_density),
        ("report determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
