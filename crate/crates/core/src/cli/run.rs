//! Command dispatch and report/point-cloud emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use toml::{Table, Value};

use crate::algebra::{bracket_chain, certify_h_prime};
use crate::compose::{
    compose_flows, compose_flows_truncated, compose_inverse, compose_inverse_truncated, compose_sequential,
    composition_guard, TAIL_BOUND_RULE,
};
use crate::error::{Error, Result};
use crate::fields::{estimate_lb_bound_at, sample_points, FieldFamily, LbMethod, LbRecord, DEFAULT_LB_SEED};
use crate::flow::{check_existence, flow_control, Control, ExistenceCertificate, FlowConfig};
use crate::orbit::{accessibility_verdict, orbit_sample, replay_word, slice, OrbitOptions};
use crate::space::{Ball, L1Coefficients, Point};

use super::scenario::{command_point, CommandKind, CommandSpec, Scenario};

pub const FORMAT_VERSION: i64 = 1;
const DEFAULT_K_MAX: usize = 4;
const DEFAULT_WORD_LEN: usize = 4;
const DEFAULT_CERT_RADIUS: f64 = 0.1;
const DEFAULT_CERT_GRID: usize = 3;
const DEFAULT_CERT_TOL: f64 = 1e-8;
const DEFAULT_SLICE_GRID: usize = 5;

/// Command-line overrides of scenario settings.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub allow_unsafe: bool,
    pub tol: Option<f64>,
    /// Fixed timestamp text (the current time when absent).
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: String,
    pub artifacts: Vec<Artifact>,
    pub failed_commands: usize,
}

impl RunOutput {
    pub fn succeeded(&self) -> bool {
        self.failed_commands == 0
    }
}

fn float(v: f64) -> Value {
    Value::Float(v)
}

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().copied().map(Value::Float).collect())
}

fn ints(v: &[usize]) -> Value {
    Value::Array(v.iter().map(|&x| int(x)).collect())
}

fn strings(v: &[String]) -> Value {
    Value::Array(v.iter().cloned().map(Value::String).collect())
}

fn word_value(word: &[(usize, f64)]) -> Value {
    Value::Array(
        word.iter()
            .map(|&(i, t)| Value::Array(vec![int(i), float(t)]))
            .collect(),
    )
}

fn guard_table(c: &ExistenceCertificate) -> Table {
    let mut t = Table::new();
    t.insert("r".into(), float(c.r));
    t.insert("k".into(), float(c.k));
    t.insert("c".into(), float(c.c));
    t.insert("t0".into(), float(c.t0));
    t.insert("t_prime".into(), float(c.t_prime));
    t.insert("margin".into(), float(c.margin));
    t.insert("satisfied".into(), Value::Boolean(c.satisfied));
    t
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header plus one row per point, 17 significant digits.
fn point_csv(prefix_cols: &[String], rows: &[(Vec<String>, &Point)], dim: usize, suffix_cols: &[String], suffix: &[Vec<String>]) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = prefix_cols.to_vec();
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend(suffix_cols.iter().cloned());
    out.push_str(&header.join(","));
    out.push('\n');
    for (r, (pre, p)) in rows.iter().enumerate() {
        let mut cells: Vec<String> = pre.clone();
        cells.extend(p.iter().map(|&v| fmt_coord(v)));
        if let Some(s) = suffix.get(r) {
            cells.extend(s.iter().cloned());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

struct Context<'a> {
    scenario: &'a Scenario,
    family: FieldFamily,
    lb: LbRecord,
    tol: f64,
    seed: u64,
    allow_unsafe: bool,
    stem: String,
}

struct Outcome {
    results: Table,
    tolerances: Table,
    unsafe_override: bool,
    endpoint: Option<Point>,
    artifact: Option<Artifact>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            results: Table::new(),
            tolerances: Table::new(),
            unsafe_override: false,
            endpoint: None,
            artifact: None,
        }
    }
}

/// The LB record the scenario asks for, over the whole family.
pub fn scenario_lb(scenario: &Scenario, family: &FieldFamily) -> Result<LbRecord> {
    let spec = scenario.lb_spec();
    let n = family.dimension();
    let center = spec.center.clone().map(Point::from_vec).unwrap_or_else(|| Point::zeros(n));
    let region = Ball::in_space(family.space(), center, spec.radius)?;
    match spec.declared {
        Some(k) => LbRecord::declared(spec.order, k, region),
        None => {
            let pts = sample_points(&region, spec.samples, DEFAULT_LB_SEED)?;
            estimate_lb_bound_at(family, &region, spec.order, &pts, spec.safety)
        }
    }
}

fn lb_table(lb: &LbRecord) -> Table {
    let mut t = Table::new();
    t.insert(
        "method".into(),
        Value::String(
            match lb.method {
                LbMethod::Declared => "declared",
                LbMethod::Sampled => "sampled",
            }
            .into(),
        ),
    );
    t.insert("order".into(), int(lb.order_s));
    t.insert("bound_k".into(), float(lb.bound_k));
    t.insert("region_center".into(), floats(lb.region.center.as_slice()));
    t.insert("region_radius".into(), float(lb.region.radius));
    t.insert("sampled_max".into(), float(lb.sampled_max));
    t.insert("samples".into(), int(lb.samples));
    t.insert("safety".into(), float(lb.safety));
    t
}

fn now_stamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix:{secs}")
}

/// Runs every command; per-command failures are captured in the report.
pub fn run(scenario: &Scenario, stem: &str, opts: &RunOptions) -> RunOutput {
    let tol = opts.tol.unwrap_or(scenario.tol);
    let seed = opts.seed.unwrap_or(scenario.seed);
    let allow_unsafe = opts.allow_unsafe || scenario.allow_unsafe;
    let mut root = Table::new();
    root.insert("format_version".into(), Value::Integer(FORMAT_VERSION));
    root.insert("timestamp".into(), Value::String(opts.timestamp.clone().unwrap_or_else(now_stamp)));
    root.insert(
        "scenario".into(),
        Value::String(scenario.name.clone().unwrap_or_else(|| stem.to_string())),
    );

    let setup = scenario.build_family().and_then(|family| {
        let lb = scenario_lb(scenario, &family)?;
        Ok((family, lb))
    });
    let (family, lb) = match setup {
        Ok(v) => v,
        Err(e) => {
            root.insert("setup_error".into(), error_table(&e).into());
            return RunOutput {
                report: toml::to_string(&root).unwrap_or_default(),
                artifacts: Vec::new(),
                failed_commands: scenario.commands.len().max(1),
            };
        }
    };

    let mut config = Table::new();
    config.insert("norm".into(), Value::String(family.space().norm_kind().name().into()));
    config.insert("dimension".into(), int(family.dimension()));
    config.insert("truncation_of_l1".into(), Value::Boolean(family.space().truncation_of_l1()));
    config.insert("tol".into(), float(tol));
    config.insert("seed".into(), Value::Integer(seed as i64));
    config.insert("unsafe".into(), Value::Boolean(allow_unsafe));
    config.insert("tail_bound_rule".into(), Value::String(TAIL_BOUND_RULE.into()));
    config.insert(
        "fields".into(),
        strings(&family.members().iter().map(|m| m.label().to_string()).collect::<Vec<_>>()),
    );
    root.insert("configuration".into(), config.into());
    root.insert("lb".into(), lb_table(&lb).into());

    let ctx = Context {
        scenario,
        family,
        lb,
        tol,
        seed,
        allow_unsafe,
        stem: stem.to_string(),
    };
    let mut endpoints: Vec<(String, Point)> = Vec::new();
    let mut commands = Vec::new();
    let mut artifacts = Vec::new();
    let mut failed = 0;
    for cmd in &scenario.commands {
        let mut t = Table::new();
        t.insert("label".into(), Value::String(cmd.label.clone()));
        t.insert("kind".into(), Value::String(cmd.kind.name().into()));
        let prepared = prepare(&ctx, cmd, &endpoints);
        match prepared {
            Ok((fam, x, guard)) => {
                t.insert("point".into(), floats(x.as_slice()));
                if let Some(g) = &guard {
                    t.insert("guard".into(), guard_table(g).into());
                }
                match execute(&ctx, cmd, &fam, &x) {
                    Ok(out) => {
                        t.insert("status".into(), Value::String("ok".into()));
                        t.insert("unsafe_override".into(), Value::Boolean(out.unsafe_override));
                        t.insert("results".into(), out.results.into());
                        t.insert("tolerances".into(), out.tolerances.into());
                        if let Some(p) = out.endpoint {
                            endpoints.push((cmd.label.clone(), p));
                        }
                        if let Some(a) = out.artifact {
                            artifacts.push(a);
                        }
                    }
                    Err(e) => {
                        failed += 1;
                        t.insert("status".into(), Value::String("error".into()));
                        t.insert("error".into(), error_table(&e).into());
                    }
                }
            }
            Err(e) => {
                failed += 1;
                t.insert("status".into(), Value::String("error".into()));
                t.insert("error".into(), error_table(&e).into());
            }
        }
        commands.push(Value::Table(t));
    }
    root.insert("commands".into(), Value::Array(commands));
    root.insert("failed_commands".into(), int(failed));
    RunOutput {
        report: toml::to_string(&root).expect("report tables serialize"),
        artifacts,
        failed_commands: failed,
    }
}

fn error_table(e: &Error) -> Table {
    let mut t = Table::new();
    t.insert("kind".into(), Value::String(e.kind().into()));
    t.insert("message".into(), Value::String(e.to_string()));
    t
}

/// Runs the scenario and writes `<stem>.report.toml` plus any point clouds into `dir`.
pub fn run_to_dir(scenario: &Scenario, stem: &str, opts: &RunOptions, dir: &Path) -> Result<(RunOutput, Vec<PathBuf>)> {
    std::fs::create_dir_all(dir)?;
    let out = run(scenario, stem, opts);
    let mut written = Vec::new();
    let report_path = dir.join(format!("{stem}.report.toml"));
    std::fs::write(&report_path, &out.report)?;
    written.push(report_path);
    for a in &out.artifacts {
        let p = dir.join(&a.file_name);
        std::fs::write(&p, &a.contents)?;
        written.push(p);
    }
    Ok((out, written))
}

fn command_family(ctx: &Context, cmd: &CommandSpec) -> Result<FieldFamily> {
    match &cmd.members {
        Some(names) => {
            let idx = names
                .iter()
                .map(|n| {
                    ctx.family
                        .index_of(n)
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown field `{n}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            ctx.family.subfamily(&idx)
        }
        None => Ok(ctx.family.clone()),
    }
}

fn flow_control_of(cmd: &CommandSpec) -> Result<(Control, f64, f64)> {
    let t0 = cmd.t0.unwrap_or(0.0);
    let pieces = cmd
        .pieces
        .iter()
        .flatten()
        .map(|p| Ok((p.duration, L1Coefficients::finite(p.coeffs.iter().copied())?)))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = pieces.iter().map(|p| p.0).sum();
    Ok((Control::sequence(t0, pieces)?, t0, total))
}

/// Family, point and the guard echoed for the command.
fn prepare(ctx: &Context, cmd: &CommandSpec, endpoints: &[(String, Point)]) -> Result<(FieldFamily, Point, Option<ExistenceCertificate>)> {
    let fam = command_family(ctx, cmd)?;
    let x = command_point(cmd, endpoints, &ctx.lb.region.center)?;
    fam.space().check_point(&x)?;
    let guard = match cmd.kind {
        CommandKind::Flow => {
            let (u, _, total) = flow_control_of(cmd)?;
            check_existence(&fam, &ctx.lb, &u, &x, total).ok()
        }
        CommandKind::Compose | CommandKind::Invert => composition_guard(&fam, &ctx.lb, &cmd.tau_coefficients()?, &x).ok(),
        CommandKind::Slice => {
            let axis = cmd.axes.as_ref().and_then(|a| a.first().copied()).unwrap_or(0);
            let tau = L1Coefficients::finite([(axis, cmd.rho.unwrap_or(0.0))])?;
            composition_guard(&fam, &ctx.lb, &tau, &x).ok()
        }
        _ => composition_guard(&fam, &ctx.lb, &L1Coefficients::zero(), &x).ok(),
    };
    Ok((fam, x, guard))
}

fn flow_config(ctx: &Context, cmd: &CommandSpec) -> FlowConfig {
    FlowConfig::with_tol(cmd.tol.unwrap_or(ctx.tol))
        .unsafe_override(cmd.allow_unsafe.unwrap_or(ctx.allow_unsafe))
        .recording(false)
}

fn execute(ctx: &Context, cmd: &CommandSpec, fam: &FieldFamily, x: &Point) -> Result<Outcome> {
    let cfg = flow_config(ctx, cmd);
    let mut out = Outcome::new();
    match cmd.kind {
        CommandKind::Flow => {
            let (u, t0, total) = flow_control_of(cmd)?;
            let var = cmd.variational.unwrap_or(false);
            let r = flow_control(fam, &ctx.lb, &u, x, t0, total, &cfg.variational(var))?;
            out.unsafe_override = r.unsafe_override;
            let res = &mut out.results;
            res.insert("endpoint".into(), floats(r.endpoint.as_slice()));
            res.insert("duration".into(), float(total));
            res.insert("control_norm_inf".into(), float(u.norm_inf()));
            res.insert("control_norm_1".into(), float(u.norm_1()));
            res.insert("steps_taken".into(), int(r.steps_taken));
            res.insert("rejected_steps".into(), int(r.rejected_steps));
            res.insert("est_local_error".into(), float(r.est_local_error));
            if let Some(v) = &r.final_variational {
                let rows: Vec<Value> = (0..v.nrows())
                    .map(|i| floats(&v.row(i).iter().copied().collect::<Vec<_>>()))
                    .collect();
                res.insert("variational".into(), Value::Array(rows));
            }
            out.tolerances.insert("endpoint_per_unit_time".into(), float(cfg.tol));
            out.endpoint = Some(r.endpoint);
        }
        CommandKind::Compose | CommandKind::Invert => {
            let tau = cmd.tau_coefficients()?;
            let inverse = cmd.kind == CommandKind::Invert;
            let r = match (cmd.truncation, inverse) {
                (Some(n), false) => compose_flows_truncated(fam, &ctx.lb, &tau, n, x, &cfg)?,
                (Some(n), true) => compose_inverse_truncated(fam, &ctx.lb, &tau, n, x, &cfg)?,
                (None, false) => compose_flows(fam, &ctx.lb, &tau, x, &cfg)?,
                (None, true) => compose_inverse(fam, &ctx.lb, &tau, x, &cfg)?,
            };
            let seq = compose_sequential(fam, &r.word, x, &cfg)?;
            out.unsafe_override = r.unsafe_override;
            let res = &mut out.results;
            res.insert("endpoint".into(), floats(r.endpoint.as_slice()));
            res.insert("truncation_n".into(), int(r.truncation_n));
            res.insert("tail_error_bound".into(), float(r.tail_error_bound));
            res.insert("tail_bound_rule".into(), Value::String(TAIL_BOUND_RULE.into()));
            res.insert("word".into(), word_value(&r.word));
            res.insert("word_length".into(), float(r.word_length()));
            res.insert("sequential_path_gap".into(), float((&seq - &r.endpoint).amax()));
            out.tolerances.insert("endpoint_per_unit_time".into(), float(cfg.tol));
            out.tolerances.insert("sequential_path_gap".into(), float(10.0 * cfg.tol));
            out.endpoint = Some(r.endpoint);
        }
        CommandKind::Slice => {
            let axes = cmd.axes.clone().unwrap_or_default();
            let rho = cmd.rho.unwrap_or(0.0);
            let s = slice(fam, &ctx.lb, x, rho, cmd.grid.unwrap_or(DEFAULT_SLICE_GRID), &axes, &cfg)?;
            let res = &mut out.results;
            res.insert("axes".into(), ints(&s.axes));
            res.insert("rho".into(), float(s.rho));
            res.insert("guard_radius".into(), float(s.guard_radius));
            res.insert("points".into(), int(s.points.len()));
            res.insert("beyond_guard".into(), int(s.beyond_guard.iter().filter(|&&b| b).count()));
            res.insert("jacobian_rank".into(), int(s.jacobian_rank));
            out.tolerances.insert("point_per_unit_time".into(), float(cfg.tol));
            let file_name = format!("{}.{}.csv", ctx.stem, cmd.label);
            let pre_cols: Vec<String> = (0..axes.len()).map(|a| format!("w{a}")).collect();
            let rows: Vec<(Vec<String>, &Point)> = s
                .params
                .iter()
                .zip(&s.points)
                .map(|(w, p)| (w.iter().map(|&v| fmt_coord(v)).collect(), p))
                .collect();
            let flags: Vec<Vec<String>> = s.beyond_guard.iter().map(|b| vec![b.to_string()]).collect();
            let csv = point_csv(&pre_cols, &rows, fam.dimension(), &["beyond_guard".to_string()], &flags);
            out.results.insert("cloud_file".into(), Value::String(file_name.clone()));
            out.artifact = Some(Artifact {
                file_name,
                contents: csv,
            });
        }
        CommandKind::BracketChain => {
            let chain = bracket_chain(fam, x, cmd.k_max.unwrap_or(DEFAULT_K_MAX))?;
            let res = &mut out.results;
            res.insert("rank_profile".into(), ints(&chain.rank_profile));
            let sizes: Vec<usize> = chain.generations.iter().map(|g| g.vectors.len()).collect();
            res.insert("generation_sizes".into(), ints(&sizes));
            if let Some(k) = chain.saturation(fam.dimension()) {
                res.insert("saturation_k".into(), int(k));
            }
            out.tolerances.insert("rank_relative".into(), float(crate::linalg::RANK_RTOL));
        }
        CommandKind::CertifyHprime => {
            let region = Ball::in_space(fam.space(), x.clone(), cmd.radius.unwrap_or(DEFAULT_CERT_RADIUS))?;
            let tol = cmd.tol.unwrap_or(DEFAULT_CERT_TOL);
            let r = certify_h_prime(fam, &region, cmd.grid.unwrap_or(DEFAULT_CERT_GRID), tol)?;
            let res = &mut out.results;
            res.insert("certified".into(), Value::Boolean(r.certified));
            res.insert("bound_c".into(), float(r.bound_c));
            res.insert("max_residual".into(), float(r.max_residual));
            res.insert("grid_points".into(), int(r.grid.len()));
            res.insert(
                "rank_deficient_points".into(),
                int(r.rank_deficient.iter().filter(|&&b| b).count()),
            );
            res.insert("note".into(), Value::String(r.note.into()));
            let labels: Vec<String> = fam.members().iter().map(|m| m.label().to_string()).collect();
            let mut pairs = Vec::new();
            for (p, &(l, u)) in r.pairs.iter().enumerate() {
                let mut t = Table::new();
                t.insert("pair".into(), strings(&[labels[l].clone(), labels[u].clone()]));
                let m = fam.len();
                let lo: Vec<f64> = (0..m)
                    .map(|nu| r.coefficients.iter().map(|c| c[p][nu]).fold(f64::INFINITY, f64::min))
                    .collect();
                let hi: Vec<f64> = (0..m)
                    .map(|nu| r.coefficients.iter().map(|c| c[p][nu]).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                let worst = r.residuals.iter().map(|v| v[p]).fold(0.0, f64::max);
                t.insert("coefficient_min".into(), floats(&lo));
                t.insert("coefficient_max".into(), floats(&hi));
                t.insert("max_residual".into(), float(worst));
                pairs.push(Value::Table(t));
            }
            res.insert("pairs".into(), Value::Array(pairs));
            out.tolerances.insert("residual_relative".into(), float(tol));
        }
        CommandKind::OrbitSample => {
            let opts = OrbitOptions {
                tol: cfg.tol,
                d_max: cmd.d_max,
                min_word_len: cmd.min_word_len.unwrap_or(1),
                allow_unsafe: cmd.allow_unsafe.unwrap_or(ctx.allow_unsafe),
            };
            let max_len = cmd.max_word_len.unwrap_or(DEFAULT_WORD_LEN);
            let s = orbit_sample(
                fam,
                &ctx.lb,
                x,
                cmd.budget.unwrap_or(1),
                max_len,
                ctx.seed,
                &opts,
            )?;
            // spot-check 5% of the cloud by replaying the stored words
            let stride = 20;
            let mut gap: f64 = 0.0;
            for p in s.cloud.iter().step_by(stride) {
                let q = replay_word(fam, x, &p.word, cfg.tol)?;
                gap = gap.max((q - &p.point).amax());
            }
            let n = fam.dimension();
            let lo: Vec<f64> = (0..n)
                .map(|i| s.cloud.iter().map(|p| p.point[i]).fold(f64::INFINITY, f64::min))
                .collect();
            let hi: Vec<f64> = (0..n)
                .map(|i| s.cloud.iter().map(|p| p.point[i]).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let res = &mut out.results;
            res.insert("cloud_points".into(), int(s.cloud.len()));
            res.insert("budget_used".into(), int(s.budget_used));
            res.insert("truncated_words".into(), int(s.truncated_count()));
            res.insert("unsafe_words".into(), int(s.unsafe_count()));
            out.unsafe_override = s.unsafe_count() > 0;
            res.insert("d_max".into(), float(s.d_max));
            res.insert("min_word_len".into(), int(opts.min_word_len.clamp(1, max_len.max(1))));
            res.insert("max_word_len".into(), int(max_len));
            res.insert("rng_seed".into(), Value::Integer(s.rng_seed as i64));
            res.insert("bbox_min".into(), floats(&lo));
            res.insert("bbox_max".into(), floats(&hi));
            res.insert("replay_max_gap".into(), float(gap));
            out.tolerances.insert("replay_gap".into(), float(10.0 * cfg.tol));
            let file_name = format!("{}.{}.csv", ctx.stem, cmd.label);
            let rows: Vec<(Vec<String>, &Point)> = s.cloud.iter().map(|p| (Vec::new(), &p.point)).collect();
            let extra: Vec<Vec<String>> = (0..s.cloud.len())
                .map(|i| {
                    let mut w = String::new();
                    for (j, (l, t)) in s.labeled_word(i).iter().enumerate() {
                        if j > 0 {
                            w.push(';');
                        }
                        let _ = write!(w, "{l}:{}", fmt_coord(*t));
                    }
                    vec![s.cloud[i].truncated.to_string(), s.cloud[i].unsafe_override.to_string(), w]
                })
                .collect();
            let csv = point_csv(&[], &rows, n, &["truncated".to_string(), "unsafe".to_string(), "word".to_string()], &extra);
            out.results.insert("cloud_file".into(), Value::String(file_name.clone()));
            out.artifact = Some(Artifact {
                file_name,
                contents: csv,
            });
        }
        CommandKind::Verdict => {
            let v = accessibility_verdict(fam, &ctx.lb, x, cmd.k_max.unwrap_or(DEFAULT_K_MAX))?;
            let res = &mut out.results;
            res.insert("kind".into(), Value::String(v.kind.name().into()));
            res.insert("chart_dimension".into(), int(v.chart_dimension));
            res.insert("rank_profile".into(), ints(&v.rank_profile));
            res.insert("limiting_rank".into(), int(v.limiting_rank));
            if let Some(k) = v.saturation_k {
                res.insert("k".into(), int(k));
            }
            if !v.truncation_levels.is_empty() {
                let levels: Vec<Value> = v
                    .truncation_levels
                    .iter()
                    .map(|&(n, r)| Value::Array(vec![int(n), int(r)]))
                    .collect();
                res.insert("truncation_levels".into(), Value::Array(levels));
            }
            if let Some(d) = v.density_residual {
                res.insert("density_residual".into(), float(d));
            }
            out.tolerances.insert("rank_relative".into(), float(crate::linalg::RANK_RTOL));
        }
        CommandKind::CheckLb => {
            let spec = ctx.scenario.lb_spec();
            let order = cmd.order.unwrap_or(spec.order);
            let samples = cmd.samples.unwrap_or(spec.samples);
            let pts = sample_points(&ctx.lb.region, samples, DEFAULT_LB_SEED)?;
            let sampled = estimate_lb_bound_at(fam, &ctx.lb.region, order, &pts, spec.safety)?;
            let res = &mut out.results;
            res.insert("order".into(), int(order));
            res.insert("sampled_bound_k".into(), float(sampled.bound_k));
            res.insert("sampled_max".into(), float(sampled.sampled_max));
            res.insert("samples".into(), int(sampled.samples));
            res.insert("active_bound_k".into(), float(ctx.lb.bound_k));
            res.insert(
                "active_covers_sample".into(),
                Value::Boolean(ctx.lb.bound_k >= sampled.sampled_max),
            );
            out.tolerances.insert("safety".into(), float(spec.safety));
        }
    }
    Ok(out)
}
