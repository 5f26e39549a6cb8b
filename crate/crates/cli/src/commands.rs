use std::path::{Path, PathBuf};

use clap::Args;
use qanneal::bab::{self, BabConfig, BabParams, Table1Config, Variant};
use qanneal::evolution::{self, sample_schedule, EvolveOptions, PiecewiseConstant, Schedule};
use qanneal::hamiltonian::{build_operators, ground_energy, spectral_profile, symmetric_sector, OperatorPair};
use qanneal::instances::{appendix_d_instance, load_instance, random_instance, save_instance, ProblemInstance};
use qanneal::near_adiabatic::{leakage_scaling_experiment, SpectralFunctions, TwoLevelOptions};
use qanneal::optimal_control::{descend, detect_bab, oscillation_phase_check, DescentConfig, DEFAULT_EPS_BANG};
use qanneal::qaoa::{bootstrap_sweep, extract_curve, optimize_qaoa, QaoaAngles, QaoaConfig, QaoaCurve};
use qanneal::trotter::{commutator_norm, epsilon_scan, scan_p, TrotterConfig};
use qanneal::{xcheck, Error, Result};
use serde::{Deserialize, Serialize};

use crate::output::{num, to_json, write_text, Run, Table};
use crate::InstanceArg;

type Outcome = Result<bool>;

fn bad(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub fn resolve_instance(spec: &str) -> Result<ProblemInstance> {
    match spec.strip_prefix("builtin:") {
        Some("appendix-d") => Ok(appendix_d_instance()),
        Some(other) => Err(bad(format!("unknown builtin instance '{other}'"))),
        None => load_instance(spec),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{} line {} column {}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

fn sector(instance: &ProblemInstance) -> Result<OperatorPair> {
    Ok(symmetric_sector(&build_operators(instance)?)?.operators)
}

fn start(argv: Vec<String>, instance: Option<&ProblemInstance>, config: &impl std::fmt::Debug) -> Run {
    let mut run = Run::start(argv);
    run.instance_digest = instance.map(ProblemInstance::digest);
    run.config = format!("{config:?}");
    run
}

#[derive(Args, Debug)]
pub struct GenInstance {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn gen_instance(a: GenInstance, argv: Vec<String>) -> Outcome {
    let inst = random_instance(a.n, a.seed)?;
    save_instance(&inst, &a.out)?;
    let mut run = start(argv, Some(&inst), &a);
    run.seeds = vec![a.seed];
    run.finish(Some(&a.out))?;
    Ok(true)
}

#[derive(Args, Debug)]
pub struct ShowInstance {
    /// Builtin instance name.
    #[arg(long, conflicts_with = "instance")]
    builtin: Option<String>,
    /// Instance JSON path.
    #[arg(long)]
    instance: Option<String>,
}

pub fn show_instance(a: ShowInstance, _argv: Vec<String>) -> Outcome {
    let inst = match (&a.builtin, &a.instance) {
        (Some(b), _) => resolve_instance(&format!("builtin:{b}"))?,
        (None, Some(p)) => resolve_instance(p)?,
        (None, None) => appendix_d_instance(),
    };
    write_text(None, &(inst.to_json() + "\n"))?;
    eprintln!("digest {}  ground energy {}", inst.digest(), num(ground_energy(&inst)));
    Ok(true)
}

#[derive(Args, Debug)]
pub struct Spectrum {
    #[command(flatten)]
    instance: InstanceArg,
    /// Number of equally spaced u values on [0, 1].
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Eigenvalue columns to emit (default: the whole sector).
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn spectrum(a: Spectrum, argv: Vec<String>) -> Outcome {
    if a.grid < 2 {
        return Err(bad("--grid needs at least 2 points"));
    }
    let inst = resolve_instance(&a.instance.instance)?;
    let pair = sector(&inst)?;
    let grid: Vec<f64> = (0..a.grid).map(|i| i as f64 / (a.grid - 1) as f64).collect();
    let slices = spectral_profile(&pair, &grid)?;
    let k = a.levels.unwrap_or(pair.dim()).min(pair.dim());
    let mut header = vec!["u".to_string()];
    header.extend((0..k).map(|i| format!("lambda{i}")));
    header.extend(["gap", "gamma_me", "kappa0", "kappa1"].map(String::from));
    let mut table = Table::new(header);
    for s in &slices {
        let mut row = vec![s.u];
        row.extend(s.lambdas.iter().take(k));
        row.extend([s.gap, s.gamma_me, s.kappa0, s.kappa1]);
        table.push(row);
    }
    table.emit(a.out.as_deref())?;
    start(argv, Some(&inst), &a).finish(a.out.as_deref())?;
    Ok(true)
}

/// CSV with header `t,u`: each row opens a step, the last row closes the final one.
pub fn read_schedule(path: &Path) -> Result<Schedule> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let s: Schedule = read_json(path)?;
        s.validate()?;
        return Ok(s);
    }
    let parse_err = |line: usize, message: String| Error::Parse { location: format!("{} row {line}", path.display()), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_err(0, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    if header.len() < 2 || &header[0] != "t" || &header[1] != "u" {
        return Err(parse_err(0, "expected header 't,u'".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(i + 1, e.to_string()))?;
        let field = |j: usize| -> Result<f64> {
            rec.get(j).unwrap_or("").trim().parse().map_err(|e: std::num::ParseFloatError| parse_err(i + 1, e.to_string()))
        };
        rows.push((field(0)?, field(1)?));
    }
    if rows.len() < 2 || rows[0].0 != 0.0 {
        return Err(parse_err(1, "need at least two rows starting at t = 0".into()));
    }
    let t_f = rows.last().unwrap().0;
    let steps = rows.len() - 1;
    let dt = t_f / steps as f64;
    for (k, (t, _)) in rows.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * t_f.max(1.0) {
            return Err(parse_err(k + 1, format!("step edges must be uniform; expected t = {}", k as f64 * dt)));
        }
    }
    let s: Schedule = PiecewiseConstant { t_f, values: rows[..steps].iter().map(|r| r.1).collect() }.into();
    s.validate()?;
    Ok(s)
}

#[derive(Args, Debug)]
pub struct Evolve {
    #[command(flatten)]
    instance: InstanceArg,
    /// Schedule as CSV (`t,u`) or JSON.
    #[arg(long)]
    schedule: PathBuf,
    /// Largest propagation step.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Per-step trace CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Summary JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvolveSummary {
    final_energy: f64,
    ground_energy: f64,
    final_norm: f64,
    final_ground_population: f64,
    clamp_count: usize,
    steps: usize,
}

fn trace_table(trace: &evolution::EvolutionTrace) -> Table {
    let mut t = Table::new(["t", "u", "energy", "norm", "pop0", "pop1", "gap", "gamma_me"]);
    for k in 0..trace.times.len() {
        t.push([
            trace.times[k],
            trace.controls[k],
            trace.energy[k],
            trace.norm[k],
            trace.pop0[k],
            trace.pop1[k],
            trace.gap[k],
            trace.gamma_me[k],
        ]);
    }
    t
}

pub fn evolve(a: Evolve, argv: Vec<String>) -> Outcome {
    if !(a.dt > 0.0) {
        return Err(bad("--dt must be positive"));
    }
    let inst = resolve_instance(&a.instance.instance)?;
    let schedule = read_schedule(&a.schedule)?;
    let pair = build_operators(&inst)?;
    let trace = evolution::evolve_with(&pair, &schedule, &EvolveOptions { dt_max: a.dt, populations: true }, &pair.initial_state())?;
    if let Some(p) = &a.trace_out {
        trace_table(&trace).emit(Some(p))?;
    }
    let summary = EvolveSummary {
        final_energy: *trace.energy.last().unwrap(),
        ground_energy: ground_energy(&inst),
        final_norm: *trace.norm.last().unwrap(),
        final_ground_population: *trace.pop0.last().unwrap(),
        clamp_count: trace.clamp_count,
        steps: trace.times.len() - 1,
    };
    if trace.clamp_count > 0 {
        eprintln!("warning: {} schedule samples were clamped into [0, 1]", trace.clamp_count);
    }
    write_text(a.out.as_deref(), &to_json(&summary))?;
    start(argv, Some(&inst), &a).finish(a.out.as_deref().or(a.trace_out.as_deref()))?;
    Ok(true)
}

#[derive(Args, Debug)]
pub struct Qaoa {
    #[command(flatten)]
    instance: InstanceArg,
    /// Depth; with --p-max, the start of a bootstrapped sweep.
    #[arg(long)]
    p: usize,
    #[arg(long)]
    p_max: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Per-run objective-evaluation budget.
    #[arg(long, default_value_t = 40_000)]
    max_evals: usize,
    #[arg(long)]
    fixed_layer_time: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
pub struct QaoaRecord {
    pub p: usize,
    pub angles: QaoaAngles,
    pub energy: f64,
    pub total_time: f64,
    pub curve: Option<QaoaCurve>,
    pub converged: bool,
}

impl QaoaRecord {
    fn new(r: &qanneal::qaoa::QaoaResult) -> Self {
        Self {
            p: r.angles.p(),
            total_time: r.angles.total_time(),
            curve: extract_curve(&r.angles).ok(),
            angles: r.angles.clone(),
            energy: r.energy,
            converged: r.converged,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct QaoaOutput {
    #[serde(flatten)]
    pub best: QaoaRecord,
    #[serde(default)]
    pub sweep: Vec<QaoaRecord>,
}

pub fn qaoa(a: Qaoa, argv: Vec<String>) -> Outcome {
    if a.p == 0 || a.p_max.is_some_and(|m| m < a.p) {
        return Err(bad("need 1 <= p <= p-max"));
    }
    let inst = resolve_instance(&a.instance.instance)?;
    let pair = sector(&inst)?;
    let cfg = QaoaConfig {
        restarts: a.restarts.max(1),
        seed: a.seed,
        max_evals: a.max_evals,
        fixed_layer_time: a.fixed_layer_time,
        ..Default::default()
    };
    let results = match a.p_max {
        Some(m) => bootstrap_sweep(&pair, a.p, m, &cfg)?,
        None => vec![optimize_qaoa(&pair, a.p, &cfg)?],
    };
    let mut run = start(argv, Some(&inst), &a);
    run.seeds = vec![a.seed];
    for r in &results {
        run.flag(&format!("qaoa p={}", r.angles.p()), r.converged);
    }
    let best = QaoaRecord::new(results.last().unwrap());
    let sweep = if results.len() > 1 { results.iter().map(QaoaRecord::new).collect() } else { Vec::new() };
    write_text(a.out.as_deref(), &to_json(&QaoaOutput { best, sweep }))?;
    run.finish(a.out.as_deref())?;
    Ok(run.all_converged())
}

#[derive(Args, Debug)]
pub struct Optimal {
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long, conflicts_with = "tf_from_qaoa")]
    tf: Option<f64>,
    /// Take t_f from the total time in a `qaoa` output file.
    #[arg(long)]
    tf_from_qaoa: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    /// `linear` or `bab:<json from the bab command>`.
    #[arg(long, default_value = "linear")]
    init: String,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct OptimalOutput {
    t_f: f64,
    energy: f64,
    iterations: usize,
    converged: bool,
    decomposition: qanneal::optimal_control::BabDecomposition,
    phase: Option<qanneal::optimal_control::PhaseReport>,
    schedule: PiecewiseConstant,
}

pub fn optimal(a: Optimal, argv: Vec<String>) -> Outcome {
    if a.grid == 0 {
        return Err(bad("--grid must be positive"));
    }
    let inst = resolve_instance(&a.instance.instance)?;
    let pair = sector(&inst)?;
    let tf_given = match (&a.tf, &a.tf_from_qaoa) {
        (Some(t), _) => Some(*t),
        (None, Some(p)) => Some(read_json::<QaoaOutput>(p)?.best.total_time),
        _ => None,
    };
    let start_schedule = if a.init == "linear" {
        let t = tf_given.ok_or_else(|| bad("--tf or --tf-from-qaoa is required with --init linear"))?;
        if !(t > 0.0) {
            return Err(bad("t_f must be positive"));
        }
        PiecewiseConstant::linear_ramp(t, a.grid)
    } else if let Some(path) = a.init.strip_prefix("bab:") {
        let rec: BabOutput = read_json(Path::new(path))?;
        let params = match tf_given {
            Some(t) => BabParams {
                gamma_tilde: rec.params.gamma_tilde * t / rec.params.total_time,
                beta_tilde: rec.params.beta_tilde * t / rec.params.total_time,
                omega: rec.params.omega * rec.params.total_time / t,
                total_time: t,
                ..rec.params
            },
            None => rec.params,
        };
        sample_schedule(&bab::construct_ansatz(&rec.curve, &params)?, a.grid)?.0
    } else {
        return Err(bad(format!("--init must be 'linear' or 'bab:<file>', got '{}'", a.init)));
    };
    let cfg = DescentConfig { max_iters: a.iters, ..Default::default() };
    let res = descend(&pair, &start_schedule, &pair.initial_state(), &cfg)?;
    let decomposition = detect_bab(&res.schedule, DEFAULT_EPS_BANG);
    let sched: Schedule = res.schedule.clone().into();
    let trace = evolution::evolve(&pair, &sched, res.schedule.step(), &pair.initial_state())?;
    let phase = oscillation_phase_check(&res.schedule, &trace).ok();
    if let Some(p) = &a.trace_out {
        trace_table(&trace).emit(Some(p))?;
    }
    let out = OptimalOutput {
        t_f: res.schedule.t_f,
        energy: res.energy,
        iterations: res.iterations,
        converged: res.converged,
        decomposition,
        phase,
        schedule: res.schedule,
    };
    write_text(a.out.as_deref(), &to_json(&out))?;
    let mut run = start(argv, Some(&inst), &a);
    run.flag("descent", res.converged);
    run.finish(a.out.as_deref())?;
    Ok(run.all_converged())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| bad(format!("bad number '{x}': {e}")))).collect()
}

#[derive(Args, Debug)]
pub struct NearAdiabatic {
    #[command(flatten)]
    instance: InstanceArg,
    /// Reference point u0 of the linear base ramp.
    #[arg(long, default_value_t = 0.5)]
    u0: f64,
    /// Also integrate with the perturbative oscillation and its doubled amplitude.
    #[arg(long)]
    apply_correction: bool,
    /// Comma-separated ramp rates.
    #[arg(long, default_value = "1e-4,1.8e-4,3.2e-4,5.6e-4,1e-3,1.8e-3,3.2e-3,5.6e-3,1e-2")]
    udot_scan: String,
    #[arg(long, default_value_t = 1e-13)]
    rtol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct FitSummary {
    u0_ref: f64,
    slope_uncorrected: f64,
    r2_uncorrected: f64,
    slope_corrected: Option<f64>,
    r2_corrected: Option<f64>,
    slope_rebalanced: Option<f64>,
    r2_rebalanced: Option<f64>,
    inconclusive: bool,
}

pub fn near_adiabatic(a: NearAdiabatic, argv: Vec<String>) -> Outcome {
    let (lo, hi) = (0.1, 0.9);
    if !(a.u0 > lo + 0.05 && a.u0 < hi - 0.05) {
        return Err(bad(format!("--u0 must lie in ({}, {})", lo + 0.05, hi - 0.05)));
    }
    let rates = parse_list(&a.udot_scan)?;
    let inst = resolve_instance(&a.instance.instance)?;
    let pair = sector(&inst)?;
    let grid: Vec<f64> = (0..=300).map(|i| lo + (hi - lo) * i as f64 / 300.0).collect();
    let funcs = SpectralFunctions::from_pair(&pair, &grid)?;
    let opts = TwoLevelOptions { rtol: a.rtol, atol: a.rtol * 1e-2, ..Default::default() };
    let exp = leakage_scaling_experiment(&funcs, a.u0, &rates, &opts)?;
    let mut header = vec!["u0_dot", "period", "leakage_uncorrected", "theta0_uncorrected"];
    if a.apply_correction {
        header.extend(["leakage_corrected", "theta0_corrected", "leakage_rebalanced", "theta0_rebalanced"]);
    }
    let mut table = Table::new(header);
    for r in &exp.runs {
        let mut row = vec![r.u0_dot, r.period, r.leakage_uncorrected, r.theta0_uncorrected];
        if a.apply_correction {
            row.extend([r.leakage_corrected, r.theta0_corrected, r.leakage_rebalanced, r.theta0_rebalanced]);
        }
        table.push(row);
    }
    table.emit(a.out.as_deref())?;
    let c = a.apply_correction;
    let fit = FitSummary {
        u0_ref: exp.u0_ref,
        slope_uncorrected: exp.uncorrected.slope,
        r2_uncorrected: exp.uncorrected.r2,
        slope_corrected: c.then_some(exp.corrected.slope),
        r2_corrected: c.then_some(exp.corrected.r2),
        slope_rebalanced: c.then_some(exp.rebalanced.slope),
        r2_rebalanced: c.then_some(exp.rebalanced.r2),
        inconclusive: exp.inconclusive,
    };
    eprint!("{}", to_json(&fit));
    let mut run = start(argv, Some(&inst), &a);
    run.flag("fit", !exp.inconclusive);
    run.finish(a.out.as_deref())?;
    Ok(run.all_converged())
}

#[derive(Args, Debug)]
pub struct Trotter {
    /// Instance for the commutator norm.
    #[arg(long, conflicts_with = "norm")]
    instance: Option<String>,
    /// Commutator norm ‖[B, C]‖ given directly.
    #[arg(long)]
    norm: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    tf: f64,
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    #[arg(long, default_value_t = 0.3)]
    c0: f64,
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Smallest slice count; with --eps-scan, the fixed slice count.
    #[arg(long, default_value_t = 4)]
    p_min: usize,
    #[arg(long, default_value_t = 40)]
    p_max: usize,
    /// Offsets ε = Δt − τ as `start:stop:count`.
    #[arg(long)]
    eps_scan: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad(format!("expected start:stop:count, got '{s}'")));
    }
    let a: f64 = parts[0].parse().map_err(|_| bad(format!("bad start '{}'", parts[0])))?;
    let b: f64 = parts[1].parse().map_err(|_| bad(format!("bad stop '{}'", parts[1])))?;
    let n: usize = parts[2].parse().map_err(|_| bad(format!("bad count '{}'", parts[2])))?;
    if n < 2 {
        return Err(bad("count must be at least 2"));
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

pub fn trotter(a: Trotter, argv: Vec<String>) -> Outcome {
    let (norm, inst) = match (&a.instance, a.norm) {
        (Some(spec), _) => {
            let inst = resolve_instance(spec)?;
            (commutator_norm(&build_operators(&inst)?), Some(inst))
        }
        (None, Some(n)) => (n, None),
        (None, None) => return Err(bad("one of --instance or --norm is required")),
    };
    if a.p_min == 0 || a.p_max < a.p_min {
        return Err(bad("need 1 <= p-min <= p-max"));
    }
    let template = TrotterConfig::with_default_ramp(a.tf, a.p_min, a.tau, a.c0, a.phi, norm);
    let table = match &a.eps_scan {
        Some(spec) => {
            let rows = epsilon_scan(&template, &parse_range(spec)?)?;
            let mut t = Table::new(["epsilon", "delta_t", "bound", "base", "oscillation", "cross", "quadratic"]);
            for r in rows {
                t.push([r.epsilon, r.delta_t, r.bound, r.terms.base, r.terms.oscillation, r.terms.cross, r.terms.quadratic]);
            }
            t
        }
        None => {
            let rows = scan_p(&template, a.p_min..=a.p_max)?;
            let mut t = Table::new(["p", "delta_t", "bound_osc", "bound_no_osc", "relative_enhancement"]);
            for r in rows {
                t.push_raw(vec![
                    r.p.to_string(),
                    num(r.delta_t),
                    num(r.bound_osc),
                    num(r.bound_no_osc),
                    num(r.relative_enhancement()),
                ]);
            }
            t
        }
    };
    table.emit(a.out.as_deref())?;
    start(argv, inst.as_ref(), &a).finish(a.out.as_deref())?;
    Ok(true)
}

#[derive(Args, Debug)]
pub struct Bab {
    #[command(flatten)]
    instance: InstanceArg,
    /// Output of the `qaoa` command.
    #[arg(long)]
    qaoa: PathBuf,
    /// fixed, free, per-layer or var-length.
    #[arg(long, default_value = "free")]
    variant: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    restarts: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
pub struct BabOutput {
    pub params: BabParams,
    pub energy: f64,
    pub qaoa_energy: f64,
    pub t_qaoa: f64,
    pub converged: bool,
    pub clamp_fraction: f64,
    pub degenerate: bool,
    pub curve: QaoaCurve,
}

pub fn bab(a: Bab, argv: Vec<String>) -> Outcome {
    let variant = Variant::parse(&a.variant)?;
    let inst = resolve_instance(&a.instance.instance)?;
    let pair = sector(&inst)?;
    let q: QaoaOutput = read_json(&a.qaoa)?;
    let curve = extract_curve(&q.best.angles)?;
    let t_qaoa = q.best.angles.total_time();
    let cfg = BabConfig { restarts: a.restarts.max(1), seed: a.seed, ..Default::default() };
    let r = bab::optimize_bab(&pair, &curve, t_qaoa, variant, &cfg)?;
    if r.degenerate {
        eprintln!("warning: every restart clamps more than 20% of the anneal");
    }
    let out = BabOutput {
        params: r.params,
        energy: r.energy,
        qaoa_energy: q.best.energy,
        t_qaoa,
        converged: r.converged,
        clamp_fraction: r.clamp_fraction,
        degenerate: r.degenerate,
        curve,
    };
    write_text(a.out.as_deref(), &to_json(&out))?;
    let mut run = start(argv, Some(&inst), &a);
    run.seeds = vec![a.seed];
    run.flag("bab", r.converged);
    run.finish(a.out.as_deref())?;
    Ok(run.all_converged())
}

#[derive(Args, Debug)]
pub struct Table1 {
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long, default_value_t = 6)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gradient-descent iterations per start.
    #[arg(long, default_value_t = 400)]
    iters: usize,
    #[arg(long, default_value = "free")]
    variant: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Table1Output {
    energies: Vec<(String, f64)>,
    ordering_holds: bool,
    #[serde(flatten)]
    report: bab::Table1Report,
}

pub fn table1(a: Table1, argv: Vec<String>) -> Outcome {
    let inst = resolve_instance(&a.instance.instance)?;
    let mut cfg = Table1Config { variant: Variant::parse(&a.variant)?, ..Default::default() };
    cfg.descent.max_iters = a.iters;
    let report = bab::table1_experiment(&inst, a.p, a.seed, &cfg)?;
    let energies = report.ladder().iter().rev().map(|(k, v)| (k.to_string(), *v)).collect();
    let mut run = start(argv, Some(&inst), &a);
    run.seeds = vec![a.seed];
    run.flag("qaoa", report.flags.qaoa_converged);
    run.flag("bab", report.flags.bab_converged);
    run.flag("descent", report.flags.descent_converged);
    let out = Table1Output { energies, ordering_holds: report.ordering_holds, report };
    write_text(a.out.as_deref(), &to_json(&out))?;
    run.finish(a.out.as_deref())?;
    Ok(run.all_converged())
}

#[derive(Args, Debug)]
pub struct Xcheck {
    #[command(flatten)]
    instance: InstanceArg,
    /// Total time of the linear-ramp reference evolution.
    #[arg(long, default_value_t = 2.0)]
    tf: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct XcheckOutput {
    ground_energy: f64,
    oracle_ground_energy: f64,
    commutator_norm: f64,
    linear_ramp_energy: f64,
    /// Present when the dense propagator oracle accepts the dimension.
    oracle_linear_ramp_energy: Option<f64>,
}

pub fn xcheck(a: Xcheck, argv: Vec<String>) -> Outcome {
    let inst = resolve_instance(&a.instance.instance)?;
    let pair = build_operators(&inst)?;
    let ramp: Schedule = PiecewiseConstant::linear_ramp(a.tf, 200).into();
    let psi = pair.initial_state();
    let fast = evolution::final_energy(&pair, &ramp, a.tf / 200.0)?;
    let oracle = match xcheck::oracle_expm_evolve(&pair, &ramp, 1, &psi) {
        Ok(state) => Some(xcheck::oracle_energy(&pair, &state).0),
        Err(Error::Resource(_)) => None,
        Err(e) => return Err(e),
    };
    let out = XcheckOutput {
        ground_energy: ground_energy(&inst),
        oracle_ground_energy: xcheck::oracle_ground_energy(&inst)?,
        commutator_norm: commutator_norm(&pair),
        linear_ramp_energy: fast,
        oracle_linear_ramp_energy: oracle,
    };
    write_text(a.out.as_deref(), &to_json(&out))?;
    start(argv, Some(&inst), &a).finish(a.out.as_deref())?;
    Ok(true)
}
