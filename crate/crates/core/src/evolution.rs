//! Control schedules and exact state-vector evolution under
//! `H(t) = u(t) B + (1 - u(t)) C`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{symmetric_sector, OperatorPair, Space};
use crate::propagator::{apply_exp, apply_mixer_bang, apply_problem_bang};
use crate::qaoa::QaoaAngles;

/// Default number of steps per unit schedule when `dt_max` is not given.
pub const DEFAULT_STEPS: usize = 2000;

/// Which operator a bang switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    /// `u = 0`, pure `C`.
    Problem,
    /// `u = 1`, pure `B`.
    Mixer,
}

impl Level {
    pub fn u(self) -> f64 {
        match self {
            Level::Problem => 0.0,
            Level::Mixer => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bang {
    pub level: Level,
    pub duration: f64,
}

/// `u_k` on `N` equal steps covering `[0, t_f]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub t_f: f64,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn step(&self) -> f64 {
        self.t_f / self.values.len() as f64
    }

    /// Linear ramp `u = 1 - t/t_f` sampled at step midpoints.
    pub fn linear_ramp(t_f: f64, steps: usize) -> Self {
        let values = (0..steps).map(|k| 1.0 - (k as f64 + 0.5) / steps as f64).collect();
        Self { t_f, values }
    }

    pub fn constant(t_f: f64, steps: usize, u: f64) -> Self {
        Self { t_f, values: vec![u; steps] }
    }
}

/// Superposed oscillation `A cos(θ(t) + φ)`.
///
/// `θ(t) = ω t` unless `period_breaks` is non-empty, in which case one full
/// period is completed between each pair of consecutive break times and `ω`
/// only extrapolates outside the breaks. The form `-c₀ sin(ωt + φ')` is the
/// same curve with `φ = φ' + π/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationParams {
    pub amplitude: f64,
    pub angular_frequency: f64,
    pub phase: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub period_breaks: Vec<f64>,
}

impl OscillationParams {
    pub fn none() -> Self {
        Self { amplitude: 0.0, angular_frequency: 1.0, phase: 0.0, period_breaks: Vec::new() }
    }

    fn argument(&self, t: f64) -> f64 {
        let b = &self.period_breaks;
        if b.len() < 2 {
            return self.angular_frequency * t;
        }
        let two_pi = std::f64::consts::TAU;
        if t <= b[0] {
            return self.angular_frequency * (t - b[0]);
        }
        let last = b.len() - 1;
        if t >= b[last] {
            return two_pi * last as f64 + self.angular_frequency * (t - b[last]);
        }
        let k = b.partition_point(|&x| x <= t) - 1;
        two_pi * (k as f64 + (t - b[k]) / (b[k + 1] - b[k]))
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * (self.argument(t) + self.phase).cos()
    }
}

/// Bang of `C`, oscillating anneal along a base curve, bang of `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BabComposite {
    pub gamma_tilde: f64,
    /// Base curve `v(s)` at uniform knots on `[0, 1]`.
    pub base_curve: Vec<f64>,
    pub oscillation: OscillationParams,
    pub beta_tilde: f64,
    pub t_f: f64,
}

impl BabComposite {
    fn interior(&self) -> (f64, f64) {
        (self.gamma_tilde, self.t_f - self.beta_tilde)
    }

    /// `(u(t), clamped)` for `t` in the anneal interior.
    fn interior_value(&self, t: f64) -> (f64, bool) {
        let (a, b) = self.interior();
        let s = if b > a { ((t - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
        let raw = interpolate_uniform(&self.base_curve, s) + self.oscillation.value(t);
        if raw < 0.0 {
            (0.0, true)
        } else if raw > 1.0 {
            (1.0, true)
        } else {
            (raw, false)
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let (a, b) = self.interior();
        if t < a {
            0.0
        } else if t > b {
            1.0
        } else {
            self.interior_value(t).0
        }
    }
}

/// Linear interpolation of values at uniform knots on `[0, 1]`.
pub(crate) fn interpolate_uniform(knots: &[f64], s: f64) -> f64 {
    match knots.len() {
        0 => 0.0,
        1 => knots[0],
        m => {
            let x = s.clamp(0.0, 1.0) * (m - 1) as f64;
            let i = (x.floor() as usize).min(m - 2);
            let f = x - i as f64;
            knots[i] * (1.0 - f) + knots[i + 1] * f
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    PiecewiseConstant(PiecewiseConstant),
    BangSequence { segments: Vec<Bang> },
    BabComposite(BabComposite),
}

impl From<PiecewiseConstant> for Schedule {
    fn from(p: PiecewiseConstant) -> Self {
        Schedule::PiecewiseConstant(p)
    }
}

impl From<BabComposite> for Schedule {
    fn from(b: BabComposite) -> Self {
        Schedule::BabComposite(b)
    }
}

impl Schedule {
    pub fn total_time(&self) -> f64 {
        match self {
            Schedule::PiecewiseConstant(p) => p.t_f,
            Schedule::BangSequence { segments } => segments.iter().map(|s| s.duration).sum(),
            Schedule::BabComposite(b) => b.t_f,
        }
    }

    /// `u(t)`; on piecewise-constant schedules the value of the step containing `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Schedule::PiecewiseConstant(p) => {
                let k = ((t / p.step()).floor().max(0.0) as usize).min(p.values.len() - 1);
                p.values[k]
            }
            Schedule::BangSequence { segments } => {
                let mut start = 0.0;
                for s in segments {
                    if t < start + s.duration {
                        return s.level.u();
                    }
                    start += s.duration;
                }
                segments.last().map_or(0.0, |s| s.level.u())
            }
            Schedule::BabComposite(b) => b.value_at(t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad_time = |x: f64| !x.is_finite() || x < 0.0;
        match self {
            Schedule::PiecewiseConstant(p) => {
                if p.values.is_empty() || bad_time(p.t_f) || p.t_f == 0.0 {
                    return Err(Error::Validation("schedule needs t_f > 0 and at least one step".into()));
                }
                if let Some((k, v)) = p.values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::Validation(format!("u[{k}] = {v} outside [0, 1]")));
                }
            }
            Schedule::BangSequence { segments } => {
                if segments.iter().any(|s| bad_time(s.duration)) {
                    return Err(Error::Validation("bang durations must be finite and >= 0".into()));
                }
            }
            Schedule::BabComposite(b) => {
                if bad_time(b.gamma_tilde) || bad_time(b.beta_tilde) || bad_time(b.t_f) || b.t_f == 0.0 {
                    return Err(Error::Validation("bang lengths and t_f must be finite, t_f > 0".into()));
                }
                if b.gamma_tilde + b.beta_tilde > b.t_f {
                    return Err(Error::Validation(format!(
                        "bangs {} + {} exceed t_f = {}",
                        b.gamma_tilde, b.beta_tilde, b.t_f
                    )));
                }
                if b.base_curve.is_empty() || b.base_curve.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::Validation("base curve must be non-empty with values in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

/// Reduces any schedule to `steps` uniform steps by midpoint sampling.
///
/// Returns the sampled schedule and the number of samples clamped to `[0, 1]`.
pub fn sample_schedule(schedule: &Schedule, steps: usize) -> Result<(PiecewiseConstant, usize)> {
    if steps == 0 {
        return invalid("at least one sample is required");
    }
    let t_f = schedule.total_time();
    if let Schedule::PiecewiseConstant(p) = schedule {
        if p.values.len() == steps {
            return Ok((p.clone(), 0));
        }
    }
    let h = t_f / steps as f64;
    let mut clamps = 0;
    let values = (0..steps)
        .map(|k| {
            let t = (k as f64 + 0.5) * h;
            match schedule {
                Schedule::BabComposite(b) if t >= b.gamma_tilde && t <= b.t_f - b.beta_tilde => {
                    let (v, c) = b.interior_value(t);
                    clamps += c as usize;
                    v
                }
                _ => schedule.value_at(t),
            }
        })
        .collect();
    Ok((PiecewiseConstant { t_f, values }, clamps))
}

#[derive(Debug, Clone, Copy)]
enum StepKind {
    Bang(Level),
    Anneal(f64),
}

#[derive(Debug, Clone, Copy)]
struct Step {
    kind: StepKind,
    dt: f64,
}

impl Step {
    fn u(&self) -> f64 {
        match self.kind {
            StepKind::Bang(l) => l.u(),
            StepKind::Anneal(u) => u,
        }
    }
}

fn anneal_step(u: f64, dt: f64) -> Step {
    let kind = if u == 0.0 {
        StepKind::Bang(Level::Problem)
    } else if u == 1.0 {
        StepKind::Bang(Level::Mixer)
    } else {
        StepKind::Anneal(u)
    };
    Step { kind, dt }
}

fn build_steps(schedule: &Schedule, dt_max: f64) -> Result<(Vec<Step>, usize)> {
    schedule.validate()?;
    if !(dt_max > 0.0) {
        return invalid(format!("dt_max must be positive, got {dt_max}"));
    }
    let mut steps = Vec::new();
    let mut clamps = 0;
    match schedule {
        Schedule::PiecewiseConstant(p) => {
            let h = p.step();
            let m = (h / dt_max).ceil().max(1.0) as usize;
            for &u in &p.values {
                for _ in 0..m {
                    steps.push(anneal_step(u, h / m as f64));
                }
            }
        }
        Schedule::BangSequence { segments } => {
            steps.extend(
                segments
                    .iter()
                    .filter(|s| s.duration > 0.0)
                    .map(|s| Step { kind: StepKind::Bang(s.level), dt: s.duration }),
            );
        }
        Schedule::BabComposite(b) => {
            if b.gamma_tilde > 0.0 {
                steps.push(Step { kind: StepKind::Bang(Level::Problem), dt: b.gamma_tilde });
            }
            let (a, e) = b.interior();
            let len = e - a;
            if len > 0.0 {
                let m = (len / dt_max).ceil().max(1.0) as usize;
                let h = len / m as f64;
                for k in 0..m {
                    let (u, c) = b.interior_value(a + (k as f64 + 0.5) * h);
                    clamps += c as usize;
                    steps.push(anneal_step(u, h));
                }
            }
            if b.beta_tilde > 0.0 {
                steps.push(Step { kind: StepKind::Bang(Level::Mixer), dt: b.beta_tilde });
            }
        }
    }
    Ok((steps, clamps))
}

fn advance(pair: &OperatorPair, step: &Step, state: &mut [Complex64]) {
    match step.kind {
        StepKind::Bang(Level::Problem) => apply_problem_bang(pair, step.dt, state),
        StepKind::Bang(Level::Mixer) => apply_mixer_bang(pair, step.dt, state),
        StepKind::Anneal(u) => apply_exp(pair, u, step.dt, state),
    }
}

fn check_state(pair: &OperatorPair, state: &[Complex64]) -> Result<()> {
    if state.len() != pair.dim() {
        return invalid(format!("state has length {}, operators act on {}", state.len(), pair.dim()));
    }
    let norm = norm(state);
    if (norm - 1.0).abs() > 1e-8 {
        return invalid(format!("initial state has norm {norm}"));
    }
    Ok(())
}

pub fn norm(state: &[Complex64]) -> f64 {
    state.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨ψ|C|ψ⟩`.
pub fn energy(pair: &OperatorPair, state: &[Complex64]) -> f64 {
    state.iter().zip(pair.problem_diagonal()).map(|(a, c)| a.norm_sqr() * c).sum()
}

/// `|⟨a|b⟩|²`.
pub fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub dt_max: f64,
    /// Record instantaneous ground/first-excited amplitudes at every sample.
    pub populations: bool,
}

/// Time series recorded at every propagation step, including `t = 0`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// Control value of the step ending at each sample (the first sample repeats the first step).
    pub controls: Vec<f64>,
    pub energy: Vec<f64>,
    pub norm: Vec<f64>,
    pub pop0: Vec<f64>,
    pub pop1: Vec<f64>,
    /// Amplitudes on the instantaneous eigenstates, sign-continued along the trace.
    #[serde(skip)]
    pub amp0: Vec<Complex64>,
    #[serde(skip)]
    pub amp1: Vec<Complex64>,
    /// Sector gap `Δ(u)` at each sample's control value.
    pub gap: Vec<f64>,
    /// `⟨0|(B − C)|1⟩` in the same sign-continued gauge as the amplitudes.
    pub gamma_me: Vec<f64>,
    pub clamp_count: usize,
    #[serde(skip)]
    pub final_state: Vec<Complex64>,
}

struct EigenTracker {
    sector: Option<crate::hamiltonian::SymmetricSector>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl EigenTracker {
    fn new(pair: &OperatorPair) -> Result<Self> {
        let sector = match pair.space() {
            Space::Full => Some(symmetric_sector(pair)?),
            Space::Symmetric => None,
        };
        Ok(Self { sector, prev: None })
    }

    /// Returns `(⟨0|ψ⟩, ⟨1|ψ⟩, Δ, γ)` at control `u`.
    fn amplitudes(&mut self, pair: &OperatorPair, u: f64, state: &[Complex64]) -> (Complex64, Complex64, f64, f64) {
        let (ops, local) = match &self.sector {
            Some(s) => (&s.operators, s.project(state)),
            None => (pair, state.to_vec()),
        };
        let h: DMatrix<f64> = ops.hamiltonian_dense(u);
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..ops.dim()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let get = |i: usize| -> Vec<f64> {
            if i < idx.len() {
                eig.eigenvectors.column(idx[i]).iter().copied().collect()
            } else {
                vec![0.0; ops.dim()]
            }
        };
        let (mut g, mut e) = (get(0), get(1));
        let align = |v: &mut Vec<f64>, reference: Option<&Vec<f64>>| {
            let flip = match reference {
                Some(r) => v.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() < 0.0,
                None => {
                    let m = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
                    m < 0.0
                }
            };
            if flip {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        };
        align(&mut g, self.prev.as_ref().map(|p| &p.0));
        align(&mut e, self.prev.as_ref().map(|p| &p.1));
        let project = |v: &[f64]| local.iter().zip(v).map(|(a, b)| a * *b).sum::<Complex64>();
        let gap = if idx.len() > 1 { eig.eigenvalues[idx[1]] - eig.eigenvalues[idx[0]] } else { f64::INFINITY };
        let ec: Vec<Complex64> = e.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut de = vec![Complex64::new(0.0, 0.0); ec.len()];
        ops.apply_control_derivative(&ec, &mut de);
        let gamma = g.iter().zip(&de).map(|(a, b)| a * b.re).sum();
        let out = (project(&g), project(&e), gap, gamma);
        self.prev = Some((g, e));
        out
    }
}

/// Evolves `initial_state` under the schedule with steps no longer than
/// `dt_max`, sampling the trace after every step.
///
/// Bangs use exact diagonal-phase and single-qubit-rotation propagators;
/// annealing steps apply `exp(-i H(u_k) Δt_k)` with `u_k` sampled at the
/// step midpoint.
pub fn evolve(
    pair: &OperatorPair,
    schedule: &Schedule,
    dt_max: f64,
    initial_state: &[Complex64],
) -> Result<EvolutionTrace> {
    evolve_with(pair, schedule, &EvolveOptions { dt_max, populations: true }, initial_state)
}

pub fn evolve_with(
    pair: &OperatorPair,
    schedule: &Schedule,
    options: &EvolveOptions,
    initial_state: &[Complex64],
) -> Result<EvolutionTrace> {
    check_state(pair, initial_state)?;
    let (steps, clamp_count) = build_steps(schedule, options.dt_max)?;
    let mut tracker = if options.populations { Some(EigenTracker::new(pair)?) } else { None };
    let mut state = initial_state.to_vec();
    let mut trace = EvolutionTrace { clamp_count, ..Default::default() };
    let mut t = 0.0;
    let mut record = |t: f64, u: f64, state: &[Complex64], trace: &mut EvolutionTrace| {
        trace.times.push(t);
        trace.controls.push(u);
        trace.energy.push(energy(pair, state));
        trace.norm.push(norm(state));
        if let Some(tr) = tracker.as_mut() {
            let (a0, a1, gap, gamma) = tr.amplitudes(pair, u, state);
            trace.gap.push(gap);
            trace.gamma_me.push(gamma);
            trace.amp0.push(a0);
            trace.amp1.push(a1);
            trace.pop0.push(a0.norm_sqr());
            trace.pop1.push(a1.norm_sqr());
        }
    };
    record(0.0, steps.first().map_or(0.0, Step::u), &state, &mut trace);
    for step in &steps {
        advance(pair, step, &mut state);
        t += step.dt;
        record(t, step.u(), &state, &mut trace);
    }
    trace.final_state = state;
    Ok(trace)
}

/// Final state only, without a trace.
pub fn evolve_state(
    pair: &OperatorPair,
    schedule: &Schedule,
    dt_max: f64,
    initial_state: &[Complex64],
) -> Result<(Vec<Complex64>, usize)> {
    check_state(pair, initial_state)?;
    let (steps, clamps) = build_steps(schedule, dt_max)?;
    let mut state = initial_state.to_vec();
    for step in &steps {
        advance(pair, step, &mut state);
    }
    Ok((state, clamps))
}

/// Final `⟨C⟩` starting from the uniform superposition.
pub fn final_energy(pair: &OperatorPair, schedule: &Schedule, dt_max: f64) -> Result<f64> {
    let (state, _) = evolve_state(pair, schedule, dt_max, &pair.initial_state())?;
    Ok(energy(pair, &state))
}

/// Applies `∏_i e^{-iβ_i B} e^{-iγ_i C}`, layer 1 first and `C` first within a layer.
pub fn apply_qaoa(pair: &OperatorPair, angles: &QaoaAngles, initial_state: &[Complex64]) -> Result<Vec<Complex64>> {
    if angles.gammas.iter().chain(&angles.betas).any(|&a| !(a >= 0.0)) {
        return invalid("QAOA angles must be non-negative");
    }
    if initial_state.len() != pair.dim() {
        return invalid("state dimension does not match operators");
    }
    let mut state = initial_state.to_vec();
    for (&g, &b) in angles.gammas.iter().zip(&angles.betas) {
        apply_problem_bang(pair, g, &mut state);
        apply_mixer_bang(pair, b, &mut state);
    }
    Ok(state)
}

/// QAOA energy from the uniform superposition.
pub fn qaoa_energy(pair: &OperatorPair, angles: &QaoaAngles) -> Result<f64> {
    Ok(energy(pair, &apply_qaoa(pair, angles, &pair.initial_state())?))
}
