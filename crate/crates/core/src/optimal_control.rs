//! Optimal control of a piecewise-constant schedule by projected gradient
//! descent, and analysis of the resulting bang-anneal-bang structure.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::evolution::{energy, EvolutionTrace, PiecewiseConstant};
use crate::hamiltonian::OperatorPair;
use crate::propagator::{apply_exp, apply_exp_with_derivative};
use crate::quadrature::trapezoid;

/// `∂⟨E(t_f)⟩/∂u_k` for every step of a piecewise-constant schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientVector {
    pub values: Vec<f64>,
    pub t_f: f64,
    /// Final energy of the schedule the gradient was taken at.
    pub energy: f64,
}

impl GradientVector {
    pub fn step(&self) -> f64 {
        self.t_f / self.values.len() as f64
    }

    /// The functional derivative `Φ(t_k) = (∂E/∂u_k) / Δt`.
    pub fn functional_derivative(&self) -> Vec<f64> {
        let dt = self.step();
        self.values.iter().map(|g| g / dt).collect()
    }
}

fn check_inputs(pair: &OperatorPair, schedule: &PiecewiseConstant, initial_state: &[Complex64]) -> Result<()> {
    if schedule.values.is_empty() {
        return invalid("schedule has no steps");
    }
    if initial_state.len() != pair.dim() {
        return invalid(format!("state has length {} but the operators have dimension {}", initial_state.len(), pair.dim()));
    }
    if !(schedule.t_f > 0.0 && schedule.t_f.is_finite()) {
        return invalid(format!("t_f must be positive and finite, got {}", schedule.t_f));
    }
    if let Some(u) = schedule.values.iter().find(|u| !(0.0..=1.0).contains(*u)) {
        return invalid(format!("control value {u} outside [0, 1]"));
    }
    Ok(())
}

/// Final energy of a piecewise-constant schedule, `exp(-iH(u_k)Δt)` for every step.
pub fn schedule_energy(pair: &OperatorPair, schedule: &PiecewiseConstant, initial_state: &[Complex64]) -> Result<f64> {
    check_inputs(pair, schedule, initial_state)?;
    let dt = schedule.step();
    let mut state = initial_state.to_vec();
    for &u in &schedule.values {
        apply_exp(pair, u, dt, &mut state);
    }
    Ok(energy(pair, &state))
}

/// Exact gradient of the final energy by one forward sweep that stores the
/// states and one backward sweep of the costate `λ = U†…U† C ψ(t_f)`.
///
/// Each component is `2 Re⟨λ_k| ∂_u exp(-iH(u_k)Δt) |ψ_{k-1}⟩`, with the
/// derivative of the exponential taken exactly rather than to first order in `Δt`.
pub fn control_gradient(
    pair: &OperatorPair,
    schedule: &PiecewiseConstant,
    initial_state: &[Complex64],
) -> Result<GradientVector> {
    check_inputs(pair, schedule, initial_state)?;
    let dt = schedule.step();
    let n = schedule.values.len();
    let mut states = Vec::with_capacity(n + 1);
    states.push(initial_state.to_vec());
    for &u in &schedule.values {
        let mut next = states.last().unwrap().clone();
        apply_exp(pair, u, dt, &mut next);
        states.push(next);
    }
    let final_state = &states[n];
    let diag = pair.problem_diagonal();
    let mut costate: Vec<Complex64> = final_state.iter().zip(diag).map(|(x, c)| x * c).collect();
    let e = costate.iter().zip(final_state).map(|(l, x)| (x.conj() * l).re).sum();
    let mut values = vec![0.0; n];
    for k in (0..n).rev() {
        let u = schedule.values[k];
        let mut scratch = states[k].clone();
        let d = apply_exp_with_derivative(pair, u, dt, &mut scratch);
        values[k] = 2.0 * costate.iter().zip(&d).map(|(l, x)| (l.conj() * x).re).sum::<f64>();
        apply_exp(pair, u, -dt, &mut costate);
    }
    Ok(GradientVector { values, t_f: schedule.t_f, energy: e })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentConfig {
    pub max_iters: usize,
    /// First trial step along `−Φ`.
    pub initial_step: f64,
    pub shrink: f64,
    /// Factor applied to the last accepted step to seed the next line search.
    pub growth: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub energy_tol: f64,
    pub min_step: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            initial_step: 1.0,
            shrink: 0.5,
            growth: 2.0,
            armijo: 1e-4,
            energy_tol: 1e-10,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentResult {
    pub schedule: PiecewiseConstant,
    pub energy: f64,
    /// Energy before the first iteration and after every accepted one.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Stopped on the energy tolerance or a stalled line search rather than the iteration cap.
    pub converged: bool,
}

fn project(u: &[f64], direction: &[f64], step: f64) -> Vec<f64> {
    u.iter().zip(direction).map(|(u, d)| (u - step * d).clamp(0.0, 1.0)).collect()
}

/// Projected gradient descent along `−Φ` with backtracking Armijo line search.
pub fn descend(
    pair: &OperatorPair,
    schedule0: &PiecewiseConstant,
    initial_state: &[Complex64],
    config: &DescentConfig,
) -> Result<DescentResult> {
    check_inputs(pair, schedule0, initial_state)?;
    let t_f = schedule0.t_f;
    let mut u = schedule0.values.clone();
    let mut grad = control_gradient(pair, schedule0, initial_state)?;
    let mut current = grad.energy;
    let mut history = vec![current];
    let mut step = config.initial_step;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let phi = grad.functional_derivative();
        let mut accepted = None;
        while step >= config.min_step {
            let trial = project(&u, &phi, step);
            let decrease: f64 = grad.values.iter().zip(&trial).zip(&u).map(|((g, t), u)| g * (u - t)).sum();
            if decrease <= 0.0 {
                break;
            }
            let candidate = PiecewiseConstant { t_f, values: trial };
            let e = schedule_energy(pair, &candidate, initial_state)?;
            if e <= current - config.armijo * decrease {
                accepted = Some((candidate, e));
                break;
            }
            step *= config.shrink;
        }
        let Some((candidate, e)) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        let change = current - e;
        u = candidate.values;
        current = e;
        history.push(e);
        if change.abs() < config.energy_tol {
            converged = true;
            break;
        }
        step = (step * config.growth).max(config.min_step);
        grad = control_gradient(pair, &PiecewiseConstant { t_f, values: u.clone() }, initial_state)?;
    }
    Ok(DescentResult { schedule: PiecewiseConstant { t_f, values: u }, energy: current, history, iterations, converged })
}

/// Bang-anneal-bang structure read off a piecewise-constant schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BabDecomposition {
    pub initial_bang: f64,
    pub final_bang: f64,
    /// `(t_start, t_end)` of the anneal between the bangs.
    pub interior: (f64, f64),
    pub oscillation_count: usize,
    /// Interior duration per oscillation; infinite when no oscillation was found.
    pub mean_period: f64,
    /// Moving-average smoothing of the interior samples.
    pub base_curve: Vec<f64>,
    /// Smoothing window in samples.
    pub window: usize,
    /// False when the interior is shorter than three smoothing windows.
    pub analysis_available: bool,
}

pub const DEFAULT_EPS_BANG: f64 = 0.02;

/// Residual of a least-squares quadratic fit on a uniform grid.
fn remove_quadratic(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n < 3 {
        let mean = y.iter().sum::<f64>() / n.max(1) as f64;
        return y.iter().map(|v| v - mean).collect();
    }
    let xs: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0).collect();
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (&x, &v) in xs.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, x, x * x);
        ata += row * row.transpose();
        aty += row * v;
    }
    let coef = ata.lu().solve(&aty).unwrap_or_else(nalgebra::Vector3::zeros);
    xs.iter().zip(y).map(|(&x, &v)| v - (coef[0] + coef[1] * x + coef[2] * x * x)).collect()
}

/// Index of the largest-magnitude FFT bin `k ≥ 2` of a real series, or
/// `None` when the series carries no oscillation.
pub(crate) fn dominant_bin(y: &[f64]) -> Option<usize> {
    let n = y.len();
    if n < 8 {
        return None;
    }
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (k, mag) = (2..n / 2).map(|k| (k, buf[k].norm())).max_by(|a, b| a.1.total_cmp(&b.1))?;
    (mag > 1e-9 * scale * n as f64 && scale > 1e-12).then_some(k)
}

fn moving_average(y: &[f64], window: usize) -> Vec<f64> {
    // full-width windows only: near the ends the window is shifted inward
    let n = y.len();
    let window = window.clamp(1, n.max(1));
    let half = window / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + y[i];
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(half).min(n - window);
            (prefix[a + window] - prefix[a]) / window as f64
        })
        .collect()
}

fn zero_crossings(y: &[f64]) -> usize {
    let mut count = 0;
    let mut last_sign = 0.0f64;
    for &v in y {
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            count += 1;
        }
        last_sign = s;
    }
    count
}

/// Splits a schedule into leading `u ≤ eps` bang, trailing `u ≥ 1 − eps`
/// bang and interior, and counts interior oscillations about a moving
/// average whose window is the dominant FFT period.
pub fn detect_bab(schedule: &PiecewiseConstant, eps_bang: f64) -> BabDecomposition {
    let values = &schedule.values;
    let n = values.len();
    let dt = schedule.step();
    let lead = values.iter().take_while(|&&u| u <= eps_bang).count();
    let trail = if lead == n { 0 } else { values.iter().rev().take_while(|&&u| u >= 1.0 - eps_bang).count() };
    let interior = &values[lead..n - trail];
    let t_start = lead as f64 * dt;
    let t_end = (n - trail) as f64 * dt;
    let m = interior.len();
    let bin = dominant_bin(&remove_quadratic(interior));
    let window = bin.map_or(m, |k| ((m as f64 / k as f64).round() as usize).max(1));
    let base_curve = moving_average(interior, window.max(1));
    let available = m >= 3 * window && bin.is_some();
    let oscillation_count = if bin.is_some() {
        let detrended: Vec<f64> = interior.iter().zip(&base_curve).map(|(u, b)| u - b).collect();
        (zero_crossings(&detrended) as f64 / 2.0).round() as usize
    } else {
        0
    };
    let mean_period = if oscillation_count > 0 { (t_end - t_start) / oscillation_count as f64 } else { f64::INFINITY };
    BabDecomposition {
        initial_bang: t_start,
        final_bang: schedule.t_f - t_end,
        interior: (t_start, t_end),
        oscillation_count,
        mean_period,
        base_curve,
        window,
        analysis_available: available || (m > 0 && bin.is_none()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseReport {
    /// `∫ γ u̇ cos φ / Δ dt` over the interior.
    pub theta: f64,
    pub integrand_l1: f64,
    /// Phase lag of `cos φ` behind the detrended control at its dominant frequency, in `[0, π]`.
    pub lag_u: f64,
    /// The same for `u̇`.
    pub lag_udot: f64,
    /// Smallest `pop0 + pop1` over the interior.
    pub min_two_level_population: f64,
    /// `min_two_level_population > 0.95`; the figures above are still
    /// computed when this fails, but the two-level reading does not apply.
    pub two_level_dominant: bool,
    pub available: bool,
}

fn wrap_abs(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    a.abs()
}

fn demodulate(y: &[f64], omega: f64, times: &[f64]) -> Complex64 {
    y.iter().zip(times).map(|(&v, &t)| Complex64::from_polar(v, -omega * t)).sum()
}

/// Relates the control's oscillation to the relative phase
/// `φ = arg C₀ − arg C₁` of the two lowest instantaneous eigenstates,
/// recorded in `trace` (which must carry populations, gap and γ).
pub fn oscillation_phase_check(schedule: &PiecewiseConstant, trace: &EvolutionTrace) -> Result<PhaseReport> {
    let n = schedule.values.len();
    if trace.times.len() != n + 1 || trace.amp0.len() != n + 1 || trace.gap.len() != n + 1 {
        return invalid("trace must sample every step of the schedule with populations");
    }
    let dec = detect_bab(schedule, DEFAULT_EPS_BANG);
    let dt = schedule.step();
    let lead = (dec.interior.0 / dt).round() as usize;
    let end = (dec.interior.1 / dt).round() as usize;
    // sample k+1 ends step k
    let range = (lead + 1)..(end + 1);
    let times: Vec<f64> = trace.times[range.clone()].to_vec();
    let u: Vec<f64> = schedule.values[lead..end].to_vec();
    let min_pop = range.clone().map(|k| trace.pop0[k] + trace.pop1[k]).fold(f64::INFINITY, f64::min);
    let mut report = PhaseReport {
        theta: 0.0,
        integrand_l1: 0.0,
        lag_u: f64::NAN,
        lag_udot: f64::NAN,
        min_two_level_population: min_pop,
        two_level_dominant: min_pop > 0.95,
        available: false,
    };
    if times.len() < 8 {
        return Ok(report);
    }
    let phi: Vec<f64> = range.clone().map(|k| (trace.amp0[k] * trace.amp1[k].conj()).arg()).collect();
    let cos_phi: Vec<f64> = phi.iter().map(|p| p.cos()).collect();
    let udot = crate::near_adiabatic::gradient(&times, &u);
    let integrand: Vec<f64> =
        range.clone().enumerate().map(|(i, k)| trace.gamma_me[k] * udot[i] * cos_phi[i] / trace.gap[k]).collect();
    let abs: Vec<f64> = integrand.iter().map(|v| v.abs()).collect();
    report.theta = trapezoid(&times, &integrand);
    report.integrand_l1 = trapezoid(&times, &abs);

    let detrended = remove_quadratic(&u);
    let Some(bin) = dominant_bin(&detrended) else {
        return Ok(report);
    };
    let omega = 2.0 * PI * bin as f64 / (times.len() as f64 * dt);
    let zu = demodulate(&detrended, omega, &times);
    let zd = demodulate(&remove_quadratic(&udot), omega, &times);
    let zc = demodulate(&remove_quadratic(&cos_phi), omega, &times);
    report.lag_u = wrap_abs(zu.arg() - zc.arg());
    report.lag_udot = wrap_abs(zd.arg() - zc.arg());
    report.available = dec.analysis_available && report.two_level_dominant;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_operators;
    use crate::instances::{random_instance, ProblemInstance};

    fn synthetic(count: usize, lead: usize, trail: usize, interior: usize) -> PiecewiseConstant {
        let mut values = vec![0.0; lead];
        values.extend((0..interior).map(|k| {
            let s = (k as f64 + 0.5) / interior as f64;
            0.5 + 0.1 * (2.0 * PI * count as f64 * s).sin()
        }));
        values.extend(std::iter::repeat_n(1.0, trail));
        let n = values.len();
        PiecewiseConstant { t_f: n as f64 * 0.01, values }
    }

    #[test]
    fn counts_synthetic_oscillations() {
        let s = synthetic(14, 37, 21, 900);
        let d = detect_bab(&s, DEFAULT_EPS_BANG);
        assert_eq!(d.oscillation_count, 14);
        assert!((d.initial_bang - 0.37).abs() <= 0.01 + 1e-12);
        assert!((d.final_bang - 0.21).abs() <= 0.01 + 1e-12);
        assert!(d.analysis_available);
        assert!((d.mean_period - 9.0 / 14.0).abs() < 1e-9);
    }

    #[test]
    fn constant_interior_has_no_oscillation() {
        let mut values = vec![0.0; 10];
        values.extend(vec![0.5; 200]);
        values.extend(vec![1.0; 10]);
        let d = detect_bab(&PiecewiseConstant { t_f: 2.2, values }, DEFAULT_EPS_BANG);
        assert_eq!(d.oscillation_count, 0);
        assert!(d.mean_period.is_infinite());
    }

    #[test]
    fn short_interior_flags_unavailable() {
        let s = synthetic(3, 5, 5, 20);
        assert!(!detect_bab(&s, DEFAULT_EPS_BANG).analysis_available);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pair = build_operators(&random_instance(3, 5).unwrap()).unwrap();
        let values: Vec<f64> = (0..40).map(|k| 0.5 + 0.4 * (0.3 * k as f64).sin()).collect();
        let s = PiecewiseConstant { t_f: 3.0, values };
        let psi = pair.initial_state();
        let g = control_gradient(&pair, &s, &psi).unwrap();
        assert!((g.energy - schedule_energy(&pair, &s, &psi).unwrap()).abs() < 1e-12);
        for k in [0, 7, 19, 39] {
            let h = 1e-6;
            let mut up = s.clone();
            up.values[k] += h;
            let mut down = s.clone();
            down.values[k] -= h;
            let fd = (schedule_energy(&pair, &up, &psi).unwrap() - schedule_energy(&pair, &down, &psi).unwrap()) / (2.0 * h);
            assert!((fd - g.values[k]).abs() < 1e-6 * fd.abs().max(1e-3), "k={k}: {fd} vs {}", g.values[k]);
        }
    }

    #[test]
    fn zero_problem_gives_zero_gradient() {
        let pair = build_operators(&ProblemInstance::new(2, vec![0.0; 4]).unwrap()).unwrap();
        let s = PiecewiseConstant::linear_ramp(1.0, 10);
        let g = control_gradient(&pair, &s, &pair.initial_state()).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn resolution_mismatch_is_rejected() {
        let pair = build_operators(&random_instance(2, 1).unwrap()).unwrap();
        let s = PiecewiseConstant::linear_ramp(1.0, 10);
        assert!(control_gradient(&pair, &s, &[Complex64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn descent_is_monotone_and_projected() {
        let pair = build_operators(&random_instance(4, 2).unwrap()).unwrap();
        let s = PiecewiseConstant::linear_ramp(2.0, 50);
        let cfg = DescentConfig { max_iters: 60, ..Default::default() };
        let r = descend(&pair, &s, &pair.initial_state(), &cfg).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.schedule.values.iter().all(|u| (0.0..=1.0).contains(u)));
        assert!(r.energy < r.history[0]);
    }

    #[test]
    fn one_step_optimum_is_fixed_point() {
        let pair = build_operators(&random_instance(2, 3).unwrap()).unwrap();
        let psi = pair.initial_state();
        let e = |u: f64| schedule_energy(&pair, &PiecewiseConstant { t_f: 0.8, values: vec![u.clamp(0.0, 1.0)] }, &psi).unwrap();
        let opt = crate::simplex::nelder_mead(|x| e(x[0]), &[0.5], &Default::default());
        let s = PiecewiseConstant { t_f: 0.8, values: vec![opt.x[0].clamp(0.0, 1.0)] };
        let r = descend(&pair, &s, &psi, &DescentConfig::default()).unwrap();
        assert!(r.history[0] - r.energy < 1e-10, "{:?}", r.history);
        assert!(r.converged);
    }
}
