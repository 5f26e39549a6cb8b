//! Two-level reduction of the dynamics onto the instantaneous ground and
//! first excited states of `H(u₀(t))`, with an additional small control
//! `c(t)` so that `u = u₀ + c`.
//!
//! In that frame the amplitudes obey
//!
//! ```text
//! i(Ċ₀ + C₁ γu̇₀/Δ) = c(C₀κ₀ + C₁γ)
//! i(Ċ₁ − C₀ γu̇₀/Δ) = ΔC₁ + c(C₀γ + C₁κ₁)
//! ```
//!
//! with `Δ, γ, κ₀, κ₁` evaluated at `u₀(t)`. Writing `C_j = A_j e^{iφ_j}`
//! and `φ = φ₀ − φ₁` gives `Ȧ₀ = −X A₁`, `Ȧ₁ = X A₀` with
//! `X = cγ sin φ + (γu̇₀/Δ) cos φ`. The amplitude/phase form is singular
//! when either amplitude vanishes, so the complex form is integrated and
//! `(A, φ)` are read off.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{spectral_profile, OperatorPair};
use crate::ode::{dopri5, Tolerance};
use crate::quadrature::trapezoid;
use crate::spline::CubicSpline;
use crate::trotter::loglog_slope;

/// Below this `A₀A₁` the phase is treated as undefined.
pub const AMPLITUDE_FLOOR: f64 = 1e-14;
const GAP_FLOOR: f64 = 1e-9;

/// Cubic interpolants of the two-level spectral data on a `u` grid.
#[derive(Debug, Clone)]
pub struct SpectralFunctions {
    gap: CubicSpline,
    gamma: CubicSpline,
    kappa0: CubicSpline,
    kappa1: CubicSpline,
}

/// Interpolated values at one `u`, with `u`-derivatives of `Δ` and `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub gap: f64,
    pub gamma: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub d_gap: f64,
    pub d_gamma: f64,
}

impl SpectralFunctions {
    /// Tabulates the sector spectrum of `pair` on a sorted grid.
    pub fn from_pair(pair: &OperatorPair, u_grid: &[f64]) -> Result<Self> {
        let profile = spectral_profile(pair, u_grid)?;
        let col = |f: fn(&crate::hamiltonian::SpectralSlice) -> f64| profile.iter().map(f).collect::<Vec<_>>();
        Self::from_tables(u_grid, &col(|s| s.gap), &col(|s| s.gamma_me), &col(|s| s.kappa0), &col(|s| s.kappa1))
    }

    pub fn from_tables(u: &[f64], gap: &[f64], gamma: &[f64], kappa0: &[f64], kappa1: &[f64]) -> Result<Self> {
        if let Some(i) = gap.iter().position(|&g| !(g > 0.0)) {
            return invalid(format!("gap must be positive; got {} at u = {}", gap[i], u.get(i).copied().unwrap_or(f64::NAN)));
        }
        Ok(Self {
            gap: CubicSpline::new(u, gap)?,
            gamma: CubicSpline::new(u, gamma)?,
            kappa0: CubicSpline::new(u, kappa0)?,
            kappa1: CubicSpline::new(u, kappa1)?,
        })
    }

    /// Constant spectral data, useful for checks.
    pub fn constant(gap: f64, gamma: f64, kappa0: f64, kappa1: f64) -> Result<Self> {
        let u = [0.0, 0.5, 1.0];
        Self::from_tables(&u, &[gap; 3], &[gamma; 3], &[kappa0; 3], &[kappa1; 3])
    }

    pub fn range(&self) -> (f64, f64) {
        self.gap.range()
    }

    pub fn eval(&self, u: f64) -> Result<SpectralPoint> {
        let (lo, hi) = self.range();
        if !(u >= lo - 1e-12 && u <= hi + 1e-12) {
            return Err(Error::Domain(format!("u = {u} outside tabulated range [{lo}, {hi}]")));
        }
        let (gap, d_gap) = self.gap.eval(u);
        if gap < GAP_FLOOR {
            return Err(Error::Domain(format!("gap collapsed to {gap} at u = {u}")));
        }
        let (gamma, d_gamma) = self.gamma.eval(u);
        Ok(SpectralPoint { gap, gamma, kappa0: self.kappa0.eval(u).0, kappa1: self.kappa1.eval(u).0, d_gap, d_gamma })
    }
}

/// A base annealing curve `u₀(t)` with its derivative.
pub trait BasePath: Sync {
    fn value(&self, t: f64) -> f64;
    fn rate(&self, t: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinearRamp {
    pub start: f64,
    pub rate: f64,
}

impl BasePath for LinearRamp {
    fn value(&self, t: f64) -> f64 {
        self.start + self.rate * t
    }
    fn rate(&self, _t: f64) -> f64 {
        self.rate
    }
}

/// Cubic interpolant through samples `(t_k, u_k)`.
#[derive(Debug, Clone)]
pub struct SampledPath(CubicSpline);

impl SampledPath {
    pub fn new(times: &[f64], values: &[f64]) -> Result<Self> {
        Ok(Self(CubicSpline::new(times, values)?))
    }
}

impl BasePath for SampledPath {
    fn value(&self, t: f64) -> f64 {
        self.0.eval(t).0
    }
    fn rate(&self, t: f64) -> f64 {
        self.0.eval(t).1
    }
}

/// Amplitudes `A₀, A₁ ≥ 0` and relative phase `φ = φ₀ − φ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelState {
    pub a0: f64,
    pub a1: f64,
    pub varphi: f64,
}

impl TwoLevelState {
    pub fn ground() -> Self {
        Self { a0: 1.0, a1: 0.0, varphi: 0.0 }
    }

    /// Canonical complex representative, with `C₁` real.
    pub fn to_complex(self) -> (Complex64, Complex64) {
        (Complex64::from_polar(self.a0, self.varphi), Complex64::new(self.a1, 0.0))
    }

    pub fn from_complex(c0: Complex64, c1: Complex64) -> Self {
        Self { a0: c0.norm(), a1: c1.norm(), varphi: (c0 * c1.conj()).arg() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoLevelTrace {
    pub times: Vec<f64>,
    pub states: Vec<TwoLevelState>,
    #[serde(skip)]
    pub c0: Vec<Complex64>,
    #[serde(skip)]
    pub c1: Vec<Complex64>,
    /// Running `∫X dt`, integrated alongside the amplitudes.
    pub accumulated_argument: Vec<f64>,
    /// Times at which `A₀A₁` fell below [`AMPLITUDE_FLOOR`] during a right-hand-side evaluation.
    pub switch_events: Vec<f64>,
    pub norm_drift: f64,
}

impl TwoLevelTrace {
    pub fn last(&self) -> TwoLevelState {
        *self.states.last().expect("trace holds the initial state")
    }

    /// Largest deviation of `(A₀, A₁)` from `a(cos, sin)(∫X + ϑ)`.
    pub fn closed_form_defect(&self) -> f64 {
        let s0 = self.states[0];
        let a = s0.a0.hypot(s0.a1);
        let shift = s0.a1.atan2(s0.a0);
        self.states
            .iter()
            .zip(&self.accumulated_argument)
            .map(|(s, &arg)| (s.a0 - a * (arg + shift).cos()).abs().max((s.a1 - a * (arg + shift).sin()).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TwoLevelOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step size, so outputs resolve the phase rotation.
    pub h_max: f64,
}

impl Default for TwoLevelOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 5_000_000, h_max: f64::INFINITY }
    }
}

fn x_rate(p: &SpectralPoint, udot: f64, c: f64, varphi: f64) -> f64 {
    c * p.gamma * varphi.sin() + p.gamma * udot / p.gap * varphi.cos()
}

/// Integrates the two-level equations over `[0, t_f]`.
pub fn integrate_two_level(
    funcs: &SpectralFunctions,
    u0: &dyn BasePath,
    c: &dyn Fn(f64) -> f64,
    t_f: f64,
    init: TwoLevelState,
    options: &TwoLevelOptions,
) -> Result<TwoLevelTrace> {
    if !(t_f >= 0.0 && t_f.is_finite()) {
        return invalid(format!("t_f must be finite and non-negative, got {t_f}"));
    }
    if !(init.a0 >= 0.0 && init.a1 >= 0.0) {
        return invalid("amplitudes must be non-negative");
    }
    let (c0, c1) = init.to_complex();
    let y0 = [c0.re, c0.im, c1.re, c1.im, 0.0];
    let mut events = Vec::new();
    let tol = Tolerance { rtol: options.rtol, atol: options.atol, max_steps: options.max_steps, h_max: options.h_max };
    let sol = dopri5(
        |t, y, dy| {
            let p = funcs.eval(u0.value(t))?;
            let udot = u0.rate(t);
            let ct = c(t);
            let a = Complex64::new(y[0], y[1]);
            let b = Complex64::new(y[2], y[3]);
            let k = p.gamma * udot / p.gap;
            let i = Complex64::i();
            let da = -i * ct * (a * p.kappa0 + b * p.gamma) - b * k;
            let db = -i * (b * p.gap + ct * (a * p.gamma + b * p.kappa1)) + a * k;
            dy[0] = da.re;
            dy[1] = da.im;
            dy[2] = db.re;
            dy[3] = db.im;
            let cross = a * b.conj();
            dy[4] = if cross.norm() < AMPLITUDE_FLOOR {
                events.push(t);
                0.0
            } else {
                x_rate(&p, udot, ct, cross.arg())
            };
            Ok(())
        },
        0.0,
        t_f,
        &y0,
        &tol,
    )?;
    let n0 = c0.norm_sqr() + c1.norm_sqr();
    let mut trace = TwoLevelTrace {
        times: sol.times,
        states: Vec::with_capacity(sol.states.len()),
        c0: Vec::with_capacity(sol.states.len()),
        c1: Vec::with_capacity(sol.states.len()),
        accumulated_argument: Vec::with_capacity(sol.states.len()),
        switch_events: events,
        norm_drift: 0.0,
    };
    for y in &sol.states {
        let (a, b) = (Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]));
        trace.norm_drift = trace.norm_drift.max((a.norm_sqr() + b.norm_sqr() - n0).abs());
        trace.states.push(TwoLevelState::from_complex(a, b));
        trace.c0.push(a);
        trace.c1.push(b);
        trace.accumulated_argument.push(y[4]);
    }
    Ok(trace)
}

/// A quadrature together with `∫|integrand|`, for judging relative smallness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaResult {
    pub value: f64,
    pub integrand_l1: f64,
}

impl ThetaResult {
    pub fn relative(&self) -> f64 {
        if self.integrand_l1 == 0.0 {
            0.0
        } else {
            self.value.abs() / self.integrand_l1
        }
    }
}

fn trapezoid_pair(times: &[f64], integrand: &[f64]) -> ThetaResult {
    let abs: Vec<f64> = integrand.iter().map(|v| v.abs()).collect();
    ThetaResult { value: trapezoid(times, integrand), integrand_l1: trapezoid(times, &abs) }
}

fn check_grid(times: &[f64], other: usize) -> Result<()> {
    if times.len() != other {
        return invalid(format!("time grid has {} points but the series has {other}", times.len()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return invalid("time grid must be sorted");
    }
    Ok(())
}

/// `Θ₀ = ∫ (cγ sin φ + (γu̇₀/Δ) cos φ) dt` along the base curve.
pub fn theta0(
    funcs: &SpectralFunctions,
    u0: &dyn BasePath,
    c: &dyn Fn(f64) -> f64,
    times: &[f64],
    phases: &[f64],
) -> Result<ThetaResult> {
    check_grid(times, phases.len())?;
    let integrand = times
        .iter()
        .zip(phases)
        .map(|(&t, &phi)| Ok(x_rate(&funcs.eval(u0.value(t))?, u0.rate(t), c(t), phi)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid_pair(times, &integrand))
}

/// Centered differences, one-sided at the ends.
pub(crate) fn gradient(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (values[b] - values[a]) / (times[b] - times[a])
        })
        .collect()
}

/// `Θ = ∫ γ(u) u̇ cos φ / Δ(u) dt` in the frame following the full control.
pub fn theta(funcs: &SpectralFunctions, times: &[f64], u: &[f64], phases: &[f64]) -> Result<ThetaResult> {
    check_grid(times, u.len())?;
    check_grid(times, phases.len())?;
    let udot = gradient(times, u);
    let integrand = u
        .iter()
        .zip(&udot)
        .zip(phases)
        .map(|((&u, &ud), &phi)| {
            let p = funcs.eval(u)?;
            Ok(p.gamma * ud * phi.cos() / p.gap)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid_pair(times, &integrand))
}

/// The lowest-order oscillation cancelling leakage at `t`:
/// `(u̇₀²/Δ²) · d/du₀ ln(Δ²/γ) · cos(Δ(u₀(t)) t)`.
pub fn perturbative_c_at(funcs: &SpectralFunctions, u0: &dyn BasePath, t: f64) -> Result<f64> {
    let u = u0.value(t);
    let p = funcs.eval(u)?;
    if p.gamma == 0.0 {
        return Err(Error::Domain(format!("γ vanishes at u = {u} (t = {t})")));
    }
    let udot = u0.rate(t);
    let log_derivative = 2.0 * p.d_gap / p.gap - p.d_gamma / p.gamma;
    Ok(udot * udot / (p.gap * p.gap) * log_derivative * (p.gap * t).cos())
}

/// [`perturbative_c_at`] on a grid; a sign change of `γ` between samples is a domain error.
pub fn perturbative_c(funcs: &SpectralFunctions, u0: &dyn BasePath, times: &[f64]) -> Result<Vec<f64>> {
    let mut prev: Option<(f64, f64)> = None;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let u = u0.value(t);
        let g = funcs.eval(u)?.gamma;
        if let Some((pu, pg)) = prev {
            if pg * g < 0.0 {
                return Err(Error::Domain(format!("γ changes sign between u = {pu} and u = {u}")));
            }
        }
        prev = Some((u, g));
        out.push(perturbative_c_at(funcs, u0, t)?);
    }
    Ok(out)
}

/// Local Taylor data and the resulting one-period correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct PerturbativeCoeffs {
    pub Delta0: f64,
    pub Delta1: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub u0_dot: f64,
    pub delta_tf: f64,
    /// Signed amplitude of `c₀ sin(ωt + θ)`.
    pub c0: f64,
    pub theta_phase: f64,
    pub omega: f64,
    pub period: f64,
}

impl PerturbativeCoeffs {
    pub fn drive(&self, t: f64) -> f64 {
        self.c0 * (self.omega * t + self.theta_phase).sin()
    }
}

pub fn perturbative_coeffs(funcs: &SpectralFunctions, u0_ref: f64, u0_dot: f64) -> Result<PerturbativeCoeffs> {
    let p = funcs.eval(u0_ref)?;
    if p.gamma == 0.0 {
        return Err(Error::Domain(format!("γ vanishes at u = {u0_ref}")));
    }
    let (d0, d1, g0, g1) = (p.gap, p.d_gap, p.gamma, p.d_gamma);
    let delta_tf = 2.0 * PI * PI * d1 * u0_dot / d0.powi(3);
    Ok(PerturbativeCoeffs {
        Delta0: d0,
        Delta1: d1,
        gamma0: g0,
        gamma1: g1,
        u0_dot,
        delta_tf,
        c0: u0_dot * u0_dot / (d0 * d0) * (2.0 * d1 / d0 - g1 / g0),
        theta_phase: PI / 2.0,
        omega: d0,
        period: 2.0 * PI / d0 - delta_tf,
    })
}

/// Factor by which the rebalanced arm scales the perturbative oscillation.
///
/// Cancelling the imaginary `O(u̇₀²)` part of the one-period transition
/// amplitude against the drive term `−iπγ₀c₀/Δ₀` requires twice the
/// closed-form `c₀`; the rebalanced arm uses that amplitude.
pub const REBALANCED_SCALE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageRun {
    pub u0_dot: f64,
    pub period: f64,
    pub leakage_uncorrected: f64,
    pub leakage_corrected: f64,
    pub leakage_rebalanced: f64,
    pub theta0_uncorrected: f64,
    pub theta0_corrected: f64,
    pub theta0_rebalanced: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeakageScaling {
    pub u0_ref: f64,
    pub runs: Vec<LeakageRun>,
    pub uncorrected: SlopeFit,
    /// With the closed-form oscillation [`perturbative_c_at`].
    pub corrected: SlopeFit,
    /// With the oscillation scaled by [`REBALANCED_SCALE`].
    pub rebalanced: SlopeFit,
    /// Some fit has `R² < 0.99`.
    pub inconclusive: bool,
}

/// For each rate, integrates one corrected period from the ground state at
/// `u0_ref` along a linear ramp, without oscillation, with the perturbative
/// oscillation, and with the rebalanced one, and fits `log |ΔA₁|` against
/// `log u̇₀`.
pub fn leakage_scaling_experiment(
    funcs: &SpectralFunctions,
    u0_ref: f64,
    u0_dots: &[f64],
    options: &TwoLevelOptions,
) -> Result<LeakageScaling> {
    if u0_dots.len() < 4 {
        return invalid(format!("need at least 4 ramp rates, got {}", u0_dots.len()));
    }
    if u0_dots.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return invalid("ramp rates must be positive and finite");
    }
    let runs = u0_dots
        .par_iter()
        .map(|&rate| leakage_run(funcs, u0_ref, rate, options))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = runs.iter().map(|r| r.u0_dot).collect();
    let fit = |pick: fn(&LeakageRun) -> f64| {
        let y: Vec<f64> = runs.iter().map(pick).collect();
        let (slope, r2) = loglog_slope(&x, &y);
        SlopeFit { slope, r2 }
    };
    let uncorrected = fit(|r| r.leakage_uncorrected);
    let corrected = fit(|r| r.leakage_corrected);
    let rebalanced = fit(|r| r.leakage_rebalanced);
    let inconclusive = [uncorrected, corrected, rebalanced].iter().any(|f| !(f.r2 >= 0.99));
    Ok(LeakageScaling { u0_ref, runs, uncorrected, corrected, rebalanced, inconclusive })
}

/// One set of paired runs of [`leakage_scaling_experiment`].
pub fn leakage_run(funcs: &SpectralFunctions, u0_ref: f64, rate: f64, options: &TwoLevelOptions) -> Result<LeakageRun> {
    let coeffs = perturbative_coeffs(funcs, u0_ref, rate)?;
    let path = LinearRamp { start: u0_ref, rate };
    let init = TwoLevelState::ground();
    let run = |scale: f64| {
        let drive = |t: f64| {
            if scale == 0.0 {
                0.0
            } else {
                scale * perturbative_c_at(funcs, &path, t).unwrap_or(f64::NAN)
            }
        };
        let tr = integrate_two_level(funcs, &path, &drive, coeffs.period, init, options)?;
        Ok::<_, Error>(((tr.last().a1 - init.a1).abs(), tr.accumulated_argument.last().copied().unwrap_or(0.0)))
    };
    let (plain, fixed, balanced) = (run(0.0)?, run(1.0)?, run(REBALANCED_SCALE)?);
    Ok(LeakageRun {
        u0_dot: rate,
        period: coeffs.period,
        leakage_uncorrected: plain.0,
        leakage_corrected: fixed.0,
        leakage_rebalanced: balanced.0,
        theta0_uncorrected: plain.1,
        theta0_corrected: fixed.1,
        theta0_rebalanced: balanced.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_operators;
    use crate::instances::appendix_d_instance;

    fn fixture() -> SpectralFunctions {
        let pair = build_operators(&appendix_d_instance()).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| 0.2 + 0.6 * i as f64 / 200.0).collect();
        SpectralFunctions::from_pair(&pair, &grid).unwrap()
    }

    #[test]
    fn free_precession() {
        let f = SpectralFunctions::constant(1.5, 0.3, 0.1, -0.2).unwrap();
        let path = LinearRamp { start: 0.5, rate: 0.0 };
        let init = TwoLevelState { a0: 1.0, a1: 1e-3, varphi: 0.0 };
        let tr = integrate_two_level(&f, &path, &|_| 0.0, 4.0, init, &Default::default()).unwrap();
        let end = tr.last();
        assert!((end.a0 - init.a0).abs() < 1e-10 && (end.a1 - init.a1).abs() < 1e-10);
        let wrapped = (end.varphi - 1.5 * 4.0).rem_euclid(2.0 * PI);
        assert!(wrapped.min(2.0 * PI - wrapped) < 1e-9, "{wrapped}");
        assert!(tr.norm_drift < 1e-12);
    }

    #[test]
    fn conserves_norm_and_matches_closed_form() {
        let f = fixture();
        let path = LinearRamp { start: 0.3, rate: 0.05 };
        let drive = |t: f64| 0.01 * (2.0 * t).sin();
        let init = TwoLevelState { a0: 0.9, a1: 0.1f64.sqrt() * 0.5, varphi: 0.4 };
        let tr = integrate_two_level(&f, &path, &drive, 8.0, init, &Default::default()).unwrap();
        assert!(tr.norm_drift < 1e-8);
        assert!(tr.closed_form_defect() < 1e-6, "{}", tr.closed_form_defect());
    }

    #[test]
    fn two_level_matches_direct_two_by_two() {
        // constant spectral data: the frame is fixed, so with c = 0 and a
        // constant ramp the equations are a time-independent 2×2 system
        let f = SpectralFunctions::constant(2.0, 0.5, 0.0, 0.0).unwrap();
        let path = LinearRamp { start: 0.2, rate: 0.1 };
        let tr = integrate_two_level(&f, &path, &|_| 0.0, 3.0, TwoLevelState::ground(), &Default::default()).unwrap();
        let k = 0.5 * 0.1 / 2.0;
        let m = nalgebra::Matrix2::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(-k, 0.0),
            Complex64::new(k, 0.0),
            Complex64::new(0.0, -2.0),
        );
        let u = crate::xcheck::expm(&(nalgebra::DMatrix::from_iterator(2, 2, m.iter().copied()) * Complex64::new(3.0, 0.0)));
        let expect_a1 = u[(1, 0)].norm();
        assert!((tr.last().a1 - expect_a1).abs() < 1e-9);
    }

    #[test]
    fn theta_vanishes_without_motion() {
        let f = fixture();
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let phases: Vec<f64> = times.iter().map(|t| 1.3 * t).collect();
        let still = LinearRamp { start: 0.5, rate: 0.0 };
        assert_eq!(theta0(&f, &still, &|_| 0.0, &times, &phases).unwrap().value, 0.0);
        let u = vec![0.5; times.len()];
        assert_eq!(theta(&f, &times, &u, &phases).unwrap().value, 0.0);
    }

    #[test]
    fn theta_cancels_for_quadrature_drive() {
        let f = SpectralFunctions::constant(1.0, 1.0, 0.0, 0.0).unwrap();
        let times: Vec<f64> = (0..=20_000).map(|i| i as f64 * 1e-3).collect();
        let phases: Vec<f64> = times.iter().map(|t| 2.0 * PI * t).collect();
        // u̇ ∝ sin φ
        let u: Vec<f64> = phases.iter().map(|p| 0.5 - 0.01 * p.cos()).collect();
        let r = theta(&f, &times, &u, &phases).unwrap();
        assert!(r.relative() < 1e-3, "{:?}", r);
    }

    #[test]
    fn perturbative_c_limits() {
        let flat = SpectralFunctions::constant(1.0, 0.4, 0.0, 0.0).unwrap();
        let path = LinearRamp { start: 0.4, rate: 1e-3 };
        assert!(perturbative_c(&flat, &path, &[0.0, 1.0, 2.0]).unwrap().iter().all(|&c| c == 0.0));
        let f = fixture();
        let half = LinearRamp { start: 0.4, rate: 5e-4 };
        let a = perturbative_c_at(&f, &path, 0.0).unwrap();
        let b = perturbative_c_at(&f, &half, 0.0).unwrap();
        assert!((b / a - 0.25).abs() < 1e-12);
    }

    #[test]
    fn coefficient_scaling() {
        let f = fixture();
        let a = perturbative_coeffs(&f, 0.5, 1e-3).unwrap();
        let b = perturbative_coeffs(&f, 0.5, 2e-3).unwrap();
        assert!((b.c0 / a.c0 - 4.0).abs() < 1e-12);
        assert!((b.delta_tf / a.delta_tf - 2.0).abs() < 1e-12);
        assert!((a.period - (2.0 * PI / a.Delta0 - a.delta_tf)).abs() < 1e-15);
        let flat = SpectralFunctions::constant(2.0, 0.4, 0.0, 0.0).unwrap();
        let c = perturbative_coeffs(&flat, 0.5, 1e-2).unwrap();
        assert_eq!((c.c0, c.delta_tf), (0.0, 0.0));
        assert!((c.period - PI).abs() < 1e-15);
    }

    #[test]
    fn gamma_zero_is_domain_error() {
        let f = SpectralFunctions::constant(1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(perturbative_coeffs(&f, 0.5, 1e-3), Err(Error::Domain(_))));
        assert!(matches!(
            perturbative_c(&f, &LinearRamp { start: 0.5, rate: 1e-3 }, &[0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn too_few_rates() {
        let f = SpectralFunctions::constant(1.0, 0.3, 0.0, 0.0).unwrap();
        assert!(matches!(
            leakage_scaling_experiment(&f, 0.5, &[1e-3], &Default::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let f = fixture();
        assert!(matches!(f.eval(0.95), Err(Error::Domain(_))));
    }
}
