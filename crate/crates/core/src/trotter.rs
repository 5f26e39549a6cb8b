//! Product-formula error bounds for oscillatory schedules
//! `u(t) = u₀(t) − c₀ sin(2πt/τ + φ)` sliced into `p` steps of `Δt = t_f/p`.
//!
//! Per slice the first-order bound is `‖[B,C]‖ ∬_{r<s} u(r)(1 − u(s)) dr ds`.
//! It is evaluated by composite Gauss–Legendre quadrature in the time domain.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolution::{interpolate_uniform, BabComposite, OscillationParams, Schedule};
use crate::hamiltonian::OperatorPair;
use crate::qaoa::QaoaAngles;
use crate::quadrature::Rule;

const GL_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterConfig {
    pub t_f: f64,
    pub p: usize,
    pub tau: f64,
    pub c0: f64,
    pub phi: f64,
    /// `u₀` at uniform knots over `[0, t_f]`, linearly interpolated.
    pub u0: Vec<f64>,
    pub commutator_norm: f64,
}

impl TrotterConfig {
    /// Linear `u₀` from `1 − c₀` down to `c₀`, the widest ramp that keeps
    /// `u` inside `[0, 1]` for any phase.
    pub fn with_default_ramp(t_f: f64, p: usize, tau: f64, c0: f64, phi: f64, commutator_norm: f64) -> Self {
        Self { t_f, p, tau, c0, phi, u0: vec![1.0 - c0, c0], commutator_norm }
    }

    pub fn delta_t(&self) -> f64 {
        self.t_f / self.p as f64
    }

    pub fn u(&self, t: f64) -> f64 {
        self.base(t) - self.c0 * (TAU * t / self.tau + self.phi).sin()
    }

    fn base(&self, t: f64) -> f64 {
        interpolate_uniform(&self.u0, t / self.t_f)
    }

    fn without_oscillation(&self) -> Self {
        Self { c0: 0.0, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return invalid("slice count must be at least 1");
        }
        if !(self.t_f > 0.0 && self.tau > 0.0) {
            return invalid("t_f and tau must be positive");
        }
        if !(0.0..=0.5).contains(&self.c0) {
            return invalid(format!("c0 = {} outside [0, 0.5]", self.c0));
        }
        if self.u0.is_empty() {
            return invalid("base schedule needs at least one knot");
        }
        Ok(())
    }

    /// Equivalent composite schedule (no bangs) for evolution and oracles.
    pub fn schedule(&self) -> Schedule {
        Schedule::BabComposite(BabComposite {
            gamma_tilde: 0.0,
            beta_tilde: 0.0,
            t_f: self.t_f,
            base_curve: self.u0.clone(),
            oscillation: OscillationParams {
                amplitude: self.c0,
                angular_frequency: TAU / self.tau,
                phase: self.phi + PI / 2.0,
                period_breaks: Vec::new(),
            },
        })
    }
}

/// Spectral norm of `[B, C]` from the eigenvalues of the Hermitian `i[B, C]`.
pub fn commutator_norm(pair: &OperatorPair) -> f64 {
    let b = pair.mixer_dense();
    let c = pair.problem_dense();
    let k: DMatrix<f64> = &b * &c - &c * &b;
    let h: DMatrix<Complex64> = k.map(|x| Complex64::new(0.0, x));
    SymmetricEigen::new(h).eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Panels per slice so that each panel spans at most a quarter period.
fn panels(cfg: &TrotterConfig) -> usize {
    let dt = cfg.delta_t();
    let base = (4.0 * dt / cfg.tau).ceil() as usize;
    base.max(1) + cfg.u0.len().saturating_sub(2).min(64)
}

fn check_range(cfg: &TrotterConfig, rule: &Rule, a: f64, b: f64, m: usize) -> Result<()> {
    let h = (b - a) / m as f64;
    for j in 0..m {
        let (p0, p1) = (a + j as f64 * h, a + (j + 1) as f64 * h);
        let grid = (0..=8).map(|k| p0 + h * k as f64 / 8.0);
        for t in rule.points(p0, p1).map(|(t, _)| t).chain(grid) {
            let v = cfg.u(t);
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::Validation(format!("u({t}) = {v} outside [0, 1]")));
            }
        }
    }
    Ok(())
}

/// `∬_{a<r<s<b} f(r) g(s)` with the inner integral accumulated panel by panel.
fn ordered_double(rule: &Rule, a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / m as f64;
    let mut below = 0.0;
    let mut total = 0.0;
    for j in 0..m {
        let (p0, p1) = (a + j as f64 * h, a + (j + 1) as f64 * h);
        for (s, w) in rule.points(p0, p1) {
            total += w * g(s) * (below + rule.integrate(p0, s, &f));
        }
        below += rule.integrate(p0, p1, &f);
    }
    total
}

fn sum_slices(cfg: &TrotterConfig, f: impl Fn(f64) -> f64 + Copy, g: impl Fn(f64) -> f64 + Copy) -> f64 {
    let rule = Rule::new(GL_ORDER);
    let dt = cfg.delta_t();
    let m = panels(cfg);
    (0..cfg.p).map(|k| ordered_double(&rule, k as f64 * dt, (k + 1) as f64 * dt, m, f, g)).sum()
}

/// `‖[B,C]‖ Σ_k ∬_{slice k, r<s} u(r)(1 − u(s)) dr ds`.
pub fn bound_double_integral(config: &TrotterConfig) -> Result<f64> {
    config.validate()?;
    let rule = Rule::new(GL_ORDER);
    let dt = config.delta_t();
    let m = panels(config);
    for k in 0..config.p {
        check_range(config, &rule, k as f64 * dt, (k + 1) as f64 * dt, m)?;
    }
    let sum = sum_slices(config, |r| config.u(r), |s| 1.0 - config.u(s));
    Ok(config.commutator_norm * sum.max(0.0))
}

/// Split of the bound by powers of the oscillation `w(t) = −c₀ sin(2πt/τ + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// `u₀` alone.
    pub base: f64,
    /// `∬ w(r)`: the part that is purely oscillatory and linear in `c₀`.
    pub oscillation: f64,
    /// `−∬ [w(r) u₀(s) + u₀(r) w(s)]`.
    pub cross: f64,
    /// `−∬ w(r) w(s)`.
    pub quadratic: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.base + self.oscillation + self.cross + self.quadratic
    }
}

pub fn bound_terms(config: &TrotterConfig) -> Result<BoundTerms> {
    config.validate()?;
    let w = |t: f64| -config.c0 * (TAU * t / config.tau + config.phi).sin();
    let u0 = |t: f64| config.base(t);
    let norm = config.commutator_norm;
    Ok(BoundTerms {
        base: norm * sum_slices(config, u0, |s| 1.0 - u0(s)),
        oscillation: norm * sum_slices(config, w, |_| 1.0),
        cross: -norm * (sum_slices(config, w, u0) + sum_slices(config, u0, w)),
        quadratic: -norm * sum_slices(config, w, w),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormBound {
    /// Base double integral minus `‖[B,C]‖ c₀ Δt² p cos φ / 2π`.
    pub matched: f64,
    /// `‖[B,C]‖ (Δt² p / 2)(1 − c₀ cos φ / π)`.
    pub coarse: f64,
}

/// Oscillation-matched bound, valid only for `τ = Δt`.
pub fn bound_closed_form(config: &TrotterConfig) -> Result<ClosedFormBound> {
    config.validate()?;
    let dt = config.delta_t();
    if (config.tau - dt).abs() > 1e-12 * dt {
        return invalid(format!("closed form requires tau = delta_t (tau = {}, delta_t = {dt})", config.tau));
    }
    let base = bound_double_integral(&config.without_oscillation())?;
    let p = config.p as f64;
    let norm = config.commutator_norm;
    let shift = norm * config.c0 * dt * dt * p * config.phi.cos() / TAU;
    Ok(ClosedFormBound {
        matched: base - shift,
        coarse: norm * (dt * dt * p / 2.0) * (1.0 - config.c0 * config.phi.cos() / PI),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub p: usize,
    pub delta_t: f64,
    pub bound_osc: f64,
    pub bound_no_osc: f64,
}

impl ScanRow {
    /// `(no-osc − osc) / no-osc`.
    pub fn relative_enhancement(&self) -> f64 {
        (self.bound_no_osc - self.bound_osc) / self.bound_no_osc
    }
}

/// Bounds with and without the oscillation for each slice count.
pub fn scan_p(template: &TrotterConfig, p_range: impl IntoIterator<Item = usize>) -> Result<Vec<ScanRow>> {
    use rayon::prelude::*;
    let ps: Vec<usize> = p_range.into_iter().collect();
    ps.par_iter()
        .map(|&p| {
            let cfg = TrotterConfig { p, ..template.clone() };
            Ok(ScanRow {
                p,
                delta_t: cfg.delta_t(),
                bound_osc: bound_double_integral(&cfg)?,
                bound_no_osc: bound_double_integral(&cfg.without_oscillation())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub delta_t: f64,
    pub bound: f64,
    pub terms: BoundTerms,
}

/// Bounds at `Δt = τ + ε` with `τ` and `p` fixed, so `t_f = p(τ + ε)`.
pub fn epsilon_scan(template: &TrotterConfig, eps: &[f64]) -> Result<Vec<EpsilonRow>> {
    use rayon::prelude::*;
    eps.par_iter()
        .map(|&e| {
            let dt = template.tau + e;
            if dt <= 0.0 {
                return invalid(format!("epsilon {e} makes the slice non-positive"));
            }
            let cfg = TrotterConfig { t_f: dt * template.p as f64, ..template.clone() };
            Ok(EpsilonRow { epsilon: e, delta_t: dt, bound: bound_double_integral(&cfg)?, terms: bound_terms(&cfg)? })
        })
        .collect()
}

/// Least-squares slope of `ln|y|` against `ln|x|`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a != 0.0 && **b != 0.0)
        .map(|(a, b)| (a.abs().ln(), b.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

/// Per-slice `β_k = ∫ u`, `γ_k = ∫ (1 − u)`.
pub fn trotterize_schedule(schedule: &Schedule, p: usize) -> Result<QaoaAngles> {
    if p == 0 {
        return invalid("slice count must be at least 1");
    }
    schedule.validate()?;
    let t_f = schedule.total_time();
    let dt = t_f / p as f64;
    let betas: Vec<f64> = (0..p)
        .map(|k| integrate_schedule(schedule, k as f64 * dt, (k + 1) as f64 * dt))
        .collect();
    let gammas = betas.iter().map(|b| (dt - b).max(0.0)).collect();
    QaoaAngles::new(gammas, betas.into_iter().map(|b| b.clamp(0.0, dt)).collect())
}

/// `∫_a^b u(t) dt`, exact on piecewise pieces, Gauss–Legendre on smooth parts.
fn integrate_schedule(schedule: &Schedule, a: f64, b: f64) -> f64 {
    let overlap = |lo: f64, hi: f64| (hi.min(b) - lo.max(a)).max(0.0);
    match schedule {
        Schedule::PiecewiseConstant(pc) => {
            let h = pc.step();
            pc.values.iter().enumerate().map(|(k, u)| u * overlap(k as f64 * h, (k + 1) as f64 * h)).sum()
        }
        Schedule::BangSequence { segments } => {
            let mut start = 0.0;
            let mut total = 0.0;
            for s in segments {
                total += s.level.u() * overlap(start, start + s.duration);
                start += s.duration;
            }
            total
        }
        Schedule::BabComposite(c) => {
            let (ia, ib) = (c.gamma_tilde, c.t_f - c.beta_tilde);
            let mut total = overlap(ib, c.t_f);
            let (lo, hi) = (a.max(ia), b.min(ib));
            if hi > lo {
                let rule = Rule::new(GL_ORDER);
                let w = c.oscillation.angular_frequency.max(1e-9);
                let m = ((hi - lo) * w / 1.5).ceil().max(1.0) as usize + c.base_curve.len();
                let h = (hi - lo) / m as f64;
                for j in 0..m {
                    total += rule.integrate(lo + j as f64 * h, lo + (j + 1) as f64 * h, |t| c.value_at(t));
                }
            }
            total
        }
    }
}
