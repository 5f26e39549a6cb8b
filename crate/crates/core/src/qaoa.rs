//! QAOA angle optimization, depth bootstrapping, and the annealing-like
//! curve `u_i = β_i / (β_i + γ_i)` read off optimized angles.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::evolution::{qaoa_energy, Bang, Level, Schedule};
use crate::hamiltonian::OperatorPair;
use crate::simplex::{best_index, nelder_mead, NelderMeadConfig, SimplexResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaAngles {
    /// Durations of the `C` bangs.
    pub gammas: Vec<f64>,
    /// Durations of the `B` bangs.
    pub betas: Vec<f64>,
}

impl QaoaAngles {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || gammas.len() != betas.len() {
            return invalid(format!(
                "need equal, non-zero numbers of angles (got {} and {})",
                gammas.len(),
                betas.len()
            ));
        }
        if gammas.iter().chain(&betas).any(|a| !(a.is_finite() && *a >= 0.0)) {
            return invalid("angles must be finite and non-negative");
        }
        Ok(Self { gammas, betas })
    }

    pub fn p(&self) -> usize {
        self.gammas.len()
    }

    pub fn total_time(&self) -> f64 {
        self.gammas.iter().chain(&self.betas).sum()
    }

    pub fn layer_durations(&self) -> Vec<f64> {
        self.gammas.iter().zip(&self.betas).map(|(g, b)| g + b).collect()
    }

    /// Alternating `C`/`B` bangs, layer 1 first.
    pub fn to_schedule(&self) -> Schedule {
        let segments = self
            .gammas
            .iter()
            .zip(&self.betas)
            .flat_map(|(&g, &b)| {
                [Bang { level: Level::Problem, duration: g }, Bang { level: Level::Mixer, duration: b }]
            })
            .collect();
        Schedule::BangSequence { segments }
    }

    /// Appends an empty layer; the protocol is unchanged.
    pub fn padded(&self) -> Self {
        let mut out = self.clone();
        out.gammas.push(0.0);
        out.betas.push(0.0);
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaoaConfig {
    /// Number of multi-start runs; the first few are ramp-shaped seeds.
    pub restarts: usize,
    pub seed: u64,
    /// Objective-evaluation budget per simplex run.
    pub max_evals: usize,
    /// Tie `γ_i + β_i` to a single variational layer time.
    pub fixed_layer_time: bool,
    /// Re-run the simplex from its own optimum until it stops improving.
    pub polish: bool,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, max_evals: 40_000, fixed_layer_time: false, polish: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaoaResult {
    pub angles: QaoaAngles,
    pub energy: f64,
    pub converged: bool,
    pub evals: usize,
}

/// Triangle wave folding the real line onto `[0, 1]`.
fn fold_unit(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

fn decode(x: &[f64], p: usize, fixed: bool) -> QaoaAngles {
    if fixed {
        let dt = x[0].abs();
        let fr: Vec<f64> = x[1..].iter().map(|&v| fold_unit(v)).collect();
        QaoaAngles { gammas: fr.iter().map(|f| dt * (1.0 - f)).collect(), betas: fr.iter().map(|f| dt * f).collect() }
    } else {
        QaoaAngles { gammas: x[..p].iter().map(|v| v.abs()).collect(), betas: x[p..].iter().map(|v| v.abs()).collect() }
    }
}

fn encode(angles: &QaoaAngles, fixed: bool) -> Vec<f64> {
    if fixed {
        let d = angles.layer_durations();
        let dt = d.iter().sum::<f64>() / d.len() as f64;
        std::iter::once(dt)
            .chain(angles.betas.iter().zip(&d).map(|(b, l)| if *l > 0.0 { b / l } else { 0.5 }))
            .collect()
    } else {
        angles.gammas.iter().chain(&angles.betas).copied().collect()
    }
}

/// Ramp-shaped start: `γ` growing and `β` shrinking across layers.
fn ramp_start(p: usize, layer: f64) -> QaoaAngles {
    let frac = |i: usize| (i as f64 + 0.5) / p as f64;
    QaoaAngles {
        gammas: (0..p).map(|i| layer * (0.15 + 0.7 * frac(i))).collect(),
        betas: (0..p).map(|i| layer * (0.85 - 0.7 * frac(i))).collect(),
    }
}

fn restart_rng(seed: u64, index: usize) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn start_points(p: usize, config: &QaoaConfig) -> Vec<QaoaAngles> {
    const RAMP_LAYERS: [f64; 3] = [0.75, 0.5, 1.0];
    (0..config.restarts.max(1))
        .map(|r| {
            if r < RAMP_LAYERS.len() {
                ramp_start(p, RAMP_LAYERS[r])
            } else {
                let mut rng = restart_rng(config.seed, r);
                let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                QaoaAngles {
                    gammas: (0..p).map(|_| unit()).collect(),
                    betas: (0..p).map(|_| unit()).collect(),
                }
            }
        })
        .collect()
}

fn run_from(pair: &OperatorPair, start: &QaoaAngles, config: &QaoaConfig) -> QaoaResult {
    let p = start.p();
    let fixed = config.fixed_layer_time;
    let objective = |x: &[f64]| qaoa_energy(pair, &decode(x, p, fixed)).unwrap_or(f64::INFINITY);
    let nm = NelderMeadConfig { max_evals: config.max_evals, ..Default::default() };
    let mut result: SimplexResult = nelder_mead(objective, &encode(start, fixed), &nm);
    let mut evals = result.evals;
    if config.polish {
        for _ in 0..8 {
            let again = nelder_mead(objective, &result.x, &NelderMeadConfig { initial_step: 0.02, ..nm.clone() });
            evals += again.evals;
            let gain = result.value - again.value;
            let converged = again.converged;
            if again.value <= result.value {
                result = again;
            }
            if gain < 1e-10 {
                result.converged = converged || result.converged;
                break;
            }
        }
    }
    QaoaResult { angles: decode(&result.x, p, fixed), energy: result.value, converged: result.converged, evals }
}

fn run_starts(pair: &OperatorPair, starts: &[QaoaAngles], config: &QaoaConfig) -> QaoaResult {
    use rayon::prelude::*;
    let runs: Vec<QaoaResult> = starts.par_iter().map(|s| run_from(pair, s, config)).collect();
    let best = best_index(runs.iter().map(|r| r.energy));
    runs.into_iter().nth(best).expect("at least one start")
}

/// Multi-start simplex optimization of depth-`p` angles.
pub fn optimize_qaoa(pair: &OperatorPair, p: usize, config: &QaoaConfig) -> Result<QaoaResult> {
    if p == 0 {
        return invalid("QAOA depth must be at least 1");
    }
    Ok(run_starts(pair, &start_points(p, config), config))
}

/// Optimization seeded from explicit starting angles (all of depth `p`).
pub fn optimize_qaoa_from(pair: &OperatorPair, starts: &[QaoaAngles], config: &QaoaConfig) -> Result<QaoaResult> {
    let Some(first) = starts.first() else {
        return invalid("no starting angles given");
    };
    if starts.iter().any(|s| s.p() != first.p()) {
        return invalid("starting angles differ in depth");
    }
    Ok(run_starts(pair, starts, config))
}

/// Depth-`p+1` guess from depth-`p` angles by linear interpolation of
/// `γ(s)`, `β(s)` from the knots `(i-1)/(p-1)` onto `(j-1)/p`.
pub fn bootstrap_angles(prev: &QaoaAngles) -> Result<QaoaAngles> {
    let p = prev.p();
    if p < 2 {
        return invalid("bootstrapping needs p >= 2");
    }
    let resample = |v: &[f64]| -> Vec<f64> {
        (0..=p).map(|j| crate::evolution::interpolate_uniform(v, j as f64 / p as f64)).collect()
    };
    QaoaAngles::new(resample(&prev.gammas), resample(&prev.betas))
}

/// Optimizes depths `p_min..=p_max`, seeding each depth from the previous
/// one (interpolated, and zero-padded so energy cannot increase).
pub fn bootstrap_sweep(pair: &OperatorPair, p_min: usize, p_max: usize, config: &QaoaConfig) -> Result<Vec<QaoaResult>> {
    if p_min == 0 || p_max < p_min {
        return invalid(format!("bad depth range {p_min}..={p_max}"));
    }
    let mut out: Vec<QaoaResult> = vec![optimize_qaoa(pair, p_min, config)?];
    for _ in p_min..p_max {
        let prev = &out.last().expect("non-empty").angles;
        let interpolated = if prev.p() >= 2 {
            bootstrap_angles(prev)?
        } else {
            QaoaAngles::new(vec![prev.gammas[0]; 2], vec![prev.betas[0]; 2])?
        };
        let starts = [interpolated, prev.padded()];
        out.push(optimize_qaoa_from(pair, &starts, config)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaCurve {
    pub s_points: Vec<f64>,
    pub u_values: Vec<f64>,
    pub layer_durations: Vec<f64>,
}

impl QaoaCurve {
    /// Curve from explicit values at uniform knots on `[0, 1]`.
    pub fn from_values(u_values: Vec<f64>) -> Result<Self> {
        if u_values.len() < 2 {
            return invalid("a curve needs at least two knots");
        }
        let m = u_values.len();
        Ok(Self {
            s_points: (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
            layer_durations: vec![1.0; m],
            u_values,
        })
    }
}

/// `u_i = β_i / (β_i + γ_i)` at `s_i = (i - 1)/(p - 1)`.
pub fn extract_curve(angles: &QaoaAngles) -> Result<QaoaCurve> {
    let p = angles.p();
    if p < 2 {
        return invalid("curve extraction needs p >= 2");
    }
    let durations = angles.layer_durations();
    if let Some(i) = durations.iter().position(|&d| d <= 0.0) {
        return invalid(format!("layer {} has zero duration", i + 1));
    }
    Ok(QaoaCurve {
        s_points: (0..p).map(|i| i as f64 / (p - 1) as f64).collect(),
        u_values: angles.betas.iter().zip(&durations).map(|(b, d)| b / d).collect(),
        layer_durations: durations,
    })
}

fn curve_value(c: &QaoaCurve, s: f64) -> f64 {
    let k = c.s_points.partition_point(|&x| x <= s).clamp(1, c.s_points.len() - 1);
    let (s0, s1) = (c.s_points[k - 1], c.s_points[k]);
    let f = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
    c.u_values[k - 1] * (1.0 - f) + c.u_values[k] * f
}

/// L² distance between the piecewise-linear interpolants on `[0, 1]`.
pub fn curve_distance(a: &QaoaCurve, b: &QaoaCurve) -> f64 {
    let mut knots: Vec<f64> = a.s_points.iter().chain(&b.s_points).copied().collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut total = 0.0;
    for w in knots.windows(2) {
        let h = w[1] - w[0];
        let d0 = curve_value(a, w[0]) - curve_value(b, w[0]);
        let d1 = curve_value(a, w[1]) - curve_value(b, w[1]);
        total += h * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    }
    total.sqrt()
}
