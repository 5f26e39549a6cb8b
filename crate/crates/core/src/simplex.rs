//! Derivative-free Nelder–Mead minimization and a deterministic multi-start
//! harness.
//!
//! Coefficients follow the dimension-adaptive choice of Gao and Han, which
//! keeps the method effective beyond a handful of parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and every vertex lies within this distance of the best one.
    pub x_tol: f64,
    /// Edge length of the initial simplex, per coordinate.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 20_000, f_tol: 1e-11, x_tol: 1e-8, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub fn nelder_mead<F>(mut f: F, x0: &[f64], config: &NelderMeadConfig) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let nf = n.max(1) as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        sanitize(f(x))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i] != 0.0 { config.initial_step * x[i].abs().max(1.0) } else { config.initial_step };
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    if n == 0 {
        return SimplexResult { x: x0.to_vec(), value: v0, evals, converged: true };
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };

    let mut converged = false;
    while evals < config.max_evals {
        order(&mut simplex);
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= config.f_tol && diameter <= config.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            centroid.iter_mut().zip(x).for_each(|(c, v)| *c += v / nf);
        }
        let worst_x = simplex[n].0.clone();
        let reflected = combine(&centroid, &worst_x, -alpha);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst_x, -gamma);
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst {
            let c = combine(&centroid, &worst_x, -rho);
            let v = eval(&c, &mut evals);
            (c, v)
        } else {
            let c = combine(&centroid, &worst_x, rho);
            let v = eval(&c, &mut evals);
            (c, v)
        };
        if fc < fr.min(worst) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = combine(&anchor, &vertex.0, sigma);
            let v = eval(&x, &mut evals);
            *vertex = (x, v);
        }
    }
    order(&mut simplex);
    let (x, value) = simplex.swap_remove(0);
    SimplexResult { x, value, evals, converged }
}

/// Runs `nelder_mead` from each start in parallel and returns all results
/// plus the index of the best one, ties broken by lowest start index.
pub fn multistart<F>(f: F, starts: &[Vec<f64>], config: &NelderMeadConfig) -> (usize, Vec<SimplexResult>)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let results: Vec<SimplexResult> = starts.par_iter().map(|x0| nelder_mead(&f, x0, config)).collect();
    let best = best_index(results.iter().map(|r| r.value));
    (best, results)
}

/// Index of the lexicographically smallest `(value, index)`.
pub fn best_index(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0usize, f64::NAN);
    for (i, v) in values.into_iter().enumerate() {
        if i == 0 || v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
    }

    #[test]
    fn minimizes_rosenbrock() {
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadConfig::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn higher_dimension_quadratic() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * (v - 0.5).powi(2)).sum::<f64>();
        let r = nelder_mead(f, &vec![0.0; 10], &NelderMeadConfig { max_evals: 50_000, ..Default::default() });
        assert!(r.value < 1e-9, "{}", r.value);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadConfig { max_evals: 20, ..Default::default() });
        assert!(!r.converged);
        assert!(r.evals <= 25);
    }

    #[test]
    fn nan_is_treated_as_infinite() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) };
        let r = nelder_mead(f, &[0.5], &NelderMeadConfig::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn multistart_is_deterministic_and_picks_lowest() {
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.1 * x[0];
        let starts = vec![vec![2.0], vec![-2.0], vec![-2.0]];
        let (b1, r1) = multistart(f, &starts, &NelderMeadConfig::default());
        let (b2, r2) = multistart(f, &starts, &NelderMeadConfig::default());
        assert_eq!(b1, 1);
        assert_eq!(b1, b2);
        assert_eq!(r1[1].x, r2[1].x);
        assert!(r1[1].x[0] < 0.0);
    }

    #[test]
    fn best_index_tie_breaks_low() {
        assert_eq!(best_index([3.0, 1.0, 1.0]), 1);
        assert_eq!(best_index([f64::INFINITY, f64::INFINITY]), 0);
    }

    proptest! {
        #[test]
        fn never_worse_than_start(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let start = [a, b];
            let r = nelder_mead(rosenbrock, &start, &NelderMeadConfig { max_evals: 300, ..Default::default() });
            prop_assert!(r.value <= rosenbrock(&start));
        }
    }
}
