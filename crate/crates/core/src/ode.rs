//! Adaptive Dormand–Prince 5(4) integrator for real systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 2_000_000, h_max: f64::INFINITY }
    }
}

/// Accepted steps: `times[k]`, `states[k]`, starting with the initial point.
#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`, landing exactly on `t1`.
pub(crate) fn dopri5<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], tol: &Tolerance) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut sol = Solution { times: vec![t0], states: vec![y.clone()] };
    if t1 <= t0 {
        return Ok(sol);
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    f(t, &y, &mut k[0])?;
    let scale0: f64 = (0..n).map(|i| (k[0][i] / (tol.atol + tol.rtol * y[i].abs())).powi(2)).sum::<f64>();
    let mut h = if scale0 > 0.0 { 0.01 / (scale0 / n.max(1) as f64).sqrt() } else { 1e-3 * (t1 - t0) };
    h = h.min(t1 - t0).min(tol.h_max).max(1e-14 * (t1 - t0));
    let mut steps = 0usize;
    let mut y_new = vec![0.0; n];
    while t < t1 {
        if steps >= tol.max_steps {
            return Err(Error::Resource(format!("ODE step budget {} exhausted at t = {t}", tol.max_steps)));
        }
        steps += 1;
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            f(t + C[s] * h, &tmp, &mut tail[0])?;
        }
        // stage 7 was evaluated at the fifth-order solution
        y_new.copy_from_slice(&tmp);
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Domain(format!("non-finite ODE error estimate at t = {t}")));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&y_new);
            sol.times.push(t);
            sol.states.push(y.clone());
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * if err <= 1.0 { factor } else { factor.min(1.0) }).min(tol.h_max);
        if h < 1e-15 * t1.abs().max(1.0) {
            return Err(Error::Domain(format!("ODE step size underflow at t = {t}")));
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let tol = Tolerance { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let sol = dopri5(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
                Ok(())
            },
            0.0,
            10.0,
            &[1.0, 0.0],
            &tol,
        )
        .unwrap();
        let y = sol.states.last().unwrap();
        assert_eq!(*sol.times.last().unwrap(), 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-10, "{}", y[0] - 10f64.cos());
        assert!((y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn error_scales_fifth_order() {
        let run = |rtol: f64| {
            let tol = Tolerance { rtol, atol: rtol, ..Default::default() };
            let sol = dopri5(
                |t, y, d| {
                    d[0] = -2.0 * t * y[0];
                    Ok(())
                },
                0.0,
                2.0,
                &[1.0],
                &tol,
            )
            .unwrap();
            ((sol.states.last().unwrap()[0] - (-4f64).exp()).abs(), sol.times.len())
        };
        let (e1, n1) = run(1e-6);
        let (e2, n2) = run(1e-10);
        assert!(e2 < e1 && e2 < 1e-9);
        assert!(n2 > n1);
    }

    #[test]
    fn right_hand_side_errors_propagate() {
        let r = dopri5(|_, _, _| Err(Error::Domain("boom".into())), 0.0, 1.0, &[1.0], &Tolerance::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
