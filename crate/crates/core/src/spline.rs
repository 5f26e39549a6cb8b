//! Natural cubic spline on a strictly increasing grid.

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub(crate) struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub(crate) fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return invalid("spline needs at least two points and matching lengths");
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("spline grid must be strictly increasing");
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the interior second derivatives
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut sup = vec![0.0; k];
            for i in 0..k {
                let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
                diag[i] = 2.0 * (h0 + h1);
                sup[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let sub = x[i + 1] - x[i];
                let w = sub / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - sup[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { x: x.to_vec(), y: y.to_vec(), m })
    }

    pub(crate) fn range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    fn segment(&self, t: f64) -> usize {
        let idx = self.x.partition_point(|&v| v <= t);
        idx.clamp(1, self.x.len() - 1) - 1
    }

    /// Value and first derivative; outside the grid the end cubic is extended.
    pub(crate) fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let value = a * self.y[i] + b * self.y[i + 1] + ((a.powi(3) - a) * m0 + (b.powi(3) - b) * m1) * h * h / 6.0;
        let slope = (self.y[i + 1] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (value, slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_lines() {
        let x = [0.0, 0.3, 1.0, 1.5];
        let s = CubicSpline::new(&x, &x.map(|v| 2.0 * v - 1.0)).unwrap();
        for t in [0.0, 0.1, 0.7, 1.2, 1.5] {
            let (v, d) = s.eval(t);
            assert!((v - (2.0 * t - 1.0)).abs() < 1e-14);
            assert!((d - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn converges_on_smooth_function() {
        let x: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin()).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        for t in [0.2, 0.5, 0.81] {
            let (v, d) = s.eval(t);
            assert!((v - (3.0 * t).sin()).abs() < 1e-8);
            assert!((d - 3.0 * (3.0 * t).cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(CubicSpline::new(&[0.0], &[1.0]).is_err());
        assert!(CubicSpline::new(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }
}
