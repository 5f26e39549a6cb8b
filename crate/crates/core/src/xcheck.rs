//! Slow, independent reference computations used to check the fast paths.
//!
//! Nothing here shares an algorithm with the code it checks: exponentials
//! are dense scaled-and-squared Taylor series, energies are explicit
//! quadratic forms, and ground energies are exhaustive scans.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::Schedule;
use crate::hamiltonian::OperatorPair;
use crate::instances::ProblemInstance;

/// Largest state dimension the dense oracles accept.
pub const ORACLE_MAX_DIM: usize = 64;

type CMatrix = DMatrix<Complex64>;

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(-i H t)` for real symmetric `H` by scaling and squaring a Taylor series.
pub fn dense_expm(h: &DMatrix<f64>, t: f64) -> CMatrix {
    let a: CMatrix = h.map(|x| Complex64::new(0.0, -x * t));
    expm(&a)
}

/// Matrix exponential of a general complex matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    let d = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scaled = a / Complex64::new(2f64.powi(squarings as i32), 0.0);
    // ‖scaled‖ ≤ 1/4; 40 terms leave a remainder far below 1e-30
    let mut result = CMatrix::identity(d, d);
    let mut term = CMatrix::identity(d, d);
    for k in 1..=40 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        result += &term;
        if one_norm(&term) < 1e-40 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn check_dim(pair: &OperatorPair) -> Result<()> {
    if pair.dim() > ORACLE_MAX_DIM {
        return Err(Error::Resource(format!(
            "oracle refuses dimension {} (limit {ORACLE_MAX_DIM})",
            pair.dim()
        )));
    }
    Ok(())
}

/// Time-ordered product of midpoint-sampled dense exponentials over
/// `substeps` equal slices of `[0, t_f]`.
pub fn oracle_unitary_fn(pair: &OperatorPair, u: impl Fn(f64) -> f64, t_f: f64, substeps: usize) -> Result<CMatrix> {
    check_dim(pair)?;
    let (b, c) = (pair.mixer_dense(), pair.problem_dense());
    let h = t_f / substeps.max(1) as f64;
    let mut total = CMatrix::identity(pair.dim(), pair.dim());
    for k in 0..substeps {
        let uk = u((k as f64 + 0.5) * h);
        total = dense_expm(&(&b * uk + &c * (1.0 - uk)), h) * total;
    }
    Ok(total)
}

/// Dense propagator of a schedule. Bangs and piecewise-constant steps are
/// exponentiated whole (split into `substeps` pieces each); composite
/// schedules are midpoint-sampled on `substeps` uniform slices.
pub fn oracle_unitary(pair: &OperatorPair, schedule: &Schedule, substeps: usize) -> Result<CMatrix> {
    check_dim(pair)?;
    let (b, c) = (pair.mixer_dense(), pair.problem_dense());
    let dim = pair.dim();
    let m = substeps.max(1);
    let piece = |u: f64, dt: f64| -> CMatrix {
        let step = dense_expm(&(&b * u + &c * (1.0 - u)), dt / m as f64);
        let mut out = CMatrix::identity(dim, dim);
        for _ in 0..m {
            out = &step * out;
        }
        out
    };
    match schedule {
        Schedule::PiecewiseConstant(p) => {
            let mut total = CMatrix::identity(dim, dim);
            for &u in &p.values {
                total = piece(u, p.step()) * total;
            }
            Ok(total)
        }
        Schedule::BangSequence { segments } => {
            let mut total = CMatrix::identity(dim, dim);
            for s in segments {
                total = piece(s.level.u(), s.duration) * total;
            }
            Ok(total)
        }
        Schedule::BabComposite(_) => oracle_unitary_fn(pair, |t| schedule.value_at(t), schedule.total_time(), m),
    }
}

/// Final state of the schedule from `initial_state` via [`oracle_unitary`].
pub fn oracle_expm_evolve(
    pair: &OperatorPair,
    schedule: &Schedule,
    substeps: usize,
    initial_state: &[Complex64],
) -> Result<Vec<Complex64>> {
    let u = oracle_unitary(pair, schedule, substeps)?;
    Ok((u * DVector::from_column_slice(initial_state)).iter().copied().collect())
}

/// `ψ† C ψ` as an explicit complex quadratic form; the imaginary part is returned too.
pub fn oracle_energy(pair: &OperatorPair, state: &[Complex64]) -> (f64, f64) {
    let psi = DVector::from_column_slice(state);
    let c: CMatrix = pair.problem_dense().map(|x| Complex64::new(x, 0.0));
    let e = (psi.adjoint() * c * &psi)[(0, 0)];
    (e.re, e.im)
}

/// Exhaustive minimum of the classical cost, evaluated spin by spin.
pub fn oracle_ground_energy(instance: &ProblemInstance) -> Result<f64> {
    let n = instance.n();
    if n > 24 {
        return Err(Error::Resource(format!("exhaustive scan refuses n = {n}")));
    }
    let mut best = f64::INFINITY;
    let mut spins = vec![1.0f64; n];
    for z in 0u64..(1u64 << n) {
        for (i, s) in spins.iter_mut().enumerate() {
            *s = 1.0 - 2.0 * ((z >> i) & 1) as f64;
        }
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i < j {
                    e += instance.coupling(i, j) * spins[i] * spins[j];
                }
            }
        }
        best = best.min(e);
    }
    Ok(best)
}

/// Spectral norm via the largest eigenvalue of `M† M`.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    let gram = m.adjoint() * m;
    SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(0.0, f64::max).max(0.0).sqrt()
}

/// Spectral norm by power iteration on `M† M` from a fixed start vector.
pub fn power_iteration_norm(m: &DMatrix<f64>, iterations: usize) -> f64 {
    let gram = m.transpose() * m;
    let n = gram.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_749_895).fract());
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w = &gram * &v;
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        if (next - lambda).abs() <= 1e-15 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// `‖U − U_PF‖` with `U` from fine-step dense exponentials of the schedule
/// and `U_PF` the `p`-slice product formula built from slice integrals of `u`.
pub fn oracle_unitary_error(pair: &OperatorPair, schedule: &Schedule, p: usize, substeps: usize) -> Result<f64> {
    let exact = oracle_unitary(pair, schedule, substeps)?;
    let angles = crate::trotter::trotterize_schedule(schedule, p)?;
    let (b, c) = (pair.mixer_dense(), pair.problem_dense());
    let dim = pair.dim();
    let mut product = CMatrix::identity(dim, dim);
    for (&g, &bt) in angles.gammas.iter().zip(&angles.betas) {
        product = dense_expm(&c, g) * product;
        product = dense_expm(&b, bt) * product;
    }
    Ok(spectral_norm(&(exact - product)))
}
