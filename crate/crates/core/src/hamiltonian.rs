//! Mixer and problem operators, the spin-flip symmetric sector, and the
//! instantaneous spectrum of `H(u) = u B + (1 - u) C`.
//!
//! `B = -Σ_i X_i`, so its ground state is the uniform superposition and a
//! mixer bang `exp(-iβB)` rotates every qubit by a positive X angle. `C` is
//! diagonal with entries `Σ_{i<j} J_ij z_i z_j`.
//!
//! Operators are stored implicitly: the diagonal of `C` plus, for every basis
//! state, the indices reached by one spin flip. The same representation
//! serves the full `2^n` space and the `2^(n-1)`-dimensional +1 eigensector
//! of the global flip `X^⊗n`; dense matrices are only formed for
//! eigendecompositions.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::ProblemInstance;

/// Largest qubit count accepted by [`build_operators`].
pub const MAX_QUBITS: usize = 20;

/// Spectral degeneracy threshold.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    /// All `2^n` computational basis states.
    Full,
    /// Symmetric combinations `(|z⟩ + |z̄⟩)/√2` with the top bit of `z` clear.
    Symmetric,
}

/// Mixer `B` and problem `C` on a chosen state space.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    n: usize,
    space: Space,
    problem: Vec<f64>,
    flips: Vec<u32>,
    problem_min: f64,
    problem_max: f64,
}

impl OperatorPair {
    fn from_parts(n: usize, space: Space, problem: Vec<f64>, flips: Vec<u32>) -> Self {
        let problem_min = problem.iter().copied().fold(f64::INFINITY, f64::min);
        let problem_max = problem.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { n, space, problem, flips, problem_min, problem_max }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.problem.len()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    /// Diagonal of `C` in this space's basis.
    pub fn problem_diagonal(&self) -> &[f64] {
        &self.problem
    }

    pub fn problem_range(&self) -> (f64, f64) {
        (self.problem_min, self.problem_max)
    }

    /// Basis indices reached from `index` by flipping each spin.
    pub fn flip_targets(&self, index: usize) -> &[u32] {
        &self.flips[index * self.n..(index + 1) * self.n]
    }

    /// `out = B x`.
    pub fn apply_mixer(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in self.flip_targets(k) {
                acc += x[t as usize];
            }
            *o = -acc;
        }
    }

    /// `out = (u B + (1 - u) C) x`.
    pub fn apply_hamiltonian(&self, u: f64, x: &[Complex64], out: &mut [Complex64]) {
        let w = 1.0 - u;
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in self.flip_targets(k) {
                acc += x[t as usize];
            }
            *o = x[k] * (w * self.problem[k]) - acc * u;
        }
    }

    /// `out = (B - C) x`, the derivative of `H(u)` with respect to `u`.
    pub fn apply_control_derivative(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in self.flip_targets(k) {
                acc += x[t as usize];
            }
            *o = -acc - x[k] * self.problem[k];
        }
    }

    /// Gershgorin interval containing the spectrum of `H(u)`.
    pub fn spectral_bounds(&self, u: f64) -> (f64, f64) {
        let w = 1.0 - u;
        let radius = u.abs() * self.n as f64;
        let (a, b) = (w * self.problem_min, w * self.problem_max);
        (a.min(b) - radius, a.max(b) + radius)
    }

    /// Uniform superposition, the ground state of `B`, in this space.
    pub fn initial_state(&self) -> Vec<Complex64> {
        let amp = 1.0 / (self.dim() as f64).sqrt();
        vec![Complex64::new(amp, 0.0); self.dim()]
    }

    pub fn mixer_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for k in 0..d {
            for &t in self.flip_targets(k) {
                m[(k, t as usize)] -= 1.0;
            }
        }
        m
    }

    pub fn problem_dense(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.problem))
    }

    pub fn hamiltonian_dense(&self, u: f64) -> DMatrix<f64> {
        self.mixer_dense() * u + self.problem_dense() * (1.0 - u)
    }
}

/// Builds `B` and `C` on the full `2^n` space.
pub fn build_operators(instance: &ProblemInstance) -> Result<OperatorPair> {
    let n = instance.n();
    if n > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "{n} qubits exceeds the supported maximum of {MAX_QUBITS}"
        )));
    }
    let dim = 1usize << n;
    let problem: Vec<f64> = (0..dim).map(|z| instance.cost(z)).collect();
    let mut flips = Vec::with_capacity(dim * n);
    for z in 0..dim {
        for i in 0..n {
            flips.push((z ^ (1 << i)) as u32);
        }
    }
    Ok(OperatorPair::from_parts(n, Space::Full, problem, flips))
}

/// Minimum classical cost over all `2^n` bitstrings.
pub fn ground_energy(instance: &ProblemInstance) -> f64 {
    (0..1usize << instance.n()).map(|z| instance.cost(z)).fold(f64::INFINITY, f64::min)
}

/// The +1 eigensector of `X^⊗n`, which contains `|+⟩^⊗n`.
#[derive(Debug, Clone)]
pub struct SymmetricSector {
    pub operators: OperatorPair,
    full_dim: usize,
}

impl SymmetricSector {
    pub fn dim(&self) -> usize {
        self.operators.dim()
    }

    /// Maps a sector state to the full space.
    pub fn embed(&self, state: &[Complex64]) -> Vec<Complex64> {
        let mask = self.full_dim - 1;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut full = vec![Complex64::new(0.0, 0.0); self.full_dim];
        for (r, &a) in state.iter().enumerate() {
            full[r] += a * s;
            full[r ^ mask] += a * s;
        }
        full
    }

    /// Orthogonal projection of a full-space state onto the sector basis.
    pub fn project(&self, state: &[Complex64]) -> Vec<Complex64> {
        let mask = self.full_dim - 1;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..self.dim()).map(|r| (state[r] + state[r ^ mask]) * s).collect()
    }
}

/// Largest violation of `[B, X^⊗n] = 0` and `[C, X^⊗n] = 0`.
pub fn flip_commutator_defect(pair: &OperatorPair) -> f64 {
    if pair.space() == Space::Symmetric {
        return 0.0;
    }
    let mask = pair.dim() - 1;
    let mut worst = 0.0f64;
    for z in 0..pair.dim() {
        worst = worst.max((pair.problem[z] - pair.problem[z ^ mask]).abs());
        let mut a: Vec<u32> = pair.flip_targets(z).iter().map(|&t| t ^ mask as u32).collect();
        let mut b = pair.flip_targets(z ^ mask).to_vec();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            worst = worst.max(1.0);
        }
    }
    worst
}

/// Restricts a full-space pair to the symmetric sector.
pub fn symmetric_sector(pair: &OperatorPair) -> Result<SymmetricSector> {
    if pair.space() != Space::Full {
        return Err(Error::InvalidArgument("operators are already sector-restricted".into()));
    }
    let defect = flip_commutator_defect(pair);
    if defect > 1e-12 {
        return Err(Error::Consistency(format!(
            "operators do not commute with the global spin flip (defect {defect:e})"
        )));
    }
    let n = pair.n();
    let full_dim = pair.dim();
    let mask = full_dim - 1;
    let half = full_dim / 2;
    let problem = pair.problem[..half].to_vec();
    let mut flips = Vec::with_capacity(half * n);
    for r in 0..half {
        for &t in pair.flip_targets(r) {
            let t = t as usize;
            flips.push(if t < half { t } else { t ^ mask } as u32);
        }
    }
    Ok(SymmetricSector {
        operators: OperatorPair::from_parts(n, Space::Symmetric, problem, flips),
        full_dim,
    })
}

/// Instantaneous eigen-data of `H(u)` in the symmetric sector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSlice {
    pub u: f64,
    /// Ascending eigenvalues shifted so the first is exactly zero.
    pub lambdas: Vec<f64>,
    pub gap: f64,
    /// `⟨0|(B - C)|1⟩`.
    pub gamma_me: f64,
    /// `⟨0|(B - C)|0⟩`.
    pub kappa0: f64,
    /// `⟨1|(B - C)|1⟩`.
    pub kappa1: f64,
    #[serde(skip)]
    pub ground: Vec<f64>,
    #[serde(skip)]
    pub excited: Vec<f64>,
}

fn sector_pair(pair: &OperatorPair) -> Result<std::borrow::Cow<'_, OperatorPair>> {
    Ok(match pair.space() {
        Space::Symmetric => std::borrow::Cow::Borrowed(pair),
        Space::Full => std::borrow::Cow::Owned(symmetric_sector(pair)?.operators),
    })
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn expectation(pair: &OperatorPair, a: &[f64], b: &[f64]) -> f64 {
    // ⟨a|(B - C)|b⟩ for real vectors
    let mut total = 0.0;
    for k in 0..pair.dim() {
        let mut mix = 0.0;
        for &t in pair.flip_targets(k) {
            mix += b[t as usize];
        }
        total += a[k] * (-mix - pair.problem[k] * b[k]);
    }
    total
}

fn slice_in_sector(pair: &OperatorPair, u: f64) -> Result<SpectralSlice> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!("u = {u} outside [0, 1]")));
    }
    let dim = pair.dim();
    let eig = SymmetricEigen::new(pair.hamiltonian_dense(u));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let base = eig.eigenvalues[order[0]];
    let lambdas: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i] - base).collect();
    let column = |i: usize| -> Vec<f64> { eig.eigenvectors.column(order[i]).iter().copied().collect() };
    let mut ground = column(0);
    fix_sign(&mut ground);
    let (gap, mut excited) = if dim > 1 { (lambdas[1], column(1)) } else { (f64::INFINITY, vec![0.0]) };
    if gap < DEGENERACY_TOL {
        return Err(Error::Degenerate { u, gap });
    }
    fix_sign(&mut excited);
    let (gamma_me, kappa1) = if dim > 1 {
        (expectation(pair, &ground, &excited), expectation(pair, &excited, &excited))
    } else {
        (0.0, 0.0)
    };
    Ok(SpectralSlice {
        u,
        kappa0: expectation(pair, &ground, &ground),
        lambdas,
        gap,
        gamma_me,
        kappa1,
        ground,
        excited,
    })
}

/// Eigen-decomposition of `H(u)` restricted to the symmetric sector.
///
/// Eigenvectors are real with their largest-magnitude component positive.
pub fn spectral_slice(pair: &OperatorPair, u: f64) -> Result<SpectralSlice> {
    slice_in_sector(&*sector_pair(pair)?, u)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Slices along a sorted grid with eigenvector signs continued by maximal
/// overlap with the previous slice, so `γ(u)` and `κ_i(u)` vary continuously.
pub fn spectral_profile(pair: &OperatorPair, grid: &[f64]) -> Result<Vec<SpectralSlice>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("u grid must be sorted".into()));
    }
    let sector = sector_pair(pair)?;
    let mut out: Vec<SpectralSlice> = Vec::with_capacity(grid.len());
    for &u in grid {
        let mut slice = slice_in_sector(&sector, u)?;
        if let Some(prev) = out.last() {
            continue_gauge(&*sector, prev, &mut slice);
        }
        out.push(slice);
    }
    Ok(out)
}

/// Flips eigenvector signs of `slice` to maximize overlap with `prev`.
pub(crate) fn continue_gauge(pair: &OperatorPair, prev: &SpectralSlice, slice: &mut SpectralSlice) {
    let mut changed = false;
    if dot(&prev.ground, &slice.ground) < 0.0 {
        slice.ground.iter_mut().for_each(|x| *x = -*x);
        changed = true;
    }
    if dot(&prev.excited, &slice.excited) < 0.0 {
        slice.excited.iter_mut().for_each(|x| *x = -*x);
        changed = true;
    }
    if changed {
        slice.gamma_me = expectation(pair, &slice.ground, &slice.excited);
    }
}

/// Full-space eigenvalues of `H(u)` (unshifted), for diagnostics.
pub fn full_spectrum(pair: &OperatorPair, u: f64) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(pair.hamiltonian_dense(u)).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}
