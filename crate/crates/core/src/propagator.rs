//! Chebyshev expansion of `exp(-i H t)` acting on a vector.
//!
//! With the spectrum of `H` inside `[c - r, c + r]`,
//! `exp(-iHt) = e^{-ict} Σ_k (2 - δ_k0) (-i)^k J_k(rt) T_k((H - c)/r)`.
//! The series is truncated once the Bessel weights fall below double
//! precision, so each step is exact to rounding. The same expansion applied
//! to the block operator `[[H, D], [0, H]]` yields the Fréchet derivative of
//! the exponential in direction `D`, which the control gradient uses.

use num_complex::Complex64;

use crate::hamiltonian::OperatorPair;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Bessel functions `J_0(x) .. J_{kmax}(x)` for `x ≥ 0` by Miller's
/// backward recurrence normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub(crate) fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        return out;
    }
    let start = kmax.max(x.ceil() as usize) + 40 + x as usize;
    let mut values = vec![0.0; start + 2];
    values[start] = 1e-300;
    for k in (1..=start).rev() {
        values[k - 1] = 2.0 * k as f64 / x * values[k] - values[k + 1];
        if values[k - 1].abs() > 1e250 {
            values[k - 1..].iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = values[0] + 2.0 * values.iter().skip(2).step_by(2).sum::<f64>();
    values.truncate(kmax + 1);
    values.iter_mut().for_each(|v| *v /= norm);
    values
}

/// Number of Chebyshev terms for argument `x = r |t|`.
fn term_count(x: f64) -> usize {
    (x + 10.0 * x.cbrt() + 18.0).ceil() as usize
}

/// Applies a function `exp(-i t A)` given `A` through `apply` with spectrum
/// inside `[lo, hi]`.
fn chebyshev_exp<F>(apply: F, lo: f64, hi: f64, t: f64, state: &mut [Complex64])
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    if t == 0.0 {
        return;
    }
    let center = 0.5 * (lo + hi);
    let radius = 0.5 * (hi - lo);
    let global = Complex64::from_polar(1.0, -center * t);
    if radius <= 0.0 {
        state.iter_mut().for_each(|x| *x *= global);
        return;
    }
    let x = radius * t.abs();
    let kmax = term_count(x) + 6;
    let bessel = bessel_j_sequence(x, kmax);
    // (-i sgn t)^k
    let unit = if t > 0.0 { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) };

    let len = state.len();
    let mut prev: Vec<Complex64> = state.to_vec();
    let mut cur = vec![ZERO; len];
    let mut scratch = vec![ZERO; len];
    let scale = 1.0 / radius;
    let normalized = |v: &[Complex64], out: &mut [Complex64], scratch: &mut [Complex64]| {
        apply(v, scratch);
        for ((o, s), x) in out.iter_mut().zip(scratch.iter()).zip(v) {
            *o = (*s - *x * center) * scale;
        }
    };

    let mut acc: Vec<Complex64> = prev.iter().map(|v| v * bessel[0]).collect();
    normalized(&prev, &mut cur, &mut scratch);
    let mut phase = unit;
    let w = phase * (2.0 * bessel[1]);
    acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += c * w);

    let mut next = vec![ZERO; len];
    for k in 2..=kmax {
        if k as f64 > x && bessel[k].abs() < 1e-18 && bessel[k - 1].abs() < 1e-18 {
            break;
        }
        normalized(&cur, &mut next, &mut scratch);
        for (n, p) in next.iter_mut().zip(&prev) {
            *n = *n * 2.0 - p;
        }
        phase *= unit;
        let w = phase * (2.0 * bessel[k]);
        acc.iter_mut().zip(&next).for_each(|(a, c)| *a += c * w);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    for (s, a) in state.iter_mut().zip(acc) {
        *s = a * global;
    }
}

/// `state ← exp(-i H(u) t) state`.
pub(crate) fn apply_exp(pair: &OperatorPair, u: f64, t: f64, state: &mut [Complex64]) {
    let (lo, hi) = pair.spectral_bounds(u);
    chebyshev_exp(|x, out| pair.apply_hamiltonian(u, x, out), lo, hi, t, state);
}

/// Advances `state` by `exp(-i H(u) t)` and returns `(∂/∂u exp(-iH(u)t)) ψ`
/// evaluated on the input state.
pub(crate) fn apply_exp_with_derivative(
    pair: &OperatorPair,
    u: f64,
    t: f64,
    state: &mut [Complex64],
) -> Vec<Complex64> {
    let dim = state.len();
    let mut block = vec![ZERO; 2 * dim];
    block[dim..].copy_from_slice(state);
    let (lo, hi) = pair.spectral_bounds(u);
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        let (top, bottom) = x.split_at(dim);
        let (otop, obottom) = out.split_at_mut(dim);
        pair.apply_hamiltonian(u, top, otop);
        pair.apply_hamiltonian(u, bottom, obottom);
        let mut extra = vec![ZERO; dim];
        pair.apply_control_derivative(bottom, &mut extra);
        otop.iter_mut().zip(extra).for_each(|(o, e)| *o += e);
    };
    chebyshev_exp(apply, lo, hi, t, &mut block);
    state.copy_from_slice(&block[dim..]);
    block.truncate(dim);
    block
}

/// `state ← exp(-i t C) state`.
pub(crate) fn apply_problem_bang(pair: &OperatorPair, t: f64, state: &mut [Complex64]) {
    for (s, &c) in state.iter_mut().zip(pair.problem_diagonal()) {
        *s *= Complex64::from_polar(1.0, -c * t);
    }
}

/// `state ← exp(-i t B) state` with `B = -Σ X_i`.
///
/// In the full space this is a product of single-qubit rotations
/// `cos t + i sin t X_i`; the symmetric sector falls back to Chebyshev.
pub(crate) fn apply_mixer_bang(pair: &OperatorPair, t: f64, state: &mut [Complex64]) {
    match pair.space() {
        crate::hamiltonian::Space::Full => {
            let (c, s) = (t.cos(), t.sin());
            let is = Complex64::new(0.0, s);
            for q in 0..pair.n() {
                let bit = 1usize << q;
                for z in 0..state.len() {
                    if z & bit == 0 {
                        let a = state[z];
                        let b = state[z | bit];
                        state[z] = a * c + b * is;
                        state[z | bit] = b * c + a * is;
                    }
                }
            }
        }
        crate::hamiltonian::Space::Symmetric => apply_exp(pair, 1.0, t, state),
    }
}
