use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use qanneal::evolution::{evolve, PiecewiseConstant, Schedule};
use qanneal::hamiltonian::{build_operators, spectral_slice, symmetric_sector};
use qanneal::instances::appendix_d_instance;
use qanneal::near_adiabatic::*;

fn fixture() -> &'static SpectralFunctions {
    static CELL: OnceLock<SpectralFunctions> = OnceLock::new();
    CELL.get_or_init(|| {
        let pair = build_operators(&appendix_d_instance()).unwrap();
        let grid: Vec<f64> = (0..=300).map(|i| 0.1 + 0.8 * i as f64 / 300.0).collect();
        SpectralFunctions::from_pair(&pair, &grid).unwrap()
    })
}

#[test]
fn two_level_tracks_sector_evolution() {
    let pair = build_operators(&appendix_d_instance()).unwrap();
    let sector = symmetric_sector(&pair).unwrap();
    let (start, rate, t_f) = (0.3, 0.02, 10.0);
    let ops = &sector.operators;
    let ground = spectral_slice(ops, start).unwrap().ground;
    let init: Vec<Complex64> = ground.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let steps = 2_000;
    let values = (0..steps).map(|k| start + rate * (k as f64 + 0.5) * t_f / steps as f64).collect();
    let schedule = Schedule::PiecewiseConstant(PiecewiseConstant { t_f, values });
    let trace = evolve(ops, &schedule, 1.0, &init).unwrap();
    let last = trace.times.len() - 1;
    assert!(trace.pop0[last] + trace.pop1[last] > 0.99);
    let full_c1 = trace.amp1[last].norm();

    let f = fixture();
    let path = LinearRamp { start, rate };
    let two = integrate_two_level(&f, &path, &|_| 0.0, t_f, TwoLevelState::ground(), &Default::default()).unwrap();
    let a1 = two.last().a1;
    assert!((a1 - full_c1).abs() < 0.05 * full_c1, "two-level {a1} vs full {full_c1}");
}

#[test]
fn oscillation_reduces_theta0_and_leakage() {
    let f = fixture();
    let opts = TwoLevelOptions { rtol: 1e-13, atol: 1e-15, ..Default::default() };
    for rate in [3e-4, 1e-3, 3e-3, 1e-2] {
        let run = leakage_run(&f, 0.5, rate, &opts).unwrap();
        assert!(run.leakage_corrected < run.leakage_uncorrected, "{run:?}");
        assert!(run.theta0_corrected.abs() < run.theta0_uncorrected.abs(), "{run:?}");
    }
}

#[test]
fn closed_form_amplitude_halves_leakage_rebalanced_removes_it() {
    let f = fixture();
    let opts = TwoLevelOptions { rtol: 1e-13, atol: 1e-15, ..Default::default() };
    let run = leakage_run(&f, 0.5, 1e-3, &opts).unwrap();
    let ratio = run.leakage_corrected / run.leakage_uncorrected;
    assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
    assert!(run.leakage_rebalanced * 10.0 < run.leakage_uncorrected, "{run:?}");
}

#[test]
fn theta0_matches_accumulated_argument() {
    let f = fixture();
    let path = LinearRamp { start: 0.4, rate: 0.01 };
    let drive = |t: f64| 1e-3 * (0.8 * t).cos();
    let opts = TwoLevelOptions { h_max: 0.01, ..Default::default() };
    let init = TwoLevelState { a0: 0.95, a1: (1.0f64 - 0.95 * 0.95).sqrt(), varphi: 0.3 };
    let tr = integrate_two_level(&f, &path, &drive, 10.0, init, &opts).unwrap();
    let phases: Vec<f64> = tr.states.iter().map(|s| s.varphi).collect();
    let q = theta0(&f, &path, &drive, &tr.times, &phases).unwrap();
    let direct = *tr.accumulated_argument.last().unwrap();
    assert!((q.value - direct).abs() < 1e-5 * q.integrand_l1.max(1e-12), "{} vs {direct}", q.value);
}

#[test]
fn perturbative_c_matches_finite_difference_of_log() {
    let f = fixture();
    let (u, rate, t) = (0.5, 2e-3, 0.0);
    let c = perturbative_c_at(&f, &LinearRamp { start: u, rate }, t).unwrap();
    let h = 1e-5;
    let log_ratio = |u: f64| {
        let p = f.eval(u).unwrap();
        (p.gap * p.gap / p.gamma.abs()).ln()
    };
    let d = (log_ratio(u + h) - log_ratio(u - h)) / (2.0 * h);
    let gap = f.eval(u).unwrap().gap;
    let expect = rate * rate / (gap * gap) * d;
    assert!((c - expect).abs() < 1e-8 * expect.abs().max(1e-12) + 1e-14, "{c} vs {expect}");
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

#[test]
fn smaller_theta0_means_smaller_leakage() {
    let f = fixture();
    let opts = TwoLevelOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
    let mut theta = Vec::new();
    let mut leak = Vec::new();
    for k in 0..10 {
        let run = leakage_run(&f, 0.5, 10f64.powf(-3.5 + 0.17 * k as f64), &opts).unwrap();
        theta.extend([run.theta0_uncorrected.abs(), run.theta0_corrected.abs()]);
        leak.extend([run.leakage_uncorrected, run.leakage_corrected]);
    }
    let (a, b) = (ranks(&theta), ranks(&leak));
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    let spearman = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
    assert!(spearman > 0.9, "{spearman}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn conservation_and_closed_form(
        start in 0.3f64..0.6,
        rate in -0.02f64..0.02,
        amp in 0.0f64..0.02,
        omega in 0.2f64..3.0,
        a0 in 0.5f64..1.0,
        phi in -3.0f64..3.0,
    ) {
        let f = fixture();
        let path = LinearRamp { start, rate };
        let drive = move |t: f64| amp * (omega * t).sin();
        let init = TwoLevelState { a0, a1: (1.0 - a0 * a0).sqrt(), varphi: phi };
        let tr = integrate_two_level(&f, &path, &drive, 8.0, init, &Default::default()).unwrap();
        prop_assert!(tr.norm_drift < 1e-8);
        prop_assert!(tr.closed_form_defect() < 1e-6);
    }
}
