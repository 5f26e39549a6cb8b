//! QAOA, gradient descent and BAB behaviour on small instances.

use qanneal::bab::{baseline_protocols, construct_ansatz, optimize_bab, optimize_bab_from, BabConfig, BabParams, Variant};
use qanneal::evolution::{sample_schedule, PiecewiseConstant};
use qanneal::hamiltonian::{build_operators, ground_energy, symmetric_sector};
use qanneal::instances::{appendix_d_instance, random_instance};
use qanneal::optimal_control::{descend, detect_bab, DescentConfig, DEFAULT_EPS_BANG};
use qanneal::qaoa::{bootstrap_sweep, extract_curve, optimize_qaoa, QaoaConfig};

#[test]
fn bootstrapped_energies_are_monotone_and_bounded() {
    let inst = random_instance(5, 21).unwrap();
    let pair = build_operators(&inst).unwrap();
    let cfg = QaoaConfig { restarts: 3, max_evals: 4000, ..Default::default() };
    let sweep = bootstrap_sweep(&pair, 1, 4, &cfg).unwrap();
    let ground = ground_energy(&inst);
    for w in sweep.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-9);
    }
    assert!(sweep.iter().all(|r| r.energy >= ground - 1e-9));
    let again = optimize_qaoa(&pair, 2, &cfg).unwrap();
    assert_eq!(again.angles, optimize_qaoa(&pair, 2, &cfg).unwrap().angles);
}

#[test]
fn descent_stays_in_box_and_descends() {
    let pair = build_operators(&random_instance(4, 6).unwrap()).unwrap();
    let start = PiecewiseConstant::linear_ramp(2.0, 80);
    let res = descend(&pair, &start, &pair.initial_state(), &DescentConfig { max_iters: 60, ..Default::default() }).unwrap();
    assert!(res.schedule.values.iter().all(|u| (0.0..=1.0).contains(u)));
    assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
    assert!(res.energy < res.history[0]);
}

#[test]
fn initial_bang_shrinks_with_longer_time() {
    let pair = symmetric_sector(&build_operators(&appendix_d_instance()).unwrap()).unwrap().operators;
    let cfg = DescentConfig { max_iters: 150, ..Default::default() };
    let bang = |t_f: f64| {
        let start = PiecewiseConstant::linear_ramp(t_f, 300);
        let res = descend(&pair, &start, &pair.initial_state(), &cfg).unwrap();
        (detect_bab(&res.schedule, DEFAULT_EPS_BANG).initial_bang, res.schedule.step())
    };
    let (b1, _) = bang(4.5);
    let (b2, step2) = bang(7.0);
    assert!(b2 <= b1 + step2, "{b1} -> {b2}");
}

#[test]
fn bab_variants_nest_and_beat_qaoa() {
    let inst = random_instance(5, 4).unwrap();
    let pair = symmetric_sector(&build_operators(&inst).unwrap()).unwrap().operators;
    let q = bootstrap_sweep(&pair, 1, 3, &QaoaConfig { restarts: 3, max_evals: 4000, ..Default::default() }).unwrap();
    let best = q.last().unwrap();
    let curve = extract_curve(&best.angles).unwrap();
    let t = best.angles.total_time();
    let cfg = BabConfig { restarts: 2, max_evals: 1500, resolution: 400, ..Default::default() };
    let fixed = optimize_bab(&pair, &curve, t, Variant::FixedFreq, &cfg).unwrap();
    let free = optimize_bab_from(&pair, &curve, t, &BabParams { variant: Variant::FreeFreq, ..fixed.params.clone() }, &cfg).unwrap();
    let basic = baseline_protocols(&pair, &curve, t, 400).unwrap();
    assert!(free.energy <= fixed.energy + 1e-6);
    assert!(fixed.energy <= basic.basic + 1e-6);
    assert!(free.energy <= best.energy + 0.02, "{} vs QAOA {}", free.energy, best.energy);

    let (sampled, _) = sample_schedule(&construct_ansatz(&curve, &free.params).unwrap(), 400).unwrap();
    let dt = sampled.step();
    for (k, u) in sampled.values.iter().enumerate() {
        let mid = (k as f64 + 0.5) * dt;
        if mid < free.params.gamma_tilde {
            assert_eq!(*u, 0.0);
        } else if mid > t - free.params.beta_tilde {
            assert_eq!(*u, 1.0);
        }
    }
}
