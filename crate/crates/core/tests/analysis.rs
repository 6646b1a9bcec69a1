mod common;

use common::{capped, priced, rng, uniform};
use rsg_core::analysis::{
    check_conditions_with, classify_regime, delta_metrics, ConditionBasis, Regime, RegimeThresholds,
};
use rsg_core::equilibria::{solve_nse_with, solve_rse1_with, solve_rse2_with, SolverOptions};
use rsg_core::{realized_utilities, ActionProfile, UncertaintySpec};

#[test]
fn d_metrics_recompute_from_stored_utilities() {
    let opts = SolverOptions::default();
    let mut r = rng(41);
    let mut checked = 0;
    while checked < 100 {
        let k = 1 + checked % 2;
        let spec = priced(&mut r, 2, k, (0.1, 1.0));
        let nse = solve_nse_with(&spec, &opts, None).unwrap();
        if nse.utilities.iter().any(|u| u.abs() <= 1e-12) {
            continue;
        }
        checked += 1;
        let eps = uniform(&mut r, 0.0, 0.1);
        let rse = solve_rse1_with(
            &spec,
            &UncertaintySpec::uniform(&spec, eps, 0.0),
            &opts,
            Some(&nse.profile),
        )
        .unwrap();
        // stored utilities are the realized ones and sum to the social utility
        assert_eq!(
            rse.utilities,
            realized_utilities(&spec, &rse.profile).unwrap()
        );
        assert!((rse.social - rse.utilities.iter().sum::<f64>()).abs() <= 1e-12);
        let m = delta_metrics(&nse, &rse).unwrap();
        for n in 0..2 {
            let d = (rse.utilities[n] - nse.utilities[n]) / nse.utilities[n];
            assert!((m.per_player[n] - d).abs() <= 1e-12);
        }
        let sn: f64 = nse.utilities.iter().sum();
        let sr: f64 = rse.utilities.iter().sum();
        assert!((m.social - (sr - sn) / sn).abs() <= 1e-12);
        assert!(delta_metrics(&nse, &nse)
            .unwrap()
            .per_player
            .iter()
            .all(|d| *d == 0.0));
    }
}

/// Under the marginal basis the conditions are sufficient at first order, so a
/// predicted social gain must show up at a small radius.
#[test]
fn predicted_social_gains_materialize() {
    let opts = SolverOptions::default();
    let th = RegimeThresholds::default();
    let mut r = rng(42);
    let (mut predicted, mut n) = (0, 0);
    while n < 150 {
        let k = 1 + n % 2;
        let spec = capped(&mut r, 2, k, (0.1, 1.0));
        let nse = solve_nse_with(&spec, &opts, None).unwrap();
        if nse.utilities.iter().any(|u| u.abs() <= 1e-12) {
            continue;
        }
        n += 1;
        let rep =
            check_conditions_with(&spec, &nse.profile, ConditionBasis::Marginal, &th).unwrap();
        if rep.case1_predicts_gain() {
            predicted += 1;
            let r1 = solve_rse1_with(
                &spec,
                &UncertaintySpec::uniform(&spec, 0.01, 0.0),
                &opts,
                Some(&nse.profile),
            )
            .unwrap();
            let d = delta_metrics(&nse, &r1).unwrap().social;
            assert!(
                d >= -1e-6,
                "instance {n}: social change {d} under noisy observations"
            );
        }
        if rep.case2_predicts_gain() {
            predicted += 1;
            let r2 = solve_rse2_with(
                &spec,
                &UncertaintySpec::uniform(&spec, 0.0, 0.01),
                &opts,
                Some(&nse.profile),
            )
            .unwrap();
            let d = delta_metrics(&nse, &r2).unwrap().social;
            assert!(
                d >= -1e-6,
                "instance {n}: social change {d} under leader uncertainty"
            );
        }
    }
    assert!(predicted >= 5, "only {predicted} predictions");
}

/// At high SINR the throughput conditions reduce to noise comparisons:
/// `H10 a0 < H10 a0 + s1` (C1 always holds) and `H01 a1 + s0 < H01 a1` (C2 never holds).
#[test]
fn high_sinr_conditions_reduce_to_noise_comparisons() {
    let opts = SolverOptions::default();
    let th = RegimeThresholds::default();
    let mut r = rng(43);
    let mut n = 0;
    while n < 100 {
        let mut spec = priced(&mut r, 2, 1, (0.0005, 0.005));
        for p in 0..2 {
            spec.noise[p][0] = uniform(&mut r, 1e-4, 1e-3);
        }
        let nse = solve_nse_with(&spec, &opts, None).unwrap();
        if !nse.is_interior() {
            continue;
        }
        let rep =
            check_conditions_with(&spec, &nse.profile, ConditionBasis::Throughput, &th).unwrap();
        let label = &rep.regime.as_ref().unwrap()[0];
        if label.sinr[0] <= 100.0 || label.sinr[1] <= 100.0 {
            continue;
        }
        n += 1;
        assert_eq!(label.regime, Regime::R1);
        assert!(rep.c1.as_ref().unwrap().all);
        assert!(!rep.c2.as_ref().unwrap().all);
        assert_eq!(label.case1, Some(spec.gain(1, 0, 0) < spec.gain(0, 1, 0)));
    }
}

#[test]
fn regime_labels_follow_thresholds() {
    let th = RegimeThresholds::default();
    let mut r = rng(44);
    for _ in 0..500 {
        let spec = priced(&mut r, 2, 3, (0.01, 3.0));
        let p = ActionProfile::new(
            (0..2)
                .map(|n| {
                    (0..3)
                        .map(|k| uniform(&mut r, 0.0, spec.action_max[n][k]))
                        .collect()
                })
                .collect(),
        );
        let labels = classify_regime(&spec, &p, &th).unwrap();
        for (k, l) in labels.iter().enumerate() {
            let f0 = spec.noise[0][k] + spec.gain(0, 1, k) * p.actions[1][k];
            let f1 = spec.noise[1][k] + spec.gain(1, 0, k) * p.actions[0][k];
            let s0 = spec.direct_gain(0, k) * p.actions[0][k] / f0;
            let s1 = spec.direct_gain(1, k) * p.actions[1][k] / f1;
            assert!((l.sinr[0] - s0).abs() <= 1e-12 * s0.max(1.0));
            assert!((l.sinr[1] - s1).abs() <= 1e-12 * s1.max(1.0));
            let r1 = s0 > th.high && s1 > th.high;
            let r2 = s0 < th.low && s1 < th.low;
            let close = (f1 - f0).abs() / f0.max(f1) < th.proximity;
            assert_eq!(l.regime == Regime::Mixed, !r1 && !r2 && !close);
            assert_eq!(l.case1.is_none(), l.regime == Regime::Mixed);
        }
    }
}
