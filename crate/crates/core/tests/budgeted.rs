mod common;

use common::{rng, uniform};
use rand_chacha::ChaCha8Rng;
use rsg_core::budget::waterfill_kkt_residual;
use rsg_core::{
    robust_waterfill, waterfill, worst_case_observation, GameSpec, ImpactVector, Role, UtilityModel,
};

fn budgeted(r: &mut ChaCha8Rng, k: usize, budget: f64) -> GameSpec {
    let gains = (0..2)
        .map(|a| {
            (0..2)
                .map(|b| {
                    (0..k)
                        .map(|_| {
                            if a == b {
                                uniform(r, 0.2, 2.0)
                            } else {
                                uniform(r, 0.0, 1.0)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    GameSpec::new(
        vec![Role::Leader, Role::Follower],
        vec![vec![0.0; k]; 2],
        vec![vec![budget; k]; 2],
        gains,
        (0..2)
            .map(|_| (0..k).map(|_| uniform(r, 0.01, 0.5)).collect())
            .collect(),
        UtilityModel::BudgetedThroughput {
            budget: vec![budget; 2],
        },
    )
    .unwrap()
}

fn throughput(spec: &GameSpec, a: &[f64], f: &[f64]) -> f64 {
    (0..a.len())
        .map(|k| (1.0 + spec.direct_gain(1, k) * a[k] / f[k]).ln())
        .sum()
}

#[test]
fn waterfill_beats_simplex_grid() {
    let mut r = rng(21);
    for i in 0..200 {
        let k = 1 + i % 3;
        let budget = uniform(&mut r, 0.5, 2.0);
        let spec = budgeted(&mut r, k, budget);
        let f: Vec<f64> = (0..k).map(|_| uniform(&mut r, 0.01, 1.0)).collect();
        let a = waterfill(&spec, 1, &ImpactVector::new(f.clone()), budget).unwrap();
        let total: f64 = a.iter().sum();
        assert!(total <= budget + 1e-9);
        assert!((total - budget).abs() < 1e-9, "budget should be spent");
        assert!(waterfill_kkt_residual(&spec, 1, &f, &a, budget) < 1e-9);
        let v = throughput(&spec, &a, &f);
        let steps = 1000usize;
        let step = budget / steps as f64;
        let mut best = f64::NEG_INFINITY;
        match k {
            1 => best = throughput(&spec, &[budget], &f),
            2 => {
                for i in 0..=steps {
                    let x = i as f64 * step;
                    best = best.max(throughput(&spec, &[x, budget - x], &f));
                }
            }
            _ => {
                for i in 0..=steps {
                    for j in 0..=steps - i {
                        let (x, y) = (i as f64 * step, j as f64 * step);
                        best = best.max(throughput(&spec, &[x, y, (budget - x - y).max(0.0)], &f));
                    }
                }
            }
        }
        assert!(best <= v + 1e-6, "grid {best} beats waterfill {v}");
    }
}

/// Smallest throughput over `samples` points of the circle of radius `eps` around `f`.
fn circle_min(spec: &GameSpec, a: &[f64], f: &[f64], eps: f64, samples: usize) -> f64 {
    (0..samples)
        .map(|j| {
            let t = std::f64::consts::TAU * j as f64 / samples as f64;
            throughput(spec, a, &[f[0] + eps * t.cos(), f[1] + eps * t.sin()])
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn robust_waterfill_matches_max_min_grid() {
    let mut r = rng(22);
    for _ in 0..30 {
        let budget = 1.0;
        let spec = budgeted(&mut r, 2, budget);
        let f: Vec<f64> = (0..2).map(|_| uniform(&mut r, 0.05, 0.5)).collect();
        let eps = uniform(&mut r, 0.01, 0.04);
        let a = robust_waterfill(&spec, 1, &ImpactVector::new(f.clone()), eps, budget).unwrap();
        let value = circle_min(&spec, &a, &f, eps, 400);
        let mut oracle = f64::NEG_INFINITY;
        for i in 0..=400 {
            let x = budget * i as f64 / 400.0;
            oracle = oracle.max(circle_min(&spec, &[x, budget - x], &f, eps, 400));
        }
        assert!(
            (value - oracle).abs() < 1e-3,
            "robust {value} vs grid {oracle}"
        );
        // saddle point: the response is a waterfill against its own worst case
        let w = worst_case_observation(&spec, 1, &a, &ImpactVector::new(f.clone()), eps).unwrap();
        let again = waterfill(&spec, 1, &ImpactVector::new(w.values), budget).unwrap();
        assert!(
            a.iter().zip(&again).all(|(x, y)| (x - y).abs() < 1e-7),
            "{a:?} vs {again:?}"
        );
    }
}

#[test]
fn robust_waterfill_without_radius_is_waterfill() {
    let mut r = rng(23);
    let spec = budgeted(&mut r, 3, 1.0);
    let f = ImpactVector::new(vec![0.1, 0.2, 0.3]);
    assert_eq!(
        robust_waterfill(&spec, 1, &f, 0.0, 1.0).unwrap(),
        waterfill(&spec, 1, &f, 1.0).unwrap()
    );
}
