#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsg_core::{ActionProfile, GameSpec, Role, UtilityModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Random priced game: `n` players (player 0 leads), `k` dimensions.
pub fn priced(rng: &mut ChaCha8Rng, n: usize, k: usize, cross: (f64, f64)) -> GameSpec {
    let price: Vec<f64> = (0..n).map(|_| uniform(rng, 0.3, 1.0)).collect();
    let gains = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    (0..k)
                        .map(|_| {
                            if a == b {
                                uniform(rng, 0.5, 2.0)
                            } else {
                                uniform(rng, cross.0, cross.1)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let noise = (0..n)
        .map(|_| (0..k).map(|_| uniform(rng, 0.05, 0.3)).collect())
        .collect();
    let mut roles = vec![Role::Follower; n];
    roles[0] = Role::Leader;
    GameSpec::new(
        roles,
        vec![vec![0.0; k]; n],
        price.iter().map(|c| vec![2.0 / c; k]).collect(),
        gains,
        noise,
        UtilityModel::PricedThroughput { price },
    )
    .unwrap()
}

pub fn random_profile(rng: &mut ChaCha8Rng, spec: &GameSpec) -> ActionProfile {
    ActionProfile::new(
        (0..spec.n_players())
            .map(|n| {
                (0..spec.n_dims())
                    .map(|k| uniform(rng, 0.0, spec.action_max[n][k]))
                    .collect()
            })
            .collect(),
    )
}

/// Uniform point on the unit sphere in `k` dimensions.
pub fn sphere_point(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// Like [`priced`] with caps drawn around the unconstrained optimum, so bounds bind often.
pub fn capped(rng: &mut ChaCha8Rng, n: usize, k: usize, cross: (f64, f64)) -> GameSpec {
    let mut spec = priced(rng, n, k, cross);
    for p in 0..n {
        let c = spec.price(p);
        for d in 0..k {
            spec.action_max[p][d] = uniform(rng, 0.2, 1.5) / c;
        }
    }
    spec
}
