//! Random game instances used by the property studies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rsg_core::{GameSpec, Role, UtilityModel};

use crate::channels::{generate_channels, ChannelModel, Scenario, ScenarioThresholds};
use crate::Result;

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Priced leader/follower pair whose equilibria are usually interior.
///
/// Direct gains dominate cross gains and boxes extend past `1/c`, so a bound
/// only binds when a player prefers silence.
pub fn priced_pair(rng: &mut ChaCha8Rng, k: usize) -> GameSpec {
    let price = vec![uniform(rng, 0.3, 1.0), uniform(rng, 0.3, 1.0)];
    let mut gains = vec![vec![vec![0.0; k]; 2]; 2];
    for d in 0..k {
        gains[0][0][d] = uniform(rng, 0.5, 2.0);
        gains[1][1][d] = uniform(rng, 0.5, 2.0);
        gains[0][1][d] = uniform(rng, 0.1, 1.0);
        gains[1][0][d] = uniform(rng, 0.1, 1.0);
    }
    let noise: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..k).map(|_| uniform(rng, 0.05, 0.3)).collect())
        .collect();
    let action_max = price.iter().map(|c| vec![2.0 / c; k]).collect();
    GameSpec::new(
        vec![Role::Leader, Role::Follower],
        vec![vec![0.0; k]; 2],
        action_max,
        gains,
        noise,
        UtilityModel::PricedThroughput { price },
    )
    .expect("generated spec is valid")
}

/// Like [`priced_pair`] but with action caps drawn around the unconstrained
/// optimum, so that a bound binds in a sizable share of instances.
pub fn capped_pair(rng: &mut ChaCha8Rng, k: usize) -> GameSpec {
    let mut spec = priced_pair(rng, k);
    for n in 0..2 {
        let c = spec.price(n);
        for d in 0..k {
            spec.action_max[n][d] = uniform(rng, 0.2, 1.5) / c;
        }
    }
    spec
}

/// One leader and `n_followers` followers, priced.
///
/// Strong direct gains, loud noise and boxes of `1/c` keep the sampled
/// curvature bounds tight enough that most draws pass the uniqueness
/// certificate, and most equilibria stay interior.
pub fn priced_multi_follower(rng: &mut ChaCha8Rng, n_followers: usize, k: usize) -> GameSpec {
    let n = n_followers + 1;
    let price: Vec<f64> = (0..n).map(|_| uniform(rng, 0.4, 1.0)).collect();
    let mut gains = vec![vec![vec![0.0; k]; n]; n];
    for d in 0..k {
        for a in 0..n {
            for b in 0..n {
                gains[a][b][d] = if a == b {
                    uniform(rng, 1.5, 3.0)
                } else if a == 0 || b == 0 {
                    uniform(rng, 0.1, 0.5)
                } else {
                    uniform(rng, 0.005, 0.03)
                };
            }
        }
    }
    let noise = (0..n)
        .map(|_| (0..k).map(|_| uniform(rng, 0.5, 1.0)).collect())
        .collect();
    let mut roles = vec![Role::Follower; n];
    roles[0] = Role::Leader;
    GameSpec::new(
        roles,
        vec![vec![0.0; k]; n],
        price.iter().map(|c| vec![1.0 / c; k]).collect(),
        gains,
        noise,
        UtilityModel::PricedThroughput { price },
    )
    .expect("generated spec is valid")
}

/// Two leaders and `n_followers` followers for the leader-selection protocol.
///
/// One leader, drawn at random, interferes with the followers; every other
/// cross gain is tiny. Followers are strong and expensive with quiet noise.
/// Once either leader is re-roled as the only one, the remaining players are
/// nearly decoupled and the uniqueness certificate passes.
pub fn heuristic_game(rng: &mut ChaCha8Rng, n_followers: usize, k: usize) -> GameSpec {
    let n = n_followers + 2;
    let loud = rng.gen_range(0..2);
    let price: Vec<f64> = (0..n)
        .map(|a| {
            if a < 2 {
                uniform(rng, 0.4, 1.0)
            } else {
                uniform(rng, 1.5, 3.0)
            }
        })
        .collect();
    let mut gains = vec![vec![vec![0.0; k]; n]; n];
    for d in 0..k {
        for a in 0..n {
            for b in 0..n {
                gains[a][b][d] = if a == b {
                    if a < 2 {
                        uniform(rng, 0.8, 1.5)
                    } else {
                        uniform(rng, 8.0, 15.0)
                    }
                } else if b == loud && a >= 2 {
                    uniform(rng, 0.05, 1.0)
                } else {
                    uniform(rng, 0.0005, 0.002)
                };
            }
        }
    }
    let noise = (0..n)
        .map(|_| (0..k).map(|_| uniform(rng, 0.1, 0.3)).collect())
        .collect();
    let mut roles = vec![Role::Follower; n];
    roles[0] = Role::Leader;
    roles[1] = Role::Leader;
    GameSpec::new(
        roles,
        vec![vec![0.0; k]; n],
        price.iter().map(|c| vec![1.0 / c; k]).collect(),
        gains,
        noise,
        UtilityModel::PricedThroughput { price },
    )
    .expect("generated spec is valid")
}

/// Settings of a budgeted leader/follower pair built from drawn channels.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedPairSettings {
    pub n_dims: usize,
    pub budget: f64,
    pub noise: f64,
    pub channel: ChannelModel,
    pub scenario: Scenario,
    pub thresholds: ScenarioThresholds,
}

pub fn budgeted_pair(settings: &BudgetedPairSettings, rng: &mut ChaCha8Rng) -> Result<GameSpec> {
    let k = settings.n_dims;
    let gains = generate_channels(
        &settings.channel,
        settings.scenario,
        &settings.thresholds,
        2,
        k,
        rng,
    )?;
    Ok(GameSpec::new(
        vec![Role::Leader, Role::Follower],
        vec![vec![0.0; k]; 2],
        vec![vec![settings.budget; k]; 2],
        gains,
        vec![vec![settings.noise; k]; 2],
        UtilityModel::BudgetedThroughput {
            budget: vec![settings.budget; 2],
        },
    )?)
}
