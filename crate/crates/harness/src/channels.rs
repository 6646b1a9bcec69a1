//! Random channel-gain ensembles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Draws beyond this many per instance make a scenario infeasible.
pub const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelModel {
    /// Independent `|z|^2` per link and dimension, `z` standard complex Gaussian.
    Rayleigh,
    /// Frequency response of a multipath link sampled at `K` uniform frequencies.
    FourRayRayleigh {
        #[serde(default = "default_taps")]
        taps: usize,
        /// Delays are uniform on `[0, delay_spread)` symbols.
        #[serde(default = "default_spread")]
        delay_spread: f64,
    },
    /// The same gains for every instance, `[n][m][k]`.
    Fixed { cross_gain: Vec<Vec<Vec<f64>>> },
}

fn default_taps() -> usize {
    4
}

fn default_spread() -> f64 {
    1.0
}

/// Interference-ratio filters on drawn channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Leader hurts the follower, not the other way round.
    S1,
    /// Both interfere strongly.
    S2,
    /// Follower hurts the leader, not the other way round.
    S3,
    #[default]
    None,
}

/// Bounds used by the scenario tests on the ratios `H10/H11` and `H01/H00`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioThresholds {
    pub s1_leader_to_follower_min: f64,
    pub s1_follower_to_leader_max: f64,
    pub s2_min: f64,
    pub s3_leader_to_follower_max: f64,
    pub s3_follower_to_leader_min: f64,
    /// Apply the ratio tests on every dimension; otherwise on dimension-averaged gains.
    #[serde(default = "default_per_dimension")]
    pub per_dimension: bool,
}

fn default_per_dimension() -> bool {
    true
}

impl Default for ScenarioThresholds {
    fn default() -> Self {
        Self {
            s1_leader_to_follower_min: 0.8,
            s1_follower_to_leader_max: 0.1,
            s2_min: 0.9,
            s3_leader_to_follower_max: 0.1,
            s3_follower_to_leader_min: 0.9,
            per_dimension: true,
        }
    }
}

impl ScenarioThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.s1_leader_to_follower_min,
            self.s1_follower_to_leader_max,
            self.s2_min,
            self.s3_leader_to_follower_max,
            self.s3_follower_to_leader_min,
        ];
        if all.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(HarnessError::Config(
                "scenario thresholds must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Ratio tests on the leader 0 / follower 1 gains.
    pub fn accepts(&self, scenario: Scenario, gains: &[Vec<Vec<f64>>]) -> bool {
        if self.per_dimension {
            (0..gains[0][0].len()).all(|d| {
                self.ratios_pass(
                    scenario,
                    gains[1][0][d] / gains[1][1][d],
                    gains[0][1][d] / gains[0][0][d],
                )
            })
        } else {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            self.ratios_pass(
                scenario,
                mean(&gains[1][0]) / mean(&gains[1][1]),
                mean(&gains[0][1]) / mean(&gains[0][0]),
            )
        }
    }

    fn ratios_pass(&self, scenario: Scenario, lf: f64, fl: f64) -> bool {
        match scenario {
            Scenario::None => true,
            Scenario::S1 => {
                lf > self.s1_leader_to_follower_min && fl < self.s1_follower_to_leader_max
            }
            Scenario::S2 => lf > self.s2_min && fl > self.s2_min,
            Scenario::S3 => {
                lf < self.s3_leader_to_follower_max && fl > self.s3_follower_to_leader_min
            }
        }
    }
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> (f64, f64) {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (s * re, s * im)
}

/// One unfiltered `[n][m][k]` gain tensor.
pub fn draw_gains(
    model: &ChannelModel,
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<Vec<f64>>>> {
    match model {
        ChannelModel::Fixed { cross_gain } => {
            if cross_gain.len() != n
                || cross_gain
                    .iter()
                    .any(|r| r.len() != n || r.iter().any(|g| g.len() != k))
            {
                return Err(HarnessError::Config(format!(
                    "fixed gains must be {n}x{n}x{k}"
                )));
            }
            Ok(cross_gain.clone())
        }
        ChannelModel::Rayleigh => Ok((0..n)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        (0..k)
                            .map(|_| {
                                let (re, im) = complex_gaussian(rng, 1.0);
                                re * re + im * im
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()),
        ChannelModel::FourRayRayleigh { taps, delay_spread } => {
            if *taps == 0 || !(*delay_spread >= 0.0) {
                return Err(HarnessError::Config(
                    "multipath needs taps and a delay spread".into(),
                ));
            }
            let mut out = vec![vec![vec![0.0; k]; n]; n];
            for row in out.iter_mut() {
                for link in row.iter_mut() {
                    let paths: Vec<((f64, f64), f64)> = (0..*taps)
                        .map(|_| {
                            let g = complex_gaussian(rng, 1.0 / *taps as f64);
                            (g, rng.gen::<f64>() * delay_spread)
                        })
                        .collect();
                    for (d, gain) in link.iter_mut().enumerate() {
                        let freq = d as f64 / k as f64;
                        let (mut re, mut im) = (0.0, 0.0);
                        for ((gr, gi), tau) in &paths {
                            let (s, c) = (-std::f64::consts::TAU * freq * tau).sin_cos();
                            re += gr * c - gi * s;
                            im += gr * s + gi * c;
                        }
                        *gain = re * re + im * im;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Gains for one instance, drawn until the scenario filter accepts them.
pub fn generate_channels(
    model: &ChannelModel,
    scenario: Scenario,
    thresholds: &ScenarioThresholds,
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if scenario != Scenario::None && n < 2 {
        return Err(HarnessError::Config("scenarios need two players".into()));
    }
    for _ in 0..MAX_REJECTIONS {
        let g = draw_gains(model, n, k, rng)?;
        if thresholds.accepts(scenario, &g) {
            return Ok(g);
        }
        if matches!(model, ChannelModel::Fixed { .. }) {
            break;
        }
    }
    Err(HarnessError::InfeasibleScenario(format!(
        "{scenario:?} rejected {MAX_REJECTIONS} draws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance_rng;

    #[test]
    fn deterministic_per_index() {
        let model = ChannelModel::FourRayRayleigh {
            taps: 4,
            delay_spread: 1.0,
        };
        let t = ScenarioThresholds::default();
        let a =
            generate_channels(&model, Scenario::None, &t, 2, 5, &mut instance_rng(9, 3)).unwrap();
        let b =
            generate_channels(&model, Scenario::None, &t, 2, 5, &mut instance_rng(9, 3)).unwrap();
        let c =
            generate_channels(&model, Scenario::None, &t, 2, 5, &mut instance_rng(9, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rayleigh_mean_is_one() {
        let mut rng = instance_rng(1, 0);
        let g = draw_gains(&ChannelModel::Rayleigh, 1, 100_000, &mut rng).unwrap();
        let mean = g[0][0].iter().sum::<f64>() / 100_000.0;
        assert!((0.98..=1.02).contains(&mean), "{mean}");
    }

    #[test]
    fn multipath_has_unit_power() {
        let mut rng = instance_rng(2, 0);
        let model = ChannelModel::FourRayRayleigh {
            taps: 4,
            delay_spread: 1.0,
        };
        let mut total = 0.0;
        for _ in 0..20_000 {
            total += draw_gains(&model, 1, 3, &mut rng).unwrap()[0][0]
                .iter()
                .sum::<f64>();
        }
        let mean = total / 60_000.0;
        assert!((0.97..=1.03).contains(&mean), "{mean}");
    }

    #[test]
    fn s2_filter_holds() {
        let t = ScenarioThresholds::default();
        for i in 0..50 {
            let model = ChannelModel::FourRayRayleigh {
                taps: 4,
                delay_spread: 1.0,
            };
            let g =
                generate_channels(&model, Scenario::S2, &t, 2, 3, &mut instance_rng(5, i)).unwrap();
            for d in 0..3 {
                assert!(g[1][0][d] / g[1][1][d] > 0.9 && g[0][1][d] / g[0][0][d] > 0.9);
            }
        }
    }
}
