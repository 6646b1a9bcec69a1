//! Ensemble studies of the follower's relative utility change at RSE1.

use log::warn;
use rsg_core::analysis::delta_metrics;
use rsg_core::equilibria::{solve_nse_with, solve_rse1_with};
use rsg_core::{EquilibriumResult, GameSpec, SolverOptions, UncertaintySpec};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Largest share of failed instances a study may drop.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;

/// Relative changes at or below this count as no change.
pub const CHANGE_FLOOR: f64 = 1e-9;

/// Sorted `(value, cumulative fraction)` pairs; the last fraction is 1.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// NSE and RSE1 of one instance.
///
/// In the budgeted game the leader problem has several local optima; each
/// search is restarted from the other's solution and the better leader value
/// kept, so that both equilibria come from the same basin when it matters.
pub fn paired_equilibria(
    spec: &GameSpec,
    eps: f64,
    opts: &SolverOptions,
) -> Result<(EquilibriumResult, EquilibriumResult)> {
    let leader = spec.leaders()[0];
    let mut nse = solve_nse_with(spec, opts, None)?;
    if eps == 0.0 {
        let mut rse = nse.clone();
        rse.kind = rsg_core::EquilibriumKind::Rse1;
        return Ok((nse, rse));
    }
    let u = UncertaintySpec::uniform(spec, eps, 0.0);
    let mut rse = solve_rse1_with(spec, &u, opts, Some(&nse.profile))?;
    if spec.is_budgeted() {
        let again = solve_nse_with(spec, opts, Some(&rse.profile))?;
        if again.utilities[leader] > nse.utilities[leader] {
            nse = again;
            let again = solve_rse1_with(spec, &u, opts, Some(&nse.profile))?;
            if again.utilities[leader] > rse.utilities[leader] {
                rse = again;
            }
        }
    }
    Ok((nse, rse))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub index: u64,
    /// Relative change of every player's utility, then of the social utility.
    pub d: Vec<f64>,
    pub common_nse: usize,
    pub common_rse: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfReport {
    pub eps: f64,
    /// Player whose change is tabulated.
    pub player: usize,
    pub cdf: Vec<(f64, f64)>,
    /// Share of kept instances with a change above `CHANGE_FLOOR`.
    pub positive_fraction: f64,
    pub outcomes: Vec<InstanceOutcome>,
    pub excluded: Vec<(u64, String)>,
    pub total: usize,
}

impl CdfReport {
    /// CDF of another column of the per-instance changes (`n_players` is the social one).
    pub fn cdf_of(&self, column: usize) -> Vec<(f64, f64)> {
        let v: Vec<f64> = self.outcomes.iter().map(|o| o.d[column]).collect();
        empirical_cdf(&v)
    }
}

/// Runs NSE and RSE1 on every instance at the largest radius of `eps_grid`
/// and tabulates the first follower's relative utility change.
pub fn monte_carlo_cdf(config: &ExperimentConfig) -> Result<CdfReport> {
    config.validate()?;
    if config.spec.n_leaders != 1 {
        return Err(HarnessError::Config(
            "the CDF study needs exactly one leader".into(),
        ));
    }
    let eps = *config.eps_grid.last().expect("validated grid");
    let player = config.spec.n_leaders;
    let total = config.ensemble_size;
    let mut outcomes = Vec::with_capacity(total);
    let mut excluded = Vec::new();
    for index in 0..total as u64 {
        let run = || -> Result<InstanceOutcome> {
            let spec = config.instance(index)?;
            let (nse, rse) = paired_equilibria(&spec, eps, &config.solver)?;
            let m = delta_metrics(&nse, &rse)?;
            let mut d = m.per_player;
            d.push(m.social);
            let common = |r: &EquilibriumResult| -> Result<usize> {
                let threshold = match spec.budget(0) {
                    Some(p) => rsg_core::budget::activity_threshold(p, spec.n_dims()),
                    None => 0.0,
                };
                Ok(rsg_core::overlap_stats(&r.profile, threshold)?.common_count(0, player))
            };
            Ok(InstanceOutcome {
                index,
                d,
                common_nse: common(&nse)?,
                common_rse: common(&rse)?,
            })
        };
        match run() {
            Ok(o) => outcomes.push(o),
            Err(HarnessError::InfeasibleScenario(e)) => {
                return Err(HarnessError::InfeasibleScenario(e))
            }
            Err(e) => {
                warn!("instance {index} excluded: {e}");
                excluded.push((index, e.to_string()));
            }
        }
    }
    if excluded.len() as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(HarnessError::TooManyExclusions {
            excluded: excluded.len(),
            total,
        });
    }
    let values: Vec<f64> = outcomes.iter().map(|o| o.d[player]).collect();
    let positive = values.iter().filter(|v| **v > CHANGE_FLOOR).count();
    let positive_fraction = if values.is_empty() {
        0.0
    } else {
        positive as f64 / values.len() as f64
    };
    Ok(CdfReport {
        eps,
        player,
        cdf: empirical_cdf(&values),
        positive_fraction,
        outcomes,
        excluded,
        total,
    })
}
