//! Leader selection among several would-be leaders.

use rsg_core::analysis::{check_conditions_with, ConditionBasis, RegimeThresholds};
use rsg_core::equilibria::{cooperative_leaders, solve_nse_with, solve_rse2_with};
use rsg_core::{EquilibriumResult, GameError, GameSpec, SolverOptions, UncertaintySpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Robust play for the selected leader: every other player follows, and the
/// leader plans against information radius `delta` towards each of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub leader: usize,
    pub delta: f64,
    /// The game with `leader` as the only leader.
    pub spec: GameSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub nse: EquilibriumResult,
    pub rse2: EquilibriumResult,
    /// Summed utility of everyone but the selected leader.
    pub others_nse: f64,
    pub others_rse2: f64,
}

impl RunPlan {
    pub fn others(&self) -> Vec<usize> {
        (0..self.spec.n_players())
            .filter(|&n| n != self.leader)
            .collect()
    }

    pub fn execute(&self, opts: &SolverOptions) -> Result<PlanOutcome> {
        let nse = solve_nse_with(&self.spec, opts, None)?;
        let u = UncertaintySpec::uniform(&self.spec, 0.0, self.delta);
        let rse2 = solve_rse2_with(&self.spec, &u, opts, Some(&nse.profile))?;
        let others = self.others();
        Ok(PlanOutcome {
            others_nse: nse.utility_of(&others),
            others_rse2: rse2.utility_of(&others),
            nse,
            rse2,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    Selected(RunPlan),
    NoEligibleLeader,
}

/// Tries the leaders in index order. A candidate is re-roled as the only
/// leader, its NSE is computed, and it is selected when C7 and C8 hold there
/// on every dimension (throughput basis).
pub fn heuristic_leader_selection(
    spec: &GameSpec,
    delta_per_leader: &[f64],
    opts: &SolverOptions,
) -> Result<Selection> {
    let leaders = spec.leaders();
    if leaders.len() < 2 {
        return Err(HarnessError::Config(
            "leader selection needs at least two leaders".into(),
        ));
    }
    if delta_per_leader.len() != leaders.len() {
        return Err(HarnessError::Config(format!(
            "{} radii for {} leaders",
            delta_per_leader.len(),
            leaders.len()
        )));
    }
    for (&leader, &delta) in leaders.iter().zip(delta_per_leader) {
        let single = spec.with_single_leader(leader)?;
        let nse = solve_nse_with(&single, opts, None)?;
        let report = check_conditions_with(
            &single,
            &nse.profile,
            ConditionBasis::Throughput,
            &RegimeThresholds::default(),
        )?;
        if report.c7.all && report.c8_all() {
            return Ok(Selection::Selected(RunPlan {
                leader,
                delta,
                spec: single,
            }));
        }
    }
    Ok(Selection::NoEligibleLeader)
}

/// Leaders jointly maximize their summed utility against the followers' Nash play.
pub fn cooperative_leaders_nse(spec: &GameSpec, tol: f64) -> Result<EquilibriumResult> {
    if spec.leaders().len() < 2 {
        return Err(HarnessError::Game(GameError::InvalidSpec(
            "cooperation needs at least two leaders".into(),
        )));
    }
    let opts = SolverOptions {
        tol,
        restarts: 20,
        ..SolverOptions::default()
    };
    Ok(cooperative_leaders(
        spec,
        &UncertaintySpec::none(spec.n_players()),
        &opts,
    )?)
}
