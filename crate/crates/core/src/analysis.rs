//! Derivative-magnitude conditions, SINR regimes, relative utility changes and
//! per-instance ordering checks.

use serde::{Deserialize, Serialize};

use crate::equilibria::{
    solve_nse_with, solve_rse1_with, solve_rse2_with, EquilibriumKind, EquilibriumResult,
    SolverOptions,
};
use crate::error::{GameError, Result};
use crate::game::{
    derivatives_unchecked, impact_values, ActionProfile, DerivativeBundle, GameSpec,
};
use crate::robust::UncertaintySpec;

/// Which own-action derivative the conditions compare against negative impacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConditionBasis {
    /// Derivative of the utility itself, price included. The conditions are
    /// then exact first-order sufficient conditions for the social change.
    #[default]
    Marginal,
    /// Derivative of the throughput alone, `H / (f + H a)`.
    Throughput,
}

/// A condition evaluated per dimension plus its conjunction over dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimFlags {
    pub per_dim: Vec<bool>,
    pub all: bool,
}

impl DimFlags {
    fn new(per_dim: Vec<bool>) -> Self {
        let all = per_dim.iter().all(|b| *b);
        Self { per_dim, all }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    R1,
    R2,
    R3,
    Mixed,
}

/// Regime of one dimension and the matching channel-gain test for each case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    /// Leader and follower SINR.
    pub sinr: [f64; 2],
    /// Simplified test predicting a social gain under noisy observations; `None` when Mixed.
    pub case1: Option<bool>,
    /// Simplified test predicting a social gain under leader uncertainty; `None` when Mixed.
    pub case2: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub high: f64,
    pub low: f64,
    pub proximity: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            high: 10.0,
            low: 0.1,
            proximity: 0.2,
        }
    }
}

/// Relative utility changes of a robust equilibrium against the NSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMetrics {
    pub kind: EquilibriumKind,
    pub per_player: Vec<f64>,
    pub social: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub basis: ConditionBasis,
    /// One-leader-one-follower conditions; `None` for other shapes.
    pub c1: Option<DimFlags>,
    pub c2: Option<DimFlags>,
    pub c3: Option<DimFlags>,
    pub c4: Option<DimFlags>,
    /// Leader-side conditions of the multi-follower game.
    pub c5: DimFlags,
    pub c7: DimFlags,
    /// Follower-side conditions, one entry per follower in `GameSpec::followers` order.
    pub c6: Vec<DimFlags>,
    pub c8: Vec<DimFlags>,
    /// Present for two-player games.
    pub regime: Option<Vec<RegimeLabel>>,
    /// Filled in by callers that also hold robust equilibria.
    pub d_metrics: Vec<DeltaMetrics>,
}

impl ConditionReport {
    /// C6 for every follower on every dimension.
    pub fn c6_all(&self) -> bool {
        self.c6.iter().all(|f| f.all)
    }

    pub fn c8_all(&self) -> bool {
        self.c8.iter().all(|f| f.all)
    }

    pub fn case1_predicts_gain(&self) -> bool {
        match (&self.c1, &self.c2) {
            (Some(a), Some(b)) => a.all && b.all,
            _ => self.c5.all && self.c6_all(),
        }
    }

    pub fn case2_predicts_gain(&self) -> bool {
        match (&self.c3, &self.c4) {
            (Some(a), Some(b)) => a.all && b.all,
            _ => self.c7.all && self.c8_all(),
        }
    }
}

fn bundles(spec: &GameSpec, profile: &ActionProfile) -> Vec<DerivativeBundle> {
    (0..spec.n_players())
        .map(|n| derivatives_unchecked(spec, n, profile.row(n), &impact_values(spec, profile, n)))
        .collect()
}

/// Evaluates C1-C8 at the equilibrium profile with the marginal basis.
pub fn check_conditions(spec: &GameSpec, at: &EquilibriumResult) -> Result<ConditionReport> {
    check_conditions_with(
        spec,
        &at.profile,
        ConditionBasis::Marginal,
        &RegimeThresholds::default(),
    )
}

/// Evaluates the conditions at `profile`.
///
/// Negative impacts enter by magnitude. Own-action derivatives keep their
/// sign: a condition such as `|C_10| < J_0` reads "the leader's own marginal
/// gain outweighs the damage it does", which is the first-order meaning and
/// coincides with the magnitude form whenever the derivative is positive.
pub fn check_conditions_with(
    spec: &GameSpec,
    profile: &ActionProfile,
    basis: ConditionBasis,
    thresholds: &RegimeThresholds,
) -> Result<ConditionReport> {
    profile.check_feasible(spec, 1e-9)?;
    let leaders = spec.leaders();
    let Some(&l) = leaders.first() else {
        return Err(GameError::InvalidSpec("conditions need a leader".into()));
    };
    let followers = spec.followers();
    let b = bundles(spec, profile);
    for n in 0..spec.n_players() {
        let f = impact_values(spec, profile, n);
        if let Some((dim, &value)) = f
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > crate::game::SINGULAR_IMPACT))
        {
            return Err(GameError::SingularImpact {
                player: n,
                dim,
                value,
            });
        }
    }
    let k_dims = spec.n_dims();
    let own = |n: usize, k: usize| -> f64 {
        match basis {
            ConditionBasis::Marginal => b[n].grad_a[k],
            ConditionBasis::Throughput => b[n].grad_a[k] + spec.price(n),
        }
    };
    // |C_nm^k|: damage to n per unit action of m
    let c = |n: usize, m: usize, k: usize| -> f64 { (spec.gain(n, m, k) * b[n].grad_f[k]).abs() };

    let leader_damage = |k: usize| followers.iter().map(|&n| c(n, l, k)).sum::<f64>();
    let c5 = DimFlags::new((0..k_dims).map(|k| own(l, k) > leader_damage(k)).collect());
    let c7 = DimFlags::new((0..k_dims).map(|k| own(l, k) < leader_damage(k)).collect());
    let follower_damage = |n: usize, k: usize| {
        c(l, n, k)
            + followers
                .iter()
                .filter(|&&m| m != n)
                .map(|&m| c(m, n, k))
                .sum::<f64>()
    };
    let c6 = followers
        .iter()
        .map(|&n| {
            DimFlags::new(
                (0..k_dims)
                    .map(|k| own(n, k) < follower_damage(n, k))
                    .collect(),
            )
        })
        .collect();
    let c8 = followers
        .iter()
        .map(|&n| {
            DimFlags::new(
                (0..k_dims)
                    .map(|k| own(n, k) > follower_damage(n, k))
                    .collect(),
            )
        })
        .collect();

    let pair = (leaders.len() == 1 && followers.len() == 1).then(|| followers[0]);
    let per = |pred: &dyn Fn(usize) -> bool| DimFlags::new((0..k_dims).map(pred).collect());
    let (c1, c2, c3, c4) = match pair {
        Some(n) => (
            Some(per(&|k| c(n, l, k) < own(l, k))),
            Some(per(&|k| own(n, k) < c(l, n, k))),
            Some(per(&|k| own(l, k) < c(n, l, k))),
            Some(per(&|k| own(n, k) > c(l, n, k))),
        ),
        None => (None, None, None, None),
    };
    let regime = if pair.is_some() && spec.n_players() == 2 {
        Some(classify_regime(spec, profile, thresholds)?)
    } else {
        None
    };
    Ok(ConditionReport {
        basis,
        c1,
        c2,
        c3,
        c4,
        c5,
        c7,
        c6,
        c8,
        regime,
        d_metrics: Vec::new(),
    })
}

/// Labels each dimension of a leader/follower pair by SINR regime and
/// evaluates the channel-gain test that stands in for the full conditions there.
pub fn classify_regime(
    spec: &GameSpec,
    profile: &ActionProfile,
    thresholds: &RegimeThresholds,
) -> Result<Vec<RegimeLabel>> {
    let (leaders, followers) = (spec.leaders(), spec.followers());
    if spec.n_players() != 2 || leaders.len() != 1 {
        return Err(GameError::InvalidSpec(
            "regimes are defined for one leader and one follower".into(),
        ));
    }
    let (l, n) = (leaders[0], followers[0]);
    let f0 = impact_values(spec, profile, l);
    let f1 = impact_values(spec, profile, n);
    Ok((0..spec.n_dims())
        .map(|k| {
            let s0 = spec.direct_gain(l, k) * profile.actions[l][k] / f0[k];
            let s1 = spec.direct_gain(n, k) * profile.actions[n][k] / f1[k];
            let close = (f1[k] - f0[k]).abs() / f1[k].max(f0[k]) < thresholds.proximity;
            let regime = if s0 > thresholds.high && s1 > thresholds.high {
                Regime::R1
            } else if s0 < thresholds.low && s1 < thresholds.low {
                Regime::R2
            } else if close {
                Regime::R3
            } else {
                Regime::Mixed
            };
            let (h00, h11) = (spec.direct_gain(l, k), spec.direct_gain(n, k));
            let (h01, h10) = (spec.gain(l, n, k), spec.gain(n, l, k));
            let (case1, case2) = match regime {
                Regime::R1 => (Some(h10 < h01), Some(h10 > h01)),
                Regime::R2 => (Some(h00 > h01 && h11 < h10), Some(h00 < h01 && h11 > h10)),
                Regime::R3 => (Some(h00 * h10 > h11 * h10), Some(h00 * h10 < h11 * h10)),
                Regime::Mixed => (None, None),
            };
            RegimeLabel {
                regime,
                sinr: [s0, s1],
                case1,
                case2,
            }
        })
        .collect())
}

/// `(omega_rse - omega_nse) / omega_nse` per player and for the social sum.
///
/// A zero baseline for the social sum is reported with `player` equal to the
/// number of players.
pub fn delta_metrics(nse: &EquilibriumResult, rse: &EquilibriumResult) -> Result<DeltaMetrics> {
    if nse.utilities.len() != rse.utilities.len() {
        return Err(GameError::InvalidArgument(
            "results come from games of different size".into(),
        ));
    }
    let rel = |new: f64, base: f64, player: usize| {
        if base.abs() <= 1e-12 {
            Err(GameError::UndefinedBaseline { player })
        } else {
            Ok((new - base) / base)
        }
    };
    let per_player = nse
        .utilities
        .iter()
        .zip(&rse.utilities)
        .enumerate()
        .map(|(n, (b, r))| rel(*r, *b, n))
        .collect::<Result<Vec<_>>>()?;
    let social = rel(rse.social, nse.social, nse.utilities.len())?;
    Ok(DeltaMetrics {
        kind: rse.kind,
        per_player,
        social,
    })
}

/// Outcome of one ordering check; `None` when a solver failed for the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub name: String,
    pub passed: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub checks: Vec<OrderingCheck>,
    pub nse: EquilibriumResult,
    /// `(eps, result)` for every grid value, including zero.
    pub rse1: Vec<(f64, Option<EquilibriumResult>)>,
    /// `(delta, result)` with noiseless followers.
    pub rse2: Vec<(f64, Option<EquilibriumResult>)>,
    pub conditions: ConditionReport,
}

impl OrderingReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed == Some(true))
    }
}

/// Slack allowed in every ordering comparison.
pub const ORDER_TOL: f64 = 1e-9;

/// Solves the NSE, RSE1 over `eps_grid` and RSE2 over `delta_grid` on one
/// instance and checks the orderings between them.
///
/// With several dimensions the worst-case direction couples them, so the RSE1
/// follower-utility and per-dimension action checks can fail on valid solves.
pub fn ordering_report(
    spec: &GameSpec,
    eps_grid: &[f64],
    delta_grid: &[f64],
    opts: &SolverOptions,
) -> Result<OrderingReport> {
    for grid in [eps_grid, delta_grid] {
        if grid.first() != Some(&0.0) || grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(GameError::InvalidArgument(
                "grids must be ascending and start at 0".into(),
            ));
        }
    }
    let nse = solve_nse_with(spec, opts, None)?;
    let rse1: Vec<(f64, Option<EquilibriumResult>)> = eps_grid
        .iter()
        .map(|&e| {
            let u = UncertaintySpec::uniform(spec, e, 0.0);
            (e, solve_rse1_with(spec, &u, opts, Some(&nse.profile)).ok())
        })
        .collect();
    let rse2: Vec<(f64, Option<EquilibriumResult>)> = delta_grid
        .iter()
        .map(|&d| {
            let u = UncertaintySpec::uniform(spec, 0.0, d);
            (d, solve_rse2_with(spec, &u, opts, Some(&nse.profile)).ok())
        })
        .collect();
    let l = spec.leaders()[0];
    let followers = spec.followers();
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: Option<bool>, detail: String| {
        checks.push(OrderingCheck {
            name: name.to_string(),
            passed,
            detail,
        })
    };

    // robust followers help the leader and hurt themselves
    for (e, r) in rse1.iter().skip(1) {
        let passed = r.as_ref().map(|r| {
            r.utilities[l] >= nse.utilities[l] - ORDER_TOL
                && followers
                    .iter()
                    .all(|&n| r.utilities[n] <= nse.utilities[n] + ORDER_TOL)
        });
        push("rse1_utilities", passed, format!("eps={e}"));
    }
    push(
        "rse1_actions_monotone",
        monotone(
            &rse1,
            |r| r.profile.actions[l].clone(),
            1.0,
            &followers,
            -1.0,
        ),
        "leader up, followers down in eps".into(),
    );
    for (d, r) in rse2.iter().skip(1) {
        let passed = r.as_ref().map(|r| {
            r.utilities[l] <= nse.utilities[l] + ORDER_TOL
                && followers
                    .iter()
                    .all(|&n| r.utilities[n] >= nse.utilities[n] - ORDER_TOL)
        });
        push("rse2_utilities", passed, format!("delta={d}"));
    }
    push(
        "rse2_actions_monotone",
        monotone(
            &rse2,
            |r| r.profile.actions[l].clone(),
            -1.0,
            &followers,
            1.0,
        ),
        "leader down, followers up in delta".into(),
    );
    // uncertain information never beats noisy observations for the leader
    for (e, r1) in &rse1 {
        for (d, _) in rse2.iter().skip(1) {
            let u = UncertaintySpec::uniform(spec, *e, *d);
            let r2 = solve_rse2_with(spec, &u, opts, Some(&nse.profile)).ok();
            let passed = match (r1, r2) {
                (Some(a), Some(b)) => Some(b.utilities[l] <= a.utilities[l] + ORDER_TOL),
                _ => None,
            };
            push("rse2_below_rse1", passed, format!("eps={e} delta={d}"));
        }
    }

    let conditions = check_conditions(spec, &nse)?;
    if let Some((e, Some(r))) = rse1.get(1) {
        if let Ok(d) = delta_metrics(&nse, r) {
            let predicted = conditions.case1_predicts_gain();
            let passed = if predicted {
                Some(d.social >= -1e-6)
            } else {
                Some(true)
            };
            push(
                "rse1_social_prediction",
                passed,
                format!("eps={e} predicted_gain={predicted} d={:.3e}", d.social),
            );
        }
    }
    if let Some((dl, Some(r))) = rse2.get(1) {
        if let Ok(d) = delta_metrics(&nse, r) {
            let predicted = conditions.case2_predicts_gain();
            let passed = if predicted {
                Some(d.social >= -1e-6)
            } else {
                Some(true)
            };
            push(
                "rse2_social_prediction",
                passed,
                format!("delta={dl} predicted_gain={predicted} d={:.3e}", d.social),
            );
        }
    }
    Ok(OrderingReport {
        checks,
        nse,
        rse1,
        rse2,
        conditions,
    })
}

/// Checks leader actions move with `leader_sign` and follower actions with
/// `follower_sign` along the grid, within `ORDER_TOL`.
fn monotone(
    cells: &[(f64, Option<EquilibriumResult>)],
    leader: impl Fn(&EquilibriumResult) -> Vec<f64>,
    leader_sign: f64,
    followers: &[usize],
    follower_sign: f64,
) -> Option<bool> {
    let results: Option<Vec<&EquilibriumResult>> = cells.iter().map(|(_, r)| r.as_ref()).collect();
    let results = results?;
    Some(results.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        let lead_ok = leader(a)
            .iter()
            .zip(leader(b))
            .all(|(x, y)| leader_sign * (y - x) >= -ORDER_TOL);
        let fol_ok = followers.iter().all(|&n| {
            a.profile.actions[n]
                .iter()
                .zip(&b.profile.actions[n])
                .all(|(x, y)| follower_sign * (y - x) >= -ORDER_TOL)
        });
        lead_ok && fol_ok
    }))
}
