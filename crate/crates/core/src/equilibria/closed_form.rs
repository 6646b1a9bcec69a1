use serde::{Deserialize, Serialize};

use super::EquilibriumResult;
use crate::error::{GameError, Result};
use crate::game::{derivatives_unchecked, impact_values, ActionProfile, GameSpec};
use crate::robust::{direction_vector, l2};

/// Which leader curvature enters the first-order correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LeaderCurvature {
    /// Leader re-optimizes against the follower's shift with its own partial
    /// Hessian, ignoring that the follower reacts to the leader's move.
    Partial,
    /// Implicit-function expansion of the full bi-level optimum: the leader's
    /// curvature and sensitivity are taken through the follower's reaction.
    #[default]
    Total,
}

/// First-order expansion of the RSE1 actions around an interior NSE.
///
/// The follower's worst-case observation moves its impact by `eps * |dir|`,
/// so its action falls by `eps * (J_af / J_aa) |dir|` while the leader's rises.
/// `dir` is the direction vector at the NSE; it is nonpositive, and the
/// corrections below are written with its magnitude.
pub fn rse1_closed_form(
    spec: &GameSpec,
    nse: &EquilibriumResult,
    eps: f64,
    curvature: LeaderCurvature,
) -> Result<ActionProfile> {
    let leaders = spec.leaders();
    let followers = spec.followers();
    if leaders.len() != 1 || followers.len() != 1 {
        return Err(GameError::InapplicableFormula(
            "one leader and one follower required".into(),
        ));
    }
    if spec.is_budgeted() {
        return Err(GameError::InapplicableFormula(
            "budgeted responses have no affine first-order form".into(),
        ));
    }
    if !nse.is_interior() {
        return Err(GameError::InapplicableFormula(
            "equilibrium touches an action bound".into(),
        ));
    }
    if !(eps >= 0.0) {
        return Err(GameError::InvalidArgument(format!(
            "observation radius must be nonnegative, got {eps}"
        )));
    }
    let (l, n) = (leaders[0], followers[0]);
    let p = &nse.profile;
    let b0 = derivatives_unchecked(spec, l, p.row(l), &impact_values(spec, p, l));
    let b1 = derivatives_unchecked(spec, n, p.row(n), &impact_values(spec, p, n));
    let dir = direction_vector(&b1);
    let kd = spec.n_dims();
    let rho: Vec<f64> = (0..kd).map(|k| -b1.hess_af[k] / b1.hess_aa[k]).collect();
    // with several dimensions the direction itself moves with the leader's action:
    // d|dir_k|/da0_j = -(delta_kj - dir_k dir_j) gamma_j / |grad_f|
    let steer: Vec<f64> = match curvature {
        LeaderCurvature::Total if kd > 1 => {
            let norm = l2(&b1.grad_f);
            let gamma: Vec<f64> = (0..kd)
                .map(|k| (b1.hess_af[k] * rho[k] + b1.hess_ff[k]) * spec.gain(n, l, k))
                .collect();
            (0..kd)
                .map(|j| {
                    (0..kd)
                        .map(|k| {
                            let kron = if k == j { 1.0 } else { 0.0 };
                            let d_dir = -(kron - dir[k] * dir[j]) * gamma[j] / norm;
                            b0.grad_f[k] * spec.gain(l, n, k) * rho[k] * d_dir
                        })
                        .sum()
                })
                .collect()
        }
        _ => vec![0.0; kd],
    };
    let mut out = p.clone();
    for k in 0..kd {
        let x01 = spec.gain(l, n, k);
        let x10 = spec.gain(n, l, k);
        let (da0, da1) = match curvature {
            LeaderCurvature::Partial => {
                let da1 = b1.hess_af[k] / b1.hess_aa[k] * dir[k];
                let da0 = -b0.hess_af[k] / b0.hess_aa[k] * x01 * da1;
                (da0, da1)
            }
            LeaderCurvature::Total => {
                // follower reaction slope in its impact
                let rho = rho[k];
                // leader impact per unit of leader action, and per unit of radius
                let s = x01 * rho * x10;
                let t = -x01 * rho * dir[k];
                let g2 = b0.hess_aa[k] + 2.0 * s * b0.hess_af[k] + s * s * b0.hess_ff[k];
                let da0 = -((b0.hess_af[k] + s * b0.hess_ff[k]) * t + steer[k]) / g2;
                let da1 = rho * (x10 * da0 - dir[k]);
                (da0, da1)
            }
        };
        out.actions[l][k] += eps * da0;
        out.actions[n][k] += eps * da1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{solve_nse, solve_rse1};
    use crate::game::{Role, UtilityModel};

    fn e1() -> GameSpec {
        GameSpec::new(
            vec![Role::Leader, Role::Follower],
            vec![vec![0.0]; 2],
            vec![vec![1.0], vec![2.0]],
            vec![vec![vec![1.0], vec![0.5]], vec![vec![0.5], vec![1.0]]],
            vec![vec![0.1]; 2],
            UtilityModel::PricedThroughput {
                price: vec![0.8, 0.5],
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_radius_returns_nse() {
        let spec = e1();
        let nse = solve_nse(&spec, 1e-12).unwrap();
        for c in [LeaderCurvature::Partial, LeaderCurvature::Total] {
            assert_eq!(rse1_closed_form(&spec, &nse, 0.0, c).unwrap(), nse.profile);
        }
    }

    #[test]
    fn partial_follower_shift_is_inverse_gain() {
        let spec = e1();
        let nse = solve_nse(&spec, 1e-12).unwrap();
        let p = rse1_closed_form(&spec, &nse, 0.1, LeaderCurvature::Partial).unwrap();
        assert!((p.actions[1][0] - nse.profile.actions[1][0] + 0.1).abs() < 1e-12);
        assert!(p.actions[0][0] > nse.profile.actions[0][0]);
    }

    #[test]
    fn total_expansion_is_second_order_accurate() {
        let spec = e1();
        let nse = solve_nse(&spec, 1e-12).unwrap();
        let gap = |eps: f64| {
            let cf = rse1_closed_form(&spec, &nse, eps, LeaderCurvature::Total).unwrap();
            let num = solve_rse1(&spec, eps, 1e-12).unwrap();
            (cf.actions[0][0] - num.profile.actions[0][0]).abs()
        };
        let (g4, g2) = (gap(0.04), gap(0.02));
        assert!(g4 / g2 >= 3.5, "{g4} {g2}");
    }

    #[test]
    fn boundary_equilibrium_is_rejected() {
        let mut spec = e1();
        spec.action_max[0][0] = 0.2;
        let nse = solve_nse(&spec, 1e-12).unwrap();
        assert!(matches!(
            rse1_closed_form(&spec, &nse, 0.1, LeaderCurvature::Total),
            Err(GameError::InapplicableFormula(_))
        ));
    }
}
