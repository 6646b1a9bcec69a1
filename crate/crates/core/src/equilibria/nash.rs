use super::response::best_response_unchecked;
use super::{EquilibriumKind, EquilibriumResult};
use crate::error::{GameError, Result};
use crate::game::{ActionProfile, GameSpec};

/// Followers' (robust) Nash equilibrium with the leaders' rows of `start` held fixed.
///
/// Jacobi iteration: every follower best-responds to the previous iterate
/// simultaneously, until no action moves by `tol` or more. The follower rows
/// of `start` are the initial guess. If plain iteration stalls, one retry with
/// step 0.5 towards the responses is made before reporting non-convergence.
pub fn followers_nash(
    spec: &GameSpec,
    start: &ActionProfile,
    eps: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumResult> {
    if !(tol > 0.0) {
        return Err(GameError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if eps.len() != spec.n_players() || eps.iter().any(|e| !(*e >= 0.0)) {
        return Err(GameError::InvalidArgument(
            "one nonnegative observation radius per player required".into(),
        ));
    }
    start.check_feasible(spec, 1e-9)?;
    let mut profile = start.clone();
    let (iterations, residual) = solve_in_place(spec, &mut profile, eps, tol, max_iter)?;
    let robust = spec.followers().iter().any(|&f| eps[f] > 0.0);
    let kind = if robust {
        EquilibriumKind::Rne
    } else {
        EquilibriumKind::Ne
    };
    EquilibriumResult::evaluate(spec, kind, profile, iterations, residual)
}

/// Runs the Jacobi iteration on the follower rows of `profile`.
///
/// Returns the iteration count and the final change, which is the distance of
/// each follower from its own best response.
pub(crate) fn solve_in_place(
    spec: &GameSpec,
    profile: &mut ActionProfile,
    eps: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(usize, f64)> {
    let followers = spec.followers();
    let start = profile.clone();
    let mut last = None;
    for step in [1.0, 0.5] {
        *profile = start.clone();
        let mut change = f64::INFINITY;
        for it in 1..=max_iter {
            let responses = followers
                .iter()
                .map(|&n| best_response_unchecked(spec, n, profile, eps[n], Some(profile.row(n))))
                .collect::<Result<Vec<_>>>()?;
            change = 0.0;
            for (&n, target) in followers.iter().zip(&responses) {
                let row = &mut profile.actions[n];
                for (a, t) in row.iter_mut().zip(target) {
                    change = f64::max(change, (t - *a).abs());
                    *a += step * (t - *a);
                }
            }
            if change < tol {
                return Ok((it, change));
            }
        }
        last = Some(change);
    }
    Err(GameError::NonConvergence {
        what: "followers' Nash iteration",
        iterations: max_iter,
        residual: last.unwrap_or(f64::INFINITY),
        last: profile.actions.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Role, UtilityModel};

    fn symmetric_pair() -> GameSpec {
        GameSpec::new(
            vec![Role::Follower; 2],
            vec![vec![0.0]; 2],
            vec![vec![10.0]; 2],
            vec![vec![vec![1.0], vec![0.2]], vec![vec![0.2], vec![1.0]]],
            vec![vec![0.1]; 2],
            UtilityModel::PricedThroughput {
                price: vec![0.5, 0.5],
            },
        )
        .unwrap()
    }

    #[test]
    fn symmetric_followers_fixed_point() {
        let spec = symmetric_pair();
        let start = ActionProfile::at_min(&spec);
        let r = followers_nash(&spec, &start, &[0.0, 0.0], 1e-12, 1000).unwrap();
        // a = 2 - (0.2 a + 0.1)  =>  a = 1.9 / 1.2
        let oracle = 1.9 / 1.2;
        assert!((r.profile.actions[0][0] - oracle).abs() < 1e-8);
        assert!((r.profile.actions[1][0] - oracle).abs() < 1e-8);
        assert_eq!(r.kind, EquilibriumKind::Ne);
    }

    #[test]
    fn robust_followers_back_off() {
        let spec = symmetric_pair();
        let start = ActionProfile::at_min(&spec);
        let nominal = followers_nash(&spec, &start, &[0.0, 0.0], 1e-12, 1000).unwrap();
        let robust = followers_nash(&spec, &start, &[0.1, 0.1], 1e-12, 1000).unwrap();
        assert_eq!(robust.kind, EquilibriumKind::Rne);
        // a = 2 - (0.2 a + 0.2)  =>  a = 1.8 / 1.2
        assert!((robust.profile.actions[0][0] - 1.5).abs() < 1e-8);
        for n in 0..2 {
            assert!(robust.profile.actions[n][0] < nominal.profile.actions[n][0]);
        }
    }

    #[test]
    fn single_follower_needs_one_pass() {
        let spec = GameSpec::new(
            vec![Role::Leader, Role::Follower],
            vec![vec![0.0]; 2],
            vec![vec![1.0], vec![2.0]],
            vec![vec![vec![1.0], vec![0.5]], vec![vec![0.5], vec![1.0]]],
            vec![vec![0.1]; 2],
            UtilityModel::PricedThroughput {
                price: vec![0.8, 0.5],
            },
        )
        .unwrap();
        let start = ActionProfile::new(vec![vec![1.0], vec![0.0]]);
        let r = followers_nash(&spec, &start, &[0.0, 0.0], 1e-12, 100).unwrap();
        assert_eq!(r.diagnostics.iterations, 2);
        assert!((r.profile.actions[1][0] - 1.4).abs() < 1e-12);
        assert_eq!(r.profile.actions[0][0], 1.0);
    }
}
