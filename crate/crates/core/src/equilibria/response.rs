use crate::budget::{robust_waterfill_from, waterfill_unchecked};
use crate::error::{GameError, Result};
use crate::game::{impact_values, ActionProfile, GameSpec};
use crate::robust::separable_ball_min;

/// Worst-case-robust best response of a follower to everyone else's actions.
///
/// Under the priced model the inner minimization over the observation ball is
/// solved on the value function `max_a u(a, f)` (convex and nonincreasing in
/// `f`), after which each dimension takes the closed form
/// `clamp(1/c - f~/H)`. Under the budgeted model the response is the robust
/// waterfill. `eps = 0` gives the nominal response.
pub fn follower_best_response(
    spec: &GameSpec,
    player: usize,
    others: &ActionProfile,
    eps: f64,
) -> Result<Vec<f64>> {
    spec.check_player(player)?;
    if spec.is_leader(player) {
        return Err(GameError::InvalidArgument(format!(
            "player {player} is a leader"
        )));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(GameError::InvalidArgument(format!(
            "observation radius must be nonnegative, got {eps}"
        )));
    }
    others.check_feasible(spec, 1e-9)?;
    best_response_unchecked(spec, player, others, eps, None)
}

/// Best response for dimension `k` against impact `f`, priced model.
#[inline]
fn priced_action(spec: &GameSpec, player: usize, k: usize, f: f64, c: f64) -> f64 {
    let h = spec.direct_gain(player, k);
    let (lo, hi) = (spec.action_min[player][k], spec.action_max[player][k]);
    if h == 0.0 {
        lo
    } else if c == 0.0 {
        hi
    } else {
        (1.0 / c - f / h).clamp(lo, hi)
    }
}

pub(crate) fn best_response_unchecked(
    spec: &GameSpec,
    player: usize,
    profile: &ActionProfile,
    eps: f64,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let f = impact_values(spec, profile, player);
    if let Some((dim, &value)) = f
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > crate::game::SINGULAR_IMPACT))
    {
        return Err(GameError::SingularImpact { player, dim, value });
    }
    if let Some(budget) = spec.budget(player) {
        let nominal = waterfill_unchecked(spec, player, &f, budget);
        if eps == 0.0 {
            return Ok(nominal);
        }
        let start = warm.map_or(nominal, <[f64]>::to_vec);
        return robust_waterfill_from(spec, player, &f, eps, budget, start);
    }
    let c = spec.price(player);
    if c == 0.0 {
        if let Some(k) = (0..spec.n_dims()).find(|&k| {
            spec.direct_gain(player, k) > 0.0 && spec.action_max[player][k].is_infinite()
        }) {
            return Err(GameError::DegenerateModel(format!(
                "player {player} has zero price and an unbounded box on dimension {k}"
            )));
        }
    }
    if eps == 0.0 {
        return Ok((0..f.len())
            .map(|k| priced_action(spec, player, k, f[k], c))
            .collect());
    }
    let worst = separable_ball_min(&f, eps, |k, x| {
        let h = spec.direct_gain(player, k);
        let a = priced_action(spec, player, k, x, c);
        -h * a / (x * (x + h * a))
    });
    Ok((0..f.len())
        .map(|k| priced_action(spec, player, k, worst.point[k], c))
        .collect())
}
