//! Sum-budget best responses and subchannel usage statistics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{ActionProfile, GameSpec, ImpactVector};
use crate::robust::{worst_case_unchecked, WorstCaseOptions};

/// Relative activity threshold: a dimension is in use above `ACTIVITY_FRACTION * budget / K`.
pub const ACTIVITY_FRACTION: f64 = 1e-6;

pub fn activity_threshold(budget: f64, n_dims: usize) -> f64 {
    ACTIVITY_FRACTION * budget / n_dims as f64
}

/// Budget-constrained best response against a fixed impact.
///
/// Each dimension gets `clamp(w - f/H, lo, hi)` with the water level `w`
/// chosen so the allocation spends `min(budget, sum hi)`. Dimensions with zero
/// direct gain stay at their lower bound.
pub fn waterfill(
    spec: &GameSpec,
    player: usize,
    impact: &ImpactVector,
    budget: f64,
) -> Result<Vec<f64>> {
    spec.check_player(player)?;
    if !(budget > 0.0) {
        return Err(GameError::InvalidArgument(format!(
            "budget must be positive, got {budget}"
        )));
    }
    let k_dims = spec.n_dims();
    if impact.values.len() != k_dims {
        return Err(GameError::InvalidArgument(format!(
            "impact has length {}, expected {k_dims}",
            impact.values.len()
        )));
    }
    if let Some((dim, &value)) = impact
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > crate::game::SINGULAR_IMPACT))
    {
        return Err(GameError::SingularImpact { player, dim, value });
    }
    let lo = &spec.action_min[player];
    let floor: f64 = lo.iter().sum();
    if floor > budget + 1e-12 {
        return Err(GameError::InvalidArgument(format!(
            "lower bounds sum to {floor}, above budget {budget}"
        )));
    }
    Ok(waterfill_unchecked(spec, player, &impact.values, budget))
}

pub(crate) fn waterfill_unchecked(
    spec: &GameSpec,
    player: usize,
    f: &[f64],
    budget: f64,
) -> Vec<f64> {
    let lo = &spec.action_min[player];
    let hi = &spec.action_max[player];
    let k_dims = f.len();
    // inverse channel quality f/H; None for unusable dimensions
    let level: Vec<Option<f64>> = (0..k_dims)
        .map(|k| {
            let h = spec.direct_gain(player, k);
            (h > 0.0).then(|| f[k] / h)
        })
        .collect();
    let mut alloc: Vec<f64> = lo.clone();
    let usable: Vec<usize> = (0..k_dims).filter(|&k| level[k].is_some()).collect();
    if usable.is_empty() {
        return alloc;
    }
    let capacity: f64 = lo.iter().sum::<f64>() + usable.iter().map(|&k| hi[k] - lo[k]).sum::<f64>();
    let target = budget.min(capacity);
    let fill = |w: f64, k: usize| -> f64 { (w - level[k].unwrap()).clamp(lo[k], hi[k]) };
    let spent = |w: f64| -> f64 {
        (0..k_dims)
            .map(|k| {
                if level[k].is_some() {
                    fill(w, k)
                } else {
                    lo[k]
                }
            })
            .sum()
    };
    if capacity <= budget {
        for &k in &usable {
            alloc[k] = hi[k];
        }
        return alloc;
    }
    let mut w_lo = usable
        .iter()
        .map(|&k| level[k].unwrap() + lo[k])
        .fold(f64::INFINITY, f64::min);
    let mut w_hi = usable
        .iter()
        .map(|&k| level[k].unwrap() + hi[k])
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (w_lo + w_hi);
        if spent(mid) < target {
            w_lo = mid;
        } else {
            w_hi = mid;
        }
        if w_hi - w_lo <= 1e-15 * w_hi.abs().max(1.0) {
            break;
        }
    }
    let mut w = 0.5 * (w_lo + w_hi);
    // exact solve on the free set identified by bisection
    let free: Vec<usize> = usable
        .iter()
        .copied()
        .filter(|&k| {
            let x = w - level[k].unwrap();
            x > lo[k] && x < hi[k]
        })
        .collect();
    if !free.is_empty() {
        let clamped: f64 = (0..k_dims)
            .filter(|k| !free.contains(k))
            .map(|k| {
                if level[k].is_some() {
                    fill(w, k)
                } else {
                    lo[k]
                }
            })
            .sum();
        let exact = (target - clamped + free.iter().map(|&k| level[k].unwrap()).sum::<f64>())
            / free.len() as f64;
        let consistent = free.iter().all(|&k| {
            let x = exact - level[k].unwrap();
            x >= lo[k] - 1e-12 && x <= hi[k] + 1e-12
        });
        if consistent {
            w = exact;
        }
    }
    for &k in &usable {
        alloc[k] = fill(w, k);
    }
    alloc
}

/// Largest violation of the budgeted KKT conditions of `alloc` against impact `f`.
///
/// Free dimensions must share one marginal rate; lower-clamped ones may not
/// exceed it and upper-clamped ones may not fall below it.
pub fn waterfill_kkt_residual(
    spec: &GameSpec,
    player: usize,
    f: &[f64],
    alloc: &[f64],
    budget: f64,
) -> f64 {
    let lo = &spec.action_min[player];
    let hi = &spec.action_max[player];
    let rate = |k: usize| {
        let h = spec.direct_gain(player, k);
        h / (f[k] + h * alloc[k])
    };
    let tol = 1e-9;
    let free: Vec<usize> = (0..f.len())
        .filter(|&k| {
            spec.direct_gain(player, k) > 0.0 && alloc[k] > lo[k] + tol && alloc[k] < hi[k] - tol
        })
        .collect();
    let spent: f64 = alloc.iter().sum();
    let mut worst = (spent - budget).max(0.0);
    if free.is_empty() {
        return worst;
    }
    let lambda = free.iter().map(|&k| rate(k)).sum::<f64>() / free.len() as f64;
    for k in 0..f.len() {
        if spec.direct_gain(player, k) == 0.0 {
            continue;
        }
        let r = rate(k);
        let v = if free.contains(&k) {
            (r - lambda).abs()
        } else if alloc[k] <= lo[k] + tol {
            (r - lambda).max(0.0)
        } else {
            (lambda - r).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Budgeted best response against the worst point of the observation ball.
///
/// The waterfilling value is convex in the observed impact, so the worst
/// observation is found by projected gradient descent on the ball with
/// backtracking; the response is the waterfill against it.
pub fn robust_waterfill(
    spec: &GameSpec,
    player: usize,
    nominal_impact: &ImpactVector,
    eps: f64,
    budget: f64,
) -> Result<Vec<f64>> {
    let start = waterfill(spec, player, nominal_impact, budget)?;
    if !(eps >= 0.0) {
        return Err(GameError::InvalidArgument(format!(
            "observation radius must be nonnegative, got {eps}"
        )));
    }
    if eps == 0.0 {
        return Ok(start);
    }
    robust_waterfill_from(spec, player, &nominal_impact.values, eps, budget, start)
}

const ROBUST_MAX_ITER: usize = 2000;

fn project_ball(center: &[f64], eps: f64, x: &mut [f64]) {
    let r = x
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    if r > eps {
        for (a, b) in x.iter_mut().zip(center) {
            *a = b + (*a - b) * eps / r;
        }
    }
}

pub(crate) fn robust_waterfill_from(
    spec: &GameSpec,
    player: usize,
    f: &[f64],
    eps: f64,
    budget: f64,
    start: Vec<f64>,
) -> Result<Vec<f64>> {
    let response = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let a = waterfill_unchecked(spec, player, x, budget);
        let g = (0..x.len())
            .map(|k| {
                let h = spec.direct_gain(player, k);
                -h * a[k] / (x[k] * (x[k] + h * a[k]))
            })
            .collect();
        (a, g)
    };
    let mut x =
        worst_case_unchecked(spec, player, &start, f, eps, &WorstCaseOptions::default())?.values;
    let (mut a, mut g) = response(&x);
    let mut step = f64::NAN;
    let mut residual = f64::INFINITY;
    for _ in 0..ROBUST_MAX_ITER {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            return Ok(a);
        }
        // gradient mapping at the step that reaches across the ball
        let reference = eps / gnorm;
        let mut probe: Vec<f64> = x.iter().zip(&g).map(|(x, g)| x - reference * g).collect();
        project_ball(f, eps, &mut probe);
        residual = probe
            .iter()
            .zip(&x)
            .map(|(p, x)| (p - x).powi(2))
            .sum::<f64>()
            .sqrt()
            / eps;
        if residual < 1e-10 {
            return Ok(a);
        }
        if !step.is_finite() {
            step = reference;
        }
        loop {
            let mut cand: Vec<f64> = x.iter().zip(&g).map(|(x, g)| x - step * g).collect();
            project_ball(f, eps, &mut cand);
            let (ca, cg) = response(&cand);
            let dx: Vec<f64> = cand.iter().zip(&x).map(|(c, x)| c - x).collect();
            let dx_norm = dx.iter().map(|d| d * d).sum::<f64>().sqrt();
            let dg_norm = cg
                .iter()
                .zip(&g)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            // local Lipschitz test; value differences are lost to rounding near the optimum
            if step * dg_norm <= dx_norm || step < 1e-300 {
                x = cand;
                a = ca;
                g = cg;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
    }
    Err(GameError::NonConvergence {
        what: "robust waterfilling",
        iterations: ROBUST_MAX_ITER,
        residual,
        last: a,
    })
}

/// Dimensions in use per player and their pairwise intersections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub used: Vec<BTreeSet<usize>>,
    /// `[n][m]`, symmetric.
    pub common: Vec<Vec<BTreeSet<usize>>>,
}

impl OverlapStats {
    pub fn used_count(&self, player: usize) -> usize {
        self.used[player].len()
    }

    pub fn common_count(&self, n: usize, m: usize) -> usize {
        self.common[n][m].len()
    }
}

pub fn overlap_stats(profile: &ActionProfile, threshold: f64) -> Result<OverlapStats> {
    if !(threshold >= 0.0) {
        return Err(GameError::InvalidArgument(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let used: Vec<BTreeSet<usize>> = profile
        .actions
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, a)| **a > threshold)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();
    let common = used
        .iter()
        .map(|a| {
            used.iter()
                .map(|b| a.intersection(b).copied().collect())
                .collect()
        })
        .collect();
    Ok(OverlapStats { used, common })
}
