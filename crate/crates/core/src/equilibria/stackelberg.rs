//! Bi-level solvers: the leaders optimize with the followers' Nash response embedded.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nash::solve_in_place;
use super::{EquilibriumKind, EquilibriumResult, SolverOptions};
use crate::budget::waterfill_unchecked;
use crate::error::{GameError, Result};
use crate::game::{impact_values, utility_unchecked, ActionProfile, GameSpec};
use crate::robust::{believed_spec, UncertaintySpec};
use crate::scalar::golden_section_max;

/// Objective values closer than this are ties; ties go to the smaller action.
const FLAT: f64 = 1e-12;

pub fn solve_nse(spec: &GameSpec, tol: f64) -> Result<EquilibriumResult> {
    let opts = SolverOptions {
        tol,
        ..Default::default()
    };
    solve_nse_with(spec, &opts, None)
}

pub fn solve_nse_with(
    spec: &GameSpec,
    opts: &SolverOptions,
    hint: Option<&ActionProfile>,
) -> Result<EquilibriumResult> {
    require_single_leader(spec)?;
    let none = UncertaintySpec::none(spec.n_players());
    let mut r = solve_bilevel(spec, spec, &none.obs_radius, opts, hint)?;
    r.kind = EquilibriumKind::Nse;
    Ok(r)
}

/// Followers plan against the worst point of an observation ball of radius `eps`.
pub fn solve_rse1(spec: &GameSpec, eps: f64, tol: f64) -> Result<EquilibriumResult> {
    let opts = SolverOptions {
        tol,
        ..Default::default()
    };
    solve_rse1_with(spec, &UncertaintySpec::uniform(spec, eps, 0.0), &opts, None)
}

pub fn solve_rse1_with(
    spec: &GameSpec,
    uncertainty: &UncertaintySpec,
    opts: &SolverOptions,
    hint: Option<&ActionProfile>,
) -> Result<EquilibriumResult> {
    require_single_leader(spec)?;
    uncertainty.validate(spec)?;
    let mut r = solve_bilevel(spec, spec, &uncertainty.obs_radius, opts, hint)?;
    r.kind = EquilibriumKind::Rse1;
    Ok(r)
}

/// The leader also underestimates its gains towards the followers by `delta`.
pub fn solve_rse2(spec: &GameSpec, eps: f64, delta: f64, tol: f64) -> Result<EquilibriumResult> {
    let opts = SolverOptions {
        tol,
        ..Default::default()
    };
    solve_rse2_with(
        spec,
        &UncertaintySpec::uniform(spec, eps, delta),
        &opts,
        None,
    )
}

/// The leader commits to the action that is optimal against its worst-case
/// model of the gains; the followers then respond to the true gains.
pub fn solve_rse2_with(
    spec: &GameSpec,
    uncertainty: &UncertaintySpec,
    opts: &SolverOptions,
    hint: Option<&ActionProfile>,
) -> Result<EquilibriumResult> {
    require_single_leader(spec)?;
    uncertainty.validate(spec)?;
    let belief = believed_spec(spec, uncertainty)?;
    let planned = solve_bilevel(&belief, spec, &uncertainty.obs_radius, opts, hint)?;
    let mut profile = planned.profile.clone();
    let (_, residual) = solve_in_place(
        spec,
        &mut profile,
        &uncertainty.obs_radius,
        opts.tol,
        opts.max_iter,
    )?;
    let mut r = EquilibriumResult::evaluate(
        spec,
        EquilibriumKind::Rse2,
        profile,
        planned.diagnostics.iterations,
        residual,
    )?;
    r.diagnostics.certified = planned.diagnostics.certified;
    Ok(r)
}

/// All leaders jointly maximize their summed utility with the followers'
/// (robust) Nash response embedded. With one leader this is the ordinary
/// bi-level problem.
pub fn cooperative_leaders(
    spec: &GameSpec,
    uncertainty: &UncertaintySpec,
    opts: &SolverOptions,
) -> Result<EquilibriumResult> {
    if spec.leaders().is_empty() {
        return Err(GameError::InvalidSpec("no leader".into()));
    }
    uncertainty.validate(spec)?;
    let mut r = solve_bilevel(spec, spec, &uncertainty.obs_radius, opts, None)?;
    let robust = spec
        .followers()
        .iter()
        .any(|&f| uncertainty.obs_radius[f] > 0.0);
    r.kind = if robust {
        EquilibriumKind::Rse1
    } else {
        EquilibriumKind::Nse
    };
    Ok(r)
}

fn require_single_leader(spec: &GameSpec) -> Result<()> {
    let n = spec.leaders().len();
    if n != 1 {
        return Err(GameError::InvalidSpec(format!(
            "exactly one leader required, found {n}"
        )));
    }
    Ok(())
}

/// Leader search in the `model` game; realized utilities are taken in `truth`.
fn solve_bilevel(
    model: &GameSpec,
    truth: &GameSpec,
    eps: &[f64],
    opts: &SolverOptions,
    hint: Option<&ActionProfile>,
) -> Result<EquilibriumResult> {
    let problem = LeaderProblem::new(model, eps, opts)?;
    let (x, iterations, certified) = if model.is_budgeted() {
        problem.projected_ascent(hint)?
    } else {
        problem.coordinate_ascent()?
    };
    let (profile, residual) = problem.respond(&x)?;
    let mut r =
        EquilibriumResult::evaluate(truth, EquilibriumKind::Nse, profile, iterations, residual)?;
    r.diagnostics.certified = certified;
    Ok(r)
}

struct LeaderProblem<'a> {
    model: &'a GameSpec,
    leaders: Vec<usize>,
    eps: &'a [f64],
    opts: &'a SolverOptions,
    /// Last followers' equilibrium, reused as the next warm start.
    state: RefCell<ActionProfile>,
}

impl<'a> LeaderProblem<'a> {
    fn new(model: &'a GameSpec, eps: &'a [f64], opts: &'a SolverOptions) -> Result<Self> {
        let leaders = model.leaders();
        for &l in &leaders {
            if model.action_max[l].iter().any(|v| v.is_infinite()) {
                return Err(GameError::InvalidSpec(format!(
                    "leader {l} needs a bounded action box"
                )));
            }
        }
        Ok(Self {
            model,
            leaders,
            eps,
            opts,
            state: RefCell::new(ActionProfile::at_min(model)),
        })
    }

    fn k(&self) -> usize {
        self.model.n_dims()
    }

    fn n_vars(&self) -> usize {
        self.leaders.len() * self.k()
    }

    fn bounds(&self, j: usize) -> (f64, f64) {
        let (l, k) = (self.leaders[j / self.k()], j % self.k());
        (self.model.action_min[l][k], self.model.action_max[l][k])
    }

    fn respond(&self, x: &[f64]) -> Result<(ActionProfile, f64)> {
        let mut p = self.state.borrow().clone();
        for (i, &l) in self.leaders.iter().enumerate() {
            p.actions[l].copy_from_slice(&x[i * self.k()..(i + 1) * self.k()]);
        }
        let (_, residual) = solve_in_place(
            self.model,
            &mut p,
            self.eps,
            self.opts.tol,
            self.opts.max_iter,
        )?;
        *self.state.borrow_mut() = p.clone();
        Ok((p, residual))
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (p, _) = self.respond(x)?;
        Ok(self
            .leaders
            .iter()
            .map(|&l| {
                let f = impact_values(self.model, &p, l);
                utility_unchecked(self.model, l, p.row(l), &f)
            })
            .sum())
    }

    /// Cyclic coordinate ascent for the priced model: each coordinate is
    /// scanned on a grid, refined by golden section and then by bisection on
    /// the sign of a central-difference derivative.
    fn coordinate_ascent(&self) -> Result<(Vec<f64>, usize, bool)> {
        let n = self.n_vars();
        let mut x: Vec<f64> = (0..n).map(|j| self.bounds(j).0).collect();
        let max_sweeps = if n == 1 { 1 } else { 100 };
        let mut sweeps = 0;
        let mut certified = n == 1;
        while sweeps < max_sweeps {
            sweeps += 1;
            let mut moved = 0.0f64;
            for j in 0..n {
                let best = self.line_search(&x, j)?;
                moved = moved.max((best - x[j]).abs());
                x[j] = best;
            }
            if n > 1 && moved < self.opts.bracket_tol {
                certified = true;
                break;
            }
        }
        Ok((x, sweeps, certified))
    }

    fn line_search(&self, x: &[f64], j: usize) -> Result<f64> {
        let (lo, hi) = self.bounds(j);
        if hi - lo <= self.opts.bracket_tol {
            return Ok(lo);
        }
        let mut err: Option<GameError> = None;
        let mut probe = x.to_vec();
        let mut f = |t: f64| -> f64 {
            probe[j] = t;
            match self.value(&probe) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        };
        let s = self.opts.scan_points.max(3);
        let grid: Vec<f64> = (0..s)
            .map(|i| lo + (hi - lo) * i as f64 / (s - 1) as f64)
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let i_best = vals
            .iter()
            .position(|&v| v >= top - FLAT * top.abs().max(1.0))
            .unwrap_or(0);
        let a = grid[i_best.saturating_sub(1)];
        let b = grid[(i_best + 1).min(s - 1)];
        let (xg, _) = golden_section_max(&mut f, a, b, self.opts.bracket_tol);
        // refine on the first-order condition
        let h = 1e-6 * (hi - lo).max(1.0);
        let mut deriv = |t: f64| {
            (f((t + h).min(hi)) - f((t - h).max(lo))) / ((t + h).min(hi) - (t - h).max(lo))
        };
        let w = 1e3 * self.opts.bracket_tol;
        let (mut l, mut r) = ((xg - w).max(lo), (xg + w).min(hi));
        let mut xr = xg;
        if deriv(l) > 0.0 && deriv(r) < 0.0 {
            for _ in 0..100 {
                let m = 0.5 * (l + r);
                if deriv(m) > 0.0 {
                    l = m;
                } else {
                    r = m;
                }
                if r - l < 1e-14 {
                    break;
                }
            }
            xr = 0.5 * (l + r);
        }
        let mut best = (grid[i_best], vals[i_best]);
        for t in [xg, xr] {
            let v = f(t);
            if v > best.1 + FLAT * best.1.abs().max(1.0)
                || (v >= best.1 - FLAT * best.1.abs().max(1.0) && t < best.0)
            {
                best = (t, v);
            }
        }
        // the current point wins ties, so noise in the inner solve cannot make sweeps cycle
        let current = f(x[j]);
        if let Some(e) = err {
            return Err(e);
        }
        if best.1 > current + FLAT * current.abs().max(1.0) {
            Ok(best.0)
        } else {
            Ok(x[j])
        }
    }

    /// Projection of one leader's row onto its box intersected with its budget.
    fn project_row(&self, l: usize, row: &mut [f64]) {
        let lo = &self.model.action_min[l];
        let hi = &self.model.action_max[l];
        let budget = self.model.budget(l).unwrap_or(f64::INFINITY);
        let clamp = |tau: f64, k: usize, v: f64| (v - tau).clamp(lo[k], hi[k]);
        let total = |tau: f64, row: &[f64]| -> f64 {
            row.iter().enumerate().map(|(k, &v)| clamp(tau, k, v)).sum()
        };
        if total(0.0, row) <= budget {
            for (k, v) in row.iter_mut().enumerate() {
                *v = clamp(0.0, k, *v);
            }
            return;
        }
        let (mut a, mut b) = (
            0.0,
            row.iter()
                .enumerate()
                .map(|(k, v)| v - lo[k])
                .fold(0.0, f64::max),
        );
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if total(m, row) > budget {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-16 * b.max(1.0) {
                break;
            }
        }
        for (k, v) in row.iter_mut().enumerate() {
            *v = clamp(b, k, *v);
        }
    }

    fn project(&self, x: &mut [f64]) {
        let k = self.k();
        for (i, &l) in self.leaders.iter().enumerate() {
            self.project_row(l, &mut x[i * k..(i + 1) * k]);
        }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for j in 0..x.len() {
            let (lo, hi) = self.bounds(j);
            let h = 1e-5 * (hi - lo).max(1e-3);
            let up = (x[j] + h).min(hi);
            let down = (x[j] - h).max(lo);
            if up <= down {
                continue;
            }
            probe[j] = up;
            let fu = self.value(&probe)?;
            probe[j] = down;
            let fd = self.value(&probe)?;
            probe[j] = x[j];
            g[j] = (fu - fd) / (up - down);
        }
        Ok(g)
    }

    fn starts(&self, hint: Option<&ActionProfile>) -> Vec<Vec<f64>> {
        let k = self.k();
        let mut starts = Vec::new();
        let mut water = Vec::with_capacity(self.n_vars());
        let mut uniform = Vec::with_capacity(self.n_vars());
        for &l in &self.leaders {
            let budget = self.model.budget(l).unwrap_or(f64::INFINITY);
            water.extend(waterfill_unchecked(
                self.model,
                l,
                &self.model.noise[l],
                budget,
            ));
            let share = budget / k as f64;
            uniform.extend((0..k).map(|d| share.min(self.model.action_max[l][d])));
        }
        starts.push(water);
        starts.push(uniform);
        if let Some(h) = hint {
            starts.push(
                self.leaders
                    .iter()
                    .flat_map(|&l| h.row(l).to_vec())
                    .collect(),
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        while starts.len() < self.opts.restarts.max(1) + usize::from(hint.is_some()) {
            let mut x = Vec::with_capacity(self.n_vars());
            for &l in &self.leaders {
                // uniform point of the simplex scaled to the budget
                let mut e: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
                let s: f64 = e.iter().sum();
                let budget = self.model.budget(l).unwrap_or(1.0);
                e.iter_mut().for_each(|v| *v *= budget / s);
                x.extend(e);
            }
            starts.push(x);
        }
        for s in &mut starts {
            self.project(s);
        }
        starts.truncate(self.opts.restarts.max(1) + usize::from(hint.is_some()));
        starts
    }

    /// Projected gradient ascent with Armijo backtracking, from several starts.
    fn projected_ascent(&self, hint: Option<&ActionProfile>) -> Result<(Vec<f64>, usize, bool)> {
        let mut best: Option<(Vec<f64>, f64, bool)> = None;
        let mut total_steps = 0;
        for start in self.starts(hint) {
            let (x, v, steps, converged) = self.ascend(start)?;
            total_steps += steps;
            let better = match &best {
                None => true,
                Some((_, bv, _)) => v > *bv + FLAT * bv.abs().max(1.0),
            };
            if better {
                best = Some((x, v, converged));
            }
        }
        let (x, _, converged) = best.expect("at least one start");
        Ok((x, total_steps, converged))
    }

    fn ascend(&self, mut x: Vec<f64>) -> Result<(Vec<f64>, f64, usize, bool)> {
        let mut v = self.value(&x)?;
        let mut step = 1.0;
        for it in 0..self.opts.ascent_steps {
            let g = self.gradient(&x)?;
            let mut accepted = false;
            let mut t = step;
            for _ in 0..40 {
                let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + t * b).collect();
                self.project(&mut y);
                let gain: f64 = g
                    .iter()
                    .zip(y.iter().zip(&x))
                    .map(|(gi, (yi, xi))| gi * (yi - xi))
                    .sum();
                let moved = y
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if moved < 1e-12 {
                    return Ok((x, v, it, true));
                }
                let vy = self.value(&y)?;
                if vy >= v + 1e-4 * gain && vy > v {
                    let done = moved < self.opts.bracket_tol || vy - v < 1e-14 * v.abs().max(1.0);
                    x = y;
                    v = vy;
                    accepted = true;
                    step = (t * 2.0).min(1e6);
                    if done {
                        return Ok((x, v, it + 1, true));
                    }
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Ok((x, v, it, true));
            }
        }
        Ok((x, v, self.opts.ascent_steps, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Role, UtilityModel};

    pub(crate) fn e1() -> GameSpec {
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

    /// Grid oracle: leader objective with follower reaction `r(a0)` on 1e5 points.
    fn oracle(reaction: impl Fn(f64) -> f64) -> f64 {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=100_000 {
            let a0 = i as f64 / 100_000.0;
            let a1 = reaction(a0).clamp(0.0, 2.0);
            let v = (1.0 + a0 / (0.5 * a1 + 0.1)).ln() - 0.8 * a0;
            if v > best.0 {
                best = (v, a0);
            }
        }
        best.1
    }

    #[test]
    fn e1_nse_matches_grid() {
        let r = solve_nse(&e1(), 1e-12).unwrap();
        let a0 = oracle(|a0| 1.9 - 0.5 * a0);
        assert!((r.profile.actions[0][0] - a0).abs() < 2e-5);
        assert!((r.profile.actions[1][0] - (1.9 - 0.5 * r.profile.actions[0][0])).abs() < 1e-12);
        let a1 = 1.9 - 0.5 * a0;
        let w0 = (1.0 + a0 / (0.5 * a1 + 0.1)).ln() - 0.8 * a0;
        let w1 = (1.0 + a1 / (0.5 * a0 + 0.1)).ln() - 0.5 * a1;
        assert!((r.utilities[0] - w0).abs() < 1e-6);
        assert!((r.utilities[1] - w1).abs() < 1e-5);
        assert!((r.social - r.utilities.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn e1_rse1_and_rse2_match_grid() {
        let r1 = solve_rse1(&e1(), 0.1, 1e-12).unwrap();
        let a0 = oracle(|a0| 1.8 - 0.5 * a0);
        assert!((r1.profile.actions[0][0] - a0).abs() < 2e-5);
        let r2 = solve_rse2(&e1(), 0.0, 0.1, 1e-12).unwrap();
        let a0 = oracle(|a0| 1.9 - 0.4 * a0);
        assert!((r2.profile.actions[0][0] - a0).abs() < 2e-5);
        assert!((r2.profile.actions[1][0] - (1.9 - 0.5 * r2.profile.actions[0][0])).abs() < 1e-12);
        assert!(r2.utilities[0] <= r1.utilities[0]);
    }

    #[test]
    fn zero_radius_collapses_to_nse() {
        let nse = solve_nse(&e1(), 1e-12).unwrap();
        let r1 = solve_rse1(&e1(), 0.0, 1e-12).unwrap();
        let r2 = solve_rse2(&e1(), 0.0, 0.0, 1e-12).unwrap();
        assert_eq!(nse.profile, r1.profile);
        assert_eq!(nse.profile, r2.profile);
    }

    #[test]
    fn degenerate_leader_box() {
        let mut spec = e1();
        spec.action_min[0][0] = 0.3;
        spec.action_max[0][0] = 0.3;
        let r = solve_nse(&spec, 1e-12).unwrap();
        assert_eq!(r.profile.actions[0][0], 0.3);
        assert!((r.profile.actions[1][0] - 1.75).abs() < 1e-12);
    }

    #[test]
    fn decoupled_game_gives_single_user_optima() {
        let mut spec = e1();
        spec.cross_gain[0][1] = vec![0.0];
        spec.cross_gain[1][0] = vec![0.0];
        let r = solve_nse(&spec, 1e-12).unwrap();
        // 1/c - sigma/H, clamped to the box
        assert!((r.profile.actions[0][0] - 1.0).abs() < 1e-9);
        assert!((r.profile.actions[1][0] - 1.9).abs() < 1e-12);
    }

    #[test]
    fn two_leaders_rejected() {
        let mut spec = e1();
        spec.roles = vec![Role::Leader, Role::Leader];
        assert!(matches!(
            solve_nse(&spec, 1e-12),
            Err(GameError::InvalidSpec(_))
        ));
    }

    #[test]
    fn budgeted_leader_uses_its_budget() {
        let spec = GameSpec::new(
            vec![Role::Leader, Role::Follower],
            vec![vec![0.0; 2]; 2],
            vec![vec![10.0; 2]; 2],
            vec![
                vec![vec![1.0, 0.6], vec![0.3, 0.2]],
                vec![vec![0.4, 0.1], vec![0.8, 1.0]],
            ],
            vec![vec![0.1; 2]; 2],
            UtilityModel::BudgetedThroughput {
                budget: vec![1.0, 1.0],
            },
        )
        .unwrap();
        let opts = SolverOptions {
            restarts: 4,
            ..Default::default()
        };
        let r = solve_nse_with(&spec, &opts, None).unwrap();
        let spent: f64 = r.profile.actions[0].iter().sum();
        assert!((spent - 1.0).abs() < 1e-9);
        // no point on a fine budget line does better
        let mut best = f64::NEG_INFINITY;
        for i in 0..=2000 {
            let a = i as f64 / 2000.0;
            let mut p = ActionProfile::new(vec![vec![a, 1.0 - a], vec![0.0; 2]]);
            solve_in_place(&spec, &mut p, &[0.0, 0.0], 1e-12, 1000).unwrap();
            let f = impact_values(&spec, &p, 0);
            best = best.max(utility_unchecked(&spec, 0, p.row(0), &f));
        }
        assert!(r.utilities[0] >= best - 1e-6);
    }
}
