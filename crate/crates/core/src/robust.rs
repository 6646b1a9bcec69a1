//! Uncertainty sets and their worst-case realizations.
//!
//! A follower observes its aggregate impact only up to an l2 ball of radius
//! `eps` and plans against the point of that ball that hurts it most. A leader
//! knows its cross gain towards a follower only up to a ball of radius `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{derivatives_unchecked, DerivativeBundle, GameSpec, ImpactVector};

/// Gradient norms below this are treated as zero.
pub const DEGENERATE_GRADIENT: f64 = 1e-14;

/// Observation radii per player and information radii per (follower, leader) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub obs_radius: Vec<f64>,
    /// `[follower][leader]`; entries for other pairs are ignored.
    pub info_radius: Vec<Vec<f64>>,
}

impl UncertaintySpec {
    pub fn none(n_players: usize) -> Self {
        Self {
            obs_radius: vec![0.0; n_players],
            info_radius: vec![vec![0.0; n_players]; n_players],
        }
    }

    /// Every follower gets observation radius `eps`; every (follower, leader) pair gets `delta`.
    pub fn uniform(spec: &GameSpec, eps: f64, delta: f64) -> Self {
        let n = spec.n_players();
        let mut u = Self::none(n);
        for f in spec.followers() {
            u.obs_radius[f] = eps;
            for l in spec.leaders() {
                u.info_radius[f][l] = delta;
            }
        }
        u
    }

    /// Rejects malformed radii and returns warnings for information radii that
    /// exceed the smallest nominal gain (the realization is then clamped at zero).
    pub fn validate(&self, spec: &GameSpec) -> Result<Vec<String>> {
        let n = spec.n_players();
        if self.obs_radius.len() != n
            || self.info_radius.len() != n
            || self.info_radius.iter().any(|r| r.len() != n)
        {
            return Err(GameError::InvalidSpec(format!(
                "uncertainty radii must cover {n} players"
            )));
        }
        let mut warnings = Vec::new();
        for p in 0..n {
            let eps = self.obs_radius[p];
            if !(eps >= 0.0) || !eps.is_finite() {
                return Err(GameError::InvalidSpec(format!(
                    "observation radius of player {p} is {eps}"
                )));
            }
            if spec.is_leader(p) && eps != 0.0 {
                return Err(GameError::InvalidSpec(format!(
                    "leader {p} observes exactly; its radius must be zero"
                )));
            }
            for l in 0..n {
                let delta = self.info_radius[p][l];
                if !(delta >= 0.0) || !delta.is_finite() {
                    return Err(GameError::InvalidSpec(format!(
                        "information radius ({p}, {l}) is {delta}"
                    )));
                }
                if delta > 0.0 && !spec.is_leader(p) && spec.is_leader(l) {
                    let min_gain = spec.cross_gain[p][l]
                        .iter()
                        .copied()
                        .fold(f64::INFINITY, f64::min);
                    if delta > min_gain {
                        warnings.push(format!(
                            "information radius {delta} of ({p}, {l}) exceeds the smallest gain {min_gain}"
                        ));
                    }
                }
            }
        }
        Ok(warnings)
    }
}

/// Worst point of the observation ball together with the descent direction there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseObservation {
    pub values: Vec<f64>,
    /// Normalized impact gradient at `values`; zero when the gradient vanishes.
    pub direction: Vec<f64>,
    pub iterations: usize,
    /// `lambda * (eps^2 - |values - f|^2)` with the eliminated multiplier `lambda`.
    pub slackness_residual: f64,
    /// Norm of the Lagrangian gradient `grad_f + 2 lambda (values - f)`.
    pub stationarity_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WorstCaseMethod {
    /// Damped iteration on `f~ = f - eps * dir(f~)`.
    #[default]
    FixedPoint,
    /// Direction taken at the nominal impact, no iteration.
    OneStep,
    /// Bisection on the Lagrange multiplier of the ball constraint.
    Multiplier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseOptions {
    pub method: WorstCaseMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WorstCaseOptions {
    fn default() -> Self {
        Self {
            method: WorstCaseMethod::FixedPoint,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Unit vector along `grad_f`, or zeros when the gradient is degenerate.
pub fn direction_vector(bundle: &DerivativeBundle) -> Vec<f64> {
    normalized(&bundle.grad_f)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let norm = l2(v);
    if norm < DEGENERATE_GRADIENT {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn worst_case_observation(
    spec: &GameSpec,
    player: usize,
    own_action: &[f64],
    nominal_impact: &ImpactVector,
    eps: f64,
) -> Result<WorstCaseObservation> {
    worst_case_observation_with(
        spec,
        player,
        own_action,
        nominal_impact,
        eps,
        &WorstCaseOptions::default(),
    )
}

pub fn worst_case_observation_with(
    spec: &GameSpec,
    player: usize,
    own_action: &[f64],
    nominal_impact: &ImpactVector,
    eps: f64,
    options: &WorstCaseOptions,
) -> Result<WorstCaseObservation> {
    spec.check_player(player)?;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(GameError::InvalidArgument(format!(
            "observation radius must be nonnegative, got {eps}"
        )));
    }
    // validates lengths and positivity
    crate::game::derivatives(spec, player, own_action, nominal_impact)?;
    worst_case_unchecked(
        spec,
        player,
        own_action,
        &nominal_impact.values,
        eps,
        options,
    )
}

fn grad_f_at(spec: &GameSpec, player: usize, own: &[f64], f: &[f64]) -> DerivativeBundle {
    derivatives_unchecked(spec, player, own, f)
}

pub(crate) fn worst_case_unchecked(
    spec: &GameSpec,
    player: usize,
    own: &[f64],
    f: &[f64],
    eps: f64,
    options: &WorstCaseOptions,
) -> Result<WorstCaseObservation> {
    let nominal = grad_f_at(spec, player, own, f);
    if eps == 0.0 || l2(&nominal.grad_f) < DEGENERATE_GRADIENT {
        return Ok(WorstCaseObservation {
            values: f.to_vec(),
            direction: direction_vector(&nominal),
            iterations: 0,
            slackness_residual: 0.0,
            stationarity_residual: 0.0,
        });
    }
    // T(x) = f - eps * dir(x), always on the sphere
    let step = |x: &[f64]| -> (Vec<f64>, DerivativeBundle) {
        let b = grad_f_at(spec, player, own, x);
        let dir = direction_vector(&b);
        (f.iter().zip(&dir).map(|(fk, d)| fk - eps * d).collect(), b)
    };
    let (values, iterations) = match options.method {
        WorstCaseMethod::OneStep => (step(f).0, 1),
        WorstCaseMethod::Multiplier => {
            let sol = separable_ball_min(f, eps, |k, x| {
                let h = spec.direct_gain(player, k);
                let a = own[k];
                -h * a / (x * (x + h * a))
            });
            (sol.point, sol.iterations)
        }
        WorstCaseMethod::FixedPoint => fixed_point(f, eps, options, &step)?,
    };
    Ok(finish(spec, player, own, f, eps, values, iterations))
}

fn fixed_point<S>(
    f: &[f64],
    eps: f64,
    options: &WorstCaseOptions,
    step: &S,
) -> Result<(Vec<f64>, usize)>
where
    S: Fn(&[f64]) -> (Vec<f64>, DerivativeBundle),
{
    let mut x = step(f).0;
    let (mut tx, b) = step(&x);
    let mut residual = dist(&tx, &x);
    // the step map has real Jacobian eigenvalues in [-L, 0]; this damping is optimal for that band
    let curvature = b.hess_ff.iter().copied().fold(0.0, f64::max);
    let lipschitz = eps * curvature / l2(&b.grad_f).max(DEGENERATE_GRADIENT);
    let mut theta = 2.0 / (2.0 + lipschitz);
    for it in 1..=options.max_iter {
        if residual < options.tol {
            return Ok((tx, it));
        }
        let trial: Vec<f64> = x
            .iter()
            .zip(&tx)
            .map(|(xk, tk)| (1.0 - theta) * xk + theta * tk)
            .collect();
        let (t_trial, _) = step(&trial);
        let r_trial = dist(&t_trial, &trial);
        if r_trial > residual && theta > 1e-6 {
            theta *= 0.5;
            continue;
        }
        x = trial;
        tx = t_trial;
        residual = r_trial;
    }
    if residual < options.tol {
        return Ok((tx, options.max_iter));
    }
    Err(GameError::NonConvergence {
        what: "worst-case observation fixed point",
        iterations: options.max_iter,
        residual,
        last: tx,
    })
}

fn finish(
    spec: &GameSpec,
    player: usize,
    own: &[f64],
    f: &[f64],
    eps: f64,
    values: Vec<f64>,
    iterations: usize,
) -> WorstCaseObservation {
    let b = grad_f_at(spec, player, own, &values);
    let g_norm = l2(&b.grad_f);
    let lambda = g_norm / (2.0 * eps);
    let r = dist(&values, f);
    let stationarity = b
        .grad_f
        .iter()
        .zip(values.iter().zip(f))
        .map(|(g, (v, fk))| {
            let e = g + 2.0 * lambda * (v - fk);
            e * e
        })
        .sum::<f64>()
        .sqrt();
    WorstCaseObservation {
        direction: normalized(&b.grad_f),
        values,
        iterations,
        slackness_residual: (lambda * (eps * eps - r * r)).abs(),
        stationarity_residual: stationarity,
    }
}

/// Result of minimizing a separable convex nonincreasing function over a ball.
#[derive(Debug, Clone)]
pub(crate) struct BallSolution {
    pub point: Vec<f64>,
    pub iterations: usize,
}

/// Minimizes `sum_k phi_k(x_k)` over `|x - f| <= eps` where each `phi_k` is
/// convex and nonincreasing; `slope(k, x)` must return `phi_k'(x) <= 0`.
///
/// The minimizer is `f + d` with `d >= 0` and `slope_k(f_k + d_k) + 2 lambda d_k = 0`;
/// `lambda` is found by bisection on its logarithm.
pub(crate) fn separable_ball_min<S>(f: &[f64], eps: f64, slope: S) -> BallSolution
where
    S: Fn(usize, f64) -> f64,
{
    let k_dims = f.len();
    let s0: Vec<f64> = (0..k_dims).map(|k| slope(k, f[k]).min(0.0)).collect();
    if eps == 0.0 || l2(&s0) < DEGENERATE_GRADIENT {
        return BallSolution {
            point: f.to_vec(),
            iterations: 0,
        };
    }
    if k_dims == 1 {
        return BallSolution {
            point: vec![f[0] + eps],
            iterations: 0,
        };
    }
    let shift = |lambda: f64, k: usize| -> f64 {
        if s0[k] == 0.0 {
            return 0.0;
        }
        let h = |d: f64| 2.0 * lambda * d + slope(k, f[k] + d);
        if h(eps) <= 0.0 {
            return eps;
        }
        let (mut lo, mut hi) = (0.0, eps.min(-s0[k] / (2.0 * lambda)));
        if h(hi) <= 0.0 {
            return hi;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + f[k]) {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let norm_at = |lambda: f64| -> (Vec<f64>, f64) {
        let d: Vec<f64> = (0..k_dims).map(|k| shift(lambda, k)).collect();
        let n = l2(&d);
        (d, n)
    };
    let mut hi = l2(&s0) / (2.0 * eps);
    let s_far: Vec<f64> = (0..k_dims).map(|k| slope(k, f[k] + eps).min(0.0)).collect();
    let mut lo = l2(&s_far) / (2.0 * eps);
    if lo <= 0.0 {
        lo = hi * 1e-12;
    }
    let mut iterations = 0;
    let (mut d_lo, mut n_lo) = norm_at(lo);
    while n_lo < eps * (1.0 - 1e-12) && lo > hi * 1e-30 {
        // flat tail: keep shrinking the multiplier
        lo *= 1e-3;
        let r = norm_at(lo);
        d_lo = r.0;
        n_lo = r.1;
        iterations += 1;
    }
    if n_lo < eps * (1.0 - 1e-12) {
        // constraint inactive in the limit; any flat point is optimal
        return BallSolution {
            point: f.iter().zip(&d_lo).map(|(a, b)| a + b).collect(),
            iterations,
        };
    }
    let mut best = d_lo;
    for _ in 0..200 {
        iterations += 1;
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        let (d, n) = norm_at(mid);
        let done = (n - eps).abs() <= 1e-13 * eps || hi / lo - 1.0 < 1e-15;
        if n >= eps {
            lo = mid;
            best = d;
        } else {
            hi = mid;
            if done {
                best = d;
            }
        }
        if done {
            break;
        }
    }
    let n = l2(&best);
    let point = f
        .iter()
        .zip(&best)
        .map(|(fk, dk)| fk + dk * eps / n)
        .collect();
    BallSolution { point, iterations }
}

/// Leader-perceived cross gain `max(x - delta / sqrt(K), 0)` per dimension.
///
/// Shrinking every entry uniformly is the ball realization that minimizes the
/// follower impact the leader attributes to itself.
pub fn worst_case_cross_gain(
    spec: &GameSpec,
    follower: usize,
    leader: usize,
    delta: f64,
) -> Result<Vec<f64>> {
    spec.check_player(follower)?;
    spec.check_player(leader)?;
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(GameError::InvalidArgument(format!(
            "information radius must be nonnegative, got {delta}"
        )));
    }
    let shrink = delta / (spec.n_dims() as f64).sqrt();
    Ok(spec.cross_gain[follower][leader]
        .iter()
        .map(|x| (x - shrink).max(0.0))
        .collect())
}

/// Copy of `spec` in which every (follower, leader) gain is replaced by its
/// worst-case realization under `uncertainty`.
pub fn believed_spec(spec: &GameSpec, uncertainty: &UncertaintySpec) -> Result<GameSpec> {
    let mut belief = spec.clone();
    for f in spec.followers() {
        for l in spec.leaders() {
            let delta = uncertainty.info_radius[f][l];
            belief.cross_gain[f][l] = worst_case_cross_gain(spec, f, l, delta)?;
        }
    }
    Ok(belief)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{utility, Role, UtilityModel};

    fn spec_k(k: usize) -> GameSpec {
        GameSpec::new(
            vec![Role::Leader, Role::Follower],
            vec![vec![0.0; k]; 2],
            vec![vec![2.0; k]; 2],
            vec![
                vec![vec![1.0; k], vec![0.5; k]],
                vec![vec![0.5; k], vec![1.0; k]],
            ],
            vec![vec![0.1; k]; 2],
            UtilityModel::PricedThroughput {
                price: vec![0.0, 0.0],
            },
        )
        .unwrap()
    }

    fn bundle_with_grad(g: Vec<f64>) -> DerivativeBundle {
        let k = g.len();
        DerivativeBundle {
            grad_a: vec![0.0; k],
            grad_f: g,
            hess_aa: vec![0.0; k],
            hess_af: vec![0.0; k],
            hess_ff: vec![0.0; k],
        }
    }

    #[test]
    fn direction_normalizes() {
        let d = direction_vector(&bundle_with_grad(vec![-0.4, -0.3]));
        assert!((d[0] + 0.8).abs() < 1e-15 && (d[1] + 0.6).abs() < 1e-15);
        assert!((l2(&d) - 1.0).abs() < 1e-15);
        assert_eq!(
            direction_vector(&bundle_with_grad(vec![0.0, 0.0])),
            vec![0.0, 0.0]
        );
        assert_eq!(direction_vector(&bundle_with_grad(vec![-0.7])), vec![-1.0]);
    }

    #[test]
    fn zero_radius_is_identity() {
        let spec = spec_k(1);
        let f = ImpactVector::new(vec![0.6]);
        let w = worst_case_observation(&spec, 1, &[1.0], &f, 0.0).unwrap();
        assert_eq!(w.values, vec![0.6]);
    }

    #[test]
    fn scalar_case_inflates_by_radius() {
        let spec = spec_k(1);
        let f = ImpactVector::new(vec![0.6]);
        let w = worst_case_observation(&spec, 1, &[1.0], &f, 0.1).unwrap();
        assert!((w.values[0] - 0.7).abs() < 1e-12);
        // grid oracle over [f - eps, f + eps]
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=10_000 {
            let x = 0.5 + 0.2 * i as f64 / 10_000.0;
            let u = utility(&spec, 1, &[1.0], &ImpactVector::new(vec![x])).unwrap();
            if u < best.0 {
                best = (u, x);
            }
        }
        assert!((best.1 - 0.7).abs() < 1e-4);
    }

    fn ball_oracle(spec: &GameSpec, own: &[f64], f: &[f64], eps: f64) -> (f64, Vec<f64>) {
        let mut best = (f64::INFINITY, vec![]);
        for i in 0..10_000 {
            let t = std::f64::consts::TAU * i as f64 / 10_000.0;
            let x = vec![f[0] + eps * t.cos(), f[1] + eps * t.sin()];
            let u = utility(spec, 1, own, &ImpactVector::new(x.clone())).unwrap();
            if u < best.0 {
                best = (u, x);
            }
        }
        best
    }

    #[test]
    fn two_dims_match_ball_surface_oracle() {
        let spec = spec_k(2);
        let f = vec![0.6, 0.5];
        let own = [1.0, 1.0];
        let (_, x) = ball_oracle(&spec, &own, &f, 0.1);
        for method in [WorstCaseMethod::FixedPoint, WorstCaseMethod::Multiplier] {
            let opts = WorstCaseOptions {
                method,
                ..Default::default()
            };
            let w = worst_case_observation_with(
                &spec,
                1,
                &own,
                &ImpactVector::new(f.clone()),
                0.1,
                &opts,
            )
            .unwrap();
            assert!(
                dist(&w.values, &x) < 1e-3,
                "{method:?}: {:?} vs {x:?}",
                w.values
            );
            assert!(w.slackness_residual <= 1e-8);
            assert!(w.stationarity_residual <= 1e-8);
            assert!((dist(&w.values, &f) - 0.1).abs() < 1e-8);
        }
    }

    #[test]
    fn methods_agree_on_asymmetric_state() {
        let mut spec = spec_k(3);
        spec.cross_gain[1][1] = vec![2.0, 0.3, 1.0];
        let own = [0.4, 1.5, 0.0];
        let f = ImpactVector::new(vec![0.2, 0.9, 0.4]);
        let fp = worst_case_observation(&spec, 1, &own, &f, 0.15).unwrap();
        let mu = worst_case_observation_with(
            &spec,
            1,
            &own,
            &f,
            0.15,
            &WorstCaseOptions {
                method: WorstCaseMethod::Multiplier,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(dist(&fp.values, &mu.values) < 1e-9);
        // zero action leaves that coordinate untouched
        assert!((fp.values[2] - 0.4).abs() < 1e-12);
        assert!(fp.values.iter().zip(&f.values).all(|(w, n)| w >= n));
    }

    #[test]
    fn cross_gain_shrinks() {
        let spec = spec_k(1);
        assert_eq!(worst_case_cross_gain(&spec, 1, 0, 0.0).unwrap(), vec![0.5]);
        assert!((worst_case_cross_gain(&spec, 1, 0, 0.1).unwrap()[0] - 0.4).abs() < 1e-15);
        assert_eq!(worst_case_cross_gain(&spec, 1, 0, 0.8).unwrap(), vec![0.0]);
        let spec4 = spec_k(4);
        let x = worst_case_cross_gain(&spec4, 1, 0, 0.2).unwrap();
        assert!(x.iter().all(|v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn uncertainty_validation() {
        let spec = spec_k(1);
        let u = UncertaintySpec::uniform(&spec, 0.1, 0.6);
        assert_eq!(u.obs_radius, vec![0.0, 0.1]);
        assert_eq!(u.validate(&spec).unwrap().len(), 1);
        let mut bad = UncertaintySpec::none(2);
        bad.obs_radius[0] = 0.1;
        assert!(bad.validate(&spec).is_err());
    }
}
