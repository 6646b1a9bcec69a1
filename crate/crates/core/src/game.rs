//! Domain types of the additively coupled game and its differential machinery.
//!
//! Player `n` on dimension `k` sees the aggregate impact
//!
//! ```text
//! f_n^k = sum_{m != n} x_nm^k a_m^k + y_n^k
//! ```
//!
//! and earns the separable log-throughput utility
//! `sum_k log(1 + x_nn^k a_n^k / f_n^k) - c_n a_n^k`. In power control
//! `x_nm^k` is the channel gain from transmitter `m` to receiver `n` and
//! `y_n^k` the receiver noise. Every Hessian is diagonal across dimensions, so
//! second derivatives are stored as `K`-vectors.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Impacts at or below this value are rejected as singular.
pub const SINGULAR_IMPACT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
}

/// How the throughput utility is made to have an interior optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityModel {
    /// Linear cost `c_n` per unit of action; `c_n = 0` is the bare throughput.
    PricedThroughput { price: Vec<f64> },
    /// Bare throughput with a total-action budget `sum_k a_n^k <= P_n`.
    BudgetedThroughput { budget: Vec<f64> },
}

/// Full description of the players, their action boxes and the coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub roles: Vec<Role>,
    /// `[n][k]`
    pub action_min: Vec<Vec<f64>>,
    /// `[n][k]`
    pub action_max: Vec<Vec<f64>>,
    /// `[n][m][k]`: impact of player `m` on player `n`; the diagonal holds the direct gains.
    pub cross_gain: Vec<Vec<Vec<f64>>>,
    /// `[n][k]`, strictly positive.
    pub noise: Vec<Vec<f64>>,
    pub utility_model: UtilityModel,
}

impl GameSpec {
    /// Builds a spec and checks every structural invariant.
    pub fn new(
        roles: Vec<Role>,
        action_min: Vec<Vec<f64>>,
        action_max: Vec<Vec<f64>>,
        cross_gain: Vec<Vec<Vec<f64>>>,
        noise: Vec<Vec<f64>>,
        utility_model: UtilityModel,
    ) -> Result<Self> {
        let spec = Self {
            roles,
            action_min,
            action_max,
            cross_gain,
            noise,
            utility_model,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_players(&self) -> usize {
        self.roles.len()
    }

    pub fn n_dims(&self) -> usize {
        self.noise.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_players();
        if n == 0 {
            return Err(GameError::InvalidSpec("game has no players".into()));
        }
        let k = self.n_dims();
        if k == 0 {
            return Err(GameError::InvalidSpec("game has no dimensions".into()));
        }
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == k);
        if !shape_ok(&self.action_min) || !shape_ok(&self.action_max) || !shape_ok(&self.noise) {
            return Err(GameError::InvalidSpec(format!(
                "bounds and noise must all be {n}x{k}"
            )));
        }
        if self.cross_gain.len() != n || self.cross_gain.iter().any(|g| !shape_ok(g)) {
            return Err(GameError::InvalidSpec(format!(
                "cross gains must be {n}x{n}x{k}"
            )));
        }
        for p in 0..n {
            for d in 0..k {
                let (lo, hi) = (self.action_min[p][d], self.action_max[p][d]);
                if !(lo >= 0.0) || lo.is_infinite() || hi.is_nan() || lo > hi {
                    return Err(GameError::InvalidSpec(format!(
                        "action bounds of player {p} on dimension {d} are [{lo}, {hi}]"
                    )));
                }
                let noise = self.noise[p][d];
                if !(noise > 0.0) || !noise.is_finite() {
                    return Err(GameError::InvalidSpec(format!(
                        "noise of player {p} on dimension {d} must be positive, got {noise}"
                    )));
                }
                for m in 0..n {
                    let g = self.cross_gain[p][m][d];
                    if !(g >= 0.0) || !g.is_finite() {
                        return Err(GameError::InvalidSpec(format!(
                            "gain x[{p}][{m}][{d}] must be finite and nonnegative, got {g}"
                        )));
                    }
                }
            }
        }
        match &self.utility_model {
            UtilityModel::PricedThroughput { price } => {
                if price.len() != n || price.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
                    return Err(GameError::InvalidSpec(
                        "one finite nonnegative price per player required".into(),
                    ));
                }
            }
            UtilityModel::BudgetedThroughput { budget } => {
                if budget.len() != n || budget.iter().any(|b| !(*b > 0.0)) {
                    return Err(GameError::InvalidSpec(
                        "one positive budget per player required".into(),
                    ));
                }
                for (p, b) in budget.iter().enumerate() {
                    let floor: f64 = self.action_min[p].iter().sum();
                    if floor > *b + 1e-12 {
                        return Err(GameError::InvalidSpec(format!(
                            "player {p}: minimum actions sum to {floor} above budget {b}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.n_players() {
            Err(GameError::IndexOutOfRange {
                index: player,
                len: self.n_players(),
            })
        } else {
            Ok(())
        }
    }

    pub fn leaders(&self) -> Vec<usize> {
        self.players_with(Role::Leader)
    }

    pub fn followers(&self) -> Vec<usize> {
        self.players_with(Role::Follower)
    }

    fn players_with(&self, role: Role) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_leader(&self, player: usize) -> bool {
        self.roles.get(player) == Some(&Role::Leader)
    }

    /// Direct gain `x_nn^k`.
    #[inline]
    pub fn direct_gain(&self, player: usize, dim: usize) -> f64 {
        self.cross_gain[player][player][dim]
    }

    #[inline]
    pub fn gain(&self, on: usize, from: usize, dim: usize) -> f64 {
        self.cross_gain[on][from][dim]
    }

    /// Linear action price; zero under the budgeted model.
    #[inline]
    pub fn price(&self, player: usize) -> f64 {
        match &self.utility_model {
            UtilityModel::PricedThroughput { price } => price[player],
            UtilityModel::BudgetedThroughput { .. } => 0.0,
        }
    }

    pub fn budget(&self, player: usize) -> Option<f64> {
        match &self.utility_model {
            UtilityModel::PricedThroughput { .. } => None,
            UtilityModel::BudgetedThroughput { budget } => Some(budget[player]),
        }
    }

    pub fn is_budgeted(&self) -> bool {
        matches!(self.utility_model, UtilityModel::BudgetedThroughput { .. })
    }

    /// Same game with `leader` as the only leader and everyone else following.
    pub fn with_single_leader(&self, leader: usize) -> Result<Self> {
        self.check_player(leader)?;
        let mut spec = self.clone();
        for (i, role) in spec.roles.iter_mut().enumerate() {
            *role = if i == leader {
                Role::Leader
            } else {
                Role::Follower
            };
        }
        Ok(spec)
    }
}

/// `N x K` matrix of actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub actions: Vec<Vec<f64>>,
}

impl ActionProfile {
    pub fn new(actions: Vec<Vec<f64>>) -> Self {
        Self { actions }
    }

    /// Every player at its lower bound.
    pub fn at_min(spec: &GameSpec) -> Self {
        Self::new(spec.action_min.clone())
    }

    pub fn row(&self, player: usize) -> &[f64] {
        &self.actions[player]
    }

    pub fn set_row(&mut self, player: usize, values: &[f64]) {
        self.actions[player].copy_from_slice(values);
    }

    pub fn n_players(&self) -> usize {
        self.actions.len()
    }

    /// Checks shape, box bounds and budgets within `tol`.
    pub fn check_feasible(&self, spec: &GameSpec, tol: f64) -> Result<()> {
        if self.actions.len() != spec.n_players()
            || self.actions.iter().any(|r| r.len() != spec.n_dims())
        {
            return Err(GameError::InvalidArgument(
                "action profile shape does not match the game".into(),
            ));
        }
        for (p, row) in self.actions.iter().enumerate() {
            for (d, &a) in row.iter().enumerate() {
                if a.is_nan() || a < spec.action_min[p][d] - tol || a > spec.action_max[p][d] + tol
                {
                    return Err(GameError::InvalidArgument(format!(
                        "action {a} of player {p} on dimension {d} outside [{}, {}]",
                        spec.action_min[p][d], spec.action_max[p][d]
                    )));
                }
            }
            if let Some(b) = spec.budget(p) {
                let total: f64 = row.iter().sum();
                if total > b + tol {
                    return Err(GameError::InvalidArgument(format!(
                        "player {p} spends {total} above budget {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per player and dimension: is the action within `tol` of a bound?
    pub fn boundary_flags(&self, spec: &GameSpec, tol: f64) -> Vec<Vec<bool>> {
        self.actions
            .iter()
            .enumerate()
            .map(|(p, row)| {
                row.iter()
                    .enumerate()
                    .map(|(d, &a)| {
                        (a - spec.action_min[p][d]).abs() <= tol
                            || (spec.action_max[p][d] - a).abs() <= tol
                    })
                    .collect()
            })
            .collect()
    }
}

/// Aggregate impact `f_n` seen by one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactVector {
    pub values: Vec<f64>,
}

impl ImpactVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    fn check(&self, player: usize) -> Result<()> {
        for (dim, &value) in self.values.iter().enumerate() {
            if !(value > SINGULAR_IMPACT) {
                return Err(GameError::SingularImpact { player, dim, value });
            }
        }
        Ok(())
    }
}

/// Per-dimension first and second derivatives of one player's utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBundle {
    /// `dv/da^k`, price included.
    pub grad_a: Vec<f64>,
    /// `dv/df^k`, never positive.
    pub grad_f: Vec<f64>,
    /// `d2v/da^k da^k`.
    pub hess_aa: Vec<f64>,
    /// `d2v/da^k df^k`.
    pub hess_af: Vec<f64>,
    /// `d2v/df^k df^k`, never negative (the utility is convex in the impact).
    pub hess_ff: Vec<f64>,
}

impl DerivativeBundle {
    /// Marginal throughput `dv/da^k + c`, i.e. the derivative without the price.
    pub fn throughput_rate(&self, price: f64) -> Vec<f64> {
        self.grad_a.iter().map(|g| g + price).collect()
    }
}

pub fn aggregate_impact(
    spec: &GameSpec,
    profile: &ActionProfile,
    player: usize,
) -> Result<ImpactVector> {
    spec.check_player(player)?;
    if profile.n_players() != spec.n_players() {
        return Err(GameError::InvalidArgument(
            "action profile shape does not match the game".into(),
        ));
    }
    Ok(ImpactVector::new(impact_values(spec, profile, player)))
}

/// Unchecked variant used in solver inner loops.
pub(crate) fn impact_values(spec: &GameSpec, profile: &ActionProfile, player: usize) -> Vec<f64> {
    let gains = &spec.cross_gain[player];
    let mut f = spec.noise[player].clone();
    for (m, row) in profile.actions.iter().enumerate() {
        if m == player {
            continue;
        }
        for ((fk, &a), &x) in f.iter_mut().zip(row).zip(&gains[m]) {
            *fk += a * x;
        }
    }
    f
}

/// Throughput of one dimension, `log(1 + h a / f)`.
#[inline]
pub(crate) fn rate_term(h: f64, a: f64, f: f64) -> f64 {
    (h * a / f).ln_1p()
}

pub fn utility(
    spec: &GameSpec,
    player: usize,
    own_action: &[f64],
    impact: &ImpactVector,
) -> Result<f64> {
    spec.check_player(player)?;
    check_lengths(spec, own_action, impact)?;
    impact.check(player)?;
    Ok(utility_unchecked(spec, player, own_action, &impact.values))
}

pub(crate) fn utility_unchecked(spec: &GameSpec, player: usize, own: &[f64], f: &[f64]) -> f64 {
    let c = spec.price(player);
    own.iter()
        .zip(f)
        .enumerate()
        .map(|(k, (&a, &fk))| rate_term(spec.direct_gain(player, k), a, fk) - c * a)
        .sum()
}

pub fn derivatives(
    spec: &GameSpec,
    player: usize,
    own_action: &[f64],
    impact: &ImpactVector,
) -> Result<DerivativeBundle> {
    spec.check_player(player)?;
    check_lengths(spec, own_action, impact)?;
    impact.check(player)?;
    Ok(derivatives_unchecked(
        spec,
        player,
        own_action,
        &impact.values,
    ))
}

pub(crate) fn derivatives_unchecked(
    spec: &GameSpec,
    player: usize,
    own: &[f64],
    f: &[f64],
) -> DerivativeBundle {
    let c = spec.price(player);
    let k = own.len();
    let mut b = DerivativeBundle {
        grad_a: Vec::with_capacity(k),
        grad_f: Vec::with_capacity(k),
        hess_aa: Vec::with_capacity(k),
        hess_af: Vec::with_capacity(k),
        hess_ff: Vec::with_capacity(k),
    };
    for (d, (&a, &fk)) in own.iter().zip(f).enumerate() {
        let h = spec.direct_gain(player, d);
        let total = fk + h * a;
        b.grad_a.push(h / total - c);
        b.grad_f.push(-h * a / (fk * total));
        b.hess_aa.push(-(h * h) / (total * total));
        b.hess_af.push(-h / (total * total));
        // 1/f^2 - 1/(f+ha)^2 written without cancellation
        b.hess_ff
            .push(h * a * (2.0 * fk + h * a) / (fk * fk * total * total));
    }
    b
}

/// `C_nm^k = x_nm^k * dv_n/df_n^k`: utility loss of `on` per unit of action of `from`.
pub fn negative_impact(
    spec: &GameSpec,
    profile: &ActionProfile,
    on: usize,
    from: usize,
) -> Result<Vec<f64>> {
    spec.check_player(on)?;
    spec.check_player(from)?;
    if on == from {
        return Err(GameError::InvalidPair { player: on });
    }
    let impact = aggregate_impact(spec, profile, on)?;
    let bundle = derivatives(spec, on, profile.row(on), &impact)?;
    Ok(bundle
        .grad_f
        .iter()
        .zip(&spec.cross_gain[on][from])
        .map(|(g, x)| x * g)
        .collect())
}

/// Utilities of all players at their actual impacts.
pub fn realized_utilities(spec: &GameSpec, profile: &ActionProfile) -> Result<Vec<f64>> {
    (0..spec.n_players())
        .map(|n| {
            let f = aggregate_impact(spec, profile, n)?;
            utility(spec, n, profile.row(n), &f)
        })
        .collect()
}

fn check_lengths(spec: &GameSpec, own: &[f64], impact: &ImpactVector) -> Result<()> {
    let k = spec.n_dims();
    if own.len() != k || impact.values.len() != k {
        return Err(GameError::InvalidArgument(format!(
            "expected {k}-vectors, got action of length {} and impact of length {}",
            own.len(),
            impact.values.len()
        )));
    }
    Ok(())
}
