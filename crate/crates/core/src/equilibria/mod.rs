//! Best responses, the followers' Nash iteration and the bi-level solvers.

mod closed_form;
mod nash;
mod response;
mod stackelberg;
mod uniqueness;

use serde::{Deserialize, Serialize};

pub use closed_form::{rse1_closed_form, LeaderCurvature};
pub use nash::followers_nash;
pub use response::follower_best_response;
pub use stackelberg::{
    cooperative_leaders, solve_nse, solve_nse_with, solve_rse1, solve_rse1_with, solve_rse2,
    solve_rse2_with,
};
pub use uniqueness::{is_p_matrix, uniqueness_certificate, UniquenessCertificate, MINOR_LIMIT};

use crate::error::Result;
use crate::game::{realized_utilities, ActionProfile, GameSpec};

/// Actions within this distance of a bound are flagged as boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    /// Followers' nominal Nash equilibrium at fixed leader actions.
    Ne,
    /// Followers' robust Nash equilibrium at fixed leader actions.
    Rne,
    Nse,
    Rse1,
    Rse2,
}

impl EquilibriumKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Ne => "NE",
            Self::Rne => "RNE",
            Self::Nse => "NSE",
            Self::Rse1 => "RSE1",
            Self::Rse2 => "RSE2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Largest distance of a follower from its own best response.
    pub residual: f64,
    /// `[n][k]`: action within `BOUNDARY_TOL` of a bound.
    pub boundary: Vec<Vec<bool>>,
    /// False when a solver returned its best point without meeting its stopping rule.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub kind: EquilibriumKind,
    pub profile: ActionProfile,
    /// Realized utilities: true gains, actual impacts.
    pub utilities: Vec<f64>,
    pub social: f64,
    pub diagnostics: Diagnostics,
}

impl EquilibriumResult {
    pub(crate) fn evaluate(
        spec: &GameSpec,
        kind: EquilibriumKind,
        profile: ActionProfile,
        iterations: usize,
        residual: f64,
    ) -> Result<Self> {
        let utilities = realized_utilities(spec, &profile)?;
        let social = utilities.iter().sum();
        let boundary = profile.boundary_flags(spec, BOUNDARY_TOL);
        Ok(Self {
            kind,
            profile,
            utilities,
            social,
            diagnostics: Diagnostics {
                iterations,
                residual,
                boundary,
                certified: true,
            },
        })
    }

    pub fn is_interior(&self) -> bool {
        !self.diagnostics.boundary.iter().flatten().any(|b| *b)
    }

    /// Utilities summed over `players`.
    pub fn utility_of(&self, players: &[usize]) -> f64 {
        players.iter().map(|&p| self.utilities[p]).sum()
    }
}

/// Knobs shared by the bi-level solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stopping tolerance of the followers' Nash iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Bracket width of the leader's scalar searches.
    pub bracket_tol: f64,
    /// Grid points scanned per leader coordinate before refining.
    pub scan_points: usize,
    /// Starting points of the budgeted leader search.
    pub restarts: usize,
    /// Ascent steps per start of the budgeted leader search.
    pub ascent_steps: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 2000,
            bracket_tol: 1e-9,
            scan_points: 32,
            restarts: 20,
            ascent_steps: 200,
            seed: 0,
        }
    }
}
