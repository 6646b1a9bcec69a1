use thiserror::Error;

/// Errors raised by the game model and the equilibrium solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GameError {
    #[error("invalid game specification: {0}")]
    InvalidSpec(String),

    #[error("player index {index} out of range (game has {len} players)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("negative impact requested for player {player} on itself")]
    InvalidPair { player: usize },

    #[error(
        "aggregate impact of player {player} on dimension {dim} is {value:e}; must exceed 1e-12"
    )]
    SingularImpact {
        player: usize,
        dim: usize,
        value: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("degenerate utility model: {0}")]
    DegenerateModel(String),

    #[error("closed form not applicable: {0}")]
    InapplicableFormula(String),

    #[error("baseline utility of player {player} is zero; relative change undefined")]
    UndefinedBaseline { player: usize },

    #[error("{n} followers exceeds the exhaustive minor limit of {limit}; use an eigenvalue-based sufficient check instead")]
    CombinatorialLimit { n: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GameError>;
