//! Nominal and worst-case robust Stackelberg equilibria for additively coupled
//! resource-allocation games, with power control over parallel subchannels as
//! the running instance.

// NaN must fail argument checks, hence `!(x > 0.0)`; gain tensors read best indexed
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod budget;
pub mod equilibria;
pub mod error;
pub mod game;
pub mod robust;
pub mod scalar;

pub use budget::{overlap_stats, robust_waterfill, waterfill, OverlapStats};
pub use equilibria::{
    follower_best_response, followers_nash, rse1_closed_form, solve_nse, solve_rse1, solve_rse2,
    uniqueness_certificate, EquilibriumKind, EquilibriumResult, LeaderCurvature, SolverOptions,
    UniquenessCertificate,
};
pub use error::{GameError, Result};
pub use game::{
    aggregate_impact, derivatives, negative_impact, realized_utilities, utility, ActionProfile,
    DerivativeBundle, GameSpec, ImpactVector, Role, UtilityModel,
};
pub use robust::{
    direction_vector, worst_case_cross_gain, worst_case_observation, UncertaintySpec,
    WorstCaseObservation,
};
