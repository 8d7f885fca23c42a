//! Seeded simulation core for studying how consensus and action diversity
//! trade off in multi-agent teams.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds action values, the empirical action distribution and the
//!   per-agent deviation metrics.
//! * [`consensus`] turns a round's proposals into committed actions, either by
//!   plurality vote (explicit) or by leaving each agent's proposal untouched
//!   (implicit).
//! * [`env`] contains the three scenario worlds (disaster response,
//!   misinformation spread, threshold public goods) and their metrics.
//! * [`agents`] implements role heuristics, the random baseline, exploration
//!   noise and the hook used to plug in language-model policies.
//! * [`theory`] is the scalar random-iteration model with environment shocks.
//! * [`exec`] chooses between rayon and a plain sequential loop for the
//!   embarrassingly parallel sweeps.

pub mod agents;
pub mod consensus;
pub mod env;
pub mod exec;
pub mod model;
pub mod rng;
pub mod stats;
pub mod theory;

pub use model::{
    action_distribution, deviation, mean_action, mean_deviation, ActionDistribution, ActionKey,
    ActionKind, ActionValue, DeviationKind, GridCell, NodeSet, GRID_SIZE,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("action list is empty")]
    EmptyActions,
    #[error("mixed action kinds: expected {expected:?}, found {found:?}")]
    MixedKinds { expected: ActionKind, found: ActionKind },
    #[error("deviation kind {metric:?} does not apply to {kind:?} actions")]
    MetricMismatch { metric: DeviationKind, kind: ActionKind },
    #[error("grid cell ({x}, {y}) is outside the {GRID_SIZE}x{GRID_SIZE} grid")]
    OffGrid { x: i64, y: i64 },
    #[error("node {0} appears more than once")]
    DuplicateNode(u32),
    #[error("node set of size {len} exceeds budget {budget}")]
    BudgetExceeded { len: usize, budget: usize },
    #[error("contribution {amount} outside [0, {c_max}]")]
    ContributionOutOfRange { amount: f64, c_max: f64 },
    #[error("expected {expected} actions (one per agent), got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("duplicate proposal from agent {0}")]
    DuplicateProposer(usize),
    #[error("empty run record")]
    EmptyRecords,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
