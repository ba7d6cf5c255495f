//! Seeded experiment campaigns: theorem grids, phase fields, basin maps and
//! the regret sweep, plus their CSV/JSON emitters.

mod output;
mod phase;
mod sweep;
mod theorems;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::game::GameError;
use crate::learners::LearnerError;

pub use output::{
    write_aggregates_json, write_basin_csv, write_field_csv, write_records_csv, write_theorem_csv,
    write_trajectory_csv,
};
pub use phase::{basin_map, phase_field, BasinMap, BasinPoint, Exclusion, FieldSample};
pub use sweep::{
    aggregate, derive_seed, draw_policy, random_hierarchy, run_sweep, seeded_rng, AggregateStats,
    CellStats, ExperimentRng, GameFamily, HierarchyPolicy, InitDistribution, SweepConfig,
    SweepRecord, SweepResult, DEFAULT_SEED, FIGURE2_ETA, FIGURE2_LR, FIGURE2_REGRETS,
};
pub use theorems::{
    default_theorem_etas, default_theorem_regrets, predicted, theorem_grid, Prediction, TheoremRow,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
