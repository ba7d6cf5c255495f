//! Continuous-time analysis of the update rules on the two-action game and
//! the discrete, constrained training loop.

mod integrate;
mod linear;
mod train;

use thiserror::Error;

use crate::game::GameError;
use crate::learners::LearnerError;

pub use integrate::{
    integrate_phase, planar_rate, PhaseOptions, Trajectory, TrajectoryPoint, DEFAULT_HORIZON,
    DEFAULT_STEP,
};
pub use linear::{
    classify, closed_form_dynamics, fixed_point, verify_dynamics, Eigenvalues, FixedPoint,
    FixedPointClass, FixedPointReport, LinearDynamics,
};
pub use train::{classify_outcome, project_simplex, train, Outcome, TrainConfig, TrainRun};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("no closed-form dynamics for rule `{0}`")]
    NoClosedForm(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },
}
