//! Learning-anticipation laboratory for fully-cooperative normal-form games.
//!
//! * [`game`]: common payoff tensors and the common value function.
//! * [`diff`]: nestable forward-mode differentiation with stop-gradient.
//! * [`learners`]: naive, Look-Ahead, LOLA and hierarchical (HLA) update
//!   rules behind the [`learners::UpdateRule`] trait and a name registry.
//! * [`dynamics`]: closed-form linear dynamics, fixed-point classification,
//!   phase integration and the constrained training loop.
//! * [`experiments`]: seeded sweeps, theorem grids, phase fields and basin
//!   maps, with CSV/JSON emission.

pub mod diff;
pub mod dynamics;
pub mod experiments;
pub mod game;
pub mod learners;

pub use diff::{stop_gradient, Num, Scalar};
pub use dynamics::{Outcome, TrainConfig, TrainRun};
pub use game::{CoordinationGame, JointPolicy, PayoffTensor, PolicyMode};
pub use learners::{RuleParams, RuleRegistry, StepResult, UpdateRule};
