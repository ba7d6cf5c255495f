//! Update rules: naive gradient, Look-Ahead, LOLA and hierarchical
//! learning anticipation (HLA).
//!
//! Every rule implements [`UpdateRule`] and is constructed by name through
//! a [`RuleRegistry`], so experiment code and the CLI select rules at run
//! time from strings (`naive`, `la`, `lola`, `hla`).
//!
//! A rule returns the raw anticipation deltas `Δθ_i`, which scale with the
//! prediction length `η`. Training applies `θ_i += λ Δθ_i / η`; the
//! per-unit-time rate is `Δθ_i / η`.

mod field;
mod hla;
mod look_ahead;
mod naive;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::diff::DiffError;
use crate::dynamics::LinearDynamics;
use crate::game::{GameError, JointPolicy, PayoffTensor};

pub use hla::{hla_delta, hla_two_agent_delta, Hla};
pub use look_ahead::{la_delta, lola_delta, Lola, LookAhead};
pub use naive::{naive_delta, Naive};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("prediction length must be positive and finite, got {0}")]
    InvalidEta(f64),
    #[error("rule `{rule}` is defined for two agents only, got {agents}")]
    TwoAgentsOnly { rule: &'static str, agents: usize },
    #[error("invalid hierarchy {hierarchy:?} for {agents} agents")]
    InvalidHierarchy {
        hierarchy: Vec<usize>,
        agents: usize,
    },
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
}

/// Per-agent deltas of one learning step, shaped like the policy blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub deltas: Vec<Vec<f64>>,
}

impl StepResult {
    pub(crate) fn new(deltas: Vec<Vec<f64>>) -> Result<Self, LearnerError> {
        if let Some(bad) = deltas.iter().flatten().find(|x| !x.is_finite()) {
            return Err(DiffError::NonFinite(*bad).into());
        }
        Ok(Self { deltas })
    }

    /// Deltas divided by `η`: the continuous-time rate of each coordinate.
    pub fn rates(&self, eta: f64) -> Vec<Vec<f64>> {
        self.deltas
            .iter()
            .map(|d| d.iter().map(|x| x / eta).collect())
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.deltas.iter().flatten().copied().collect()
    }
}

/// One learning-anticipation update rule.
pub trait UpdateRule: Send + Sync + fmt::Debug {
    /// Registry name.
    fn name(&self) -> &'static str;

    /// Prediction length `η`.
    fn eta(&self) -> f64;

    /// Simultaneous deltas for every agent from the current policy.
    fn delta(&self, game: &PayoffTensor, policy: &JointPolicy) -> Result<StepResult, LearnerError>;

    /// `(A, b)` of the unconstrained rate `dθ/dt = Aθ − b` on the two-action
    /// coordination game with regret `g`, when known in closed form.
    fn closed_form(&self, _g: f64) -> Option<LinearDynamics> {
        None
    }

    /// Per-unit-time rates `Δθ / η`.
    fn rates(
        &self,
        game: &PayoffTensor,
        policy: &JointPolicy,
    ) -> Result<Vec<Vec<f64>>, LearnerError> {
        Ok(self.delta(game, policy)?.rates(self.eta()))
    }
}

/// Construction parameters shared by all rules.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuleParams {
    pub eta: f64,
    /// Agents (0-based) listed from the lowest hierarchy level to the
    /// highest. `None` means agent order. Ignored by non-hierarchical rules.
    pub hierarchy: Option<Vec<usize>>,
}

impl RuleParams {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta,
            hierarchy: None,
        }
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<f64, LearnerError> {
    if eta.is_finite() && eta > 0.0 {
        Ok(eta)
    } else {
        Err(LearnerError::InvalidEta(eta))
    }
}

type Factory = Box<dyn Fn(&RuleParams) -> Result<Box<dyn UpdateRule>, LearnerError> + Send + Sync>;

/// Rule constructors keyed by name.
pub struct RuleRegistry {
    factories: BTreeMap<String, Factory>,
}

impl RuleRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `naive`, `la`, `lola` and `hla`.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("naive", |p| Ok(Box::new(Naive::new(p.eta)?)));
        reg.register("la", |p| Ok(Box::new(LookAhead::new(p.eta)?)));
        reg.register("lola", |p| Ok(Box::new(Lola::new(p.eta)?)));
        reg.register("hla", |p| {
            Ok(Box::new(Hla::new(p.eta, p.hierarchy.clone())?))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&RuleParams) -> Result<Box<dyn UpdateRule>, LearnerError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn build(
        &self,
        name: &str,
        params: &RuleParams,
    ) -> Result<Box<dyn UpdateRule>, LearnerError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| LearnerError::UnknownRule(name.to_string()))?;
        factory(params)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

impl Default for RuleRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl fmt::Debug for RuleRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}
