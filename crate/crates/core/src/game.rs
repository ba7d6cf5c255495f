//! Fully-cooperative normal-form games: one payoff tensor shared by every
//! agent, and the common value as the expected payoff of a joint policy.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("policy shape {policy:?} does not match game shape {game:?}")]
    ShapeMismatch {
        game: Vec<usize>,
        policy: Vec<usize>,
    },
}

/// Common reward `R[a_1, …, a_n]`, row-major over the joint action.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffTensor {
    shape: Vec<usize>,
    entries: Vec<f64>,
}

impl PayoffTensor {
    pub fn new(shape: Vec<usize>, entries: Vec<f64>) -> Result<Self, GameError> {
        if shape.len() < 2 {
            return Err(GameError::InvalidGame(format!(
                "need at least two agents, got {}",
                shape.len()
            )));
        }
        if let Some(m) = shape.iter().find(|&&m| m < 2) {
            return Err(GameError::InvalidGame(format!(
                "every agent needs at least two actions, got {m}"
            )));
        }
        let len: usize = shape.iter().product();
        if entries.len() != len {
            return Err(GameError::InvalidGame(format!(
                "shape {shape:?} needs {len} entries, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(GameError::InvalidGame("entries must be finite".into()));
        }
        Ok(Self { shape, entries })
    }

    /// `[[α, k], [k, α]]` with coordination reward `α > 0` and
    /// miscoordination penalty `k ≤ 0`.
    pub fn two_action(alpha: f64, k: f64) -> Result<Self, GameError> {
        CoordinationGame::two_action(alpha, k)?.tensor()
    }

    /// `[[10, 0, k], [0, 2, 0], [k, 0, 10]]`.
    pub fn three_action(k: f64) -> Result<Self, GameError> {
        CoordinationGame::three_action(k)?.tensor()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn agents(&self) -> usize {
        self.shape.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entry(&self, joint: &[usize]) -> f64 {
        self.entries[self.offset(joint)]
    }

    fn offset(&self, joint: &[usize]) -> usize {
        debug_assert_eq!(joint.len(), self.shape.len());
        joint.iter().zip(&self.shape).fold(0, |acc, (&a, &m)| {
            debug_assert!(a < m);
            acc * m + a
        })
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.entries
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Expected payoff `Σ_a R[a] Π_i P_i(a_i)` for per-agent action
    /// distributions over any scalar algebra. Contracts the last agent first.
    pub fn expected<S: Scalar>(&self, probs: &[Vec<S>]) -> Result<S, GameError> {
        let lens: Vec<usize> = probs.iter().map(Vec::len).collect();
        if lens != self.shape {
            return Err(GameError::ShapeMismatch {
                game: self.shape.clone(),
                policy: lens,
            });
        }
        let last = probs.len() - 1;
        let m = self.shape[last];
        let mut acc: Vec<S> = self
            .entries
            .chunks(m)
            .map(|row| dot_const(row, &probs[last]))
            .collect();
        for p in probs[..last].iter().rev() {
            let m = p.len();
            acc = acc
                .chunks(m)
                .map(|row| {
                    row.iter()
                        .zip(p)
                        .fold(S::zero(), |s, (r, q)| s + r.clone() * q.clone())
                })
                .collect();
        }
        debug_assert_eq!(acc.len(), 1);
        Ok(acc.pop().expect("contraction leaves one scalar"))
    }

    /// Common value of a joint policy.
    pub fn value(&self, policy: &JointPolicy) -> Result<f64, GameError> {
        self.value_of(policy.mode(), policy.blocks())
    }

    /// Common value from raw parameter blocks interpreted under `mode`.
    /// This is the function every learner differentiates.
    pub fn value_of<S: Scalar>(&self, mode: PolicyMode, blocks: &[Vec<S>]) -> Result<S, GameError> {
        if mode == PolicyMode::Reduced && self.shape.iter().any(|&m| m != 2) {
            return Err(GameError::InvalidPolicy(
                "reduced parameterization needs two actions per agent".into(),
            ));
        }
        let probs: Vec<Vec<S>> = blocks.iter().map(|b| mode.action_probs(b)).collect();
        self.expected(&probs)
    }

    /// Whether no agent gains by deviating unilaterally from `joint`.
    pub fn is_pure_nash(&self, joint: &[usize]) -> bool {
        let here = self.entry(joint);
        let mut alt = joint.to_vec();
        for (i, &m) in self.shape.iter().enumerate() {
            for b in 0..m {
                alt[i] = b;
                if self.entry(&alt) > here {
                    return false;
                }
            }
            alt[i] = joint[i];
        }
        true
    }
}

fn dot_const<S: Scalar>(row: &[f64], p: &[S]) -> S {
    row.iter()
        .zip(p)
        .filter(|(r, _)| **r != 0.0)
        .fold(S::zero(), |s, (&r, q)| s + q.scale(r))
}

/// How an agent's parameter block maps to action probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMode {
    /// One scalar per two-action agent: `P(first action) = θ`.
    Reduced,
    /// The block is the probability vector itself.
    Simplex,
}

impl PolicyMode {
    pub fn action_probs<S: Scalar>(self, block: &[S]) -> Vec<S> {
        match self {
            PolicyMode::Reduced => {
                let t = block[0].clone();
                vec![t.clone(), S::one() - t]
            }
            PolicyMode::Simplex => block.to_vec(),
        }
    }

    /// Parameter block length for an agent with `actions` actions.
    pub fn block_len(self, actions: usize) -> usize {
        match self {
            PolicyMode::Reduced => 1,
            PolicyMode::Simplex => actions,
        }
    }
}

const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Per-agent policy parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPolicy {
    mode: PolicyMode,
    blocks: Vec<Vec<f64>>,
}

impl JointPolicy {
    /// Reduced parameterization for two-action agents, `θ_i ∈ [0, 1]`.
    pub fn reduced(thetas: &[f64]) -> Result<Self, GameError> {
        Self::new(
            PolicyMode::Reduced,
            thetas.iter().map(|&t| vec![t]).collect(),
        )
    }

    pub fn simplex(blocks: Vec<Vec<f64>>) -> Result<Self, GameError> {
        Self::new(PolicyMode::Simplex, blocks)
    }

    pub fn new(mode: PolicyMode, blocks: Vec<Vec<f64>>) -> Result<Self, GameError> {
        if blocks.len() < 2 {
            return Err(GameError::InvalidPolicy("need at least two agents".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.iter().any(|x| !x.is_finite()) {
                return Err(GameError::InvalidPolicy(format!(
                    "agent {i}: non-finite parameter"
                )));
            }
            match mode {
                PolicyMode::Reduced => {
                    if b.len() != 1 || !(0.0..=1.0).contains(&b[0]) {
                        return Err(GameError::InvalidPolicy(format!(
                            "agent {i}: reduced parameter must be one value in [0, 1], got {b:?}"
                        )));
                    }
                }
                PolicyMode::Simplex => {
                    let sum: f64 = b.iter().sum();
                    if b.len() < 2
                        || b.iter().any(|&x| x < 0.0)
                        || (sum - 1.0).abs() > SIMPLEX_SUM_TOL
                    {
                        return Err(GameError::InvalidPolicy(format!(
                            "agent {i}: not a probability vector: {b:?}"
                        )));
                    }
                }
            }
        }
        Ok(Self { mode, blocks })
    }

    /// Parameters without the range and simplex checks, for evaluating
    /// the unconstrained field outside the feasible set (phase planes).
    pub fn extended(mode: PolicyMode, blocks: Vec<Vec<f64>>) -> Result<Self, GameError> {
        if blocks.iter().flatten().any(|x| !x.is_finite()) {
            return Err(GameError::InvalidPolicy("non-finite parameter".into()));
        }
        Ok(Self { mode, blocks })
    }

    /// Uniform play for every agent of `game`.
    pub fn uniform(game: &PayoffTensor, mode: PolicyMode) -> Self {
        let blocks = game
            .shape()
            .iter()
            .map(|&m| match mode {
                PolicyMode::Reduced => vec![0.5],
                PolicyMode::Simplex => vec![1.0 / m as f64; m],
            })
            .collect();
        Self { mode, blocks }
    }

    pub fn mode(&self) -> PolicyMode {
        self.mode
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn agents(&self) -> usize {
        self.blocks.len()
    }

    /// Action probabilities of agent `i`.
    pub fn probs(&self, i: usize) -> Vec<f64> {
        self.mode.action_probs(&self.blocks[i])
    }

    /// Checks that this policy can be played in `game`.
    pub fn check_against(&self, game: &PayoffTensor) -> Result<(), GameError> {
        let actions: Vec<usize> = self
            .blocks
            .iter()
            .map(|b| match self.mode {
                PolicyMode::Reduced => 2,
                PolicyMode::Simplex => b.len(),
            })
            .collect();
        if actions != game.shape() {
            return Err(GameError::ShapeMismatch {
                game: game.shape().to_vec(),
                policy: actions,
            });
        }
        Ok(())
    }

    /// All parameters in agent order.
    pub fn flat(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }
}

/// The two coordination games used in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum CoordinationGame {
    TwoAction { alpha: f64, k: f64 },
    ThreeAction { k: f64 },
}

impl CoordinationGame {
    pub fn two_action(alpha: f64, k: f64) -> Result<Self, GameError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(GameError::InvalidGame(format!(
                "coordination reward must be positive, got {alpha}"
            )));
        }
        if !(k.is_finite() && k <= 0.0) {
            return Err(GameError::InvalidGame(format!(
                "miscoordination penalty must be non-positive, got {k}"
            )));
        }
        Ok(CoordinationGame::TwoAction { alpha, k })
    }

    pub fn three_action(k: f64) -> Result<Self, GameError> {
        if !(k.is_finite() && k <= 10.0) {
            return Err(GameError::InvalidGame(format!(
                "three-action penalty must satisfy k <= 10, got {k}"
            )));
        }
        Ok(CoordinationGame::ThreeAction { k })
    }

    /// Two-action game with regret `g`. Without an explicit `alpha` the
    /// payoffs are centred: `α = g/2`, `k = −g/2`.
    pub fn two_action_with_regret(g: f64, alpha: Option<f64>) -> Result<Self, GameError> {
        if !(g.is_finite() && g > 0.0) {
            return Err(GameError::InvalidGame(format!(
                "regret must be positive, got {g}"
            )));
        }
        let alpha = alpha.unwrap_or(g / 2.0);
        Self::two_action(alpha, alpha - g)
    }

    pub fn three_action_with_regret(g: f64) -> Result<Self, GameError> {
        Self::three_action(10.0 - g)
    }

    /// Miscoordination regret `g`.
    pub fn regret(&self) -> f64 {
        match *self {
            CoordinationGame::TwoAction { alpha, k } => alpha - k,
            CoordinationGame::ThreeAction { k } => 10.0 - k,
        }
    }

    /// Coordination reward at the global equilibria.
    pub fn best_payoff(&self) -> f64 {
        match *self {
            CoordinationGame::TwoAction { alpha, .. } => alpha,
            CoordinationGame::ThreeAction { .. } => 10.0,
        }
    }

    pub fn tensor(&self) -> Result<PayoffTensor, GameError> {
        match *self {
            CoordinationGame::TwoAction { alpha, k } => {
                PayoffTensor::new(vec![2, 2], vec![alpha, k, k, alpha])
            }
            CoordinationGame::ThreeAction { k } => {
                PayoffTensor::new(vec![3, 3], vec![10.0, 0.0, k, 0.0, 2.0, 0.0, k, 0.0, 10.0])
            }
        }
    }

    /// Natural parameterization: reduced for two actions, simplex otherwise.
    pub fn mode(&self) -> PolicyMode {
        match self {
            CoordinationGame::TwoAction { .. } => PolicyMode::Reduced,
            CoordinationGame::ThreeAction { .. } => PolicyMode::Simplex,
        }
    }
}

impl fmt::Display for CoordinationGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoordinationGame::TwoAction { alpha, k } => {
                write!(f, "two-action(alpha={alpha}, k={k})")
            }
            CoordinationGame::ThreeAction { k } => write!(f, "three-action(k={k})"),
        }
    }
}
