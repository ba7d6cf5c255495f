//! Two-agent anticipation against a naive opponent step, with (LOLA) or
//! without (Look-Ahead) differentiating through that step.

use crate::diff::stop_gradient;
use crate::dynamics::LinearDynamics;
use crate::game::{JointPolicy, PayoffTensor};

use super::field::{lift, reals, scaled, shifted, ValueField};
use super::{check_eta, LearnerError, StepResult, UpdateRule};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Shaping {
    Frozen,
    Through,
}

fn anticipating_delta(
    rule: &'static str,
    game: &PayoffTensor,
    policy: &JointPolicy,
    eta: f64,
    shaping: Shaping,
) -> Result<StepResult, LearnerError> {
    let field = ValueField::new(game, policy)?;
    if field.agents() != 2 {
        return Err(LearnerError::TwoAgentsOnly {
            rule,
            agents: field.agents(),
        });
    }
    let blocks = lift(policy);
    let deltas = (0..2)
        .map(|i| {
            let j = 1 - i;
            let grad = field.partial(&blocks, i, |b| {
                let mut step = field.step(b, j, eta);
                if shaping == Shaping::Frozen {
                    step = step.iter().map(stop_gradient).collect();
                }
                let mut ahead = b.to_vec();
                ahead[j] = shifted(&b[j], &step);
                field.value(&ahead)
            });
            reals(&scaled(grad, eta))
        })
        .collect();
    StepResult::new(deltas)
}

/// `Δθ_i = η ∂_{θ_i} V(θ_i, θ_j + ⊥(η ∇_{θ_j} V))`.
pub fn la_delta(
    game: &PayoffTensor,
    policy: &JointPolicy,
    eta: f64,
) -> Result<StepResult, LearnerError> {
    anticipating_delta("la", game, policy, eta, Shaping::Frozen)
}

/// `Δθ_i = η ∂_{θ_i} V(θ_i, θ_j + η ∇_{θ_j} V)`, opponent step included in
/// the differentiation.
pub fn lola_delta(
    game: &PayoffTensor,
    policy: &JointPolicy,
    eta: f64,
) -> Result<StepResult, LearnerError> {
    anticipating_delta("lola", game, policy, eta, Shaping::Through)
}

/// Look-Ahead: anticipates the opponent's naive step without shaping it.
#[derive(Clone, Debug)]
pub struct LookAhead {
    eta: f64,
}

impl LookAhead {
    pub fn new(eta: f64) -> Result<Self, LearnerError> {
        Ok(Self {
            eta: check_eta(eta)?,
        })
    }
}

impl UpdateRule for LookAhead {
    fn name(&self) -> &'static str {
        "la"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn delta(&self, game: &PayoffTensor, policy: &JointPolicy) -> Result<StepResult, LearnerError> {
        la_delta(game, policy, self.eta)
    }

    fn closed_form(&self, g: f64) -> Option<LinearDynamics> {
        let d = 4.0 * self.eta * g * g;
        let b = 2.0 * self.eta * g * g + g;
        Some(LinearDynamics::new([[d, 2.0 * g], [2.0 * g, d]], [b, b]))
    }
}

/// LOLA: anticipates and shapes the opponent's naive step.
#[derive(Clone, Debug)]
pub struct Lola {
    eta: f64,
}

impl Lola {
    pub fn new(eta: f64) -> Result<Self, LearnerError> {
        Ok(Self {
            eta: check_eta(eta)?,
        })
    }
}

impl UpdateRule for Lola {
    fn name(&self) -> &'static str {
        "lola"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn delta(&self, game: &PayoffTensor, policy: &JointPolicy) -> Result<StepResult, LearnerError> {
        lola_delta(game, policy, self.eta)
    }

    fn closed_form(&self, g: f64) -> Option<LinearDynamics> {
        let d = 8.0 * self.eta * g * g;
        let b = 4.0 * self.eta * g * g + g;
        Some(LinearDynamics::new([[d, 2.0 * g], [2.0 * g, d]], [b, b]))
    }
}
