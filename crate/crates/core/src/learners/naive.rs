use crate::dynamics::LinearDynamics;
use crate::game::{JointPolicy, PayoffTensor};

use super::field::{lift, reals, ValueField};
use super::{check_eta, LearnerError, StepResult, UpdateRule};

/// Plain gradient ascent on the common value, all agents simultaneously.
#[derive(Clone, Debug)]
pub struct Naive {
    eta: f64,
}

impl Naive {
    pub fn new(eta: f64) -> Result<Self, LearnerError> {
        Ok(Self {
            eta: check_eta(eta)?,
        })
    }
}

/// `Δθ_i = η ∇_{θ_i} V` for every agent.
pub fn naive_delta(
    game: &PayoffTensor,
    policy: &JointPolicy,
    eta: f64,
) -> Result<StepResult, LearnerError> {
    let field = ValueField::new(game, policy)?;
    let blocks = lift(policy);
    let deltas = (0..field.agents())
        .map(|i| reals(&field.step(&blocks, i, eta)))
        .collect();
    StepResult::new(deltas)
}

impl UpdateRule for Naive {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn delta(&self, game: &PayoffTensor, policy: &JointPolicy) -> Result<StepResult, LearnerError> {
        naive_delta(game, policy, self.eta)
    }

    fn closed_form(&self, g: f64) -> Option<LinearDynamics> {
        Some(LinearDynamics::new(
            [[0.0, 2.0 * g], [2.0 * g, 0.0]],
            [g, g],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_examples() {
        // g = 1 with α = 1, k = 0
        let game = PayoffTensor::two_action(1.0, 0.0).unwrap();
        let d = naive_delta(&game, &JointPolicy::reduced(&[0.5, 0.5]).unwrap(), 1.0).unwrap();
        assert_eq!(d.flat(), vec![0.0, 0.0]);
        let d = naive_delta(&game, &JointPolicy::reduced(&[0.0, 0.0]).unwrap(), 1.0).unwrap();
        assert_eq!(d.flat(), vec![-1.0, -1.0]);

        // g = 2
        let game = PayoffTensor::two_action(1.0, -1.0).unwrap();
        let d = naive_delta(&game, &JointPolicy::reduced(&[1.0, 1.0]).unwrap(), 1.0).unwrap();
        assert_eq!(d.flat(), vec![2.0, 2.0]);
    }

    #[test]
    fn three_action_gradient_at_uniform() {
        let game = PayoffTensor::three_action(0.0).unwrap();
        let u = vec![1.0 / 3.0; 3];
        let p = JointPolicy::simplex(vec![u.clone(), u]).unwrap();
        let d = naive_delta(&game, &p, 1.0).unwrap();
        let expected = [10.0 / 3.0, 2.0 / 3.0, 10.0 / 3.0];
        for (a, b) in d.deltas[0].iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scales_with_eta() {
        let game = PayoffTensor::two_action(2.0, -1.0).unwrap();
        let p = JointPolicy::reduced(&[0.2, 0.9]).unwrap();
        let a = naive_delta(&game, &p, 1.0).unwrap().flat();
        let b = naive_delta(&game, &p, 0.25).unwrap().flat();
        for (x, y) in a.iter().zip(b) {
            assert!((x * 0.25 - y).abs() < 1e-15);
        }
    }
}
