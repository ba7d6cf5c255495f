//! Hierarchical learning anticipation.
//!
//! Agents occupy hierarchy levels. A leader anticipates the followers below
//! it, knowing exactly how they reason, and differentiates through their
//! anticipated steps. A follower takes the planned parameters `θ̄` of the
//! leaders above it as given constants.
//!
//! For `n` agents, with agents renamed so that level `i` holds agent `i`:
//!
//! ```text
//! for i = n down to 1:
//!     Δθ_j = η ∂_{θ_j} V(θ_1+Δθ_1, …, θ_{j−1}+Δθ_{j−1}, θ_j, …, θ_i, θ̄_{i+1}, …, θ̄_n)
//!            computed for j = i, recursively through j' < j
//!     θ̄_i = θ_i + Δθ_i
//! ```
//!
//! The predecessor deltas `Δθ_1..Δθ_{j−1}` depend on `θ_j` and are
//! differentiated through; the planned `θ̄` of higher levels are constants.
//! Indices `j+1..i` use live parameters because their plans do not exist
//! yet at that point of the sweep.

use crate::diff::{stop_gradient, Num};
use crate::dynamics::LinearDynamics;
use crate::game::{JointPolicy, PayoffTensor};

use super::field::{lift, reals, scaled, shifted, Blocks, ValueField};
use super::{check_eta, LearnerError, StepResult, UpdateRule};

#[derive(Clone, Debug)]
pub struct Hla {
    eta: f64,
    hierarchy: Option<Vec<usize>>,
}

impl Hla {
    /// `hierarchy` lists agents from the lowest level to the highest;
    /// `None` uses agent order (the last agent leads).
    pub fn new(eta: f64, hierarchy: Option<Vec<usize>>) -> Result<Self, LearnerError> {
        let eta = check_eta(eta)?;
        if let Some(h) = &hierarchy {
            check_permutation(h, h.len())?;
        }
        Ok(Self { eta, hierarchy })
    }

    pub fn hierarchy(&self) -> Option<&[usize]> {
        self.hierarchy.as_deref()
    }

    fn order(&self, agents: usize) -> Result<Vec<usize>, LearnerError> {
        match &self.hierarchy {
            Some(h) => {
                check_permutation(h, agents)?;
                Ok(h.clone())
            }
            None => Ok((0..agents).collect()),
        }
    }
}

fn check_permutation(h: &[usize], agents: usize) -> Result<(), LearnerError> {
    let mut seen = vec![false; agents];
    let ok = h.len() == agents
        && h.iter()
            .all(|&a| a < agents && !std::mem::replace(&mut seen[a], true));
    if ok {
        Ok(())
    } else {
        Err(LearnerError::InvalidHierarchy {
            hierarchy: h.to_vec(),
            agents,
        })
    }
}

/// Closed-form leader/follower update for two agents: the leader steps like
/// a first-order LOLA agent against a naive follower, the follower takes a
/// naive step against the leader's planned parameters.
pub fn hla_two_agent_delta(
    game: &PayoffTensor,
    policy: &JointPolicy,
    eta: f64,
    leader: usize,
) -> Result<StepResult, LearnerError> {
    let eta = check_eta(eta)?;
    let field = ValueField::new(game, policy)?;
    if field.agents() != 2 {
        return Err(LearnerError::TwoAgentsOnly {
            rule: "hla",
            agents: field.agents(),
        });
    }
    if leader > 1 {
        return Err(LearnerError::InvalidHierarchy {
            hierarchy: vec![leader],
            agents: 2,
        });
    }
    let follower = 1 - leader;
    let blocks = lift(policy);

    let leader_delta = scaled(
        field.partial(&blocks, leader, |b| {
            let anticipated = field.step(b, follower, eta);
            let mut ahead = b.to_vec();
            ahead[follower] = shifted(&b[follower], &anticipated);
            field.value(&ahead)
        }),
        eta,
    );
    let planned: Vec<Num> = shifted(&blocks[leader], &leader_delta)
        .iter()
        .map(stop_gradient)
        .collect();
    let follower_delta = scaled(
        field.partial(&blocks, follower, |b| {
            let mut plan = b.to_vec();
            plan[leader] = planned.clone();
            field.value(&plan)
        }),
        eta,
    );

    let mut deltas = vec![Vec::new(), Vec::new()];
    deltas[leader] = reals(&leader_delta);
    deltas[follower] = reals(&follower_delta);
    StepResult::new(deltas)
}

struct Sweep<'a> {
    field: &'a ValueField<'a>,
    eta: f64,
    /// level -> agent
    order: &'a [usize],
    /// Planned parameters per level, set for levels above `top`.
    planned: Vec<Option<Vec<Num>>>,
    top: usize,
}

impl Sweep<'_> {
    /// Value with arguments given in level order.
    fn value(&self, by_level: Blocks) -> Num {
        let mut by_agent = vec![Vec::new(); by_level.len()];
        for (level, block) in by_level.into_iter().enumerate() {
            by_agent[self.order[level]] = block;
        }
        self.field.value(&by_agent)
    }

    /// `Δθ_j` for the current outer level, as a function of the live
    /// parameters in `theta` (level order).
    fn delta(&self, theta: &[Vec<Num>], j: usize) -> Vec<Num> {
        let grad = self.field.partial(theta, j, |th| {
            let mut args: Blocks = Vec::with_capacity(th.len());
            for k in 0..j {
                let dk = self.delta(th, k);
                args.push(shifted(&th[k], &dk));
            }
            args.extend(th[j..=self.top].iter().cloned());
            for plan in &self.planned[self.top + 1..] {
                args.push(plan.clone().expect("higher levels are planned first"));
            }
            self.value(args)
        });
        scaled(grad, self.eta)
    }
}

/// General `n`-agent HLA step for the given hierarchy (agents from the
/// lowest level to the highest).
pub fn hla_delta(
    game: &PayoffTensor,
    policy: &JointPolicy,
    eta: f64,
    hierarchy: &[usize],
) -> Result<StepResult, LearnerError> {
    let eta = check_eta(eta)?;
    let field = ValueField::new(game, policy)?;
    let n = field.agents();
    check_permutation(hierarchy, n)?;

    let by_agent = lift(policy);
    let theta: Blocks = hierarchy.iter().map(|&a| by_agent[a].clone()).collect();
    let mut sweep = Sweep {
        field: &field,
        eta,
        order: hierarchy,
        planned: vec![None; n],
        top: n - 1,
    };
    let mut deltas = vec![Vec::new(); n];
    for level in (0..n).rev() {
        sweep.top = level;
        let d = sweep.delta(&theta, level);
        let plan = shifted(&theta[level], &d)
            .iter()
            .map(stop_gradient)
            .collect();
        sweep.planned[level] = Some(plan);
        deltas[hierarchy[level]] = reals(&d);
    }
    StepResult::new(deltas)
}

impl UpdateRule for Hla {
    fn name(&self) -> &'static str {
        "hla"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn delta(&self, game: &PayoffTensor, policy: &JointPolicy) -> Result<StepResult, LearnerError> {
        let order = self.order(policy.agents())?;
        hla_delta(game, policy, self.eta, &order)
    }

    /// Follower rows come from a naive step against the leader's plan; the
    /// offset is the one that vanishes at `(1/2, 1/2)`.
    fn closed_form(&self, g: f64) -> Option<LinearDynamics> {
        let leader_second = match self.hierarchy.as_deref() {
            None | Some([0, 1]) => true,
            Some([1, 0]) => false,
            Some(_) => return None,
        };
        let eta = self.eta;
        let follower_row = [4.0 * eta * g * g, 2.0 * g + 16.0 * eta * eta * g.powi(3)];
        let follower_b = 8.0 * eta * eta * g.powi(3) + 2.0 * eta * g * g + g;
        let leader_row = [2.0 * g, 8.0 * eta * g * g];
        let leader_b = 4.0 * eta * g * g + g;
        Some(if leader_second {
            LinearDynamics::new([follower_row, leader_row], [follower_b, leader_b])
        } else {
            LinearDynamics::new(
                [
                    [leader_row[1], leader_row[0]],
                    [follower_row[1], follower_row[0]],
                ],
                [leader_b, follower_b],
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(g: f64) -> PayoffTensor {
        PayoffTensor::two_action(g / 2.0, -g / 2.0).unwrap()
    }

    #[test]
    fn two_agent_fixed_point() {
        let p = JointPolicy::reduced(&[0.5, 0.5]).unwrap();
        for leader in [0, 1] {
            let d = hla_two_agent_delta(&two(2.3), &p, 0.7, leader)
                .unwrap()
                .flat();
            assert!(d.iter().all(|x| x.abs() < 1e-12), "{d:?}");
        }
        let d = hla_delta(&two(2.3), &p, 0.7, &[0, 1]).unwrap().flat();
        assert!(d.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn sweep_matches_two_agent_form() {
        let game = PayoffTensor::three_action(-12.0).unwrap();
        let p = JointPolicy::simplex(vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.1, 0.3]]).unwrap();
        for (hierarchy, leader) in [([0, 1], 1), ([1, 0], 0)] {
            let a = hla_delta(&game, &p, 0.1, &hierarchy).unwrap().flat();
            let b = hla_two_agent_delta(&game, &p, 0.1, leader).unwrap().flat();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_hierarchies() {
        let game = two(1.0);
        let p = JointPolicy::reduced(&[0.3, 0.4]).unwrap();
        assert!(hla_delta(&game, &p, 1.0, &[0, 0]).is_err());
        assert!(hla_delta(&game, &p, 1.0, &[0, 1, 2]).is_err());
        assert!(hla_two_agent_delta(&game, &p, 1.0, 2).is_err());
        let rule = Hla::new(1.0, Some(vec![2, 0, 1])).unwrap();
        assert!(matches!(
            rule.delta(&game, &p),
            Err(LearnerError::InvalidHierarchy { .. })
        ));
    }

    #[test]
    fn leader_matches_lola_row() {
        // The leader's own row is the LOLA row; the follower differs.
        let game = two(1.5);
        let p = JointPolicy::reduced(&[0.3, 0.8]).unwrap();
        let hla = hla_two_agent_delta(&game, &p, 0.4, 1).unwrap();
        let lola = super::super::lola_delta(&game, &p, 0.4).unwrap();
        assert!((hla.deltas[1][0] - lola.deltas[1][0]).abs() < 1e-12);
        assert!((hla.deltas[0][0] - lola.deltas[0][0]).abs() > 1e-3);
    }
}
