use crate::diff::{Num, Scalar, Tag};
use crate::game::{JointPolicy, PayoffTensor, PolicyMode};

use super::LearnerError;

pub(crate) type Blocks = Vec<Vec<Num>>;

/// The common value as a differentiable function of parameter blocks.
pub(crate) struct ValueField<'a> {
    game: &'a PayoffTensor,
    mode: PolicyMode,
}

impl<'a> ValueField<'a> {
    pub fn new(game: &'a PayoffTensor, policy: &JointPolicy) -> Result<Self, LearnerError> {
        policy.check_against(game)?;
        Ok(Self {
            game,
            mode: policy.mode(),
        })
    }

    pub fn agents(&self) -> usize {
        self.game.agents()
    }

    pub fn value(&self, blocks: &[Vec<Num>]) -> Num {
        self.game
            .value_of(self.mode, blocks)
            .expect("shape checked at construction")
    }

    /// `∂f/∂θ_agent` with one fresh scope per coordinate. Perturbations of
    /// enclosing scopes carried by `blocks` flow into the result.
    pub fn partial<F>(&self, blocks: &[Vec<Num>], agent: usize, f: F) -> Vec<Num>
    where
        F: Fn(&[Vec<Num>]) -> Num,
    {
        let mut point = blocks.to_vec();
        (0..blocks[agent].len())
            .map(|c| {
                let tag = Tag::fresh();
                point[agent][c] = Num::seed(blocks[agent][c].clone(), tag);
                let d = f(&point).tangent(tag);
                point[agent][c] = blocks[agent][c].clone();
                d
            })
            .collect()
    }

    /// `η ∇_{θ_agent} V`.
    pub fn step(&self, blocks: &[Vec<Num>], agent: usize, eta: f64) -> Vec<Num> {
        scaled(self.partial(blocks, agent, |b| self.value(b)), eta)
    }
}

pub(crate) fn lift(policy: &JointPolicy) -> Blocks {
    policy
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&x| Num::Real(x)).collect())
        .collect()
}

pub(crate) fn shifted(base: &[Num], delta: &[Num]) -> Vec<Num> {
    base.iter()
        .zip(delta)
        .map(|(a, d)| a.clone() + d.clone())
        .collect()
}

pub(crate) fn scaled(v: Vec<Num>, c: f64) -> Vec<Num> {
    v.iter().map(|x| x.scale(c)).collect()
}

pub(crate) fn reals(v: &[Num]) -> Vec<f64> {
    v.iter().map(Num::value).collect()
}
