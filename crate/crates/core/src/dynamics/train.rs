use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::game::{GameError, JointPolicy, PayoffTensor, PolicyMode};
use crate::learners::UpdateRule;

use super::DynamicsError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Learning rate `λ`; each step applies `λ Δθ / η`.
    pub lr: f64,
    pub max_iter: usize,
    /// Stop once no parameter moves by `tol` or more in one step.
    pub tol: f64,
    /// Distance from a pure profile still counted as that profile.
    pub outcome_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            max_iter: 200_000,
            tol: 1e-8,
            outcome_tol: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    GlobalEquilibrium,
    LocalEquilibrium,
    Miscoordination,
    Other,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::GlobalEquilibrium,
        Outcome::LocalEquilibrium,
        Outcome::Miscoordination,
        Outcome::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::GlobalEquilibrium => "global-equilibrium",
            Outcome::LocalEquilibrium => "local-equilibrium",
            Outcome::Miscoordination => "miscoordination",
            Outcome::Other => "other",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown outcome `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRun {
    pub initial: JointPolicy,
    pub final_policy: JointPolicy,
    pub iterations: usize,
    pub converged: bool,
    pub outcome: Outcome,
    pub final_value: f64,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    let mut p: Vec<f64> = v.iter().map(|x| (x - tau).max(0.0)).collect();
    // absorb rounding so the block sums to one
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|x| *x /= s);
    }
    p
}

/// One constrained step of agent block `theta` along `update`.
fn apply(mode: PolicyMode, theta: &[f64], update: &[f64]) -> Vec<f64> {
    match mode {
        PolicyMode::Reduced => theta
            .iter()
            .zip(update)
            .map(|(t, u)| (t + u).clamp(0.0, 1.0))
            .collect(),
        PolicyMode::Simplex => {
            let mean = update.iter().sum::<f64>() / update.len() as f64;
            let moved: Vec<f64> = theta
                .iter()
                .zip(update)
                .map(|(t, u)| t + (u - mean))
                .collect();
            project_simplex(&moved)
        }
    }
}

/// Repeats delta, scaled update and projection until the policy stops
/// moving or `max_iter` is reached.
pub fn train(
    rule: &dyn UpdateRule,
    game: &PayoffTensor,
    theta0: &JointPolicy,
    cfg: &TrainConfig,
) -> Result<TrainRun, DynamicsError> {
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(DynamicsError::InvalidArgument(format!(
            "learning rate must be positive, got {}",
            cfg.lr
        )));
    }
    theta0.check_against(game)?;
    let mode = theta0.mode();
    let scale = cfg.lr / rule.eta();
    let mut policy = theta0.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let step = rule
            .delta(game, &policy)
            .map_err(|e| DynamicsError::Diverged {
                iteration: iterations,
                reason: e.to_string(),
            })?;
        let mut moved = 0.0f64;
        let blocks: Vec<Vec<f64>> = policy
            .blocks()
            .iter()
            .zip(&step.deltas)
            .map(|(theta, delta)| {
                let update: Vec<f64> = delta.iter().map(|d| d * scale).collect();
                let next = apply(mode, theta, &update);
                for (a, b) in next.iter().zip(theta) {
                    moved = moved.max((a - b).abs());
                }
                next
            })
            .collect();
        if !moved.is_finite() {
            return Err(DynamicsError::Diverged {
                iteration: iterations,
                reason: "non-finite parameters".into(),
            });
        }
        policy = JointPolicy::new(mode, blocks)?;
        if moved < cfg.tol {
            converged = true;
            break;
        }
    }
    let (outcome, final_value) = if converged {
        classify_outcome(game, &policy, cfg.outcome_tol)?
    } else {
        (Outcome::Other, game.value(&policy)?)
    };
    Ok(TrainRun {
        initial: theta0.clone(),
        final_policy: policy,
        iterations,
        converged,
        outcome,
        final_value,
    })
}

/// Maps a policy to the pure profile it sits on (each agent's largest
/// probability above `1 − tol`) and that profile's class, plus the exact
/// common value of the policy.
pub fn classify_outcome(
    game: &PayoffTensor,
    policy: &JointPolicy,
    tol: f64,
) -> Result<(Outcome, f64), GameError> {
    let value = game.value(policy)?;
    let mut joint = Vec::with_capacity(policy.agents());
    for i in 0..policy.agents() {
        let probs = policy.probs(i);
        let (action, p) = probs
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty block");
        if p <= 1.0 - tol {
            return Ok((Outcome::Other, value));
        }
        joint.push(action);
    }
    let payoff = game.entry(&joint);
    let outcome = if payoff == game.max_entry() {
        Outcome::GlobalEquilibrium
    } else if game.is_pure_nash(&joint) {
        Outcome::LocalEquilibrium
    } else {
        Outcome::Miscoordination
    };
    Ok((outcome, value))
}
