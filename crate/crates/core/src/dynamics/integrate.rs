use serde::Serialize;

use crate::game::{JointPolicy, PayoffTensor, PolicyMode};
use crate::learners::UpdateRule;

use super::DynamicsError;

pub const DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 50.0;
const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Set when `|θ|` exceeded `1e6` and integration stopped early.
    pub diverged: bool,
}

impl Trajectory {
    pub fn last(&self) -> [f64; 2] {
        let p = self
            .points
            .last()
            .expect("trajectory holds the start point");
        [p.theta1, p.theta2]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PhaseOptions {
    pub step: f64,
    pub horizon: f64,
    /// Clip to the unit square after every step.
    pub constrained: bool,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            horizon: DEFAULT_HORIZON,
            constrained: false,
        }
    }
}

/// Per-unit-time rate of a two-agent reduced-mode rule, defined on the whole
/// plane.
pub fn planar_rate(
    rule: &dyn UpdateRule,
    game: &PayoffTensor,
    theta: [f64; 2],
) -> Result<[f64; 2], DynamicsError> {
    let policy = JointPolicy::extended(PolicyMode::Reduced, vec![vec![theta[0]], vec![theta[1]]])?;
    let r = rule.rates(game, &policy)?;
    Ok([r[0][0], r[1][0]])
}

/// Classical fourth-order Runge–Kutta on `dθ/dt = rate(θ)` with a fixed step.
pub fn integrate_phase(
    rule: &dyn UpdateRule,
    game: &PayoffTensor,
    theta0: [f64; 2],
    opts: &PhaseOptions,
) -> Result<Trajectory, DynamicsError> {
    if game.shape() != [2, 2] {
        return Err(DynamicsError::InvalidArgument(
            "phase integration needs a two-agent two-action game".into(),
        ));
    }
    if !(opts.step > 0.0 && opts.step.is_finite()) || opts.horizon.is_nan() || opts.horizon < 0.0 {
        return Err(DynamicsError::InvalidArgument(format!(
            "step must be positive and horizon non-negative, got {} and {}",
            opts.step, opts.horizon
        )));
    }
    let steps = (opts.horizon / opts.step).round() as usize;
    let f = |th: [f64; 2]| planar_rate(rule, game, th);
    let axpy = |th: [f64; 2], h: f64, k: [f64; 2]| [th[0] + h * k[0], th[1] + h * k[1]];

    let mut theta = theta0;
    let mut points = Vec::with_capacity(steps + 1);
    points.push(TrajectoryPoint {
        t: 0.0,
        theta1: theta[0],
        theta2: theta[1],
    });
    let h = opts.step;
    for n in 1..=steps {
        let k1 = f(theta)?;
        let k2 = f(axpy(theta, h / 2.0, k1))?;
        let k3 = f(axpy(theta, h / 2.0, k2))?;
        let k4 = f(axpy(theta, h, k3))?;
        for c in 0..2 {
            theta[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            if opts.constrained {
                theta[c] = theta[c].clamp(0.0, 1.0);
            }
        }
        if !theta
            .iter()
            .all(|x| x.is_finite() && x.abs() <= DIVERGENCE_BOUND)
        {
            return Ok(Trajectory {
                points,
                diverged: true,
            });
        }
        points.push(TrajectoryPoint {
            t: n as f64 * h,
            theta1: theta[0],
            theta2: theta[1],
        });
    }
    Ok(Trajectory {
        points,
        diverged: false,
    })
}
