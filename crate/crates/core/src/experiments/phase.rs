use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    classify, fixed_point, planar_rate, train, FixedPoint, FixedPointClass, Outcome, TrainConfig,
};
use crate::game::{CoordinationGame, JointPolicy, PayoffTensor};
use crate::learners::UpdateRule;

use super::ExperimentError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldSample {
    pub theta1: f64,
    pub theta2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
}

fn two_by_two(game: &CoordinationGame) -> Result<PayoffTensor, ExperimentError> {
    let tensor = game.tensor()?;
    if tensor.shape() != [2, 2] {
        return Err(ExperimentError::Config(
            "phase and basin data need the two-action game".into(),
        ));
    }
    Ok(tensor)
}

fn axis(resolution: usize, lo: f64, hi: f64) -> Vec<f64> {
    let last = (resolution - 1) as f64;
    (0..resolution)
        .map(|i| {
            if i + 1 == resolution {
                hi
            } else {
                lo + (hi - lo) * i as f64 / last
            }
        })
        .collect()
}

/// Per-unit-time rates on a `resolution × resolution` grid over
/// `[lo, hi]²`, `θ1` varying slowest.
pub fn phase_field(
    rule: &dyn UpdateRule,
    game: &CoordinationGame,
    resolution: usize,
    lo: f64,
    hi: f64,
) -> Result<Vec<FieldSample>, ExperimentError> {
    if resolution < 2 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(ExperimentError::Config(format!(
            "need resolution >= 2 and a finite box lo < hi, got {resolution} over [{lo}, {hi}]"
        )));
    }
    let tensor = two_by_two(game)?;
    let xs = axis(resolution, lo, hi);
    let mut out = Vec::with_capacity(resolution * resolution);
    for &t1 in &xs {
        for &t2 in &xs {
            let [d1, d2] = planar_rate(rule, &tensor, [t1, t2])?;
            out.push(FieldSample {
                theta1: t1,
                theta2: t2,
                dtheta1: d1,
                dtheta2: d2,
            });
        }
    }
    Ok(out)
}

/// Why a basin start is left out of the statistics. All of these sets have
/// measure zero; runs from them stall at a stationary point by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    /// The interior fixed point.
    FixedPoint,
    /// On the stable line of the interior saddle.
    StableManifold,
    /// A non-vertex boundary point where the clipped field vanishes.
    BoundaryRest,
}

impl Exclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Exclusion::FixedPoint => "fixed-point",
            Exclusion::StableManifold => "stable-manifold",
            Exclusion::BoundaryRest => "boundary-rest",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasinPoint {
    pub theta1: f64,
    pub theta2: f64,
    pub outcome: Outcome,
    pub final_value: f64,
    pub iterations: usize,
    pub excluded: Option<Exclusion>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasinMap {
    pub resolution: usize,
    /// Row-major, `θ1` varying slowest.
    pub points: Vec<BasinPoint>,
}

impl BasinMap {
    pub fn at(&self, i: usize, j: usize) -> &BasinPoint {
        &self.points[i * self.resolution + j]
    }

    pub fn counted(&self) -> impl Iterator<Item = &BasinPoint> {
        self.points.iter().filter(|p| p.excluded.is_none())
    }

    pub fn excluded_count(&self) -> usize {
        self.points.len() - self.counted().count()
    }

    pub fn fraction(&self, outcome: Outcome) -> f64 {
        let n = self.counted().count();
        if n == 0 {
            return 0.0;
        }
        self.counted().filter(|p| p.outcome == outcome).count() as f64 / n as f64
    }

    pub fn miscoordination_fraction(&self) -> f64 {
        self.fraction(Outcome::Miscoordination)
    }
}

const MANIFOLD_TOL: f64 = 1e-12;
const REST_TOL: f64 = 1e-9;

fn is_vertex(theta: [f64; 2]) -> bool {
    theta.iter().all(|&x| x == 0.0 || x == 1.0)
}

/// Field with components pushing out of the unit square removed.
fn clipped(theta: [f64; 2], rate: [f64; 2]) -> [f64; 2] {
    let mut r = rate;
    for c in 0..2 {
        if (theta[c] == 0.0 && r[c] < 0.0) || (theta[c] == 1.0 && r[c] > 0.0) {
            r[c] = 0.0;
        }
    }
    r
}

struct Exclusions {
    /// Unit left eigenvector of the unstable mode and the saddle point.
    saddle: Option<([f64; 2], [f64; 2])>,
    rest_tol: f64,
}

impl Exclusions {
    fn new(rule: &dyn UpdateRule, game: &CoordinationGame) -> Self {
        let g = game.regret();
        let saddle = rule.closed_form(g).and_then(|dynamics| {
            let report = classify(&dynamics);
            match (report.class, fixed_point(&dynamics), report.eigenvalues) {
                (
                    FixedPointClass::Saddle,
                    FixedPoint::Unique(p),
                    crate::dynamics::Eigenvalues::Real(hi, _),
                ) => Some((dynamics.left_eigenvector(hi), p)),
                _ => None,
            }
        });
        let scale = game.best_payoff().abs().max(g).max(1.0);
        Self {
            saddle,
            rest_tol: REST_TOL * scale,
        }
    }

    fn check(
        &self,
        rule: &dyn UpdateRule,
        tensor: &PayoffTensor,
        theta: [f64; 2],
    ) -> Result<Option<Exclusion>, ExperimentError> {
        if let Some((w, p)) = self.saddle {
            let along = w[0] * (theta[0] - p[0]) + w[1] * (theta[1] - p[1]);
            if along.abs() <= MANIFOLD_TOL {
                return Ok(Some(if theta == p {
                    Exclusion::FixedPoint
                } else {
                    Exclusion::StableManifold
                }));
            }
        }
        if is_vertex(theta) {
            return Ok(None);
        }
        let r = clipped(theta, planar_rate(rule, tensor, theta)?);
        if r.iter().all(|x| x.abs() <= self.rest_tol) {
            let interior = theta.iter().all(|&x| x > 0.0 && x < 1.0);
            return Ok(Some(if interior {
                Exclusion::FixedPoint
            } else {
                Exclusion::BoundaryRest
            }));
        }
        Ok(None)
    }
}

/// Trains from every point of a `resolution × resolution` grid over the
/// unit square and records the outcome. Starts on the measure-zero set
/// that stalls at a stationary point are flagged and left out of the
/// fractions.
pub fn basin_map(
    rule: &dyn UpdateRule,
    game: &CoordinationGame,
    cfg: &TrainConfig,
    resolution: usize,
) -> Result<BasinMap, ExperimentError> {
    if resolution < 2 {
        return Err(ExperimentError::Config(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    let tensor = two_by_two(game)?;
    let exclusions = Exclusions::new(rule, game);
    let xs = axis(resolution, 0.0, 1.0);
    let starts: Vec<[f64; 2]> = xs
        .iter()
        .flat_map(|&a| xs.iter().map(move |&b| [a, b]))
        .collect();
    let points = starts
        .par_iter()
        .map(|&theta| {
            let excluded = exclusions.check(rule, &tensor, theta)?;
            let run = train(rule, &tensor, &JointPolicy::reduced(&theta)?, cfg)?;
            Ok(BasinPoint {
                theta1: theta[0],
                theta2: theta[1],
                outcome: run.outcome,
                final_value: run.final_value,
                iterations: run.iterations,
                excluded,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(BasinMap { resolution, points })
}
