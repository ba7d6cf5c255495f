use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::game::{CoordinationGame, JointPolicy};
use crate::learners::UpdateRule;

use super::DynamicsError;

/// Unconstrained planar system `dθ/dt = Aθ − b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearDynamics {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl LinearDynamics {
    pub fn new(a: [[f64; 2]; 2], b: [f64; 2]) -> Self {
        Self { a, b }
    }

    pub fn rate(&self, theta: [f64; 2]) -> [f64; 2] {
        let a = &self.a;
        [
            a[0][0] * theta[0] + a[0][1] * theta[1] - self.b[0],
            a[1][0] * theta[0] + a[1][1] * theta[1] - self.b[1],
        ]
    }

    pub fn trace(&self) -> f64 {
        self.a[0][0] + self.a[1][1]
    }

    pub fn det(&self) -> f64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    fn scale(&self) -> f64 {
        self.a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Eigenvalues of `A`, real ones in descending order.
    pub fn eigenvalues(&self) -> Eigenvalues {
        let half_trace = 0.5 * self.trace();
        let half_gap = 0.5 * (self.a[0][0] - self.a[1][1]);
        // discriminant written to avoid cancellation for symmetric A
        let disc = half_gap * half_gap + self.a[0][1] * self.a[1][0];
        if disc >= 0.0 {
            let r = disc.sqrt();
            Eigenvalues::Real(half_trace + r, half_trace - r)
        } else {
            Eigenvalues::Complex {
                re: half_trace,
                im: (-disc).sqrt(),
            }
        }
    }

    /// Left eigenvector (row `w` with `wA = λw`) of a real eigenvalue, unit norm.
    pub fn left_eigenvector(&self, lambda: f64) -> [f64; 2] {
        // null vector of (Aᵀ − λI)
        let m = [
            [self.a[0][0] - lambda, self.a[1][0]],
            [self.a[0][1], self.a[1][1] - lambda],
        ];
        let c1 = [-m[0][1], m[0][0]];
        let c2 = [m[1][1], -m[1][0]];
        let n1 = c1[0].hypot(c1[1]);
        let n2 = c2[0].hypot(c2[1]);
        let (v, n) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
        if n == 0.0 {
            [1.0, 0.0]
        } else {
            [v[0] / n, v[1] / n]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Eigenvalues {
    Real(f64, f64),
    Complex { re: f64, im: f64 },
}

impl fmt::Display for Eigenvalues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Eigenvalues::Real(a, b) => write!(f, "{a:.6}, {b:.6}"),
            Eigenvalues::Complex { re, im } => write!(f, "{re:.6} ± {im:.6}i"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointClass {
    Saddle,
    Source,
    Sink,
    UnstableLine,
    StableLine,
    Center,
    SpiralSource,
    SpiralSink,
    Degenerate,
}

impl FixedPointClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedPointClass::Saddle => "saddle",
            FixedPointClass::Source => "source",
            FixedPointClass::Sink => "sink",
            FixedPointClass::UnstableLine => "unstable-line",
            FixedPointClass::StableLine => "stable-line",
            FixedPointClass::Center => "center",
            FixedPointClass::SpiralSource => "spiral-source",
            FixedPointClass::SpiralSink => "spiral-sink",
            FixedPointClass::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for FixedPointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where `Aθ = b` is solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FixedPoint {
    Unique([f64; 2]),
    /// `A` is singular: a line of fixed points or none.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointReport {
    pub location: FixedPoint,
    pub eigenvalues: Eigenvalues,
    pub class: FixedPointClass,
}

const ZERO_TOL: f64 = 1e-12;

pub fn fixed_point(dynamics: &LinearDynamics) -> FixedPoint {
    let det = dynamics.det();
    let scale = dynamics.scale();
    if det.abs() <= ZERO_TOL * scale * scale || scale == 0.0 {
        return FixedPoint::Degenerate;
    }
    let a = &dynamics.a;
    let b = &dynamics.b;
    FixedPoint::Unique([
        (a[1][1] * b[0] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

/// Planar classification from the eigenvalues of `A`. Eigenvalues within
/// `1e-12` of the matrix scale count as zero.
pub fn classify(dynamics: &LinearDynamics) -> FixedPointReport {
    let eigenvalues = dynamics.eigenvalues();
    let tol = ZERO_TOL * dynamics.scale().max(f64::MIN_POSITIVE);
    let sign = |x: f64| {
        if x.abs() <= tol {
            0
        } else if x > 0.0 {
            1
        } else {
            -1
        }
    };
    let class = match eigenvalues {
        Eigenvalues::Real(hi, lo) => match (sign(hi), sign(lo)) {
            (1, -1) => FixedPointClass::Saddle,
            (1, 1) => FixedPointClass::Source,
            (-1, -1) => FixedPointClass::Sink,
            (1, 0) => FixedPointClass::UnstableLine,
            (0, -1) => FixedPointClass::StableLine,
            _ => FixedPointClass::Degenerate,
        },
        Eigenvalues::Complex { re, .. } => match sign(re) {
            1 => FixedPointClass::SpiralSource,
            -1 => FixedPointClass::SpiralSink,
            _ => FixedPointClass::Center,
        },
    };
    FixedPointReport {
        location: fixed_point(dynamics),
        eigenvalues,
        class,
    }
}

/// `(A, b)` of a rule on the two-action game with regret `g`.
pub fn closed_form_dynamics(
    rule: &dyn UpdateRule,
    g: f64,
) -> Result<LinearDynamics, DynamicsError> {
    if !(g.is_finite() && g > 0.0) {
        return Err(DynamicsError::InvalidArgument(format!(
            "regret must be positive, got {g}"
        )));
    }
    rule.closed_form(g)
        .ok_or_else(|| DynamicsError::NoClosedForm(rule.name().to_string()))
}

/// Largest deviation between a rule's rates and its closed form over
/// `samples` uniform points of the unit square.
pub fn verify_dynamics<R: Rng + ?Sized>(
    rule: &dyn UpdateRule,
    game: &CoordinationGame,
    samples: usize,
    rng: &mut R,
) -> Result<f64, DynamicsError> {
    let CoordinationGame::TwoAction { .. } = game else {
        return Err(DynamicsError::InvalidArgument(
            "closed forms exist only for the two-action game".into(),
        ));
    };
    let dynamics = closed_form_dynamics(rule, game.regret())?;
    let tensor = game.tensor()?;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let theta = [rng.random::<f64>(), rng.random::<f64>()];
        let rates = rule.rates(&tensor, &JointPolicy::reduced(&theta)?)?;
        let expected = dynamics.rate(theta);
        for (r, e) in rates.iter().zip(expected) {
            worst = worst.max((r[0] - e).abs());
        }
    }
    Ok(worst)
}
