use crate::dynamics::{classify, closed_form_dynamics, Eigenvalues, FixedPointClass};
use crate::learners::{RuleParams, RuleRegistry};

use super::ExperimentError;

/// What the stability analysis predicts for one `(rule, η, g)` cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub class: FixedPointClass,
    /// Predicted eigenvalues, larger first.
    pub eigenvalues: (f64, f64),
}

/// Relative width of the band around a threshold treated as "on" it.
const THRESHOLD_BAND: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-9;

/// Predicted class and eigenvalues for the built-in rules; `None` for rules
/// without a two-action analysis.
pub fn predicted(rule: &str, eta: f64, g: f64) -> Option<Prediction> {
    let side = |threshold: f64| {
        if (g - threshold).abs() <= THRESHOLD_BAND * threshold {
            FixedPointClass::UnstableLine
        } else if g < threshold {
            FixedPointClass::Saddle
        } else {
            FixedPointClass::Source
        }
    };
    let (class, centre, half_gap) = match rule {
        "naive" => (FixedPointClass::Saddle, 0.0, 2.0 * g),
        "la" => (side(1.0 / (2.0 * eta)), 4.0 * eta * g * g, 2.0 * g),
        "lola" => (side(1.0 / (4.0 * eta)), 8.0 * eta * g * g, 2.0 * g),
        "hla" => (
            FixedPointClass::Saddle,
            6.0 * eta * g * g,
            2.0 * g * (9.0 * eta * eta * g * g + 1.0).sqrt(),
        ),
        _ => return None,
    };
    Some(Prediction {
        class,
        eigenvalues: (centre + half_gap, centre - half_gap),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremRow {
    pub rule: String,
    pub eta: f64,
    pub g: f64,
    pub eigenvalues: Eigenvalues,
    pub class: FixedPointClass,
    pub expected: FixedPointClass,
    /// Class matches and eigenvalues agree with the predicted ones to `1e-9`.
    pub consistent: bool,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EIGEN_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Classifies every built-in rule on every `(η, g)` pair.
pub fn theorem_grid(etas: &[f64], regrets: &[f64]) -> Result<Vec<TheoremRow>, ExperimentError> {
    let registry = RuleRegistry::builtin();
    let mut rows = Vec::with_capacity(4 * etas.len() * regrets.len());
    for rule_name in ["naive", "la", "lola", "hla"] {
        for &eta in etas {
            let rule = registry.build(rule_name, &RuleParams::with_eta(eta))?;
            for &g in regrets {
                let report = classify(&closed_form_dynamics(rule.as_ref(), g)?);
                let prediction = predicted(rule_name, eta, g).expect("built-in rule");
                let eigen_ok = match report.eigenvalues {
                    Eigenvalues::Real(hi, lo) => {
                        close(hi, prediction.eigenvalues.0) && close(lo, prediction.eigenvalues.1)
                    }
                    Eigenvalues::Complex { .. } => false,
                };
                rows.push(TheoremRow {
                    rule: rule_name.to_string(),
                    eta,
                    g,
                    eigenvalues: report.eigenvalues,
                    class: report.class,
                    expected: prediction.class,
                    consistent: eigen_ok && report.class == prediction.class,
                });
            }
        }
    }
    Ok(rows)
}

pub fn default_theorem_etas() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0]
}

/// Regrets straddling every LA and LOLA threshold of the default η grid,
/// plus the thresholds themselves.
pub fn default_theorem_regrets() -> Vec<f64> {
    let mut gs = vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.6, 0.75, 1.5, 3.0, 5.0, 10.0];
    for eta in default_theorem_etas() {
        for threshold in [1.0 / (2.0 * eta), 1.0 / (4.0 * eta)] {
            for d in [-1e-3, 0.0, 1e-3] {
                gs.push(threshold + d);
            }
        }
    }
    gs.sort_by(f64::total_cmp);
    gs.dedup();
    gs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row<'a>(rows: &'a [TheoremRow], rule: &str, eta: f64, g: f64) -> &'a TheoremRow {
        rows.iter()
            .find(|r| r.rule == rule && r.eta == eta && r.g == g)
            .unwrap()
    }

    #[test]
    fn grid_examples() {
        let rows = theorem_grid(&[0.5, 1.0, 2.0], &[0.49, 0.6, 7.0]).unwrap();
        let r = row(&rows, "la", 1.0, 0.49);
        assert_eq!(r.class, FixedPointClass::Saddle);
        assert!(r.consistent);
        let r = row(&rows, "lola", 0.5, 0.6);
        assert_eq!(r.class, FixedPointClass::Source);
        assert!(r.consistent);
        let r = row(&rows, "hla", 2.0, 7.0);
        assert_eq!(r.class, FixedPointClass::Saddle);
        assert!(r.consistent);
    }

    #[test]
    fn default_grid_is_consistent() {
        let rows = theorem_grid(&default_theorem_etas(), &default_theorem_regrets()).unwrap();
        assert!(
            rows.iter().all(|r| r.consistent),
            "{:?}",
            rows.iter().find(|r| !r.consistent)
        );
        assert!(rows
            .iter()
            .any(|r| r.class == FixedPointClass::UnstableLine));
    }

    #[test]
    fn unknown_rule_has_no_prediction() {
        assert!(predicted("sos", 1.0, 1.0).is_none());
    }
}
