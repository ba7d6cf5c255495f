use std::io::Write;

use crate::dynamics::{Eigenvalues, TrajectoryPoint};

use super::{AggregateStats, BasinMap, ExperimentError, FieldSample, SweepRecord, TheoremRow};

// Floats go through `Display`, the shortest string that round-trips, so
// output is byte-stable across runs and platforms.
fn num(x: f64) -> String {
    format!("{x}")
}

/// Records as CSV: `rule,g,eta,run,seed,theta0_1..theta0_d,outcome,final_value,iters`.
pub fn write_records_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), ExperimentError> {
    let dim = records.iter().map(|r| r.theta0.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["rule", "g", "eta", "run", "seed"]
        .map(String::from)
        .to_vec();
    header.extend((1..=dim).map(|i| format!("theta0_{i}")));
    header.extend(["outcome", "final_value", "iters"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.rule.clone(),
            num(r.g),
            num(r.eta),
            r.run.to_string(),
            r.seed.to_string(),
        ];
        row.extend(r.theta0.iter().map(|&x| num(x)));
        row.resize(5 + dim, String::new());
        row.extend([
            r.outcome.as_str().to_string(),
            num(r.final_value),
            r.iters.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregates as pretty JSON keyed by rule, then regret.
pub fn write_aggregates_json<W: Write>(
    mut out: W,
    stats: &AggregateStats,
) -> Result<(), ExperimentError> {
    serde_json::to_writer_pretty(&mut out, &stats.to_json_map())?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_field_csv<W: Write>(out: W, field: &[FieldSample]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta1", "theta2", "dtheta1", "dtheta2"])?;
    for s in field {
        w.write_record([num(s.theta1), num(s.theta2), num(s.dtheta1), num(s.dtheta2)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(
    out: W,
    points: &[TrajectoryPoint],
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "theta1", "theta2"])?;
    for p in points {
        w.write_record([num(p.t), num(p.theta1), num(p.theta2)])?;
    }
    w.flush()?;
    Ok(())
}

/// Basin lattice: `theta1,theta2,outcome,final_value,iters,excluded`, with
/// `excluded` empty for counted starts.
pub fn write_basin_csv<W: Write>(out: W, map: &BasinMap) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "theta1",
        "theta2",
        "outcome",
        "final_value",
        "iters",
        "excluded",
    ])?;
    for p in &map.points {
        w.write_record([
            num(p.theta1),
            num(p.theta2),
            p.outcome.as_str().to_string(),
            num(p.final_value),
            p.iterations.to_string(),
            p.excluded.map(|e| e.as_str()).unwrap_or("").to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_theorem_csv<W: Write>(out: W, rows: &[TheoremRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "rule",
        "eta",
        "g",
        "lambda1",
        "lambda2",
        "class",
        "expected",
        "consistent",
    ])?;
    for r in rows {
        let (l1, l2) = match r.eigenvalues {
            Eigenvalues::Real(a, b) => (num(a), num(b)),
            Eigenvalues::Complex { re, im } => (format!("{re}+{im}i"), format!("{re}-{im}i")),
        };
        w.write_record([
            r.rule.clone(),
            num(r.eta),
            num(r.g),
            l1,
            l2,
            r.class.as_str().to_string(),
            r.expected.as_str().to_string(),
            r.consistent.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Outcome;
    use crate::experiments::aggregate;

    fn record(run: usize, outcome: Outcome, value: f64) -> SweepRecord {
        SweepRecord {
            rule: "la".into(),
            g: 10.0,
            eta: 0.1,
            run,
            seed: 42,
            theta0: vec![0.25, 0.75],
            hierarchy: None,
            outcome,
            final_value: value,
            iters: 12,
        }
    }

    #[test]
    fn records_header_and_rows() {
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &[record(0, Outcome::GlobalEquilibrium, 10.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "rule,g,eta,run,seed,theta0_1,theta0_2,outcome,final_value,iters\n\
             la,10,0.1,0,42,0.25,0.75,global-equilibrium,10,12\n"
        );
    }

    #[test]
    fn aggregates_json_shape() {
        let recs = [
            record(0, Outcome::GlobalEquilibrium, 10.0),
            record(1, Outcome::Miscoordination, 0.0),
        ];
        let mut buf = Vec::new();
        write_aggregates_json(&mut buf, &aggregate(&recs)).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let cell = &v["la"]["10"];
        assert_eq!(cell["mean_value"], 5.0);
        assert_eq!(cell["std_value"], 5.0);
        assert_eq!(cell["frac_global"], 0.5);
        assert_eq!(cell["frac_miscoord"], 0.5);
        assert_eq!(cell["frac_local"], 0.0);
        assert_eq!(cell["frac_other"], 0.0);
    }

    #[test]
    fn field_and_trajectory_headers() {
        let mut buf = Vec::new();
        write_field_csv(
            &mut buf,
            &[FieldSample {
                theta1: 0.5,
                theta2: 0.5,
                dtheta1: 0.0,
                dtheta2: -1.5,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "theta1,theta2,dtheta1,dtheta2\n0.5,0.5,0,-1.5\n"
        );
        let mut buf = Vec::new();
        write_trajectory_csv(
            &mut buf,
            &[TrajectoryPoint {
                t: 0.0,
                theta1: 0.1,
                theta2: 0.2,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,theta1,theta2\n0,0.1,0.2\n"
        );
    }
}
