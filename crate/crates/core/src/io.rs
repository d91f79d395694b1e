//! CSV files for point sets, traces and sweep tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! point set read back is bitwise identical to the one written.

use std::path::Path;

use crate::algorithms::RunTrace;
use crate::error::{Error, Result};
use crate::eval::SweepRow;

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_points_csv(path: impl AsRef<Path>, points: &[Vec<f64>]) -> Result<()> {
    let d = points.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=d).map(|j| format!("x{j}")))?;
    for p in points {
        w.write_record(p.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a point set written by [`write_points_csv`] (header required).
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let d = r.headers()?.len();
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != d {
            return Err(Error::Parse {
                row,
                column: rec.len().min(d) + 1,
                message: format!("expected {d} column(s), found {}", rec.len()),
            });
        }
        let p = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("{f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::Empty);
    }
    Ok(out)
}

/// Columns `iter,n_logp,n_grad,n_eval,ksd,wall_ms`.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &RunTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "n_logp", "n_grad", "n_eval", "ksd", "wall_ms"])?;
    for r in &trace.rows {
        w.write_record([
            r.iter.to_string(),
            r.n_logp.to_string(),
            r.n_grad.to_string(),
            r.n_eval().to_string(),
            fmt(r.ksd),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `alpha,beta,seed,n_eval,ksd,wasserstein,status`.
pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["alpha", "beta", "seed", "n_eval", "ksd", "wasserstein", "status"])?;
    for r in rows {
        w.write_record([
            fmt(r.alpha),
            fmt(r.beta),
            r.seed.to_string(),
            r.n_eval.to_string(),
            fmt(r.ksd),
            fmt(r.wasserstein),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn points_round_trip_bitwise(pts in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            write_points_csv(&path, &pts).unwrap();
            let back = read_points_csv(&path).unwrap();
            prop_assert_eq!(back, pts);
        }
    }

    #[test]
    fn extreme_values_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let pts = vec![vec![f64::MIN_POSITIVE, -0.0, 1e-300, 0.1 + 0.2]];
        write_points_csv(&path, &pts).unwrap();
        let back = read_points_csv(&path).unwrap();
        assert_eq!(back[0].iter().map(|v| v.to_bits()).collect::<Vec<_>>(), pts[0].iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn ragged_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "x1,x2\n1,2\n3,oops\n").unwrap();
        assert!(matches!(read_points_csv(&path), Err(Error::Parse { row: 3, column: 2, .. })));
    }
}
