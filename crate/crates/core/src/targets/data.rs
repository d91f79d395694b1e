use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// Single numeric column, e.g. daily returns.
    Series(Vec<f64>),
    /// Two numeric columns: regression inputs and outputs.
    Paired { x: Vec<f64>, y: Vec<f64> },
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Series(v) => v.len(),
            Dataset::Paired { x, .. } => x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Series,
    Paired,
}

impl Schema {
    fn columns(self) -> usize {
        match self {
            Schema::Series => 1,
            Schema::Paired => 2,
        }
    }
}

/// Reads a comma-separated numeric file. A first row that does not parse
/// as numbers is treated as a header. Rows and columns in errors are 1-based.
pub fn load_series_csv(path: impl AsRef<Path>, schema: Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let ncol = schema.columns();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); ncol];
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != ncol {
            return Err(Error::Parse {
                row,
                column: record.len().min(ncol) + 1,
                message: format!("expected {ncol} column(s), found {}", record.len()),
            });
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        if i == 0 && parsed.iter().all(|p| p.is_err()) {
            continue;
        }
        for (c, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) if v.is_finite() => cols[c].push(v),
                Ok(v) => {
                    return Err(Error::Parse {
                        row,
                        column: c + 1,
                        message: format!("non-finite value {v}"),
                    })
                }
                Err(e) => {
                    return Err(Error::Parse {
                        row,
                        column: c + 1,
                        message: format!("{:?}: {e}", &record[c]),
                    })
                }
            }
        }
    }
    if cols[0].is_empty() {
        return Err(Error::Empty);
    }
    Ok(match schema {
        Schema::Series => Dataset::Series(cols.remove(0)),
        Schema::Paired => {
            let y = cols.pop().unwrap_or_default();
            let x = cols.pop().unwrap_or_default();
            Dataset::Paired { x, y }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// 221 rows: range in 390..720 and a sigmoidal log-ratio drop plus N(0, 0.1²) noise.
    Lidar,
    /// 2000 IGARCH(1,1) returns simulated at θ = (0.02, 0.1), σ_1² = 1.
    Igarch,
}

pub const SYNTH_IGARCH_THETA: [f64; 2] = [0.02, 0.1];
pub const SYNTH_LIDAR_NOISE_SD: f64 = 0.1;

/// Deterministic stand-in datasets.
pub fn synth_fallback(kind: SynthKind, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SynthKind::Lidar => {
            let n = 221;
            let noise = Normal::new(0.0, SYNTH_LIDAR_NOISE_SD).expect("positive sd");
            let x: Vec<f64> = (0..n)
                .map(|i| 390.0 + 330.0 * i as f64 / (n - 1) as f64)
                .collect();
            let y = x
                .iter()
                .map(|&r| -0.05 - 0.35 * (1.0 + ((r - 600.0) / 30.0).tanh()) + noise.sample(&mut rng))
                .collect();
            Dataset::Paired { x, y }
        }
        SynthKind::Igarch => {
            let [t1, t2] = SYNTH_IGARCH_THETA;
            let mut s = 1.0f64;
            let mut ys = Vec::with_capacity(2000);
            for t in 0..2000 {
                if t > 0 {
                    let prev: f64 = ys[t - 1];
                    s = t1 + t2 * prev * prev + (1.0 - t2) * s;
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                ys.push(s.sqrt() * z);
            }
            Dataset::Series(ys)
        }
    }
}
