//! Kernel-parameter sweeps scored by Wasserstein distance to a reference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::wasserstein::wasserstein1;
use crate::kernels::{KernelFamily, KernelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Multiples of `eta` tried for `α`.
    pub alpha_multipliers: Vec<f64>,
    pub betas: Vec<f64>,
    /// Problem-dependent base scale.
    pub eta: f64,
}

impl SweepConfig {
    pub fn with_eta(eta: f64) -> Self {
        SweepConfig {
            alpha_multipliers: vec![0.1, 0.5, 1.0, 2.0, 4.0, 8.0],
            betas: vec![-0.1, -0.3, -0.5, -0.7, -0.9],
            eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", "must be positive"));
        }
        if self.alpha_multipliers.is_empty() || self.betas.is_empty() {
            return Err(Error::invalid("sweep", "alpha and beta sets must be non-empty"));
        }
        Ok(())
    }

    /// `(α, β)` cells in row-major order. The inverse-log kernel has `β`
    /// fixed at −1, so its β set collapses to that single value.
    pub fn cells(&self, family: KernelFamily) -> Vec<(f64, f64)> {
        let betas = match family {
            KernelFamily::InverseLog => vec![-1.0],
            _ => self.betas.clone(),
        };
        self.alpha_multipliers
            .iter()
            .flat_map(|m| betas.iter().map(move |b| (m * self.eta, *b)))
            .collect()
    }
}

/// What a method reports for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub points: Vec<Vec<f64>>,
    pub n_eval: u64,
    pub ksd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub n_eval: u64,
    pub ksd: f64,
    pub wasserstein: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Row with the smallest Wasserstein distance among successful cells.
    pub best: Option<usize>,
}

/// Runs `run(kernel, seed)` for every `(α, β)` cell and seed, in parallel.
///
/// Rows come out in `(α, β, seed)` order whatever the completion order. A
/// failing cell is recorded with status `error: …` and NaN metrics.
pub fn run_sweep<F>(
    family: KernelFamily,
    sweep: &SweepConfig,
    seeds: &[u64],
    reference: &[Vec<f64>],
    run: F,
) -> Result<SweepTable>
where
    F: Fn(KernelParams, u64) -> Result<CellRun> + Sync,
{
    sweep.validate()?;
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "at least one seed is required"));
    }
    let jobs: Vec<(f64, f64, u64)> = sweep
        .cells(family)
        .into_iter()
        .flat_map(|(a, b)| seeds.iter().map(move |s| (a, b, *s)))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(alpha, beta, seed)| {
            let outcome = KernelParams::new(family, alpha, beta)
                .and_then(|k| run(k, seed))
                .and_then(|cell| Ok((wasserstein1(&cell.points, reference)?, cell)));
            match outcome {
                Ok((w, cell)) => SweepRow {
                    alpha,
                    beta,
                    seed,
                    n_eval: cell.n_eval,
                    ksd: cell.ksd,
                    wasserstein: w,
                    status: "ok".into(),
                },
                Err(e) => SweepRow {
                    alpha,
                    beta,
                    seed,
                    n_eval: 0,
                    ksd: f64::NAN,
                    wasserstein: f64::NAN,
                    status: format!("error: {e}"),
                },
            }
        })
        .collect();
    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == "ok" && r.wasserstein.is_finite())
        .fold(None, |acc: Option<(usize, f64)>, (i, r)| match acc {
            Some((_, w)) if w <= r.wasserstein => acc,
            _ => Some((i, r.wasserstein)),
        })
        .map(|(i, _)| i);
    Ok(SweepTable { rows, best })
}
