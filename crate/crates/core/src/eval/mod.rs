//! Evaluation: Wasserstein distance, reference samples, KSD paths and sweeps.

mod sampling;
mod sweep;
mod wasserstein;

pub use sampling::{iid_gm_sample, rwm_sample, Provenance, ReferenceSample, RwmConfig, RwmStats, ADAPT_WINDOW};
pub use sweep::{run_sweep, CellRun, SweepConfig, SweepRow, SweepTable};
pub use wasserstein::{wasserstein1, wasserstein1_with_plan, TransportPlan, MAX_TRANSPORT_ENTRIES};

use crate::error::Result;
use crate::stein::{SequenceBuilder, SteinKernel};

/// KSD of every prefix `x_1..x_n` of `points`.
pub fn ksd_path(sk: &SteinKernel, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut b = SequenceBuilder::new();
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        b.append(sk, sk.score_point(p)?);
        out.push(b.ksd());
    }
    Ok(out)
}
