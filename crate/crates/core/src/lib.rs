//! Stein points: deterministic point sequences that approximate an
//! un-normalised density by minimising kernel Stein discrepancy (KSD).
//!
//! The pieces, bottom-up:
//!
//! - [`kernels`]: base kernels with analytic derivatives.
//! - [`targets`]: log-densities, scores and evaluation counting.
//! - [`stein`]: the Langevin Stein kernel `k0`, KSD and incremental sums.
//! - [`optimize`]: Nelder–Mead, Monte Carlo and grid search over a box.
//! - [`algorithms`]: greedy and herding sequences, block coordinate descent,
//!   budgeted runs and fixed reference-set compression.
//! - [`baselines`]: minimum energy designs and SVGD.
//! - [`eval`]: exact 1-Wasserstein distance, reference samplers and sweeps.

pub mod algorithms;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod io;
pub mod kernels;
pub mod optimize;
pub mod stein;
pub mod targets;

pub use algorithms::{RunConfig, RunTrace, SequenceKind, TraceRow, Truncation};
pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelParams};
pub use optimize::{Optimizer, ProposalConfig, SearchSpace};
pub use stein::{SequenceBuilder, SteinKernel};
pub use targets::{EvalCounts, LogDensity, Target};
