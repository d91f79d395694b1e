//! Un-normalised target densities.
//!
//! A [`LogDensity`] is a pure description of `log q`; a [`Target`] wraps one
//! with shared evaluation counters so every algorithm reports the same cost
//! unit (`n_eval` = calls to `log q` plus calls to `∇log q`).

mod data;
mod garch;
mod gp;
mod mixture;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::RngCore;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};

pub use data::{load_series_csv, synth_fallback, Dataset, Schema, SynthKind, SYNTH_IGARCH_THETA, SYNTH_LIDAR_NOISE_SD};
pub use garch::{variance_path, IgarchSpec, VariancePath};
pub use gp::GpPosteriorSpec;
pub use mixture::GaussianMixtureSpec;

pub trait LogDensity: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Un-normalised log-density.
    fn log_q(&self, x: &[f64]) -> Result<f64>;

    fn grad_log_q(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Analytic Hessian of `log q`, row-major, when the target has one.
    fn hess_log_q(&self, _x: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Open box containing the support, if the support is not all of `R^d`.
    fn domain(&self) -> Option<Domain> {
        None
    }

    fn has_sampler(&self) -> bool {
        false
    }

    /// Exact draw from the normalised density, if one is available.
    fn sample(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }
}

/// Open axis-aligned box; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| v > l && v < u)
    }
}

#[derive(Debug, Default)]
struct EvalCounter {
    n_logp: AtomicU64,
    n_grad: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub n_logp: u64,
    pub n_grad: u64,
}

impl EvalCounts {
    pub fn total(&self) -> u64 {
        self.n_logp + self.n_grad
    }
}

/// A log-density together with its evaluation counters.
///
/// Clones share counters; use [`Target::fresh`] for an independent tally.
#[derive(Clone)]
pub struct Target {
    density: Arc<dyn LogDensity>,
    counter: Arc<EvalCounter>,
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Target")
            .field("density", &self.density)
            .field("counts", &self.counts())
            .finish()
    }
}

impl Target {
    pub fn new(density: impl LogDensity + 'static) -> Self {
        Self::from_arc(Arc::new(density))
    }

    pub fn from_arc(density: Arc<dyn LogDensity>) -> Self {
        Target {
            density,
            counter: Arc::default(),
        }
    }

    /// Same density, counters starting from zero.
    pub fn fresh(&self) -> Self {
        Self::from_arc(self.density.clone())
    }

    pub fn density(&self) -> &dyn LogDensity {
        self.density.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn domain(&self) -> Option<Domain> {
        self.density.domain()
    }

    pub fn counts(&self) -> EvalCounts {
        EvalCounts {
            n_logp: self.counter.n_logp.load(Ordering::Relaxed),
            n_grad: self.counter.n_grad.load(Ordering::Relaxed),
        }
    }

    pub fn log_q(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        self.counter.n_logp.fetch_add(1, Ordering::Relaxed);
        self.density.log_q(x)
    }

    pub fn grad_log_q(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        self.counter.n_grad.fetch_add(1, Ordering::Relaxed);
        self.density.grad_log_q(x)
    }

    /// Jacobian of the score at `x`, row-major.
    ///
    /// Uses the analytic Hessian when the density has one. Otherwise central
    /// differences of the score are taken with step `1e-5 · max(|x_j|, 1e-3)`,
    /// and each of the `2d` score calls is charged to the gradient counter.
    pub fn score_jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if let Some(h) = self.density.hess_log_q(x) {
            return h;
        }
        let d = x.len();
        let mut jac = vec![0.0; d * d];
        for j in 0..d {
            let h = 1e-5 * x[j].abs().max(1e-3);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let gp = self.grad_log_q(&xp)?;
            let gm = self.grad_log_q(&xm)?;
            for m in 0..d {
                jac[m * d + j] = (gp[m] - gm[m]) / (2.0 * h);
            }
        }
        for m in 0..d {
            for j in (m + 1)..d {
                let avg = 0.5 * (jac[m * d + j] + jac[j * d + m]);
                jac[m * d + j] = avg;
                jac[j * d + m] = avg;
            }
        }
        Ok(jac)
    }

    /// Uncounted exact draw; `Error::NoSampler` if the target has none.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.density.sample(rng).ok_or(Error::NoSampler)
    }

    pub fn has_sampler(&self) -> bool {
        self.density.has_sampler()
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::StdNormal;
    use super::*;

    #[test]
    fn counters_track_calls_exactly() {
        let t = Target::new(StdNormal(2));
        for _ in 0..3 {
            t.log_q(&[0.0, 1.0]).unwrap();
        }
        for _ in 0..5 {
            t.grad_log_q(&[0.0, 1.0]).unwrap();
        }
        assert_eq!(t.counts(), EvalCounts { n_logp: 3, n_grad: 5 });
        // finite-difference jacobian is charged 2d gradients
        let jac = t.score_jacobian(&[0.3, 0.4]).unwrap();
        assert_eq!(t.counts().n_grad, 9);
        assert!((jac[0] + 1.0).abs() < 1e-8 && jac[1].abs() < 1e-8);
        // clones share, fresh does not
        let c = t.clone();
        c.log_q(&[0.0, 0.0]).unwrap();
        assert_eq!(t.counts().n_logp, 4);
        assert_eq!(t.fresh().counts().total(), 0);
    }

    #[test]
    fn concurrent_counting_is_exact() {
        use rayon::prelude::*;
        let t = Target::new(StdNormal(1));
        (0..1000).into_par_iter().for_each(|i| {
            t.grad_log_q(&[i as f64]).unwrap();
        });
        assert_eq!(t.counts().n_grad, 1000);
    }

    #[test]
    fn dimension_checked() {
        let t = Target::new(StdNormal(2));
        assert!(t.log_q(&[1.0]).is_err());
        assert!(!t.has_sampler());
    }
}
