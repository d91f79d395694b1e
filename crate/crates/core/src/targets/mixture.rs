use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::LogDensity;
use crate::error::{check_dim, check_finite, Error, Result};

#[derive(Debug, Clone)]
struct Component {
    log_weight: f64,
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

/// Finite Gaussian mixture `Σ_c w_c N(μ_c, Σ_c)`.
#[derive(Debug, Clone)]
pub struct GaussianMixtureSpec {
    dim: usize,
    weights: Vec<f64>,
    components: Vec<Component>,
}

impl GaussianMixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "mixture needs at least one component"));
        }
        if means.len() != weights.len() || covariances.len() != weights.len() {
            return Err(Error::invalid(
                "means",
                "weights, means and covariances must have equal length",
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::invalid("weights", "must be nonnegative and sum to 1"));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::invalid("means", "dimension must be positive"));
        }
        let mut components = Vec::with_capacity(weights.len());
        for ((w, mu), cov) in weights.iter().zip(&means).zip(&covariances) {
            check_dim(dim, mu.len())?;
            check_dim(dim * dim, cov.len())?;
            check_finite(mu, "mixture mean")?;
            let sigma = DMatrix::from_row_slice(dim, dim, cov);
            if (&sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax().max(1.0) {
                return Err(Error::NotPositiveDefinite("covariance is not symmetric"));
            }
            let chol = sigma
                .clone()
                .cholesky()
                .ok_or(Error::NotPositiveDefinite("mixture covariance"))?;
            let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            components.push(Component {
                log_weight: w.ln(),
                mean: DVector::from_column_slice(mu),
                precision: chol.inverse(),
                chol: chol.l(),
                log_norm: -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det),
            });
        }
        Ok(GaussianMixtureSpec {
            dim,
            weights,
            components,
        })
    }

    /// `½N((−1.5, 0), I) + ½N((1.5, 0), I)`.
    pub fn two_component_benchmark() -> Self {
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        Self::new(
            vec![0.5, 0.5],
            vec![vec![-1.5, 0.0], vec![1.5, 0.0]],
            vec![eye.clone(), eye],
        )
        .expect("benchmark mixture is valid")
    }

    pub fn standard_normal(dim: usize) -> Self {
        let mut eye = vec![0.0; dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = 1.0;
        }
        Self::new(vec![1.0], vec![vec![0.0; dim]], vec![eye]).expect("identity covariance")
    }

    /// Exact draw together with the index of the component it came from.
    pub fn sample_labelled(&self, rng: &mut dyn RngCore) -> (usize, Vec<f64>) {
        let u: f64 = Uniform::new(0.0, 1.0).unwrap().sample(rng);
        let mut acc = 0.0;
        let mut pick = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = i;
                break;
            }
        }
        // skip zero-weight components that rounding may land on
        while self.weights[pick] == 0.0 && pick > 0 {
            pick -= 1;
        }
        let c = &self.components[pick];
        let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
        (pick, (&c.mean + &c.chol * z).iter().copied().collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| c.mean.iter().copied().collect())
            .collect()
    }

    /// Per-component log densities (weight included) and `Σ_c⁻¹(μ_c − x)`.
    fn parts(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
        check_dim(self.dim, x.len())?;
        check_finite(x, "mixture argument")?;
        let xv = DVector::from_column_slice(x);
        let mut logs = Vec::with_capacity(self.components.len());
        let mut grads = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let diff = &c.mean - &xv;
            let g = &c.precision * &diff;
            logs.push(c.log_weight + c.log_norm - 0.5 * diff.dot(&g));
            grads.push(g);
        }
        Ok((logs, grads))
    }

    /// Responsibilities from component log densities; also returns log Σ.
    fn responsibilities(logs: &[f64]) -> (Vec<f64>, f64) {
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        (exps.iter().map(|e| e / total).collect(), max + total.ln())
    }

    fn score_and_parts(&self, x: &[f64]) -> Result<(DVector<f64>, Vec<f64>, Vec<DVector<f64>>)> {
        let (logs, grads) = self.parts(x)?;
        let (resp, _) = Self::responsibilities(&logs);
        let mut score = DVector::zeros(self.dim);
        for (r, g) in resp.iter().zip(&grads) {
            score.axpy(*r, g, 1.0);
        }
        Ok((score, resp, grads))
    }
}

impl LogDensity for GaussianMixtureSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_q(&self, x: &[f64]) -> Result<f64> {
        let (logs, _) = self.parts(x)?;
        Ok(Self::responsibilities(&logs).1)
    }

    fn grad_log_q(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.score_and_parts(x)?.0.iter().copied().collect())
    }

    fn hess_log_q(&self, x: &[f64]) -> Option<Result<Vec<f64>>> {
        // H = Σ_c r_c (g_c g_cᵀ − Σ_c⁻¹) − s sᵀ
        Some(self.score_and_parts(x).map(|(score, resp, grads)| {
            let d = self.dim;
            let mut h = DMatrix::zeros(d, d);
            for ((r, g), c) in resp.iter().zip(&grads).zip(&self.components) {
                h += (g * g.transpose() - &c.precision) * *r;
            }
            h -= &score * score.transpose();
            let h = (&h + h.transpose()) * 0.5;
            h.transpose().iter().copied().collect()
        }))
    }

    fn has_sampler(&self) -> bool {
        true
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(self.sample_labelled(rng).1)
    }
}
