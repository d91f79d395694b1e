use nalgebra::{DMatrix, DVector};

use super::LogDensity;
use crate::error::{check_dim, check_finite, Error, Result};

/// Posterior over `φ = (log θ1, log θ2)` for a zero-mean GP regression with
/// covariance `θ1 exp(−θ2 (x − x')²)`, known noise `σ`, and a standard
/// bivariate Cauchy prior `∝ (1 + ‖φ‖²)^{−3/2}`.
///
/// `log_q` includes the Gaussian normalising terms of the marginal
/// likelihood but not the prior's constant.
#[derive(Debug, Clone)]
pub struct GpPosteriorSpec {
    inputs: Vec<f64>,
    outputs: DVector<f64>,
    noise_sd: f64,
    sq_dists: DMatrix<f64>,
}

struct Factorised {
    chol: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
    signal: DMatrix<f64>,
    theta2: f64,
}

impl GpPosteriorSpec {
    pub fn new(inputs: Vec<f64>, outputs: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Empty);
        }
        check_dim(inputs.len(), outputs.len())?;
        check_finite(&inputs, "gp inputs")?;
        check_finite(&outputs, "gp outputs")?;
        if !(noise_sd > 0.0 && noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd", "must be positive"));
        }
        let n = inputs.len();
        let sq_dists = DMatrix::from_fn(n, n, |i, j| (inputs[i] - inputs[j]).powi(2));
        Ok(GpPosteriorSpec {
            inputs,
            outputs: DVector::from_vec(outputs),
            noise_sd,
            sq_dists,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    fn factorise(&self, phi: &[f64]) -> Result<Factorised> {
        check_dim(2, phi.len())?;
        check_finite(phi, "gp hyperparameters")?;
        let (theta1, theta2) = (phi[0].exp(), phi[1].exp());
        let signal = self.sq_dists.map(|r2| theta1 * (-theta2 * r2).exp());
        let mut cov = signal.clone();
        let noise = self.noise_sd * self.noise_sd;
        for i in 0..self.len() {
            cov[(i, i)] += noise;
        }
        let chol = cov
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("gp covariance"))?;
        Ok(Factorised {
            chol,
            signal,
            theta2,
        })
    }

    fn prior_log(phi: &[f64]) -> f64 {
        let d = phi.len() as f64;
        -0.5 * (d + 1.0) * (1.0 + phi.iter().map(|v| v * v).sum::<f64>()).ln()
    }
}

impl LogDensity for GpPosteriorSpec {
    fn dim(&self) -> usize {
        2
    }

    fn log_q(&self, phi: &[f64]) -> Result<f64> {
        let f = self.factorise(phi)?;
        let alpha = f.chol.solve(&self.outputs);
        let log_det = 2.0 * f.chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let n = self.len() as f64;
        let lik = -0.5 * self.outputs.dot(&alpha)
            - 0.5 * log_det
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        Ok(lik + Self::prior_log(phi))
    }

    fn grad_log_q(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let f = self.factorise(phi)?;
        let alpha = f.chol.solve(&self.outputs);
        let k_inv = f.chol.inverse();
        // ∂K/∂φ1 = signal, ∂K/∂φ2 = −θ2 r² ∘ signal
        let d_phi2 = self.sq_dists.component_mul(&f.signal) * (-f.theta2);
        let mut grad = Vec::with_capacity(2);
        for dk in [&f.signal, &d_phi2] {
            let quad = alpha.dot(&(dk * &alpha));
            let trace = k_inv.component_mul(dk).sum();
            grad.push(0.5 * quad - 0.5 * trace);
        }
        let denom = 1.0 + phi[0] * phi[0] + phi[1] * phi[1];
        for (g, p) in grad.iter_mut().zip(phi) {
            *g -= 3.0 * p / denom;
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::test_support::{fd_grad, rel_err};
    use crate::targets::{synth_fallback, Dataset, SynthKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> GpPosteriorSpec {
        let Dataset::Paired { x, y } = synth_fallback(SynthKind::Lidar, 4) else {
            unreachable!()
        };
        GpPosteriorSpec::new(x[..40].to_vec(), y[..40].to_vec(), 0.1).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let gp = small();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let phi = [rng.random_range(-5.0..5.0), rng.random_range(-13.0..-7.0)];
            let g = gp.grad_log_q(&phi).unwrap();
            let fd = fd_grad(|v| gp.log_q(v).unwrap(), &phi, 1e-5);
            for j in 0..2 {
                // absolute floor: components can be near zero
                let err = (g[j] - fd[j]).abs() / g[j].abs().max(fd[j].abs()).max(1e-2);
                assert!(err < 1e-4, "phi={phi:?} {g:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn identical_inputs_leave_only_prior_in_length_scale_gradient() {
        let gp = GpPosteriorSpec::new(vec![1.0; 6], vec![0.2, -0.1, 0.3, 0.0, 0.1, -0.2], 0.5)
            .unwrap();
        let phi = [0.3, -2.0];
        let g = gp.grad_log_q(&phi).unwrap();
        let prior = -3.0 * phi[1] / (1.0 + phi[0] * phi[0] + phi[1] * phi[1]);
        assert!(rel_err(g[1], prior) < 1e-14);
    }

    #[test]
    fn log_q_falls_as_signal_variance_grows() {
        let gp = small();
        let mut prev = f64::INFINITY;
        for phi1 in [2.0, 6.0, 10.0, 14.0] {
            let v = gp.log_q(&[phi1, -10.0]).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}
