use super::{Domain, LogDensity};
use crate::error::{check_dim, check_finite, Error, Result};

/// IGARCH(1,1) posterior under a flat prior on `θ1 > 0, 0 < θ2 < 1`:
///
/// ```text
/// σ_t² = θ1 + θ2 y_{t−1}² + (1 − θ2) σ_{t−1}²
/// ```
///
/// with `σ_1²` held fixed (sample variance of the series unless set).
#[derive(Debug, Clone)]
pub struct IgarchSpec {
    returns: Vec<f64>,
    sigma1_sq: f64,
}

/// Conditional variances and their derivatives in `θ1` and `θ2`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePath {
    pub sigma_sq: Vec<f64>,
    pub d_theta1: Vec<f64>,
    pub d_theta2: Vec<f64>,
}

/// Runs the variance recursion and its forward sensitivity equations.
///
/// No domain check is made, so limiting cases such as `θ2 = 1` can be
/// inspected directly.
pub fn variance_path(returns: &[f64], theta: [f64; 2], sigma1_sq: f64) -> VariancePath {
    let t_len = returns.len();
    let (t1, t2) = (theta[0], theta[1]);
    let mut sigma_sq = Vec::with_capacity(t_len);
    let mut d1 = Vec::with_capacity(t_len);
    let mut d2 = Vec::with_capacity(t_len);
    if t_len > 0 {
        sigma_sq.push(sigma1_sq);
        d1.push(0.0);
        d2.push(0.0);
    }
    for t in 1..t_len {
        let y2 = returns[t - 1] * returns[t - 1];
        let (s, a, b) = (sigma_sq[t - 1], d1[t - 1], d2[t - 1]);
        sigma_sq.push(t1 + t2 * y2 + (1.0 - t2) * s);
        d1.push(1.0 + (1.0 - t2) * a);
        d2.push(y2 - s + (1.0 - t2) * b);
    }
    VariancePath {
        sigma_sq,
        d_theta1: d1,
        d_theta2: d2,
    }
}

impl IgarchSpec {
    pub fn new(returns: Vec<f64>, sigma1_sq: Option<f64>) -> Result<Self> {
        if returns.len() < 2 {
            return Err(Error::invalid("returns", "need at least two observations"));
        }
        check_finite(&returns, "return series")?;
        let sigma1_sq = match sigma1_sq {
            Some(s) => s,
            None => {
                let n = returns.len() as f64;
                let mean = returns.iter().sum::<f64>() / n;
                returns.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)
            }
        };
        if !(sigma1_sq > 0.0 && sigma1_sq.is_finite()) {
            return Err(Error::invalid("sigma1_sq", "must be positive"));
        }
        Ok(IgarchSpec { returns, sigma1_sq })
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn sigma1_sq(&self) -> f64 {
        self.sigma1_sq
    }

    fn check(&self, theta: &[f64]) -> Result<[f64; 2]> {
        check_dim(2, theta.len())?;
        check_finite(theta, "igarch parameters")?;
        if !(theta[0] > 0.0 && theta[1] > 0.0 && theta[1] < 1.0) {
            return Err(Error::OutsideDomain {
                point: theta.to_vec(),
            });
        }
        Ok([theta[0], theta[1]])
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

impl LogDensity for IgarchSpec {
    fn dim(&self) -> usize {
        2
    }

    fn log_q(&self, theta: &[f64]) -> Result<f64> {
        let th = self.check(theta)?;
        let path = variance_path(&self.returns, th, self.sigma1_sq);
        Ok(self
            .returns
            .iter()
            .zip(&path.sigma_sq)
            .map(|(y, s)| -0.5 * (LN_2PI + s.ln()) - y * y / (2.0 * s))
            .sum())
    }

    fn grad_log_q(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let th = self.check(theta)?;
        let path = variance_path(&self.returns, th, self.sigma1_sq);
        let mut g = [0.0; 2];
        for (t, y) in self.returns.iter().enumerate() {
            let s = path.sigma_sq[t];
            // d/ds [−½ log s − y²/(2s)]
            let w = -0.5 / s + y * y / (2.0 * s * s);
            g[0] += w * path.d_theta1[t];
            g[1] += w * path.d_theta2[t];
        }
        Ok(g.to_vec())
    }

    fn domain(&self) -> Option<Domain> {
        Some(Domain {
            lower: vec![0.0, 0.0],
            upper: vec![f64::INFINITY, 1.0],
        })
    }
}
