//! Minimum energy designs.
//!
//! Energy `E = Σ_{i≠j} [p(x_i)^(−1/2d) p(x_j)^(−1/2d) / ‖x_i − x_j‖]^δ` and its
//! greedy construction
//! `x_n ∈ argmin_x p(x)^(−δ/2d) Σ_{i<n} p(x_i)^(−δ/2d) / ‖x_i − x‖^δ`,
//! both evaluated in log space.

use std::sync::Mutex;

use crate::algorithms::{first_point, Recorder, RunTrace};
use crate::error::{check_dim, Error, Result};
use crate::optimize::{Optimizer, SearchSpace};
use crate::targets::Target;

/// Largest `v` with `exp(v)` finite.
const LN_MAX: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, PartialEq)]
pub struct MedConfig {
    pub n_points: usize,
    /// Energy exponent, `δ ≥ 1`. The usual choice is `4d`.
    pub delta: f64,
    pub optimizer: Optimizer,
    pub space: SearchSpace,
    pub seed: u64,
}

impl MedConfig {
    pub fn default_delta(dim: usize) -> f64 {
        4.0 * dim as f64
    }

    pub fn validate(&self, target: &Target) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::invalid("n_points", "must be at least 1"));
        }
        if !(self.delta >= 1.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta", "must be at least 1"));
        }
        check_dim(target.dim(), self.space.dim())?;
        self.optimizer.validate(&self.space)
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Logarithm of the greedy MED objective at `x` given stored points and
/// their `log q` values. `+∞` when `x` coincides with a stored point or
/// `q(x) = 0`.
pub fn med_log_objective(x: &[f64], log_q_x: f64, stored: &[(Vec<f64>, f64)], delta: f64) -> f64 {
    let c = delta / (2.0 * x.len() as f64);
    if log_q_x == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let mut coincident = false;
    let lse = log_sum_exp(stored.iter().map(|(xi, lqi)| {
        let r = distance(xi, x);
        if r == 0.0 {
            coincident = true;
        }
        -c * lqi - delta * r.ln()
    }));
    if coincident {
        return f64::INFINITY;
    }
    -c * log_q_x + lse
}

/// Energy over ordered pairs `i ≠ j`. Coincident points give `+∞`.
pub fn med_energy(points: &[Vec<f64>], target: &Target, delta: f64) -> Result<f64> {
    if !(delta >= 1.0) {
        return Err(Error::invalid("delta", "must be at least 1"));
    }
    let d = target.dim();
    let lq: Vec<f64> = points.iter().map(|x| target.log_q(x)).collect::<Result<_>>()?;
    if lq.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite("log density"));
    }
    let c = delta / (2.0 * d as f64);
    let mut terms = Vec::with_capacity(points.len() * points.len());
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let r = distance(&points[i], &points[j]);
            if r == 0.0 {
                return Ok(f64::INFINITY);
            }
            terms.push(-c * (lq[i] + lq[j]) - delta * r.ln());
        }
    }
    if terms.is_empty() {
        return Ok(0.0);
    }
    let log_e = log_sum_exp(terms.into_iter());
    if log_e > LN_MAX {
        return Err(Error::Overflow {
            context: "MED energy".into(),
        });
    }
    Ok(log_e.exp())
}

/// Greedy MED sequence. Costs one `log q` call per candidate; the trace's
/// `ksd` column is left as NaN since MED never evaluates the score.
pub fn med_greedy(target: &Target, config: &MedConfig) -> Result<(Vec<Vec<f64>>, RunTrace)> {
    config.validate(target)?;
    let rec = Recorder::new(target);
    let mut trace = RunTrace::default();
    let x1 = first_point(target, &config.optimizer, &config.space, config.seed)?;
    let lq1 = target.log_q(&x1)?;
    let mut stored = vec![(x1, lq1)];
    trace.rows.push(rec.row(target, 1, f64::NAN));
    while stored.len() < config.n_points {
        let t = stored.len() + 1;
        let seen: Mutex<Vec<(Vec<f64>, f64)>> = Mutex::new(Vec::new());
        let objective = |x: &[f64]| -> Result<f64> {
            let lq = target.log_q(x)?;
            if lq.is_nan() || lq == f64::INFINITY {
                return Err(Error::NonFinite("log density"));
            }
            seen.lock().expect("cache lock").push((x.to_vec(), lq));
            Ok(med_log_objective(x, lq, &stored, config.delta))
        };
        let current: Vec<Vec<f64>> = stored.iter().map(|(x, _)| x.clone()).collect();
        let found = config
            .optimizer
            .minimize(&objective, t, &current, &config.space, config.seed, t as u64)?;
        if !found.value.is_finite() {
            return Err(Error::NoFiniteObjective);
        }
        if found.value > LN_MAX {
            return Err(Error::Overflow {
                context: format!("MED objective at iteration {t} (log value {:.1})", found.value),
            });
        }
        let lq = match seen
            .into_inner()
            .expect("cache lock")
            .into_iter()
            .find(|(x, _)| *x == found.x)
        {
            Some((_, lq)) => lq,
            None => target.log_q(&found.x)?,
        };
        stored.push((found.x, lq));
        trace.rows.push(rec.row(target, t, f64::NAN));
    }
    trace.points = stored.into_iter().map(|(x, _)| x).collect();
    Ok((trace.points.clone(), trace))
}
