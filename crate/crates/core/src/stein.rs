//! The Langevin Stein kernel
//!
//! ```text
//! k0(x, x') = ∇x·∇x' k + ∇x k · ∇log p(x') + ∇x' k · ∇log p(x) + k ∇log p(x)·∇log p(x')
//! ```
//!
//! and the kernel Stein discrepancy `KSD = sqrt(n⁻² Σ_ij k0(x_i, x_j))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernels::{derivatives_unchecked, KernelInput, KernelParams};
use crate::targets::Target;

/// A point whose score (and score jacobian, for score-based kernels) has
/// already been evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPoint {
    pub x: Vec<f64>,
    pub score: Vec<f64>,
    pub jac: Option<Vec<f64>>,
}

/// The four summands of `k0`, in the order written in the module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K0Terms {
    pub cross_div: f64,
    pub grad_x_score: f64,
    pub grad_xp_score: f64,
    pub value_score: f64,
}

impl K0Terms {
    /// The sum, grouped so that swapping the arguments is bitwise symmetric.
    pub fn sum(&self) -> f64 {
        self.cross_div + (self.grad_x_score + self.grad_xp_score) + self.value_score
    }
}

/// Base kernel composed with a target.
#[derive(Debug, Clone)]
pub struct SteinKernel {
    kernel: KernelParams,
    target: Target,
}

impl SteinKernel {
    pub fn new(kernel: KernelParams, target: Target) -> Self {
        SteinKernel { kernel, target }
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Evaluates the score at `x`: one counted gradient call, plus the
    /// jacobian when the kernel needs it.
    pub fn score_point(&self, x: &[f64]) -> Result<ScoredPoint> {
        check_dim(self.dim(), x.len())?;
        check_finite(x, "point")?;
        let score = self.target.grad_log_q(x)?;
        check_finite(&score, "score")?;
        let jac = if self.kernel.uses_score() {
            Some(self.target.score_jacobian(x)?)
        } else {
            None
        };
        Ok(ScoredPoint {
            x: x.to_vec(),
            score,
            jac,
        })
    }

    pub(crate) fn input<'a>(&self, p: &'a ScoredPoint) -> KernelInput<'a> {
        if self.kernel.uses_score() {
            KernelInput::with_score(&p.x, &p.score, p.jac.as_deref())
        } else {
            KernelInput::point(&p.x)
        }
    }

    pub fn k0_terms(&self, a: &ScoredPoint, b: &ScoredPoint) -> K0Terms {
        let kd = derivatives_unchecked(&self.kernel, &self.input(a), &self.input(b));
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        K0Terms {
            cross_div: kd.cross_div,
            grad_x_score: dot(&kd.grad_x, &b.score),
            grad_xp_score: dot(&kd.grad_xp, &a.score),
            value_score: kd.value * dot(&a.score, &b.score),
        }
    }

    /// `k0` between two already-scored points; no target evaluations.
    pub fn k0(&self, a: &ScoredPoint, b: &ScoredPoint) -> f64 {
        self.k0_terms(a, b).sum()
    }

    /// `k0(x, x')` with scores evaluated on the spot.
    pub fn k0_eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        let a = self.score_point(x)?;
        let b = self.score_point(xp)?;
        Ok(self.k0(&a, &b))
    }

    pub fn score_all(&self, points: &[Vec<f64>]) -> Result<Vec<ScoredPoint>> {
        points.iter().map(|p| self.score_point(p)).collect()
    }

    /// `Σ_ij k0(x_i, x_j)` by direct double summation.
    pub fn gram_sum(&self, points: &[ScoredPoint]) -> f64 {
        let mut total = 0.0;
        for a in points {
            for b in points {
                total += self.k0(a, b);
            }
        }
        total
    }

    pub fn ksd_scored(&self, points: &[ScoredPoint]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::Empty);
        }
        let n = points.len() as f64;
        Ok((self.gram_sum(points) / (n * n)).max(0.0).sqrt())
    }

    /// Full double-sum KSD of an unweighted point set.
    pub fn ksd(&self, points: &[Vec<f64>]) -> Result<f64> {
        self.ksd_scored(&self.score_all(points)?)
    }

    /// `sqrt(Σ_ij w_i w_j k0(y_i, y_j))` for simplex weights.
    pub fn ksd_weighted(&self, points: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
        let scored = self.score_all(points)?;
        ksd_weighted_scored(self, &scored, weights)
    }

    /// Monte Carlo estimate of `E_{Z∼P} k0(Z, x)` and its standard error.
    /// Zero in expectation for every `x`; needs an exact sampler.
    pub fn stein_identity_check(&self, x: &[f64], n_mc: usize, seed: u64) -> Result<(f64, f64)> {
        self.stein_identity_check_with(x, n_mc, seed, |t| t.sum())
    }

    /// As [`Self::stein_identity_check`], with the four `k0` summands
    /// combined by `combine` instead of added.
    pub fn stein_identity_check_with(
        &self,
        x: &[f64],
        n_mc: usize,
        seed: u64,
        combine: impl Fn(&K0Terms) -> f64 + Sync,
    ) -> Result<(f64, f64)> {
        if !self.target.has_sampler() {
            return Err(Error::NoSampler);
        }
        if n_mc < 2 {
            return Err(Error::invalid("n_mc", "need at least two draws"));
        }
        let probe = self.score_point(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<Vec<f64>> = (0..n_mc)
            .map(|_| self.target.sample(&mut rng))
            .collect::<Result<_>>()?;
        use rayon::prelude::*;
        let values: Vec<f64> = draws
            .par_iter()
            .map(|z| {
                let sz = self.score_point(z)?;
                Ok(combine(&self.k0_terms(&sz, &probe)))
            })
            .collect::<Result<_>>()?;
        let n = n_mc as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok((mean, (var / n).sqrt()))
    }
}

pub fn ksd_weighted_scored(sk: &SteinKernel, points: &[ScoredPoint], weights: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty);
    }
    check_dim(points.len(), weights.len())?;
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights", "must be nonnegative"));
    }
    if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("weights", "must sum to 1"));
    }
    let mut total = 0.0;
    for (a, wa) in points.iter().zip(weights) {
        if *wa == 0.0 {
            continue;
        }
        for (b, wb) in points.iter().zip(weights) {
            if *wb == 0.0 {
                continue;
            }
            total += wa * wb * sk.k0(a, b);
        }
    }
    Ok(total.max(0.0).sqrt())
}

/// Growing point set with running sums of the `k0` Gram matrix:
/// `row_sums[i] = Σ_j k0(x_j, x_i)` and `total = Σ_ij k0(x_i, x_j)`.
/// Appending or replacing a point costs `O(n)` kernel evaluations.
#[derive(Debug, Clone, Default)]
pub struct SequenceBuilder {
    points: Vec<ScoredPoint>,
    row_sums: Vec<f64>,
    total: f64,
    clamps: usize,
}

impl SequenceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(sk: &SteinKernel, points: Vec<ScoredPoint>) -> Self {
        let mut b = Self::new();
        for p in points {
            b.append(sk, p);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ScoredPoint] {
        &self.points
    }

    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.x.clone()).collect()
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of times KSD² came out negative (rounding) and was clamped.
    pub fn clamp_count(&self) -> usize {
        self.clamps
    }

    pub fn ksd_squared(&self) -> f64 {
        let n = self.points.len() as f64;
        self.total / (n * n)
    }

    /// KSD from the running sums, clamped at zero.
    pub fn ksd(&mut self) -> f64 {
        let v = self.ksd_squared();
        if v < 0.0 {
            self.clamps += 1;
            return 0.0;
        }
        v.sqrt()
    }

    /// `Σ_i k0(x_i, x)` over the stored points.
    pub fn cross_sum(&self, sk: &SteinKernel, x: &ScoredPoint) -> f64 {
        self.points.iter().map(|p| sk.k0(p, x)).sum()
    }

    /// `Σ_{i ≠ skip} k0(x_i, x)`.
    pub fn cross_sum_excluding(&self, sk: &SteinKernel, x: &ScoredPoint, skip: usize) -> f64 {
        self.points
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, p)| sk.k0(p, x))
            .sum()
    }

    pub fn append(&mut self, sk: &SteinKernel, x: ScoredPoint) {
        let diag = sk.k0(&x, &x);
        let mut cross = 0.0;
        for (p, s) in self.points.iter().zip(self.row_sums.iter_mut()) {
            let v = sk.k0(p, &x);
            *s += v;
            cross += v;
        }
        self.row_sums.push(cross + diag);
        self.total += 2.0 * cross + diag;
        self.points.push(x);
    }

    /// Replaces point `index`, updating the sums in `O(n)`.
    pub fn replace(&mut self, sk: &SteinKernel, index: usize, x: ScoredPoint) -> Result<ScoredPoint> {
        if index >= self.points.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.points.len(),
            });
        }
        let old = &self.points[index];
        let old_diag = sk.k0(old, old);
        let new_diag = sk.k0(&x, &x);
        let mut delta_cross = 0.0;
        let mut new_cross = 0.0;
        for j in 0..self.points.len() {
            if j == index {
                continue;
            }
            let before = sk.k0(&self.points[j], &self.points[index]);
            let after = sk.k0(&self.points[j], &x);
            self.row_sums[j] += after - before;
            delta_cross += after - before;
            new_cross += after;
        }
        self.row_sums[index] = new_cross + new_diag;
        self.total += 2.0 * delta_cross + new_diag - old_diag;
        Ok(std::mem::replace(&mut self.points[index], x))
    }
}
