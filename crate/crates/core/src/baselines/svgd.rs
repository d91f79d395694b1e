//! Stein variational gradient descent.
//!
//! Synchronous particle updates
//! `φ(x_i) = (1/n) Σ_l [k(x_l, x_i) ∇log p(x_l) + ∇_{x_l} k(x_l, x_i)]`
//! with per-coordinate AdaGrad step sizes
//! (`a_t = m a_{t−1} + (1 − m) g_t²`, `a_1 = g_1²`).

use rayon::prelude::*;

use crate::algorithms::{Recorder, RunTrace};
use crate::error::{check_dim, Error, Result};
use crate::kernels::{derivatives_unchecked, KernelParams};
use crate::optimize::SearchSpace;
use crate::stein::SteinKernel;
use crate::targets::Target;

const FUDGE: f64 = 1e-8;

/// Correctly rounded running sum (Shewchuk's non-overlapping partials).
#[derive(Debug, Clone, Default)]
struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    fn add(&mut self, mut x: f64) {
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    fn sum(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // half-way cases: the remaining partials decide the rounding direction
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = 2.0 * lo;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgdConfig {
    pub n_particles: usize,
    pub kernel: KernelParams,
    pub master_step: f64,
    pub momentum: f64,
    pub n_iterations: usize,
    /// Box for the initial lattice.
    pub space: SearchSpace,
    /// Explicit starting particles, replacing the lattice.
    pub initial: Option<Vec<Vec<f64>>>,
}

impl SvgdConfig {
    pub fn validate(&self, target: &Target) -> Result<()> {
        if !(self.master_step > 0.0 && self.master_step.is_finite()) {
            return Err(Error::invalid("master_step", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        check_dim(target.dim(), self.space.dim())?;
        match &self.initial {
            Some(init) => {
                if init.is_empty() {
                    return Err(Error::Empty);
                }
                init.iter().try_for_each(|p| check_dim(target.dim(), p.len()))
            }
            None if self.n_particles == 0 => Err(Error::invalid("n_particles", "must be at least 1")),
            None => Ok(()),
        }
    }
}

/// Equally spaced lattice over the box with `⌈n^(1/d)⌉` nodes per axis
/// (endpoints included, midpoint when one node), first `n` in
/// lexicographic order.
pub fn svgd_grid(space: &SearchSpace, n: usize) -> Vec<Vec<f64>> {
    let d = space.dim();
    let mut k = 1usize;
    while k.pow(d as u32) < n {
        k += 1;
    }
    // offsets from the centre, so nodes i and k-1-i mirror each other exactly
    let coord = |axis: usize, i: usize| {
        let (l, u) = (space.lower()[axis], space.upper()[axis]);
        let (mid, half) = (0.5 * (l + u), 0.5 * (u - l));
        if k == 1 {
            mid
        } else {
            mid + half * ((2 * i) as f64 - (k - 1) as f64) / (k - 1) as f64
        }
    };
    (0..n)
        .map(|mut flat| {
            let mut idx = vec![0; d];
            for slot in idx.iter_mut().rev() {
                *slot = flat % k;
                flat /= k;
            }
            idx.iter().enumerate().map(|(a, &i)| coord(a, i)).collect()
        })
        .collect()
}

/// Runs SVGD. Each iteration scores every particle once (`n` gradient
/// calls); the final set is scored once more for the last trace row. Row
/// `iter = m` holds the KSD after `m` updates.
pub fn svgd_run(target: &Target, config: &SvgdConfig) -> Result<(Vec<Vec<f64>>, RunTrace)> {
    config.validate(target)?;
    let sk = SteinKernel::new(config.kernel, target.clone());
    let rec = Recorder::new(target);
    let mut trace = RunTrace::default();
    let mut particles = match &config.initial {
        Some(init) => init.clone(),
        None => svgd_grid(&config.space, config.n_particles),
    };
    let n = particles.len();
    let d = target.dim();
    let mut hist = vec![vec![0.0; d]; n];
    for m in 0..=config.n_iterations {
        let scored: Vec<_> = particles
            .par_iter()
            .map(|x| sk.score_point(x))
            .collect::<Result<_>>()?;
        let ksd = sk.ksd_scored(&scored)?;
        trace.rows.push(rec.row(target, m, ksd));
        if m == config.n_iterations {
            break;
        }
        // correctly rounded sums do not depend on the order of the particles,
        // so relabelling or mirroring a configuration is reproduced exactly
        let phi: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = sk.input(&scored[i]);
                let mut acc = vec![ExactSum::default(); d];
                for sl in &scored {
                    let kd = derivatives_unchecked(&config.kernel, &sk.input(sl), &xi);
                    for ((a, s), g) in acc.iter_mut().zip(&sl.score).zip(&kd.grad_x) {
                        a.add(kd.value * s);
                        a.add(*g);
                    }
                }
                acc.into_iter().map(|a| a.sum() / n as f64).collect()
            })
            .collect();
        for (i, (x, g)) in particles.iter_mut().zip(&phi).enumerate() {
            for j in 0..d {
                let g2 = g[j] * g[j];
                hist[i][j] = if m == 0 {
                    g2
                } else {
                    config.momentum * hist[i][j] + (1.0 - config.momentum) * g2
                };
                x[j] += config.master_step * g[j] / (FUDGE + hist[i][j].sqrt());
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteUpdate {
                    iteration: m + 1,
                    particle: i,
                });
            }
        }
    }
    trace.points = particles.clone();
    Ok((particles, trace))
}
