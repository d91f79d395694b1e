//! Global optimisers over an axis-aligned box: multi-start Nelder–Mead,
//! Monte Carlo search and a regular grid, plus exhaustive search over a fixed
//! candidate list.
//!
//! Nelder–Mead and Monte Carlo draw their start points from a truncated
//! Gaussian `N(μ0, Σ0)` for the first `n_delay` iterations and afterwards
//! from the truncated mixture `Π = 1/(m−1) Σ_{j<m} N(x_j, λI)` centred on the
//! current points.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Objective evaluated by the searchers. Must be callable concurrently.
pub type Objective<'a> = dyn Fn(&[f64]) -> Result<f64> + Sync + 'a;

const MAX_REJECTIONS: usize = 10_000;
const MAX_GRID_POINTS: u64 = 100_000_000;
const NM_MAX_ITER: usize = 200;
const NM_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = Error;
    fn try_from(r: RawSpace) -> Result<Self> {
        SearchSpace::new(r.lower, r.upper)
    }
}

impl From<SearchSpace> for RawSpace {
    fn from(s: SearchSpace) -> Self {
        RawSpace {
            lower: s.lower,
            upper: s.upper,
        }
    }
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::invalid("box", "dimension must be positive"));
        }
        check_finite(&lower, "box lower bound")?;
        check_finite(&upper, "box upper bound")?;
        if let Some(j) = (0..lower.len()).find(|&j| lower[j] >= upper[j]) {
            return Err(Error::invalid(
                "box",
                format!("lower[{j}] = {} must be below upper[{j}] = {}", lower[j], upper[j]),
            ));
        }
        Ok(SearchSpace { lower, upper })
    }

    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Initial Gaussian and adaptive-mixture settings shared by NM and MC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub n_delay: usize,
    pub mu0: Vec<f64>,
    /// Row-major `d×d` covariance of the initial proposal.
    pub sigma0: Vec<f64>,
    /// Variance of each mixture component.
    pub lambda: f64,
}

impl ProposalConfig {
    pub fn isotropic(mu0: Vec<f64>, var0: f64, lambda: f64, n_delay: usize) -> Self {
        let d = mu0.len();
        let mut sigma0 = vec![0.0; d * d];
        for i in 0..d {
            sigma0[i * d + i] = var0;
        }
        ProposalConfig {
            n_delay,
            mu0,
            sigma0,
            lambda,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        check_dim(dim, self.mu0.len())?;
        check_dim(dim * dim, self.sigma0.len())?;
        if self.n_delay == 0 {
            return Err(Error::invalid("n_delay", "must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        self.sigma0_cholesky().map(|_| ())
    }

    fn sigma0_cholesky(&self) -> Result<DMatrix<f64>> {
        let d = self.mu0.len();
        let m = DMatrix::from_row_slice(d, d, &self.sigma0);
        if (&m - m.transpose()).amax() > 1e-12 * m.amax() {
            return Err(Error::NotPositiveDefinite("sigma0 is not symmetric"));
        }
        m.cholesky()
            .map(|c| c.l())
            .ok_or(Error::NotPositiveDefinite("sigma0"))
    }
}

/// The optimiser applied at each iteration of a sequence construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    NelderMead { n_init: usize, proposal: ProposalConfig },
    MonteCarlo { n_test: usize, proposal: ProposalConfig },
    Grid { n0: usize },
    /// Exhaustive search over a fixed list of points.
    Candidates(Arc<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
}

fn sort_key(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Index of the first minimum; NaN counts as `+∞`.
fn first_argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if sort_key(*v) < sort_key(values[best]) {
            best = i;
        }
    }
    best
}

/// RNG stream `stream` of a run seeded with `seed`.
pub fn iteration_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Optimizer {
    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        match self {
            Optimizer::NelderMead { n_init, proposal } => {
                if *n_init == 0 {
                    return Err(Error::invalid("n_init", "must be positive"));
                }
                proposal.validate(space.dim())
            }
            Optimizer::MonteCarlo { n_test, proposal } => {
                if *n_test == 0 {
                    return Err(Error::invalid("n_test", "must be positive"));
                }
                proposal.validate(space.dim())
            }
            Optimizer::Grid { n0 } => {
                if *n0 < 2 {
                    return Err(Error::invalid("n0", "must be at least 2"));
                }
                Ok(())
            }
            Optimizer::Candidates(c) => {
                if c.is_empty() {
                    return Err(Error::Empty);
                }
                c.iter().try_for_each(|p| check_dim(space.dim(), p.len()))
            }
        }
    }

    /// Minimises `objective` at iteration `t` given the current point set.
    /// Random draws come from RNG stream `stream` of `seed`.
    pub fn minimize(
        &self,
        objective: &Objective<'_>,
        t: usize,
        current: &[Vec<f64>],
        space: &SearchSpace,
        seed: u64,
        stream: u64,
    ) -> Result<SearchResult> {
        let mut rng = iteration_rng(seed, stream);
        match self {
            Optimizer::NelderMead { n_init, proposal } => {
                nm_search(objective, t, *n_init, proposal, current, space, &mut rng)
            }
            Optimizer::MonteCarlo { n_test, proposal } => {
                mc_search(objective, t, *n_test, proposal, current, space, &mut rng)
            }
            Optimizer::Grid { n0 } => gs_search(objective, t, space, *n0),
            Optimizer::Candidates(c) => candidate_search(objective, c),
        }
    }
}

fn truncated_draw(
    space: &SearchSpace,
    rng: &mut dyn RngCore,
    mut draw: impl FnMut(&mut dyn RngCore) -> Vec<f64>,
) -> Result<Vec<f64>> {
    for _ in 0..MAX_REJECTIONS {
        let x = draw(rng);
        if space.contains(&x) {
            return Ok(x);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: MAX_REJECTIONS,
    })
}

/// One draw from the truncated initial Gaussian (`t ≤ n_delay`) or the
/// truncated adaptive mixture (`t > n_delay`).
///
/// The mixture uses the first `m − 1` of the `m` current points, or the only
/// point when `m = 1`.
pub fn propose(
    config: &ProposalConfig,
    t: usize,
    current: &[Vec<f64>],
    space: &SearchSpace,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let d = space.dim();
    if t <= config.n_delay {
        let l = config.sigma0_cholesky()?;
        let mu = DVector::from_column_slice(&config.mu0);
        truncated_draw(space, rng, |r| {
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(r));
            (&mu + &l * z).iter().copied().collect()
        })
    } else {
        if current.is_empty() {
            return Err(Error::invalid(
                "current_points",
                "adaptive proposal needs at least one point",
            ));
        }
        let m = if current.len() > 1 { current.len() - 1 } else { 1 };
        let sd = config.lambda.sqrt();
        truncated_draw(space, rng, |r| {
            let j = r.random_range(0..m);
            current[j]
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(r);
                    c + sd * z
                })
                .collect()
        })
    }
}

/// Argmin over `n_test` proposals.
pub fn mc_search(
    objective: &Objective<'_>,
    t: usize,
    n_test: usize,
    config: &ProposalConfig,
    current: &[Vec<f64>],
    space: &SearchSpace,
    rng: &mut dyn RngCore,
) -> Result<SearchResult> {
    if n_test == 0 {
        return Err(Error::invalid("n_test", "must be positive"));
    }
    let candidates: Vec<Vec<f64>> = (0..n_test)
        .map(|_| propose(config, t, current, space, rng))
        .collect::<Result<_>>()?;
    candidate_search(objective, &candidates)
}

/// Exhaustive argmin over an explicit candidate list (first minimum wins).
pub fn candidate_search(objective: &Objective<'_>, candidates: &[Vec<f64>]) -> Result<SearchResult> {
    if candidates.is_empty() {
        return Err(Error::Empty);
    }
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|x| objective(x))
        .collect::<Result<_>>()?;
    let best = first_argmin(&values);
    Ok(SearchResult {
        x: candidates[best].clone(),
        value: values[best],
    })
}

/// Algorithm-NM: `n_init` bound-constrained Nelder–Mead runs from proposal
/// draws; the best local optimum is returned.
pub fn nm_search(
    objective: &Objective<'_>,
    t: usize,
    n_init: usize,
    config: &ProposalConfig,
    current: &[Vec<f64>],
    space: &SearchSpace,
    rng: &mut dyn RngCore,
) -> Result<SearchResult> {
    if n_init == 0 {
        return Err(Error::invalid("n_init", "must be positive"));
    }
    let starts: Vec<Vec<f64>> = (0..n_init)
        .map(|_| propose(config, t, current, space, rng))
        .collect::<Result<_>>()?;
    let locals: Vec<SearchResult> = starts
        .par_iter()
        .map(|x0| nelder_mead(objective, x0, space))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = locals.iter().map(|r| r.value).collect();
    let best = first_argmin(&values);
    if !values[best].is_finite() {
        return Err(Error::NoFiniteObjective);
    }
    Ok(locals[best].clone())
}

/// Nelder–Mead from `x0` with trial vertices projected onto the box.
///
/// Coefficients: reflection 1, expansion 2, contraction ½, shrink ½. Stops
/// when every vertex is within `1e-6 ×` the box diagonal of the best vertex,
/// or after 200 iterations.
pub fn nelder_mead(objective: &Objective<'_>, x0: &[f64], space: &SearchSpace) -> Result<SearchResult> {
    let d = space.dim();
    check_dim(d, x0.len())?;
    let eval = |x: &[f64]| objective(x).map(sort_key);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut start = x0.to_vec();
    space.clamp(&mut start);
    simplex.push(start.clone());
    for j in 0..d {
        let step = 0.05 * (space.upper[j] - space.lower[j]);
        let mut v = start.clone();
        v[j] = if v[j] + step <= space.upper[j] {
            v[j] + step
        } else {
            v[j] - step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect::<Result<_>>()?;
    let tol = NM_REL_TOL * space.diagonal();

    let affine = |from: &[f64], to: &[f64], coef: f64| -> Vec<f64> {
        let mut v: Vec<f64> = from
            .iter()
            .zip(to)
            .map(|(c, w)| c + coef * (w - c))
            .collect();
        space.clamp(&mut v);
        v
    };

    for _ in 0..NM_MAX_ITER {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if diameter <= tol {
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let (f_best, f_second, f_worst) = (values[0], values[d - 1], values[d]);

        let reflected = affine(&centroid, &worst, -1.0);
        let f_r = eval(&reflected)?;
        if f_r < f_best {
            let expanded = affine(&centroid, &worst, -2.0);
            let f_e = eval(&expanded)?;
            if f_e < f_r {
                simplex[d] = expanded;
                values[d] = f_e;
            } else {
                simplex[d] = reflected;
                values[d] = f_r;
            }
            continue;
        }
        if f_r < f_second {
            simplex[d] = reflected;
            values[d] = f_r;
            continue;
        }
        let (contracted, f_c, accept) = if f_r < f_worst {
            let c = affine(&centroid, &reflected, 0.5);
            let f = eval(&c)?;
            let ok = f <= f_r;
            (c, f, ok)
        } else {
            let c = affine(&centroid, &worst, 0.5);
            let f = eval(&c)?;
            let ok = f < f_worst;
            (c, f, ok)
        };
        if accept {
            simplex[d] = contracted;
            values[d] = f_c;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=d {
            simplex[i] = affine(&best, &simplex[i], 0.5);
            values[i] = eval(&simplex[i])?;
        }
    }
    let best = first_argmin(&values);
    Ok(SearchResult {
        x: simplex[best].clone(),
        value: values[best],
    })
}

/// Number of grid points per axis at iteration `t`: `n0 + round(√t)`.
pub fn grid_size(t: usize, n0: usize) -> usize {
    n0 + (t as f64).sqrt().round() as usize
}

/// Coordinates of grid node `i` of `n` along `[l, u]`; both ends are exact.
pub fn grid_coordinate(l: f64, u: f64, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        u
    } else {
        l + (u - l) * i as f64 / (n - 1) as f64
    }
}

/// Algorithm-GS: argmin over the regular grid with `n0 + round(√t)` points
/// per axis, endpoints included. Ties go to the lexicographically smallest
/// grid index (first coordinate most significant).
pub fn gs_search(objective: &Objective<'_>, t: usize, space: &SearchSpace, n0: usize) -> Result<SearchResult> {
    if n0 < 2 {
        return Err(Error::invalid("n0", "must be at least 2"));
    }
    let n_grid = grid_size(t, n0);
    let d = space.dim();
    let total = (n_grid as u64)
        .checked_pow(d as u32)
        .filter(|&c| c <= MAX_GRID_POINTS)
        .ok_or(Error::GridTooLarge { n_grid, dim: d })?;
    let point = |mut idx: u64| -> Vec<f64> {
        let mut x = vec![0.0; d];
        for j in (0..d).rev() {
            let i = (idx % n_grid as u64) as usize;
            idx /= n_grid as u64;
            x[j] = grid_coordinate(space.lower[j], space.upper[j], i, n_grid);
        }
        x
    };
    let (value, index) = (0..total)
        .into_par_iter()
        .map(|i| objective(&point(i)).map(|v| (sort_key(v), i)))
        .try_reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;
    let index = if index == u64::MAX { 0 } else { index };
    Ok(SearchResult {
        x: point(index),
        value,
    })
}
