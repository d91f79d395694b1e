//! Stein point sequences.
//!
//! Both constructions start from a mode of the target and then add one point
//! per iteration:
//!
//! - greedy:  `x_n ∈ argmin_x  k0(x, x)/2 + Σ_{i<n} k0(x_i, x)`
//! - herding: `x_n ∈ argmin_x  Σ_{i<n} k0(x_i, x)`
//!
//! The budgeted variants fill `n` points and then spend the remaining
//! evaluation budget on block coordinate descent sweeps over the fixed set.

use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::optimize::{Optimizer, SearchResult, SearchSpace};
use crate::stein::{ScoredPoint, SequenceBuilder, SteinKernel};
use crate::targets::{EvalCounts, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    Greedy,
    Herding,
}

/// Restriction of iteration `j`'s search to `{x : k0(x, x) ≤ R_j²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    #[default]
    None,
    /// `R_j = sqrt(2 log(max(j, 2)) / c2)`.
    C2(f64),
}

impl Truncation {
    pub fn radius(&self, j: usize) -> Option<f64> {
        match self {
            Truncation::None => None,
            Truncation::C2(c2) => Some(truncation_radius(j, *c2)),
        }
    }
}

/// `sqrt(2 log(max(j, 2)) / c2)`; `j = 1` uses `log 2` so the first
/// truncated search is never empty by construction.
pub fn truncation_radius(j: usize, c2: f64) -> f64 {
    (2.0 * (j.max(2) as f64).ln() / c2).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_points: usize,
    pub optimizer: Optimizer,
    pub space: SearchSpace,
    pub kernel: KernelParams,
    pub truncation: Truncation,
    /// Per-iteration suboptimality allowed by the convergence theory.
    /// Recorded only; heuristic optimisers cannot certify it.
    pub delta: f64,
    pub seed: u64,
}

impl RunConfig {
    /// Validates the config and returns non-fatal warnings.
    pub fn validate(&self, kind: SequenceKind, target: &Target) -> Result<Vec<String>> {
        if self.n_points == 0 {
            return Err(Error::invalid("n_points", "must be at least 1"));
        }
        crate::error::check_dim(target.dim(), self.space.dim())?;
        self.optimizer.validate(&self.space)?;
        if !(self.delta >= 0.0) {
            return Err(Error::invalid("delta", "must be nonnegative"));
        }
        if let Truncation::C2(c2) = self.truncation {
            if !(c2 > 0.0 && c2.is_finite()) {
                return Err(Error::invalid("truncation", "c2 must be positive"));
            }
        }
        let mut warnings = Vec::new();
        if kind == SequenceKind::Herding && self.truncation == Truncation::None {
            warnings.push(
                "herding without truncation: convergence guarantees need a finite radius".to_string(),
            );
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub n_logp: u64,
    pub n_grad: u64,
    pub ksd: f64,
    pub wall_ms: f64,
}

impl TraceRow {
    pub fn n_eval(&self) -> u64 {
        self.n_logp + self.n_grad
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub points: Vec<Vec<f64>>,
    /// Row index after which coordinate descent took over, if it did.
    pub switchover: Option<usize>,
    /// The evaluation budget ran out before all points were placed.
    pub partial: bool,
    /// Number of negative KSD² values clamped to zero.
    pub ksd_clamps: usize,
}

pub(crate) struct Recorder {
    start: Instant,
    base: EvalCounts,
}

impl Recorder {
    pub(crate) fn new(target: &Target) -> Self {
        Recorder {
            start: Instant::now(),
            base: target.counts(),
        }
    }

    pub(crate) fn counts(&self, target: &Target) -> EvalCounts {
        let c = target.counts();
        EvalCounts {
            n_logp: c.n_logp - self.base.n_logp,
            n_grad: c.n_grad - self.base.n_grad,
        }
    }

    pub(crate) fn row(&self, target: &Target, iter: usize, ksd: f64) -> TraceRow {
        let c = self.counts(target);
        TraceRow {
            iter,
            n_logp: c.n_logp,
            n_grad: c.n_grad,
            ksd,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

/// Global maximiser of `log q` found by `optimizer` (iteration `t = 1`).
pub fn first_point(
    target: &Target,
    optimizer: &Optimizer,
    space: &SearchSpace,
    seed: u64,
) -> Result<Vec<f64>> {
    let objective = |x: &[f64]| target.log_q(x).map(|v| -v);
    let found = optimizer.minimize(&objective, 1, &[], space, seed, 1)?;
    if !found.value.is_finite() {
        return Err(Error::NoFiniteObjective);
    }
    Ok(found.x)
}

/// Candidate scores seen during one search, so the winner is not re-scored.
struct ScoreCache(Mutex<Vec<ScoredPoint>>);

impl ScoreCache {
    fn new() -> Self {
        ScoreCache(Mutex::new(Vec::new()))
    }

    fn put(&self, p: &ScoredPoint) {
        self.0.lock().expect("cache lock").push(p.clone());
    }

    fn take(self, sk: &SteinKernel, x: &[f64]) -> Result<ScoredPoint> {
        let cached = self.0.into_inner().expect("cache lock");
        match cached.into_iter().find(|p| p.x == x) {
            Some(p) => Ok(p),
            None => sk.score_point(x),
        }
    }
}

/// Minimises `extra(x) + [k0(x,x)/2 if greedy] + Σ_{i≠skip} k0(x_i, x)`
/// under the optional truncation radius.
#[allow(clippy::too_many_arguments)]
fn search_stein_objective(
    kind: SequenceKind,
    builder: &SequenceBuilder,
    skip: Option<usize>,
    sk: &SteinKernel,
    optimizer: &Optimizer,
    space: &SearchSpace,
    t: usize,
    radius: Option<f64>,
    seed: u64,
    stream: u64,
) -> Result<(SearchResult, ScoredPoint)> {
    let cache = ScoreCache::new();
    let objective = |x: &[f64]| -> Result<f64> {
        let p = sk.score_point(x)?;
        let diag = sk.k0(&p, &p);
        if let Some(r) = radius {
            if diag > r * r {
                return Ok(f64::INFINITY);
            }
        }
        let sum = match skip {
            Some(i) => builder.cross_sum_excluding(sk, &p, i),
            None => builder.cross_sum(sk, &p),
        };
        cache.put(&p);
        Ok(match kind {
            SequenceKind::Greedy => 0.5 * diag + sum,
            SequenceKind::Herding => sum,
        })
    };
    let current = builder.coordinates();
    let found = match optimizer.minimize(&objective, t, &current, space, seed, stream) {
        Err(Error::NoFiniteObjective) if radius.is_some() => {
            return Err(Error::AllTruncated {
                radius: radius.unwrap_or(0.0),
            })
        }
        other => other?,
    };
    if !found.value.is_finite() {
        return Err(match radius {
            Some(r) => Error::AllTruncated { radius: r },
            None => Error::NoFiniteObjective,
        });
    }
    let scored = cache.take(sk, &found.x)?;
    Ok((found, scored))
}

fn sequence_step(
    kind: SequenceKind,
    builder: &mut SequenceBuilder,
    sk: &SteinKernel,
    optimizer: &Optimizer,
    space: &SearchSpace,
    truncation: Truncation,
    seed: u64,
) -> Result<Vec<f64>> {
    if builder.is_empty() {
        return Err(Error::Empty);
    }
    let t = builder.len() + 1;
    let (found, scored) = search_stein_objective(
        kind,
        builder,
        None,
        sk,
        optimizer,
        space,
        t,
        truncation.radius(t),
        seed,
        t as u64,
    )?;
    builder.append(sk, scored);
    Ok(found.x)
}

/// Appends the minimiser of the greedy objective.
pub fn greedy_step(
    builder: &mut SequenceBuilder,
    sk: &SteinKernel,
    optimizer: &Optimizer,
    space: &SearchSpace,
    truncation: Truncation,
    seed: u64,
) -> Result<Vec<f64>> {
    sequence_step(SequenceKind::Greedy, builder, sk, optimizer, space, truncation, seed)
}

/// Appends the minimiser of the herding objective.
pub fn herding_step(
    builder: &mut SequenceBuilder,
    sk: &SteinKernel,
    optimizer: &Optimizer,
    space: &SearchSpace,
    truncation: Truncation,
    seed: u64,
) -> Result<Vec<f64>> {
    sequence_step(SequenceKind::Herding, builder, sk, optimizer, space, truncation, seed)
}

fn start_sequence(
    config: &RunConfig,
    target: &Target,
    sk: &SteinKernel,
    rec: &Recorder,
    trace: &mut RunTrace,
) -> Result<SequenceBuilder> {
    let x1 = first_point(target, &config.optimizer, &config.space, config.seed)?;
    let mut builder = SequenceBuilder::new();
    builder.append(sk, sk.score_point(&x1)?);
    let ksd = builder.ksd();
    trace.rows.push(rec.row(target, 1, ksd));
    Ok(builder)
}

/// Builds `config.n_points` points of a greedy or herding sequence.
pub fn run_sequence(
    kind: SequenceKind,
    config: &RunConfig,
    target: &Target,
) -> Result<(Vec<Vec<f64>>, RunTrace)> {
    for w in config.validate(kind, target)? {
        log::warn!("{w}");
    }
    let sk = SteinKernel::new(config.kernel, target.clone());
    let rec = Recorder::new(target);
    let mut trace = RunTrace::default();
    let mut builder = start_sequence(config, target, &sk, &rec, &mut trace)?;
    while builder.len() < config.n_points {
        sequence_step(
            kind,
            &mut builder,
            &sk,
            &config.optimizer,
            &config.space,
            config.truncation,
            config.seed,
        )?;
        let ksd = builder.ksd();
        trace.rows.push(rec.row(target, builder.len(), ksd));
    }
    trace.points = builder.coordinates();
    trace.ksd_clamps = builder.clamp_count();
    Ok((trace.points.clone(), trace))
}

/// One pass of coordinate descent: each point in turn is replaced by the
/// minimiser of the KSD of the set with that point swapped out.
///
/// The incumbent is always a candidate, so a move is only made when it
/// lowers the objective by more than `1e-10 · (1 + |objective|)`, which
/// keeps KSD non-increasing even after rounding. Returns the number of
/// points moved.
pub fn bcd_sweep(
    builder: &mut SequenceBuilder,
    sk: &SteinKernel,
    optimizer: &Optimizer,
    space: &SearchSpace,
    seed: u64,
    sweep: usize,
) -> Result<usize> {
    let n = builder.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let mut moved = 0;
    for i in 0..n {
        let incumbent = &builder.points()[i];
        let current = 0.5 * sk.k0(incumbent, incumbent) + builder.cross_sum_excluding(sk, incumbent, i);
        // streams above the sequence-building range
        let stream = ((sweep as u64 + 1) << 32) + i as u64;
        let (found, scored) = search_stein_objective(
            SequenceKind::Greedy,
            builder,
            Some(i),
            sk,
            optimizer,
            space,
            n,
            None,
            seed,
            stream,
        )?;
        if found.value < current - 1e-10 * (1.0 + current.abs()) {
            builder.replace(sk, i, scored)?;
            moved += 1;
        }
    }
    Ok(moved)
}

/// Sequence construction followed by coordinate descent until the number
/// of target evaluations reaches `eval_budget`.
///
/// The budget is checked after every added point and every full sweep. If
/// it runs out before `n_points` are placed, the partial sequence is
/// returned with `trace.partial` set.
pub fn run_budgeted(
    kind: SequenceKind,
    config: &RunConfig,
    target: &Target,
    eval_budget: u64,
) -> Result<(Vec<Vec<f64>>, RunTrace)> {
    if eval_budget == 0 {
        return Err(Error::invalid("eval_budget", "must be positive"));
    }
    for w in config.validate(kind, target)? {
        log::warn!("{w}");
    }
    let sk = SteinKernel::new(config.kernel, target.clone());
    let rec = Recorder::new(target);
    let mut trace = RunTrace::default();
    let mut builder = start_sequence(config, target, &sk, &rec, &mut trace)?;
    let spent = |rec: &Recorder| rec.counts(target).total();
    while builder.len() < config.n_points {
        if spent(&rec) >= eval_budget {
            trace.partial = true;
            break;
        }
        sequence_step(
            kind,
            &mut builder,
            &sk,
            &config.optimizer,
            &config.space,
            config.truncation,
            config.seed,
        )?;
        let ksd = builder.ksd();
        trace.rows.push(rec.row(target, builder.len(), ksd));
    }
    if !trace.partial {
        trace.switchover = Some(trace.rows.len() - 1);
        let mut sweep = 0;
        while spent(&rec) < eval_budget {
            let before = spent(&rec);
            bcd_sweep(&mut builder, &sk, &config.optimizer, &config.space, config.seed, sweep)?;
            sweep += 1;
            let ksd = builder.ksd();
            trace.rows.push(rec.row(target, builder.len() + sweep, ksd));
            if spent(&rec) == before {
                break;
            }
        }
    }
    trace.points = builder.coordinates();
    trace.ksd_clamps = builder.clamp_count();
    Ok((trace.points.clone(), trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedSetResult {
    /// Index into the reference set chosen at each iteration.
    pub indices: Vec<usize>,
    /// Selection frequencies `count_i / n`.
    pub weights: Vec<f64>,
    pub trace: RunTrace,
}

/// Greedy or herding selection restricted to a fixed reference set.
///
/// Scores of the reference points are computed once and `log q` is
/// evaluated once per reference point to pick the first element. Each
/// iteration then costs `O(|Y|)` kernel evaluations and no target calls.
pub fn fixed_set_compress(
    reference: &[Vec<f64>],
    sk: &SteinKernel,
    kind: SequenceKind,
    n: usize,
) -> Result<FixedSetResult> {
    if reference.is_empty() {
        return Err(Error::Empty);
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    use rayon::prelude::*;
    let target = sk.target();
    let rec = Recorder::new(target);
    let scored = sk.score_all(reference)?;
    let log_q: Vec<f64> = reference.iter().map(|y| target.log_q(y)).collect::<Result<_>>()?;
    let diag: Vec<f64> = scored.par_iter().map(|p| sk.k0(p, p)).collect();

    let first = {
        let neg: Vec<f64> = log_q.iter().map(|v| -v).collect();
        argmin_first(&neg)
    };
    let mut sums = vec![0.0; reference.len()];
    let mut counts = vec![0usize; reference.len()];
    let mut indices = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut trace = RunTrace::default();
    let mut select = |j: usize, sums: &mut Vec<f64>, total: &mut f64| {
        *total += 2.0 * sums[j] + diag[j];
        let row: Vec<f64> = scored.par_iter().map(|p| sk.k0(&scored[j], p)).collect();
        for (s, r) in sums.iter_mut().zip(row) {
            *s += r;
        }
        counts[j] += 1;
        indices.push(j);
    };
    select(first, &mut sums, &mut total);
    trace.rows.push(rec.row(target, 1, diag[first].max(0.0).sqrt()));
    for it in 2..=n {
        let obj: Vec<f64> = match kind {
            SequenceKind::Greedy => sums.iter().zip(&diag).map(|(s, d)| s + 0.5 * d).collect(),
            SequenceKind::Herding => sums.clone(),
        };
        let j = argmin_first(&obj);
        select(j, &mut sums, &mut total);
        let ksd2 = total / (it * it) as f64;
        if ksd2 < 0.0 {
            trace.ksd_clamps += 1;
        }
        trace.rows.push(rec.row(target, it, ksd2.max(0.0).sqrt()));
    }
    let weights = counts.iter().map(|&c| c as f64 / n as f64).collect();
    trace.points = indices.iter().map(|&i| reference[i].clone()).collect();
    Ok(FixedSetResult {
        indices,
        weights,
        trace,
    })
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        let key = if v.is_nan() { f64::INFINITY } else { *v };
        let cur = if values[best].is_nan() {
            f64::INFINITY
        } else {
            values[best]
        };
        if key < cur {
            best = i;
        }
    }
    best
}
