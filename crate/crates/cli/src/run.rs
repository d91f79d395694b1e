//! Method dispatch and reference samples.

use std::path::PathBuf;

use stein_core::algorithms::{first_point, run_budgeted, run_sequence, TraceRow};
use stein_core::baselines::{med_greedy, svgd_run, MedConfig, SvgdConfig};
use stein_core::eval::{iid_gm_sample, ksd_path, rwm_sample, Provenance, ReferenceSample, RwmConfig};
use stein_core::io::{read_points_csv, write_points_csv};
use stein_core::{KernelParams, RunConfig, RunTrace, SequenceKind, SteinKernel};

use crate::config::{Method, Plan};
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub points: Vec<Vec<f64>>,
    pub trace: RunTrace,
}

impl RunOutput {
    pub fn final_row(&self) -> Option<&TraceRow> {
        self.trace.rows.last()
    }
}

fn fill_ksd(trace: &mut RunTrace, points: &[Vec<f64>], sk: &SteinKernel) -> stein_core::Result<()> {
    let path = ksd_path(sk, points)?;
    for (row, k) in trace.rows.iter_mut().zip(path) {
        row.ksd = k;
    }
    Ok(())
}

/// Runs the configured method once with `kernel` and `seed` on a fresh
/// copy of the target, so evaluation counts start at zero.
pub fn run_method(plan: &Plan, kernel: KernelParams, seed: u64) -> stein_core::Result<RunOutput> {
    let target = plan.target.fresh();
    let run_config = RunConfig {
        n_points: plan.config.n_points,
        optimizer: plan.optimizer.clone(),
        space: plan.space.clone(),
        kernel,
        truncation: plan.truncation,
        delta: 0.0,
        seed,
    };
    let kind = match plan.config.method {
        Method::SteinGreedy | Method::SteinGreedyN => SequenceKind::Greedy,
        _ => SequenceKind::Herding,
    };
    let (points, trace) = match plan.config.method {
        Method::SteinGreedy | Method::SteinHerding => {
            for w in run_config.validate(kind, &target)? {
                log::warn!("{w}");
            }
            run_sequence(kind, &run_config, &target)?
        }
        Method::SteinGreedyN | Method::SteinHerdingN => {
            for w in run_config.validate(kind, &target)? {
                log::warn!("{w}");
            }
            let budget = plan.config.eval_budget.expect("resolved");
            run_budgeted(kind, &run_config, &target, budget)?
        }
        Method::Med => {
            let med = MedConfig {
                n_points: plan.config.n_points,
                delta: plan.med_delta(),
                optimizer: plan.optimizer.clone(),
                space: plan.space.clone(),
                seed,
            };
            let (points, mut trace) = med_greedy(&target, &med)?;
            // scored on a separate copy so the method's counts stay untouched
            fill_ksd(&mut trace, &points, &SteinKernel::new(kernel, target.fresh()))?;
            (points, trace)
        }
        Method::Svgd => {
            let s = plan.svgd();
            let cfg = SvgdConfig {
                n_particles: plan.config.n_points,
                kernel,
                master_step: s.master_step.expect("resolved"),
                momentum: s.momentum.expect("resolved"),
                n_iterations: s.n_iterations.expect("resolved"),
                space: plan.space.clone(),
                initial: None,
            };
            svgd_run(&target, &cfg)?
        }
        Method::McBaseline => {
            let n = plan.config.n_points;
            let sample = match &plan.mixture {
                Some(gm) => iid_gm_sample(gm, n, seed)?,
                None => {
                    let c = plan.mcmc();
                    let cfg = RwmConfig {
                        n_samples: n,
                        proposal_sd: c.proposal_sd.expect("resolved"),
                        burn_in: c.burn_in.expect("resolved"),
                        thin: c.thin.expect("resolved"),
                    };
                    rwm_sample(&target, &box_centre(plan), &cfg, seed)?.0
                }
            };
            // the whole chain is charged to every row
            let counts = target.counts();
            let mut trace = RunTrace {
                rows: (1..=n)
                    .map(|i| TraceRow {
                        iter: i,
                        n_logp: counts.n_logp,
                        n_grad: counts.n_grad,
                        ksd: f64::NAN,
                        wall_ms: 0.0,
                    })
                    .collect(),
                points: sample.points.clone(),
                ..RunTrace::default()
            };
            fill_ksd(&mut trace, &sample.points, &SteinKernel::new(kernel, target.fresh()))?;
            (sample.points, trace)
        }
    };
    Ok(RunOutput { points, trace })
}

fn box_centre(plan: &Plan) -> Vec<f64> {
    plan.space
        .lower()
        .iter()
        .zip(plan.space.upper())
        .map(|(l, u)| 0.5 * (l + u))
        .collect()
}

/// Cache file for the reference sample, keyed by target kind, seed and size.
pub fn reference_cache_path(plan: &Plan) -> Option<PathBuf> {
    let r = plan.reference();
    r.cache_dir.as_ref().map(|dir| {
        dir.join(format!(
            "{}-seed{}-n{}.csv",
            plan.config.target.label(),
            r.seed.expect("resolved"),
            r.n.expect("resolved")
        ))
    })
}

/// Exact draws for mixture targets, a thinned random-walk Metropolis chain
/// started at the mode otherwise. Read from the cache when present.
pub fn reference_sample(plan: &Plan) -> Result<ReferenceSample, CliError> {
    let r = plan.reference();
    let (n, seed) = (r.n.expect("resolved"), r.seed.expect("resolved"));
    let provenance = if plan.mixture.is_some() {
        Provenance::Iid
    } else {
        Provenance::RwmMcmc
    };
    let cache = reference_cache_path(plan);
    if let Some(path) = cache.as_ref().filter(|p| p.exists()) {
        log::info!("reading reference sample from {}", path.display());
        let pts = read_points_csv(path)?;
        if pts.len() != n || pts[0].len() != plan.target.dim() {
            return Err(CliError::Validation(format!(
                "reference cache {} does not hold {n} points of dimension {}",
                path.display(),
                plan.target.dim()
            )));
        }
        return Ok(ReferenceSample::new(pts, provenance, seed)?);
    }
    let sample = match &plan.mixture {
        Some(gm) => iid_gm_sample(gm, n, seed)?,
        None => {
            let target = plan.target.fresh();
            let start = first_point(&target, &plan.optimizer, &plan.space, seed)?;
            let c = r.chain.as_ref().expect("resolved");
            let cfg = RwmConfig {
                n_samples: n,
                proposal_sd: c.proposal_sd.expect("resolved"),
                burn_in: c.burn_in.expect("resolved"),
                thin: c.thin.expect("resolved"),
            };
            let (sample, stats) = rwm_sample(&target, &start, &cfg, seed)?;
            log::info!(
                "reference chain: acceptance {:.3}, proposal sd {:.3e}",
                stats.acceptance_rate,
                stats.proposal_sd
            );
            sample
        }
    };
    if let Some(path) = cache {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_points_csv(&path, &sample.points)?;
    }
    Ok(sample)
}
