//! The `generate`, `evaluate` and `sweep` commands.

use std::path::{Path, PathBuf};

use serde::Serialize;
use stein_core::eval::{run_sweep, wasserstein1, CellRun, Provenance, SweepRow};
use stein_core::io::{read_points_csv, write_points_csv, write_sweep_csv, write_trace_csv};
use stein_core::{KernelParams, SteinKernel};

use crate::config::{resolve, ExperimentConfig, Plan};
use crate::error::CliError;
use crate::run::{reference_sample, run_method};

/// Result of a command that completed, possibly only partially.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub partial: bool,
    pub dirs: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.partial {
            3
        } else {
            0
        }
    }
}

fn write_manifest(dir: &Path, plan: &Plan, seeds: &[u64], extra: toml::Table) -> Result<(), CliError> {
    let mut config = plan.config.clone();
    config.seeds = Some(seeds.to_vec());
    let mut table = toml::Table::new();
    table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    table.extend(extra);
    config.manifest = Some(table);
    let text = toml::to_string(&config).map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

/// Runs the method once per seed. With one seed the files go straight into
/// `out`, otherwise into `out/seed-<s>/`.
pub fn cmd_generate(config: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<Outcome, CliError> {
    let plan = resolve(config, seed, Some(out))?;
    let mut outcome = Outcome::default();
    for &s in &plan.seeds {
        let dir = if plan.seeds.len() == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("seed-{s}"))
        };
        std::fs::create_dir_all(&dir)?;
        let run = run_method(&plan, plan.kernel, s)?;
        write_points_csv(dir.join("points.csv"), &run.points)?;
        write_trace_csv(dir.join("trace.csv"), &run.trace)?;
        let last = run.final_row();
        let mut extra = toml::Table::new();
        extra.insert("command".into(), "generate".into());
        extra.insert("seed".into(), (s as i64).into());
        extra.insert("partial".into(), run.trace.partial.into());
        extra.insert(
            "status".into(),
            if run.trace.partial { "partial" } else { "ok" }.into(),
        );
        extra.insert("points_written".into(), (run.points.len() as i64).into());
        extra.insert("n_eval".into(), (last.map_or(0, |r| r.n_eval()) as i64).into());
        extra.insert("ksd_clamps".into(), (run.trace.ksd_clamps as i64).into());
        if let Some(sw) = run.trace.switchover {
            extra.insert("switchover_row".into(), (sw as i64).into());
        }
        write_manifest(&dir, &plan, &[s], extra)?;
        if run.trace.partial {
            log::warn!(
                "seed {s}: evaluation budget exhausted after {} points",
                run.points.len()
            );
        }
        outcome.partial |= run.trace.partial;
        outcome.dirs.push(dir);
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
pub struct KsdEntry {
    pub kernel: KernelParams,
    pub ksd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub provenance: Provenance,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub points: PathBuf,
    pub n_points: usize,
    pub ksd: Vec<KsdEntry>,
    pub wasserstein: f64,
    pub reference: ReferenceInfo,
}

/// KSD under each evaluation kernel and Wasserstein distance to the
/// reference sample. Writes `report.json` into `out`.
pub fn cmd_evaluate(config: &ExperimentConfig, points_path: &Path, out: &Path) -> Result<Report, CliError> {
    let plan = resolve(config, None, Some(out))?;
    let points = read_points_csv(points_path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", points_path.display())))?;
    if points[0].len() != plan.target.dim() {
        return Err(CliError::Validation(format!(
            "{}: points have dimension {}, target has {}",
            points_path.display(),
            points[0].len(),
            plan.target.dim()
        )));
    }
    let ksd = plan
        .eval_kernels()
        .into_iter()
        .map(|kernel| {
            let sk = SteinKernel::new(kernel, plan.target.fresh());
            Ok(KsdEntry {
                kernel,
                ksd: sk.ksd(&points)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let reference = reference_sample(&plan)?;
    let wasserstein = wasserstein1(&points, &reference.points)?;
    let report = Report {
        points: points_path.to_path_buf(),
        n_points: points.len(),
        ksd,
        wasserstein,
        reference: ReferenceInfo {
            provenance: reference.provenance,
            n: reference.len(),
            seed: reference.seed,
        },
    };
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct BestCell {
    pub method: &'static str,
    pub target: &'static str,
    pub family: &'static str,
    pub best: Option<SweepRow>,
}

/// Runs the method over the `(α, β)` grid of the configured kernel family
/// and every seed. Writes `sweep.csv`, `best.json` and `manifest.toml`.
pub fn cmd_sweep(config: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<(Vec<SweepRow>, Option<usize>), CliError> {
    let plan = resolve(config, seed, Some(out))?;
    let reference = reference_sample(&plan)?;
    let family = plan.kernel.family();
    let table = run_sweep(family, plan.sweep(), &plan.seeds, &reference.points, |kernel, s| {
        let run = run_method(&plan, kernel, s)?;
        let last = run.final_row().copied();
        Ok(CellRun {
            points: run.points,
            n_eval: last.map_or(0, |r| r.n_eval()),
            ksd: last.map_or(f64::NAN, |r| r.ksd),
        })
    })?;
    std::fs::create_dir_all(out)?;
    write_sweep_csv(out.join("sweep.csv"), &table.rows)?;
    let best = BestCell {
        method: plan.config.method.name(),
        target: plan.config.target.label(),
        family: family.name(),
        best: table.best.map(|i| table.rows[i].clone()),
    };
    std::fs::write(out.join("best.json"), serde_json::to_string_pretty(&best)?)?;
    let mut extra = toml::Table::new();
    extra.insert("command".into(), "sweep".into());
    extra.insert("cells".into(), (table.rows.len() as i64).into());
    let failed = table.rows.iter().filter(|r| r.status != "ok").count();
    extra.insert("failed_cells".into(), (failed as i64).into());
    write_manifest(out, &plan, &plan.seeds, extra)?;
    if table.best.is_none() {
        return Err(CliError::Runtime("every sweep cell failed".into()));
    }
    Ok((table.rows, table.best))
}
