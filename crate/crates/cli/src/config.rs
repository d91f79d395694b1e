//! Experiment configuration.
//!
//! A config file is TOML. Every optional field falls back to a default that
//! depends on the target (search box, proposal, base scale η, ...). The
//! resolved config, with every default written out, is what ends up in the
//! run manifest, so a manifest can be fed back in as a config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stein_core::eval::SweepConfig;
use stein_core::targets::{
    load_series_csv, synth_fallback, Dataset, GaussianMixtureSpec, GpPosteriorSpec, IgarchSpec, Schema,
    SynthKind, SYNTH_LIDAR_NOISE_SD,
};
use stein_core::{KernelParams, Optimizer, ProposalConfig, SearchSpace, Target, Truncation};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SteinGreedy,
    SteinHerding,
    SteinGreedyN,
    SteinHerdingN,
    Med,
    Svgd,
    McBaseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SteinGreedy => "stein-greedy",
            Method::SteinHerding => "stein-herding",
            Method::SteinGreedyN => "stein-greedy-n",
            Method::SteinHerdingN => "stein-herding-n",
            Method::Med => "med",
            Method::Svgd => "svgd",
            Method::McBaseline => "mc-baseline",
        }
    }

    pub fn is_budgeted(self) -> bool {
        matches!(self, Method::SteinGreedyN | Method::SteinHerdingN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    /// Defaults to the two-component benchmark `½N((−1.5,0), I) + ½N((1.5,0), I)`.
    GaussianMixture {
        weights: Option<Vec<f64>>,
        means: Option<Vec<Vec<f64>>>,
        /// Row-major covariance per component.
        covariances: Option<Vec<Vec<f64>>>,
    },
    StandardNormal {
        dim: usize,
    },
    /// GP hyperparameter posterior; two-column CSV `(x, y)` or synthetic LIDAR-like data.
    GpLidar {
        data: Option<PathBuf>,
        synth_seed: Option<u64>,
        noise_sd: Option<f64>,
    },
    /// IGARCH(1,1) posterior; one-column CSV of returns or synthetic returns.
    Igarch {
        data: Option<PathBuf>,
        synth_seed: Option<u64>,
        sigma1_sq: Option<f64>,
    },
}

impl TargetConfig {
    pub fn label(&self) -> &'static str {
        match self {
            TargetConfig::GaussianMixture { .. } => "gaussian-mixture",
            TargetConfig::StandardNormal { .. } => "standard-normal",
            TargetConfig::GpLidar { .. } => "gp-lidar",
            TargetConfig::Igarch { .. } => "igarch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    NelderMead,
    MonteCarlo,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub n_init: Option<usize>,
    pub n_test: Option<usize>,
    pub n0: Option<usize>,
    pub n_delay: Option<usize>,
    pub mu0: Option<Vec<f64>>,
    /// Row-major initial proposal covariance.
    pub sigma0: Option<Vec<f64>>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SvgdSection {
    pub n_iterations: Option<usize>,
    pub master_step: Option<f64>,
    pub momentum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub proposal_sd: Option<f64>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    /// Random-walk Metropolis settings for targets without exact samplers.
    pub chain: Option<ChainSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    /// Kernels to report KSD under; defaults to the run kernel.
    pub kernels: Option<Vec<KernelParams>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub n_points: usize,
    pub eval_budget: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub truncation_c2: Option<f64>,
    pub med_delta: Option<f64>,
    pub target: TargetConfig,
    pub kernel: Option<KernelParams>,
    pub optimizer: Option<OptimizerConfig>,
    #[serde(rename = "box")]
    pub search_box: Option<SearchSpace>,
    pub svgd: Option<SvgdSection>,
    /// Chain settings for `mc-baseline` on targets without exact samplers.
    pub mcmc: Option<ChainSection>,
    pub reference: Option<ReferenceConfig>,
    pub sweep: Option<SweepConfig>,
    pub evaluate: Option<EvaluateSection>,
    /// Written by the tool; ignored on input.
    pub manifest: Option<toml::Table>,
}

/// Kept apart from the usual run seeds so an iid baseline is never
/// compared against its own draws.
pub const DEFAULT_REFERENCE_SEED: u64 = 271_828;

/// Per-target settings used to fill unspecified fields.
struct TargetDefaults {
    lower: Vec<f64>,
    upper: Vec<f64>,
    mu0: Vec<f64>,
    sigma0: Vec<f64>,
    lambda: f64,
    eta: f64,
    svgd_step: f64,
    chain_sd: f64,
}

fn diag(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = v[i];
    }
    m
}

fn target_defaults(t: &TargetConfig) -> TargetDefaults {
    match t {
        TargetConfig::GaussianMixture { means, .. } => {
            let d = means.as_ref().and_then(|m| m.first()).map_or(2, Vec::len);
            TargetDefaults {
                lower: vec![-5.0; d],
                upper: vec![5.0; d],
                mu0: vec![0.0; d],
                sigma0: diag(&vec![25.0; d]),
                lambda: 1.0,
                eta: 1.0,
                svgd_step: 0.1,
                chain_sd: 1.0,
            }
        }
        TargetConfig::StandardNormal { dim } => TargetDefaults {
            lower: vec![-5.0; *dim],
            upper: vec![5.0; *dim],
            mu0: vec![0.0; *dim],
            sigma0: diag(&vec![25.0; *dim]),
            lambda: 1.0,
            eta: 1.0,
            svgd_step: 0.1,
            chain_sd: 1.0,
        },
        TargetConfig::GpLidar { .. } => TargetDefaults {
            lower: vec![-5.0, -13.0],
            upper: vec![5.0, -7.0],
            mu0: vec![0.0, -10.0],
            sigma0: diag(&[25.0, 25.0]),
            lambda: 1.0,
            eta: 1.0,
            svgd_step: 0.1,
            chain_sd: 0.1,
        },
        TargetConfig::Igarch { .. } => TargetDefaults {
            lower: vec![0.002, 0.05],
            upper: vec![0.04, 0.2],
            mu0: vec![0.021, 0.125],
            sigma0: diag(&[1e-4, 1e-3]),
            lambda: 1e-5,
            eta: 1e-5,
            svgd_step: 1e-3,
            chain_sd: 1e-3,
        },
    }
}

/// Everything needed to run, built from a resolved config.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub target: Target,
    /// Exact sampler for mixture-type targets.
    pub mixture: Option<GaussianMixtureSpec>,
    pub kernel: KernelParams,
    pub optimizer: Optimizer,
    pub space: SearchSpace,
    pub truncation: Truncation,
    pub seeds: Vec<u64>,
}

impl Plan {
    pub fn svgd(&self) -> &SvgdSection {
        self.config.svgd.as_ref().expect("resolved")
    }

    pub fn mcmc(&self) -> &ChainSection {
        self.config.mcmc.as_ref().expect("resolved")
    }

    pub fn reference(&self) -> &ReferenceConfig {
        self.config.reference.as_ref().expect("resolved")
    }

    pub fn sweep(&self) -> &SweepConfig {
        self.config.sweep.as_ref().expect("resolved")
    }

    pub fn med_delta(&self) -> f64 {
        self.config.med_delta.expect("resolved")
    }

    pub fn eval_kernels(&self) -> Vec<KernelParams> {
        self.config
            .evaluate
            .as_ref()
            .and_then(|e| e.kernels.clone())
            .unwrap_or_else(|| vec![self.kernel])
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
}

fn build_target(t: &TargetConfig) -> Result<(Target, Option<GaussianMixtureSpec>), CliError> {
    let v = |e: stein_core::Error| CliError::Validation(format!("target: {e}"));
    Ok(match t {
        TargetConfig::GaussianMixture {
            weights,
            means,
            covariances,
        } => {
            let gm = GaussianMixtureSpec::new(
                weights.clone().expect("resolved"),
                means.clone().expect("resolved"),
                covariances.clone().expect("resolved"),
            )
            .map_err(v)?;
            (Target::new(gm.clone()), Some(gm))
        }
        TargetConfig::StandardNormal { dim } => {
            let gm = GaussianMixtureSpec::standard_normal(*dim);
            (Target::new(gm.clone()), Some(gm))
        }
        TargetConfig::GpLidar {
            data,
            synth_seed,
            noise_sd,
        } => {
            let ds = match data {
                Some(p) => load_series_csv(p, Schema::Paired).map_err(v)?,
                None => synth_fallback(SynthKind::Lidar, synth_seed.unwrap_or(0)),
            };
            let Dataset::Paired { x, y } = ds else {
                return Err(CliError::Validation("target: gp-lidar needs two columns".into()));
            };
            let gp = GpPosteriorSpec::new(x, y, noise_sd.expect("resolved")).map_err(v)?;
            (Target::new(gp), None)
        }
        TargetConfig::Igarch {
            data,
            synth_seed,
            sigma1_sq,
        } => {
            let ds = match data {
                Some(p) => load_series_csv(p, Schema::Series).map_err(v)?,
                None => synth_fallback(SynthKind::Igarch, synth_seed.unwrap_or(0)),
            };
            let Dataset::Series(y) = ds else {
                return Err(CliError::Validation("target: igarch needs one column".into()));
            };
            (Target::new(IgarchSpec::new(y, *sigma1_sq).map_err(v)?), None)
        }
    })
}

fn resolve_target(t: &TargetConfig) -> Result<TargetConfig, CliError> {
    let absolute = |p: &Option<PathBuf>| -> Result<Option<PathBuf>, CliError> {
        match p {
            None => Ok(None),
            Some(p) => std::fs::canonicalize(p)
                .map(Some)
                .map_err(|e| CliError::Validation(format!("target.data {}: {e}", p.display()))),
        }
    };
    Ok(match t {
        TargetConfig::GaussianMixture {
            weights,
            means,
            covariances,
        } => {
            let bench = GaussianMixtureSpec::two_component_benchmark();
            let given = weights.is_some() || means.is_some() || covariances.is_some();
            if given && (weights.is_none() || means.is_none() || covariances.is_none()) {
                return Err(CliError::Validation(
                    "target: weights, means and covariances must be given together".into(),
                ));
            }
            if given {
                t.clone()
            } else {
                TargetConfig::GaussianMixture {
                    weights: Some(bench.weights().to_vec()),
                    means: Some(bench.means()),
                    covariances: Some(vec![vec![1.0, 0.0, 0.0, 1.0]; 2]),
                }
            }
        }
        TargetConfig::StandardNormal { dim } => {
            if *dim == 0 {
                return Err(CliError::Validation("target.dim must be positive".into()));
            }
            t.clone()
        }
        TargetConfig::GpLidar {
            data,
            synth_seed,
            noise_sd,
        } => TargetConfig::GpLidar {
            data: absolute(data)?,
            synth_seed: if data.is_some() { None } else { Some(synth_seed.unwrap_or(0)) },
            noise_sd: Some(noise_sd.unwrap_or(SYNTH_LIDAR_NOISE_SD)),
        },
        TargetConfig::Igarch {
            data,
            synth_seed,
            sigma1_sq,
        } => TargetConfig::Igarch {
            data: absolute(data)?,
            synth_seed: if data.is_some() { None } else { Some(synth_seed.unwrap_or(0)) },
            sigma1_sq: *sigma1_sq,
        },
    })
}

fn core_err(e: stein_core::Error) -> CliError {
    CliError::Validation(e.to_string())
}

/// Fills every default and builds the runnable plan. `seed` overrides the
/// config's seed list.
pub fn resolve(config: &ExperimentConfig, seed: Option<u64>, out: Option<&Path>) -> Result<Plan, CliError> {
    let mut c = config.clone();
    c.manifest = None;
    if c.n_points == 0 {
        return Err(CliError::Validation("n_points must be at least 1".into()));
    }
    c.target = resolve_target(&c.target)?;
    let (target, mixture) = build_target(&c.target)?;
    let d = target.dim();
    let defaults = target_defaults(&c.target);

    let space = match &c.search_box {
        Some(s) => s.clone(),
        None => SearchSpace::new(defaults.lower.clone(), defaults.upper.clone()).map_err(core_err)?,
    };
    if space.dim() != d {
        return Err(CliError::Validation(format!(
            "box: dimension {} does not match target dimension {d}",
            space.dim()
        )));
    }
    c.search_box = Some(space.clone());

    let kernel = c.kernel.unwrap_or(KernelParams::imq(1.0, -0.5).map_err(core_err)?);
    c.kernel = Some(kernel);

    let mut opt = c.optimizer.clone().unwrap_or(OptimizerConfig {
        kind: OptimizerKind::MonteCarlo,
        n_init: None,
        n_test: None,
        n0: None,
        n_delay: None,
        mu0: None,
        sigma0: None,
        lambda: None,
    });
    let proposal = |o: &mut OptimizerConfig| -> Result<ProposalConfig, CliError> {
        o.n_delay.get_or_insert(20);
        o.mu0.get_or_insert_with(|| defaults.mu0.clone());
        o.sigma0.get_or_insert_with(|| defaults.sigma0.clone());
        o.lambda.get_or_insert(defaults.lambda);
        let p = ProposalConfig {
            n_delay: o.n_delay.unwrap_or_default(),
            mu0: o.mu0.clone().unwrap_or_default(),
            sigma0: o.sigma0.clone().unwrap_or_default(),
            lambda: o.lambda.unwrap_or_default(),
        };
        p.validate(d).map_err(|e| CliError::Validation(format!("optimizer: {e}")))?;
        Ok(p)
    };
    let optimizer = match opt.kind {
        OptimizerKind::NelderMead => Optimizer::NelderMead {
            n_init: *opt.n_init.get_or_insert(3),
            proposal: proposal(&mut opt)?,
        },
        OptimizerKind::MonteCarlo => Optimizer::MonteCarlo {
            n_test: *opt.n_test.get_or_insert(20),
            proposal: proposal(&mut opt)?,
        },
        OptimizerKind::Grid => Optimizer::Grid {
            n0: *opt.n0.get_or_insert(100),
        },
    };
    optimizer
        .validate(&space)
        .map_err(|e| CliError::Validation(format!("optimizer: {e}")))?;
    c.optimizer = Some(opt);

    let truncation = match c.truncation_c2 {
        Some(c2) if c2 > 0.0 && c2.is_finite() => Truncation::C2(c2),
        Some(_) => return Err(CliError::Validation("truncation_c2 must be positive".into())),
        None => Truncation::None,
    };
    if c.method.is_budgeted() {
        match c.eval_budget {
            Some(b) if b > 0 => {}
            _ => {
                return Err(CliError::Validation(format!(
                    "eval_budget: required and positive for {}",
                    c.method.name()
                )))
            }
        }
    }
    c.med_delta = Some(c.med_delta.unwrap_or(4.0 * d as f64));
    if c.med_delta.is_some_and(|v| !(v >= 1.0)) {
        return Err(CliError::Validation("med_delta must be at least 1".into()));
    }

    let sv = c.svgd.get_or_insert_with(SvgdSection::default);
    sv.n_iterations.get_or_insert(500);
    sv.master_step.get_or_insert(defaults.svgd_step);
    sv.momentum.get_or_insert(0.9);

    let mc = c.mcmc.get_or_insert_with(ChainSection::default);
    mc.proposal_sd.get_or_insert(defaults.chain_sd);
    mc.burn_in.get_or_insert(1000);
    mc.thin.get_or_insert(1);

    let r = c.reference.get_or_insert_with(ReferenceConfig::default);
    r.n.get_or_insert(2000);
    r.seed.get_or_insert(DEFAULT_REFERENCE_SEED);
    if r.cache_dir.is_none() {
        r.cache_dir = out.or(c.out.as_deref()).map(|o| o.join("reference-cache"));
    }
    if mixture.is_none() {
        let ch = r.chain.get_or_insert_with(ChainSection::default);
        ch.proposal_sd.get_or_insert(defaults.chain_sd);
        ch.burn_in.get_or_insert(5000);
        ch.thin.get_or_insert(100);
    }

    let sweep = c.sweep.get_or_insert_with(|| SweepConfig::with_eta(defaults.eta));
    sweep
        .validate()
        .map_err(|e| CliError::Validation(format!("sweep: {e}")))?;

    let seeds = match seed {
        Some(s) => vec![s],
        None => c.seeds.clone().unwrap_or_else(|| vec![0]),
    };
    if seeds.is_empty() {
        return Err(CliError::Validation("seeds: at least one seed is required".into()));
    }
    c.seeds = Some(seeds.clone());
    if let Some(o) = out {
        c.out = Some(o.to_path_buf());
    }

    Ok(Plan {
        config: c,
        target,
        mixture,
        kernel,
        optimizer,
        space,
        truncation,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
method = "stein-greedy"
n_points = 5

[target]
kind = "gaussian-mixture"
"#;

    #[test]
    fn defaults_follow_target() {
        let plan = resolve(&parse_config(MINIMAL).unwrap(), None, None).unwrap();
        assert_eq!(plan.space, SearchSpace::cube(2, -5.0, 5.0).unwrap());
        assert!(matches!(plan.optimizer, Optimizer::MonteCarlo { n_test: 20, .. }));
        assert_eq!(plan.seeds, vec![0]);
        assert_eq!(plan.med_delta(), 8.0);
        let igarch = parse_config(
            "method = \"svgd\"\nn_points = 4\n[target]\nkind = \"igarch\"\n",
        )
        .unwrap();
        let plan = resolve(&igarch, Some(3), None).unwrap();
        assert_eq!(plan.space.lower(), &[0.002, 0.05]);
        assert_eq!(plan.svgd().master_step, Some(1e-3));
        assert_eq!(plan.sweep().eta, 1e-5);
        assert_eq!(plan.seeds, vec![3]);
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let plan = resolve(&parse_config(MINIMAL).unwrap(), Some(7), None).unwrap();
        let text = toml::to_string(&plan.config).unwrap();
        let again = resolve(&parse_config(&text).unwrap(), None, None).unwrap();
        assert_eq!(again.config, plan.config);
    }

    #[test]
    fn bad_box_names_the_field() {
        let text = format!("{MINIMAL}\n[box]\nlower = [1.0, 0.0]\nupper = [0.0, 1.0]\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("box"), "{err}");
    }

    #[test]
    fn budgeted_methods_need_a_budget() {
        let text = MINIMAL.replace("stein-greedy", "stein-greedy-n");
        let err = resolve(&parse_config(&text).unwrap(), None, None).unwrap_err();
        assert!(err.to_string().contains("eval_budget"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse_config(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn shipped_examples_resolve_to_their_own_defaults() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        for name in ["gaussian-mixture", "gp-lidar", "igarch"] {
            let given = load_config(&dir.join(format!("{name}.toml"))).unwrap();
            let explicit = resolve(&given, None, None).unwrap();
            let mut bare = given.clone();
            bare.optimizer = None;
            bare.search_box = None;
            bare.svgd = None;
            bare.sweep = None;
            let implied = resolve(&bare, None, None).unwrap();
            assert_eq!(explicit.space, implied.space, "{name}");
            assert_eq!(explicit.sweep(), implied.sweep(), "{name}");
            assert_eq!(explicit.svgd(), implied.svgd(), "{name}");
            if name != "gp-lidar" {
                assert_eq!(explicit.optimizer, implied.optimizer, "{name}");
            }
        }
    }
}
