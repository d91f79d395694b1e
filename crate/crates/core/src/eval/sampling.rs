//! Reference samplers: exact mixture draws and adaptive random-walk Metropolis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::targets::{GaussianMixtureSpec, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Iid,
    RwmMcmc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub points: Vec<Vec<f64>>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl ReferenceSample {
    pub fn new(points: Vec<Vec<f64>>, provenance: Provenance, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty);
        }
        let d = points[0].len();
        for p in &points {
            check_dim(d, p.len())?;
            check_finite(p, "reference point")?;
        }
        Ok(ReferenceSample {
            points,
            provenance,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n_samples` exact draws: a component by weight, then a Gaussian draw.
pub fn iid_gm_sample(spec: &GaussianMixtureSpec, n_samples: usize, seed: u64) -> Result<ReferenceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n_samples).map(|_| spec.sample_labelled(&mut rng).1).collect();
    ReferenceSample::new(points, Provenance::Iid, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RwmConfig {
    pub n_samples: usize,
    /// Initial isotropic proposal standard deviation.
    pub proposal_sd: f64,
    pub burn_in: usize,
    pub thin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwmStats {
    /// Acceptance rate over the post-burn-in chain.
    pub acceptance_rate: f64,
    /// Proposal scale frozen at the end of burn-in.
    pub proposal_sd: f64,
}

/// Steps per adaptation window during burn-in.
pub const ADAPT_WINDOW: usize = 50;
const TARGET_ACCEPTANCE: f64 = 0.234;

/// Random-walk Metropolis from `start`.
///
/// During burn-in the proposal scale is multiplied by 1.1 after every
/// 50-step window whose acceptance rate exceeds 0.234 and by 0.9
/// otherwise; it is then frozen. Proposals outside the target's domain
/// are rejected without evaluating `log q`. Each evaluated proposal costs
/// one counted `log q` call.
pub fn rwm_sample(target: &Target, start: &[f64], config: &RwmConfig, seed: u64) -> Result<(ReferenceSample, RwmStats)> {
    check_dim(target.dim(), start.len())?;
    if config.n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    if config.thin == 0 {
        return Err(Error::invalid("thin", "must be at least 1"));
    }
    if !(config.proposal_sd > 0.0 && config.proposal_sd.is_finite()) {
        return Err(Error::invalid("proposal_sd", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = target.domain();
    let mut x = start.to_vec();
    let mut lq = target.log_q(&x)?;
    if !lq.is_finite() {
        return Err(Error::NonFinite("log density at chain start"));
    }
    let mut sd = config.proposal_sd;
    let step = |x: &mut Vec<f64>, lq: &mut f64, sd: f64, rng: &mut ChaCha8Rng| -> Result<bool> {
        let prop: Vec<f64> = x
            .iter()
            .map(|v| v + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let u: f64 = rng.random();
        if let Some(dom) = &domain {
            if !dom.contains(&prop) {
                return Ok(false);
            }
        }
        let lp = target.log_q(&prop)?;
        if lp.is_nan() {
            return Err(Error::NonFinite("log density"));
        }
        if u.ln() < lp - *lq {
            *x = prop;
            *lq = lp;
            return Ok(true);
        }
        Ok(false)
    };

    let mut window_accepts = 0;
    for s in 0..config.burn_in {
        if step(&mut x, &mut lq, sd, &mut rng)? {
            window_accepts += 1;
        }
        if (s + 1) % ADAPT_WINDOW == 0 {
            if window_accepts == 0 {
                return Err(Error::ZeroAcceptance { step: s + 1 });
            }
            let rate = window_accepts as f64 / ADAPT_WINDOW as f64;
            sd *= if rate > TARGET_ACCEPTANCE { 1.1 } else { 0.9 };
            window_accepts = 0;
        }
    }
    let total = config.n_samples * config.thin;
    let mut accepted = 0usize;
    let mut points = Vec::with_capacity(config.n_samples);
    for s in 0..total {
        if step(&mut x, &mut lq, sd, &mut rng)? {
            accepted += 1;
        }
        if (s + 1) % config.thin == 0 {
            points.push(x.clone());
        }
    }
    let stats = RwmStats {
        acceptance_rate: accepted as f64 / total as f64,
        proposal_sd: sd,
    };
    Ok((ReferenceSample::new(points, Provenance::RwmMcmc, seed)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_weights_use_first_component() {
        let gm = GaussianMixtureSpec::new(
            vec![1.0, 0.0],
            vec![vec![-10.0], vec![10.0]],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        let s = iid_gm_sample(&gm, 500, 2).unwrap();
        assert!(s.points.iter().all(|p| p[0] < 0.0));
        assert_eq!(s, iid_gm_sample(&gm, 500, 2).unwrap());
        assert_eq!(s.provenance, Provenance::Iid);
    }

    #[test]
    fn component_frequencies_within_binomial_bounds() {
        let gm = GaussianMixtureSpec::new(
            vec![0.3, 0.7],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![vec![1.0, 0.0, 0.0, 1.0]; 2],
        )
        .unwrap();
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let first = (0..n).filter(|_| gm.sample_labelled(&mut rng).0 == 0).count() as f64;
        let sd = (n as f64 * 0.3 * 0.7).sqrt();
        assert!((first - 0.3 * n as f64).abs() <= 3.0 * sd, "{first}");
    }

    fn normal_chain(seed: u64) -> (ReferenceSample, RwmStats) {
        let t = Target::new(GaussianMixtureSpec::standard_normal(1));
        let cfg = RwmConfig {
            n_samples: 5000,
            proposal_sd: 0.2,
            burn_in: 2000,
            thin: 2,
        };
        rwm_sample(&t, &[0.0], &cfg, seed).unwrap()
    }

    #[test]
    fn chain_mean_and_acceptance() {
        let (s, stats) = normal_chain(3);
        assert_eq!(s.len(), 5000);
        let mean = s.points.iter().map(|p| p[0]).sum::<f64>() / 5000.0;
        let ess = 5000.0 / 10.0;
        assert!(mean.abs() <= 3.0 * (1.0f64 / ess).sqrt(), "{mean}");
        assert!((0.1..=0.5).contains(&stats.acceptance_rate), "{stats:?}");
        assert!(stats.proposal_sd > 0.2);
    }

    #[test]
    fn chain_is_deterministic() {
        assert_eq!(normal_chain(4).0, normal_chain(4).0);
        assert_ne!(normal_chain(4).0, normal_chain(5).0);
    }

    #[test]
    fn hopeless_scale_is_reported() {
        let gm = GaussianMixtureSpec::new(vec![1.0], vec![vec![0.0]], vec![vec![1e-12]]).unwrap();
        let t = Target::new(gm);
        let cfg = RwmConfig {
            n_samples: 10,
            proposal_sd: 1e3,
            burn_in: 100,
            thin: 1,
        };
        assert!(matches!(rwm_sample(&t, &[0.0], &cfg, 0), Err(Error::ZeroAcceptance { step: 50 })));
    }

    #[test]
    fn out_of_domain_proposals_are_rejected() {
        use crate::targets::{synth_fallback, Dataset, IgarchSpec, SynthKind};
        let Dataset::Series(y) = synth_fallback(SynthKind::Igarch, 1) else { unreachable!() };
        let t = Target::new(IgarchSpec::new(y, None).unwrap());
        let cfg = RwmConfig {
            n_samples: 200,
            proposal_sd: 0.02,
            burn_in: 500,
            thin: 1,
        };
        let (s, _) = rwm_sample(&t, &[0.02, 0.1], &cfg, 1).unwrap();
        let dom = t.domain().unwrap();
        assert!(s.points.iter().all(|p| dom.contains(p)));
    }
}
