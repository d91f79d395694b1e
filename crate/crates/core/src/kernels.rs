//! Base kernels and the derivatives needed by the Langevin Stein kernel.
//!
//! Every family here has the form `k(x, x') = g(‖u‖²)` where `u = φ(x) − φ(x')`
//! and `φ` is either the identity (IMQ, inverse-log) or the target score
//! `∇log p` (IMQ-score). Writing the kernel this way gives one set of
//! derivative formulas for all three families:
//!
//! ```text
//! ∇x k      =  2 g'(r²) Jx^T u
//! ∇x' k     = −2 g'(r²) Jx'^T u
//! ∇x·∇x' k  = −4 g''(r²) (Jx^T u)·(Jx'^T u) − 2 g'(r²) ⟨Jx, Jx'⟩_F
//! ```
//!
//! with `J` the Jacobian of `φ` (the identity, or the Hessian of `log p`).

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `(α + ‖x − x'‖²)^β`
    Imq,
    /// `(α + log(1 + ‖x − x'‖²))^β`
    InverseLog,
    /// `(α + ‖∇log p(x) − ∇log p(x')‖²)^β`
    ImqScore,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Imq => "imq",
            KernelFamily::InverseLog => "inverse-log",
            KernelFamily::ImqScore => "imq-score",
        }
    }
}

/// Validated kernel parameters.
///
/// `alpha` is the offset added to the squared distance (squared score distance
/// for [`KernelFamily::ImqScore`]); it plays the role of the constant `c²` in
/// the score-kernel convergence results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelParams", into = "RawKernelParams")]
pub struct KernelParams {
    family: KernelFamily,
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawKernelParams {
    family: KernelFamily,
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawKernelParams> for KernelParams {
    type Error = Error;

    fn try_from(raw: RawKernelParams) -> Result<Self> {
        KernelParams::new(raw.family, raw.alpha, raw.beta)
    }
}

impl From<KernelParams> for RawKernelParams {
    fn from(p: KernelParams) -> Self {
        RawKernelParams {
            family: p.family,
            alpha: p.alpha,
            beta: p.beta,
        }
    }
}

impl KernelParams {
    pub fn new(family: KernelFamily, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
        }
        let ok = match family {
            KernelFamily::Imq | KernelFamily::ImqScore => beta > -1.0 && beta < 0.0,
            KernelFamily::InverseLog => beta.is_finite() && beta < 0.0,
        };
        if !ok {
            let range = match family {
                KernelFamily::InverseLog => "beta < 0",
                _ => "-1 < beta < 0",
            };
            return Err(Error::invalid(
                "beta",
                format!("{} requires {range}, got {beta}", family.name()),
            ));
        }
        Ok(KernelParams {
            family,
            alpha,
            beta,
        })
    }

    pub fn imq(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(KernelFamily::Imq, alpha, beta)
    }

    /// Inverse-log kernel with the default exponent `β = −1`.
    pub fn inverse_log(alpha: f64) -> Result<Self> {
        Self::new(KernelFamily::InverseLog, alpha, -1.0)
    }

    pub fn imq_score(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(KernelFamily::ImqScore, alpha, beta)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when the kernel is defined through the target score.
    pub fn uses_score(&self) -> bool {
        self.family == KernelFamily::ImqScore
    }

    /// `g(r²)` and its first two derivatives with respect to `r²`.
    fn profile(&self, r2: f64) -> (f64, f64, f64) {
        let (a, b) = (self.alpha, self.beta);
        match self.family {
            KernelFamily::Imq | KernelFamily::ImqScore => {
                let s = a + r2;
                let g = s.powf(b);
                let g1 = b * g / s;
                let g2 = (b - 1.0) * g1 / s;
                (g, g1, g2)
            }
            KernelFamily::InverseLog => {
                let w = 1.0 + r2;
                let s = a + r2.ln_1p();
                let g = s.powf(b);
                let h = b * g / s; // dg/ds
                let h2 = (b - 1.0) * h / s; // d²g/ds²
                let g1 = h / w;
                let g2 = (h2 - h) / (w * w);
                (g, g1, g2)
            }
        }
    }
}

/// One argument of a kernel evaluation.
///
/// `score` and `jac` (row-major `d×d`, entry `[m][j] = ∂s_m/∂x_j`) are only
/// read by the score-based family, and must be absent for the others.
#[derive(Debug, Clone, Copy)]
pub struct KernelInput<'a> {
    pub x: &'a [f64],
    pub score: Option<&'a [f64]>,
    pub jac: Option<&'a [f64]>,
}

impl<'a> KernelInput<'a> {
    pub fn point(x: &'a [f64]) -> Self {
        KernelInput {
            x,
            score: None,
            jac: None,
        }
    }

    pub fn with_score(x: &'a [f64], score: &'a [f64], jac: Option<&'a [f64]>) -> Self {
        KernelInput {
            x,
            score: Some(score),
            jac,
        }
    }
}

/// Value and all derivatives of `k` at a pair of points.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDerivatives {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_xp: Vec<f64>,
    pub cross_div: f64,
}

fn validate(
    params: &KernelParams,
    a: &KernelInput<'_>,
    b: &KernelInput<'_>,
    need_jac: (bool, bool),
) -> Result<()> {
    let d = a.x.len();
    check_dim(d, b.x.len())?;
    check_finite(a.x, "kernel argument x")?;
    check_finite(b.x, "kernel argument x'")?;
    if params.uses_score() {
        let (sa, sb) = match (a.score, b.score) {
            (Some(sa), Some(sb)) => (sa, sb),
            _ => return Err(Error::MissingScore("imq-score")),
        };
        check_dim(d, sa.len())?;
        check_dim(d, sb.len())?;
        check_finite(sa, "score at x")?;
        check_finite(sb, "score at x'")?;
        for (need, jac) in [(need_jac.0, a.jac), (need_jac.1, b.jac)] {
            match jac {
                Some(j) => {
                    check_dim(d * d, j.len())?;
                    check_finite(j, "score jacobian")?;
                }
                None if need => return Err(Error::MissingScore("imq-score")),
                None => {}
            }
        }
    } else if a.score.is_some() || b.score.is_some() || a.jac.is_some() || b.jac.is_some() {
        return Err(Error::UnexpectedScore);
    }
    Ok(())
}

fn feature_diff(params: &KernelParams, a: &KernelInput<'_>, b: &KernelInput<'_>) -> Vec<f64> {
    let (fa, fb) = if params.uses_score() {
        (a.score.unwrap_or(a.x), b.score.unwrap_or(b.x))
    } else {
        (a.x, b.x)
    };
    fa.iter().zip(fb).map(|(p, q)| p - q).collect()
}

/// `J^T u`; the identity map when `jac` is `None`.
fn jac_t_times(jac: Option<&[f64]>, u: &[f64]) -> Vec<f64> {
    match jac {
        None => u.to_vec(),
        Some(j) => {
            let d = u.len();
            (0..d)
                .map(|col| (0..d).map(|m| j[m * d + col] * u[m]).sum())
                .collect()
        }
    }
}

fn frobenius(ja: Option<&[f64]>, jb: Option<&[f64]>, d: usize) -> f64 {
    match (ja, jb) {
        (Some(a), Some(b)) => a.iter().zip(b).map(|(p, q)| p * q).sum(),
        _ => d as f64,
    }
}

fn sq_norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum()
}

/// Kernel value `k(x, x')`.
pub fn kernel_eval(params: &KernelParams, a: &KernelInput<'_>, b: &KernelInput<'_>) -> Result<f64> {
    validate(params, a, b, (false, false))?;
    let u = feature_diff(params, a, b);
    Ok(params.profile(sq_norm(&u)).0)
}

/// `∇x k(x, x')`.
pub fn kernel_grad_x(
    params: &KernelParams,
    a: &KernelInput<'_>,
    b: &KernelInput<'_>,
) -> Result<Vec<f64>> {
    validate(params, a, b, (true, false))?;
    let u = feature_diff(params, a, b);
    let (_, g1, _) = params.profile(sq_norm(&u));
    let jx = if params.uses_score() { a.jac } else { None };
    Ok(jac_t_times(jx, &u).into_iter().map(|v| 2.0 * g1 * v).collect())
}

/// `∇x' k(x, x')`.
pub fn kernel_grad_xp(
    params: &KernelParams,
    a: &KernelInput<'_>,
    b: &KernelInput<'_>,
) -> Result<Vec<f64>> {
    validate(params, a, b, (false, true))?;
    let u = feature_diff(params, a, b);
    let (_, g1, _) = params.profile(sq_norm(&u));
    let jxp = if params.uses_score() { b.jac } else { None };
    Ok(jac_t_times(jxp, &u).into_iter().map(|v| -2.0 * g1 * v).collect())
}

/// `∇x · ∇x' k(x, x')`, the trace of the mixed second derivative.
pub fn kernel_cross_div(
    params: &KernelParams,
    a: &KernelInput<'_>,
    b: &KernelInput<'_>,
) -> Result<f64> {
    validate(params, a, b, (true, true))?;
    Ok(derivatives_unchecked(params, a, b).cross_div)
}

/// All of the above in one pass.
pub fn kernel_derivatives(
    params: &KernelParams,
    a: &KernelInput<'_>,
    b: &KernelInput<'_>,
) -> Result<KernelDerivatives> {
    validate(params, a, b, (true, true))?;
    Ok(derivatives_unchecked(params, a, b))
}

pub(crate) fn derivatives_unchecked(
    params: &KernelParams,
    a: &KernelInput<'_>,
    b: &KernelInput<'_>,
) -> KernelDerivatives {
    let d = a.x.len();
    let u = feature_diff(params, a, b);
    let (g, g1, g2) = params.profile(sq_norm(&u));
    let (ja, jb) = if params.uses_score() {
        (a.jac, b.jac)
    } else {
        (None, None)
    };
    let va = jac_t_times(ja, &u);
    let vb = jac_t_times(jb, &u);
    let dot: f64 = va.iter().zip(&vb).map(|(p, q)| p * q).sum();
    KernelDerivatives {
        value: g,
        cross_div: -4.0 * g2 * dot - 2.0 * g1 * frobenius(ja, jb, d),
        grad_x: va.into_iter().map(|v| 2.0 * g1 * v).collect(),
        grad_xp: vb.into_iter().map(|v| -2.0 * g1 * v).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: f64 = 1e-5;

    fn imq() -> KernelParams {
        KernelParams::imq(1.0, -0.5).unwrap()
    }

    fn pt(x: &[f64]) -> KernelInput<'_> {
        KernelInput::point(x)
    }

    #[test]
    fn rejects_bad_params() {
        assert!(KernelParams::imq(0.0, -0.5).is_err());
        assert!(KernelParams::imq(1.0, 0.5).is_err());
        assert!(KernelParams::imq(1.0, -1.0).is_err());
        assert!(KernelParams::new(KernelFamily::InverseLog, 1.0, -3.0).is_ok());
        assert!(KernelParams::new(KernelFamily::InverseLog, 1.0, 0.0).is_err());
        assert!(KernelParams::imq_score(2.0, -0.9).is_ok());
    }

    #[test]
    fn imq_values() {
        let k = imq();
        assert_eq!(kernel_eval(&k, &pt(&[0.3, 1.0]), &pt(&[0.3, 1.0])).unwrap(), 1.0);
        let v = kernel_eval(&k, &pt(&[0.0, 0.0]), &pt(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(v, 2f64.powf(-0.5), max_relative = 1e-15);
    }

    #[test]
    fn inverse_log_value() {
        let k = KernelParams::inverse_log(1.0).unwrap();
        let r = (std::f64::consts::E - 1.0).sqrt();
        let v = kernel_eval(&k, &pt(&[r]), &pt(&[0.0])).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn score_kernel_with_equal_scores_is_constant() {
        let k = KernelParams::imq_score(2.0, -0.3).unwrap();
        let s = [0.4, -1.2];
        let a = KernelInput::with_score(&[1.0, 5.0], &s, None);
        let b = KernelInput::with_score(&[-3.0, 0.0], &s, None);
        assert_relative_eq!(kernel_eval(&k, &a, &b).unwrap(), 2f64.powf(-0.3));
    }

    #[test]
    fn imq_gradients() {
        let k = imq();
        let gx = kernel_grad_x(&k, &pt(&[1.0, 0.0]), &pt(&[0.0, 0.0])).unwrap();
        assert_relative_eq!(gx[0], -0.353_553_390_593_273_8, max_relative = 1e-12);
        assert_eq!(gx[1], 0.0);
        let gxp = kernel_grad_xp(&k, &pt(&[1.0, 0.0]), &pt(&[0.0, 0.0])).unwrap();
        assert_relative_eq!(gxp[0], 0.353_553_390_593_273_8, max_relative = 1e-12);
        let z = kernel_grad_x(&k, &pt(&[0.7, 0.1]), &pt(&[0.7, 0.1])).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn imq_cross_div_values() {
        let k = imq();
        let c = kernel_cross_div(&k, &pt(&[0.2, 0.2]), &pt(&[0.2, 0.2])).unwrap();
        assert_relative_eq!(c, 2.0, max_relative = 1e-15);
        let c = kernel_cross_div(&k, &pt(&[1.0]), &pt(&[0.0])).unwrap();
        assert_relative_eq!(c, -0.176_776_695_296_636_9, max_relative = 1e-12);
    }

    #[test]
    fn errors() {
        let k = imq();
        assert!(matches!(
            kernel_eval(&k, &pt(&[0.0]), &pt(&[0.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            kernel_eval(&k, &pt(&[f64::NAN]), &pt(&[0.0])),
            Err(Error::NonFinite(_))
        ));
        let ks = KernelParams::imq_score(1.0, -0.5).unwrap();
        assert!(matches!(
            kernel_eval(&ks, &pt(&[0.0]), &pt(&[0.0])),
            Err(Error::MissingScore(_))
        ));
        let s = [1.0];
        let a = KernelInput::with_score(&[0.0], &s, None);
        assert!(kernel_eval(&ks, &a, &a).is_ok());
        assert!(matches!(
            kernel_grad_x(&ks, &a, &a),
            Err(Error::MissingScore(_))
        ));
        assert!(matches!(
            kernel_eval(&k, &a, &a),
            Err(Error::UnexpectedScore)
        ));
    }

    // Finite-difference oracles below only ever call `kernel_eval`.

    fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[j] += H;
                m[j] -= H;
                (f(&p) - f(&m)) / (2.0 * H)
            })
            .collect()
    }

    fn fd_cross(f: &dyn Fn(&[f64], &[f64]) -> f64, x: &[f64], xp: &[f64]) -> f64 {
        let h = 1e-4;
        (0..x.len())
            .map(|j| {
                let shift = |v: &[f64], s: f64| {
                    let mut w = v.to_vec();
                    w[j] += s;
                    w
                };
                (f(&shift(x, h), &shift(xp, h)) - f(&shift(x, h), &shift(xp, -h))
                    - f(&shift(x, -h), &shift(xp, h))
                    + f(&shift(x, -h), &shift(xp, -h)))
                    / (4.0 * h * h)
            })
            .sum()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        let scale = a.abs().max(b.abs()).max(1e-3);
        assert!((a - b).abs() / scale <= tol, "{a} vs {b}");
    }

    #[test]
    fn inverse_log_gradient_matches_finite_difference() {
        let k = KernelParams::inverse_log(1.0).unwrap();
        let f = |x: &[f64]| kernel_eval(&k, &pt(x), &pt(&[0.0])).unwrap();
        let fd = fd_grad(&f, &[0.3]);
        let an = kernel_grad_x(&k, &pt(&[0.3]), &pt(&[0.0])).unwrap();
        assert_close(an[0], fd[0], 1e-6);
        assert!(an[0] < 0.0);
    }

    #[test]
    fn radial_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let families = [
            KernelParams::imq(1.3, -0.5).unwrap(),
            KernelParams::imq(0.4, -0.9).unwrap(),
            KernelParams::inverse_log(1.0).unwrap(),
            KernelParams::new(KernelFamily::InverseLog, 0.5, -2.0).unwrap(),
        ];
        for k in &families {
            for _ in 0..20 {
                let d = rng.random_range(1..4);
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let xp: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let kv = |a: &[f64], b: &[f64]| kernel_eval(k, &pt(a), &pt(b)).unwrap();
                let gx = kernel_grad_x(k, &pt(&x), &pt(&xp)).unwrap();
                let fdx = fd_grad(&|v| kv(v, &xp), &x);
                let gxp = kernel_grad_xp(k, &pt(&x), &pt(&xp)).unwrap();
                let fdxp = fd_grad(&|v| kv(&x, v), &xp);
                for j in 0..d {
                    assert_close(gx[j], fdx[j], 1e-4);
                    assert_close(gxp[j], fdxp[j], 1e-4);
                }
                let c = kernel_cross_div(k, &pt(&x), &pt(&xp)).unwrap();
                assert_close(c, fd_cross(&kv, &x, &xp), 1e-4);
                // swapping arguments swaps the two gradients
                let swapped = kernel_grad_x(k, &pt(&xp), &pt(&x)).unwrap();
                assert_eq!(swapped, gxp);
            }
        }
    }

    /// Smooth nonlinear score map used to exercise the score kernel.
    fn toy_score(x: &[f64]) -> Vec<f64> {
        vec![-x[0] + 0.3 * x[1].sin(), -x[1] - 0.2 * x[0].powi(3)]
    }

    fn toy_jac(x: &[f64]) -> Vec<f64> {
        vec![-1.0, 0.3 * x[1].cos(), -0.6 * x[0] * x[0], -1.0]
    }

    #[test]
    fn score_kernel_derivatives_match_finite_differences() {
        let k = KernelParams::imq_score(0.7, -0.5).unwrap();
        let kv = |a: &[f64], b: &[f64]| {
            let (sa, sb) = (toy_score(a), toy_score(b));
            kernel_eval(
                &k,
                &KernelInput::with_score(a, &sa, None),
                &KernelInput::with_score(b, &sb, None),
            )
            .unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let xp: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (sx, sxp, jx, jxp) = (toy_score(&x), toy_score(&xp), toy_jac(&x), toy_jac(&xp));
            let a = KernelInput::with_score(&x, &sx, Some(&jx));
            let b = KernelInput::with_score(&xp, &sxp, Some(&jxp));
            let all = kernel_derivatives(&k, &a, &b).unwrap();
            let fdx = fd_grad(&|v| kv(v, &xp), &x);
            let fdxp = fd_grad(&|v| kv(&x, v), &xp);
            for j in 0..2 {
                assert_close(all.grad_x[j], fdx[j], 1e-4);
                assert_close(all.grad_xp[j], fdxp[j], 1e-4);
            }
            assert_close(all.cross_div, fd_cross(&kv, &x, &xp), 1e-4);
            assert_eq!(all.value, kv(&x, &xp));
        }
    }

    #[test]
    fn gram_matrix_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [imq(), KernelParams::inverse_log(0.5).unwrap()] {
            let pts: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let gram = nalgebra::DMatrix::from_fn(20, 20, |i, j| {
                kernel_eval(&k, &pt(&pts[i]), &pt(&pts[j])).unwrap()
            });
            let eig = gram.clone().symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8 * gram.trace());
        }
    }

    proptest::proptest! {
        #[test]
        fn symmetric_and_bounded(
            x in proptest::collection::vec(-5.0..5.0f64, 3),
            xp in proptest::collection::vec(-5.0..5.0f64, 3),
            alpha in 0.1..5.0f64,
            beta in -0.95..-0.05f64,
        ) {
            for k in [
                KernelParams::imq(alpha, beta).unwrap(),
                KernelParams::new(KernelFamily::InverseLog, alpha, beta).unwrap(),
            ] {
                let a = kernel_eval(&k, &pt(&x), &pt(&xp)).unwrap();
                let b = kernel_eval(&k, &pt(&xp), &pt(&x)).unwrap();
                proptest::prop_assert_eq!(a, b);
                let diag = kernel_eval(&k, &pt(&x), &pt(&x)).unwrap();
                proptest::prop_assert!((diag - alpha.powf(beta)).abs() <= 1e-14 * diag);
                proptest::prop_assert!(a <= diag);
            }
        }
    }
}
