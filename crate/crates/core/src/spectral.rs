//! FEXP spectral densities and their autocovariance sequences.
//!
//! The FEXP density is `f(λ) = |1 - e^{iλ}|^{-2d} exp(Σ_{j=0}^K θ_j cos jλ)`.
//! Autocovariances follow the convention `γ(τ) = ∫_{-π}^{π} f(λ) e^{iτλ} dλ`,
//! so white noise of unit variance has `f ≡ 1/2π` and `θ_0 = log(σ²/2π)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature;

const TWO_PI: f64 = 2.0 * PI;

/// One point of the FEXP model: memory parameter `d` and cosine
/// coefficients `θ_0..θ_K` of the log short-memory spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FexpParams {
    d: f64,
    theta: Vec<f64>,
}

impl FexpParams {
    pub fn new(d: f64, theta: Vec<f64>) -> Result<Self> {
        if !d.is_finite() || d <= -0.5 || d >= 0.5 {
            return Err(Error::InvalidParameter(format!("d = {d} must lie in (-1/2, 1/2)")));
        }
        if theta.is_empty() {
            return Err(Error::InvalidParameter("theta must contain at least theta_0".into()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("theta entries must be finite".into()));
        }
        Ok(Self { d, theta })
    }

    /// ARFIMA(0, d, 0) with innovation variance `sigma2`.
    pub fn arfima(d: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma2 = {sigma2} must be positive")));
        }
        Self::new(d, vec![(sigma2 / TWO_PI).ln()])
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// FEXP order `K`.
    pub fn order(&self) -> usize {
        self.theta.len() - 1
    }

    /// `σ² = 2π e^{θ_0}`.
    pub fn sigma2(&self) -> f64 {
        TWO_PI * self.theta[0].exp()
    }

    /// `log f(λ)`.
    pub fn log_spectrum(&self, lambda: f64) -> Result<f64> {
        let lambda = check_frequency(lambda)?.abs();
        let short = cosine_sum(&self.theta, lambda);
        if self.d == 0.0 {
            return Ok(short);
        }
        if lambda == 0.0 {
            return Err(Error::PoleAtZero(self.d));
        }
        Ok(-2.0 * self.d * log_abs_one_minus_exp(lambda) + short)
    }

    /// `f(λ)`. Zero at the origin when `d < 0`, an error when `d > 0`.
    pub fn eval(&self, lambda: f64) -> Result<f64> {
        let lambda = check_frequency(lambda)?.abs();
        if lambda == 0.0 {
            if self.d > 0.0 {
                return Err(Error::PoleAtZero(self.d));
            }
            if self.d < 0.0 {
                return Ok(0.0);
            }
        }
        Ok(self.log_spectrum(lambda)?.exp())
    }
}

impl fmt::Display for FexpParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fexp(d={};theta=[", self.d)?;
        for (i, t) in self.theta.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "])")
    }
}

fn check_frequency(lambda: f64) -> Result<f64> {
    // a few ulps of slack so that 2πj/n with j = n/2 is accepted
    if !lambda.is_finite() || lambda.abs() > PI * (1.0 + 4.0 * f64::EPSILON) {
        return Err(Error::FrequencyOutOfRange(lambda));
    }
    Ok(lambda.clamp(-PI, PI))
}

/// `log|1 - e^{iλ}| = log(2 |sin(λ/2)|)`.
pub fn log_abs_one_minus_exp(lambda: f64) -> f64 {
    (2.0 * (0.5 * lambda).sin().abs()).ln()
}

/// `Σ_j c_j cos(jλ)` by Clenshaw recurrence.
pub fn cosine_sum(coef: &[f64], lambda: f64) -> f64 {
    let two_cos = 2.0 * lambda.cos();
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coef.iter().skip(1).rev() {
        let b0 = c + two_cos * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coef[0] + 0.5 * two_cos * b1 - b2
}

/// `f(λ)` for FEXP parameters.
pub fn eval_fexp(params: &FexpParams, lambda: f64) -> Result<f64> {
    params.eval(lambda)
}

/// `log f(λ_i)` elementwise.
pub fn log_spectrum_grid(params: &FexpParams, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&l| params.log_spectrum(l)).collect()
}

/// Fourier frequencies `2πj/n`, `j = 1..⌊n/2⌋`.
pub fn fourier_grid(n: usize) -> Vec<f64> {
    (1..=n / 2).map(|j| TWO_PI * j as f64 / n as f64).collect()
}

pub type SmoothPart = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A symmetric spectral density on `[-π, π]`.
#[derive(Clone)]
pub enum SpectralFn {
    Fexp(FexpParams),
    /// `|λ|^{-2d} g(λ)` for a caller-supplied positive, even `g`.
    PowerLawTimesSmooth {
        d: f64,
        smooth: SmoothPart,
    },
    /// `c · f`.
    Scaled(f64, Box<SpectralFn>),
}

impl fmt::Debug for SpectralFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralFn::Fexp(p) => write!(f, "Fexp({p})"),
            SpectralFn::PowerLawTimesSmooth { d, .. } => write!(f, "PowerLawTimesSmooth(d={d})"),
            SpectralFn::Scaled(c, inner) => write!(f, "Scaled({c}, {inner:?})"),
        }
    }
}

impl From<FexpParams> for SpectralFn {
    fn from(p: FexpParams) -> Self {
        SpectralFn::Fexp(p)
    }
}

impl SpectralFn {
    pub fn power_law(d: f64, smooth: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SpectralFn::PowerLawTimesSmooth { d, smooth: Arc::new(smooth) }
    }

    pub fn scaled(self, c: f64) -> Self {
        SpectralFn::Scaled(c, Box::new(self))
    }

    /// Memory parameter (exponent of the pole at the origin).
    pub fn memory(&self) -> f64 {
        match self {
            SpectralFn::Fexp(p) => p.d,
            SpectralFn::PowerLawTimesSmooth { d, .. } => *d,
            SpectralFn::Scaled(_, inner) => inner.memory(),
        }
    }

    pub fn eval(&self, lambda: f64) -> Result<f64> {
        match self {
            SpectralFn::Fexp(p) => p.eval(lambda),
            SpectralFn::PowerLawTimesSmooth { d, smooth } => {
                let lambda = check_frequency(lambda)?.abs();
                if lambda == 0.0 && *d > 0.0 {
                    return Err(Error::PoleAtZero(*d));
                }
                Ok(lambda.powf(-2.0 * d) * smooth(lambda))
            }
            SpectralFn::Scaled(c, inner) => Ok(c * inner.eval(lambda)?),
        }
    }

    pub fn log_eval(&self, lambda: f64) -> Result<f64> {
        match self {
            SpectralFn::Fexp(p) => p.log_spectrum(lambda),
            SpectralFn::PowerLawTimesSmooth { d, smooth } => {
                let lambda = check_frequency(lambda)?.abs();
                let g = smooth(lambda).ln();
                if *d == 0.0 {
                    return Ok(g);
                }
                if lambda == 0.0 {
                    return Err(Error::PoleAtZero(*d));
                }
                Ok(-2.0 * d * lambda.ln() + g)
            }
            SpectralFn::Scaled(c, inner) => Ok(c.ln() + inner.log_eval(lambda)?),
        }
    }

    /// Constant multiple and FEXP core, when the density is an FEXP
    /// density up to scaling.
    pub fn as_scaled_fexp(&self) -> Option<(f64, &FexpParams)> {
        match self {
            SpectralFn::Fexp(p) => Some((1.0, p)),
            SpectralFn::Scaled(c, inner) => inner.as_scaled_fexp().map(|(k, p)| (c * k, p)),
            SpectralFn::PowerLawTimesSmooth { .. } => None,
        }
    }
}

/// Where an autocovariance sequence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutocovSource {
    Analytic,
    Quadrature,
    Supplied,
}

/// `γ(0..n-1)` of a stationary process.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSeq {
    gamma: Vec<f64>,
    source: AutocovSource,
    achieved_tol: f64,
}

impl AutocovSeq {
    /// Wraps user-supplied autocovariances after checking `γ(0) > 0` and
    /// `|γ(τ)| ≤ γ(0)`.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        Self::with_source(gamma, AutocovSource::Supplied, 0.0)
    }

    fn with_source(gamma: Vec<f64>, source: AutocovSource, achieved_tol: f64) -> Result<Self> {
        let Some(&g0) = gamma.first() else {
            return Err(Error::InvalidParameter("autocovariance sequence is empty".into()));
        };
        if !(g0 > 0.0) || !g0.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma(0) = {g0} must be positive")));
        }
        let slack = g0 * (1.0 + 1e-12) + achieved_tol;
        if let Some((tau, g)) = gamma.iter().enumerate().find(|(_, g)| !g.is_finite() || g.abs() > slack) {
            return Err(Error::InvalidParameter(format!("|gamma({tau})| = {g} exceeds gamma(0) = {g0}")));
        }
        Ok(Self { gamma, source, achieved_tol })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn source(&self) -> AutocovSource {
        self.source
    }

    pub fn achieved_tol(&self) -> f64 {
        self.achieved_tol
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_source(self.gamma.iter().map(|g| c * g).collect(), self.source, self.achieved_tol * c.abs())
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self { gamma: self.gamma[..n.min(self.gamma.len())].to_vec(), ..self.clone() }
    }
}

/// Autocovariances of `|1 - e^{iλ}|^{-2d}` for `τ = 0..len-1`.
pub fn fractional_autocov(d: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let g0 = TWO_PI * (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp();
    out.push(g0);
    for tau in 1..len {
        let t = tau as f64;
        let prev = out[tau - 1];
        out.push(prev * (t - 1.0 + d) / (t - d));
    }
    out
}

/// MA weights `ψ_k` of `Ψ(z) = exp(Σ_{j≥1} (θ_j/2) z^j)`, so that
/// `exp(Σ_{j≥1} θ_j cos jλ) = |Ψ(e^{iλ})|²`. Stops once the neglected
/// tail, weighted by `scale`, falls below `cutoff`.
fn cepstral_ma_weights(theta: &[f64], scale: f64, cutoff: f64) -> Result<(Vec<f64>, f64)> {
    const MAX_LEN: usize = 20_000;
    let k = theta.len() - 1;
    let mut psi = vec![1.0];
    if k == 0 {
        return Ok((psi, 0.0));
    }
    let half: Vec<f64> = theta[1..].iter().map(|t| 0.5 * t).collect();
    let mut l1 = 1.0;
    loop {
        let m = psi.len();
        let mut acc = 0.0;
        for j in 1..=m.min(k) {
            acc += j as f64 * half[j - 1] * psi[m - j];
        }
        let next = acc / m as f64;
        psi.push(next);
        l1 += next.abs();
        if psi.len() > k + 1 {
            // past every input coefficient the weights decay faster than
            // geometrically; the trailing window bounds the remaining tail
            let window: f64 = psi[psi.len() - k..].iter().map(|p| p.abs()).sum();
            let tail = 2.0 * scale * l1 * window;
            if tail < cutoff {
                return Ok((psi, tail));
            }
        }
        if psi.len() >= MAX_LEN {
            let window: f64 = psi[psi.len() - k..].iter().map(|p| p.abs()).sum();
            return Err(Error::AutocovTolerance { requested: cutoff, achieved: 2.0 * scale * l1 * window });
        }
    }
}

fn fexp_autocov(p: &FexpParams, n: usize, tol: f64) -> Result<AutocovSeq> {
    let scale0 = p.theta[0].exp();
    let base_g0 = TWO_PI * (ln_gamma(1.0 - 2.0 * p.d) - 2.0 * ln_gamma(1.0 - p.d)).exp();
    let (psi, tail) = cepstral_ma_weights(&p.theta, scale0 * base_g0, tol / 10.0)?;
    let m = psi.len() - 1;
    let r: Vec<f64> = (0..=m).map(|lag| psi[..=m - lag].iter().zip(&psi[lag..]).map(|(a, b)| a * b).sum()).collect();
    let base = fractional_autocov(p.d, n + m);
    let gamma = (0..n)
        .map(|tau| {
            let mut acc = r[0] * base[tau];
            for (lag, &rl) in r.iter().enumerate().skip(1) {
                acc += rl * (base[tau + lag] + base[tau.abs_diff(lag)]);
            }
            scale0 * acc
        })
        .collect();
    AutocovSeq::with_source(gamma, AutocovSource::Analytic, tail)
}

/// `γ(0..n-1)` of `f`. FEXP densities (and scalings of them) use the
/// analytic fractional recursion convolved with cepstral MA weights;
/// anything else falls back to quadrature.
pub fn autocov(f: &SpectralFn, n: usize, tol: f64) -> Result<AutocovSeq> {
    check_autocov_args(f, n, tol)?;
    match f {
        SpectralFn::Fexp(p) => fexp_autocov(p, n, tol),
        SpectralFn::Scaled(c, inner) => {
            if !(*c > 0.0) {
                return Err(Error::InvalidParameter(format!("scale {c} must be positive")));
            }
            autocov(inner, n, tol / c)?.scaled(*c)
        }
        SpectralFn::PowerLawTimesSmooth { .. } => autocov_quadrature(f, n, tol),
    }
}

/// `γ(τ) = 2 ∫_0^π f(λ) cos(τλ) dλ` by tanh-sinh quadrature, one integral
/// per lag. The endpoint clustering absorbs the pole at the origin.
pub fn autocov_quadrature(f: &SpectralFn, n: usize, tol: f64) -> Result<AutocovSeq> {
    check_autocov_args(f, n, tol)?;
    let mut gamma = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for tau in 0..n {
        let t = tau as f64;
        let integrand = |l: f64| match f.eval(l) {
            Ok(v) => 2.0 * v * (t * l).cos(),
            Err(_) => f64::NAN,
        };
        let panels = 1 + tau / 4;
        let q = quadrature::integrate_panels(integrand, 0.0, PI, panels, 0.5 * tol, 0.0);
        if !q.value.is_finite() || q.error > tol {
            return Err(Error::AutocovTolerance { requested: tol, achieved: q.error });
        }
        worst = worst.max(q.error);
        gamma.push(q.value);
    }
    AutocovSeq::with_source(gamma, AutocovSource::Quadrature, worst)
}

fn check_autocov_args(f: &SpectralFn, n: usize, tol: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("autocovariance order must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    if f.memory() >= 0.5 {
        return Err(Error::InvalidParameter(format!("d = {} is not below 1/2", f.memory())));
    }
    Ok(())
}

/// Parameters of the Sobolev-type class `S(β, L₀)` and, optionally, of the
/// uniform classes bounding `f̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClassSpec {
    pub beta: f64,
    pub l0: f64,
    pub uniform: Option<UniformClassBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformClassBounds {
    pub t: f64,
    pub m: f64,
    pub big_m: f64,
    pub lipschitz: f64,
    pub rho: f64,
}

impl SmoothnessClassSpec {
    pub fn new(beta: f64, l0: f64) -> Result<Self> {
        let spec = Self { beta, l0, uniform: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.l0 > 0.0) {
            return Err(Error::InvalidParameter("beta and L0 must be positive".into()));
        }
        if let Some(u) = &self.uniform {
            let ok = u.t > 0.0
                && u.t < 0.5
                && u.m > 0.0
                && u.m <= u.big_m
                && u.rho > 0.0
                && u.rho <= 1.0
                && u.lipschitz > 0.0;
            if !ok {
                return Err(Error::InvalidParameter("invalid uniform class bounds".into()));
            }
        }
        Ok(())
    }
}

/// `Σ_j θ_j² (1+j)^{2β}`.
pub fn sobolev_norm(params: &FexpParams, beta: f64) -> f64 {
    params.theta.iter().enumerate().map(|(j, t)| t * t * (1.0 + j as f64).powf(2.0 * beta)).sum()
}

/// Membership in `S(β, L₀)`.
pub fn in_class_s(params: &FexpParams, spec: &SmoothnessClassSpec) -> bool {
    sobolev_norm(params, spec.beta) <= spec.l0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rejects_bad_params() {
        assert!(FexpParams::new(0.5, vec![0.0]).is_err());
        assert!(FexpParams::new(-0.5, vec![0.0]).is_err());
        assert!(FexpParams::new(0.1, vec![]).is_err());
        assert!(FexpParams::new(0.1, vec![f64::NAN]).is_err());
        assert!(FexpParams::new(0.49, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn eval_trivial_values() {
        let p = FexpParams::new(0.0, vec![0.0]).unwrap();
        assert_eq!(eval_fexp(&p, 1.0).unwrap(), 1.0);
        let p = FexpParams::new(0.3, vec![0.0]).unwrap();
        let v = eval_fexp(&p, PI).unwrap();
        assert!((v - 2f64.powf(-0.6)).abs() < 1e-15);
    }

    #[test]
    fn eval_extended_precision() {
        // mpmath, 50 digits
        let p = FexpParams::new(0.25, vec![0.5, -0.2]).unwrap();
        let v = eval_fexp(&p, PI / 3.0).unwrap();
        let expected = 1.491_824_697_641_270_3;
        assert!((v / expected - 1.0).abs() < 1e-14, "{v}");
    }

    #[test]
    fn pole_and_domain() {
        let p = FexpParams::new(0.2, vec![0.0]).unwrap();
        assert!(matches!(eval_fexp(&p, 0.0), Err(Error::PoleAtZero(_))));
        assert!(matches!(eval_fexp(&p, 3.5), Err(Error::FrequencyOutOfRange(_))));
        let q = FexpParams::new(-0.2, vec![0.0]).unwrap();
        assert_eq!(eval_fexp(&q, 0.0).unwrap(), 0.0);
        assert!(log_spectrum_grid(&q, &[0.0]).is_err());
        let w = FexpParams::new(0.0, vec![0.3, 0.2]).unwrap();
        assert!((eval_fexp(&w, 0.0).unwrap() - 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn fourier_grid_excludes_zero() {
        let g = fourier_grid(8);
        assert_eq!(g.len(), 4);
        assert!(g[0] > 0.0);
        assert_eq!(*g.last().unwrap(), PI);
    }

    #[test]
    fn log_grid_extended_precision() {
        let p = FexpParams::new(0.4, vec![1.0, 0.3]).unwrap();
        let v = log_spectrum_grid(&p, &[2.0]).unwrap()[0];
        // mpmath, 50 digits
        let expected = 0.458_721_201_603_174_38;
        assert!((v - expected).abs() < 1e-14, "{v}");
    }

    #[test]
    fn white_noise_autocov() {
        let p = FexpParams::new(0.0, vec![-(TWO_PI.ln())]).unwrap();
        let g = autocov(&p.into(), 3, 1e-12).unwrap();
        assert!((g.gamma()[0] - 1.0).abs() < 1e-14);
        assert!(g.gamma()[1].abs() < 1e-14 && g.gamma()[2].abs() < 1e-14);
        assert_eq!(g.source(), AutocovSource::Analytic);
    }

    #[test]
    fn class_s_membership() {
        let spec = SmoothnessClassSpec::new(1.0, 3.0).unwrap();
        assert!(in_class_s(&FexpParams::new(0.0, vec![0.0]).unwrap(), &spec));
        let p = FexpParams::new(0.0, vec![0.0, 1.0]).unwrap();
        assert!(!in_class_s(&p, &spec));
        assert!(in_class_s(&p, &SmoothnessClassSpec::new(1.0, 4.0).unwrap()));
        assert!(SmoothnessClassSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn autocov_rejects_bad_input() {
        let p: SpectralFn = FexpParams::new(0.1, vec![0.0]).unwrap().into();
        assert!(autocov(&p, 0, 1e-10).is_err());
        assert!(autocov(&p, 4, 0.0).is_err());
        let bad = SpectralFn::power_law(0.5, |_| 1.0);
        assert!(autocov(&bad, 4, 1e-8).is_err());
        assert!(AutocovSeq::new(vec![1.0, 1.5]).is_err());
        assert!(AutocovSeq::new(vec![0.0]).is_err());
    }
}
