//! Trans-dimensional MCMC for the FEXP posterior and the Bayes estimators
//! built from its draws.
//!
//! The target on `(K, d, θ_0..θ_K)` is `exp(loglik) × prior` with the exact
//! Toeplitz likelihood. Each iteration runs
//!
//! 1. a random walk on `z = logit((d - lo)/(hi - lo))`, with the Jacobian of
//!    the transform in the acceptance ratio;
//! 2. a Gaussian random walk on the whole `θ` block;
//! 3. with probability `jump_rate`, a birth (`K → K+1`, new coefficient
//!    `~ N(0, s_{K+1}²)`) or death (drop `θ_K`) move. Births are proposed with
//!    probability 1 at `K = 0`, 0 at `k_max`, and 1/2 otherwise.
//!
//! Step sizes adapt toward the target acceptance rates during burn-in only.

use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::spectral::{autocov, FexpParams, SpectralFn};
use crate::toeplitz::gauss_loglik;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmcConfig {
    pub population: usize,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step_d: f64,
    pub step_theta: f64,
    /// Probability of attempting a birth/death move each iteration.
    pub jump_rate: f64,
    /// Probability of a multiplicative move on one `|θ_j|`, `j ≥ 1`.
    pub scale_rate: f64,
    pub step_scale: f64,
    pub adapt_window: usize,
    pub target_accept_d: f64,
    pub target_accept_theta: f64,
    pub k_max: usize,
    pub seed: u64,
    /// Drop the likelihood and sample the prior.
    pub prior_only: bool,
    /// Population Monte Carlo mode; not available in this sampler.
    pub pmc: Option<PmcConfig>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 6000,
            burn_in: 2000,
            thin: 4,
            step_d: 0.5,
            step_theta: 0.1,
            jump_rate: 0.5,
            scale_rate: 0.5,
            step_scale: 1.0,
            adapt_window: 50,
            target_accept_d: 0.44,
            target_accept_theta: 0.23,
            k_max: 60,
            seed: 0,
            prior_only: false,
            pmc: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.iterations <= self.burn_in {
            return bad("iterations must exceed burn_in");
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return bad("thin and adapt_window must be >= 1");
        }
        if !(self.step_d > 0.0 && self.step_theta > 0.0 && self.step_scale > 0.0) {
            return bad("step scales must be positive");
        }
        if !(0.0..=1.0).contains(&self.jump_rate) || !(0.0..=1.0).contains(&self.scale_rate) {
            return bad("jump_rate and scale_rate must lie in [0, 1]");
        }
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.target_accept_d) || !in_unit(self.target_accept_theta) {
            return bad("target acceptance rates must lie in (0, 1)");
        }
        if self.pmc.is_some() {
            return Err(Error::Unsupported("population Monte Carlo mode".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub attempted: usize,
    pub accepted: usize,
}

impl MoveStats {
    fn record(&mut self, accepted: bool) {
        self.attempted += 1;
        self.accepted += accepted as usize;
    }

    pub fn rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Move counts over the retained (post burn-in) phase.
    pub d_moves: MoveStats,
    pub theta_moves: MoveStats,
    pub scale_moves: MoveStats,
    pub births: MoveStats,
    pub deaths: MoveStats,
    pub ess_d: f64,
    /// `k_histogram[K]` = retained draws with order `K`.
    pub k_histogram: Vec<usize>,
    /// Log posterior at every iteration, burn-in included.
    pub log_posterior_trace: Vec<f64>,
    /// Proposals whose likelihood could not be evaluated (rejected).
    pub likelihood_failures: usize,
    pub final_step_d: f64,
    pub final_step_theta: f64,
    pub final_step_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub draws: Vec<FexpParams>,
    /// Iteration index of each retained draw.
    pub iterations: Vec<usize>,
    pub log_posterior: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    fn nonempty(&self) -> Result<()> {
        if self.draws.is_empty() {
            Err(Error::EmptySamples)
        } else {
            Ok(())
        }
    }
}

fn series_scale(x: &[f64]) -> f64 {
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    if ms > 0.0 && ms.is_finite() {
        ms
    } else {
        1.0
    }
}

/// Exact Gaussian log-likelihood of `x` under the FEXP density `params`.
pub fn fexp_loglik(x: &[f64], params: &FexpParams) -> Result<f64> {
    let tol = 1e-10 * series_scale(x);
    let gamma = autocov(&SpectralFn::Fexp(params.clone()), x.len(), tol)?;
    gauss_loglik(&gamma, x)
}

/// Unnormalized log posterior; `-∞` off the prior support or when the
/// likelihood cannot be evaluated.
pub fn log_posterior(x: &[f64], prior: &PriorSpec, params: &FexpParams, prior_only: bool) -> f64 {
    let lp = prior.log_density(params);
    if lp == f64::NEG_INFINITY || prior_only {
        return lp;
    }
    match fexp_loglik(x, params) {
        Ok(ll) => lp + ll,
        Err(_) => f64::NEG_INFINITY,
    }
}

struct Chain<'a> {
    x: &'a [f64],
    prior: &'a PriorSpec,
    prior_only: bool,
    params: FexpParams,
    log_post: f64,
    failures: usize,
}

impl<'a> Chain<'a> {
    fn evaluate(&mut self, p: &FexpParams) -> f64 {
        let lp = self.prior.log_density(p);
        if lp == f64::NEG_INFINITY || self.prior_only {
            return lp;
        }
        match fexp_loglik(self.x, p) {
            Ok(ll) => lp + ll,
            Err(_) => {
                self.failures += 1;
                f64::NEG_INFINITY
            }
        }
    }

    fn accept<R: Rng>(rng: &mut R, log_ratio: f64) -> bool {
        if log_ratio.is_nan() {
            return false;
        }
        log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
    }

    fn d_move<R: Rng>(&mut self, rng: &mut R, step: f64) -> bool {
        let (lo, hi) = self.prior.d_bounds();
        let width = hi - lo;
        let u = ((self.params.d() - lo) / width).clamp(1e-300, 1.0 - 1e-16);
        let z = (u / (1.0 - u)).ln();
        let eps: f64 = StandardNormal.sample(rng);
        let z_new = z + step * eps;
        let u_new = 1.0 / (1.0 + (-z_new).exp());
        let d_new = lo + width * u_new;
        let Ok(candidate) = FexpParams::new(d_new, self.params.theta().to_vec()) else {
            return false;
        };
        // log |dd/dz| = log(width u (1-u))
        let log_jac = |u: f64| (u * (1.0 - u)).ln();
        let lp_new = self.evaluate(&candidate);
        let ratio = lp_new - self.log_post + log_jac(u_new) - log_jac(u);
        if Self::accept(rng, ratio) {
            self.params = candidate;
            self.log_post = lp_new;
            true
        } else {
            false
        }
    }

    /// Block move with per-index proposal scales `step · w_j / sqrt(K+1)`.
    fn theta_move<R: Rng>(&mut self, rng: &mut R, step: f64, weights: &[f64]) -> bool {
        let dim = self.params.theta().len() as f64;
        let scale = step / dim.sqrt();
        let theta: Vec<f64> = self
            .params
            .theta()
            .iter()
            .zip(weights)
            .map(|(t, w)| {
                let eps: f64 = StandardNormal.sample(rng);
                t + scale * w * eps
            })
            .collect();
        let Ok(candidate) = FexpParams::new(self.params.d(), theta) else {
            return false;
        };
        let lp_new = self.evaluate(&candidate);
        if Self::accept(rng, lp_new - self.log_post) {
            self.params = candidate;
            self.log_post = lp_new;
            true
        } else {
            false
        }
    }

    /// `θ_j → θ_j e^{σε}` for one uniformly chosen `j ≥ 1`; the Jacobian
    /// `|θ'_j / θ_j|` enters the ratio.
    fn scale_move<R: Rng>(&mut self, rng: &mut R, step: f64) -> Option<bool> {
        let k = self.params.order();
        if k == 0 {
            return None;
        }
        let j = rng.random_range(1..=k);
        let eps: f64 = StandardNormal.sample(rng);
        let log_factor = step * eps;
        let mut theta = self.params.theta().to_vec();
        theta[j] *= log_factor.exp();
        let Ok(candidate) = FexpParams::new(self.params.d(), theta) else {
            return Some(false);
        };
        let lp_new = self.evaluate(&candidate);
        if Self::accept(rng, lp_new - self.log_post + log_factor) {
            self.params = candidate;
            self.log_post = lp_new;
            Some(true)
        } else {
            Some(false)
        }
    }

    fn birth_prob(k: usize, k_max: usize) -> f64 {
        if k == 0 {
            1.0
        } else if k >= k_max {
            0.0
        } else {
            0.5
        }
    }

    /// Returns `(is_birth, accepted)`.
    fn jump_move<R: Rng>(&mut self, rng: &mut R, k_max: usize) -> (bool, bool) {
        let k = self.params.order();
        let pb = Self::birth_prob(k, k_max);
        let birth = rng.random::<f64>() < pb;
        let mut theta = self.params.theta().to_vec();
        let log_ratio_extra = if birth {
            let new = self.prior.sample_birth(k + 1, rng);
            theta.push(new);
            let pd_back = 1.0 - Self::birth_prob(k + 1, k_max);
            pd_back.ln() - pb.ln() - self.prior.log_birth_density(k + 1, new)
        } else {
            let removed = theta.pop().expect("K >= 1 when a death is proposed");
            let pb_back = Self::birth_prob(k - 1, k_max);
            pb_back.ln() - (1.0 - pb).ln() + self.prior.log_birth_density(k, removed)
        };
        let Ok(candidate) = FexpParams::new(self.params.d(), theta) else {
            return (birth, false);
        };
        let lp_new = self.evaluate(&candidate);
        let accepted = Self::accept(rng, lp_new - self.log_post + log_ratio_extra);
        if accepted {
            self.params = candidate;
            self.log_post = lp_new;
        }
        (birth, accepted)
    }
}

fn initial_state<R: Rng>(x: &[f64], prior: &PriorSpec, cfg: &SamplerConfig, rng: &mut R) -> FexpParams {
    if !cfg.prior_only && !x.is_empty() {
        let theta0 = (series_scale(x) / (2.0 * std::f64::consts::PI)).ln();
        if let Ok(p) = FexpParams::new(0.0, vec![theta0]) {
            if log_posterior(x, prior, &p, false).is_finite() {
                return p;
            }
        }
    }
    loop {
        let draw = prior.sample(rng);
        if log_posterior(x, prior, &draw.params, cfg.prior_only).is_finite() {
            return draw.params;
        }
    }
}

/// Running mean and variance of each `θ_j` over burn-in states with `K ≥ j`.
struct ScaleTracker {
    count: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    initial: Vec<f64>,
}

impl ScaleTracker {
    fn new(initial: Vec<f64>) -> Self {
        let m = initial.len();
        Self { count: vec![0.0; m], mean: vec![0.0; m], m2: vec![0.0; m], initial }
    }

    fn observe(&mut self, theta: &[f64]) {
        for (j, &t) in theta.iter().enumerate().take(self.count.len()) {
            self.count[j] += 1.0;
            let delta = t - self.mean[j];
            self.mean[j] += delta / self.count[j];
            self.m2[j] += delta * (t - self.mean[j]);
        }
    }

    /// Sample sd where enough states were seen, padded by a small share of
    /// the initial scale so a coordinate that never moved can recover.
    fn weights(&self, min_count: f64) -> Vec<f64> {
        (0..self.count.len())
            .map(|j| {
                let floor = 0.01 * self.initial[j];
                if self.count[j] >= min_count {
                    (self.m2[j] / (self.count[j] - 1.0) + floor * floor).sqrt()
                } else {
                    self.initial[j]
                }
            })
            .collect()
    }
}

/// Runs one chain. Deterministic for fixed `(x, prior, cfg)`.
pub fn run_mcmc(x: &[f64], prior: &PriorSpec, cfg: &SamplerConfig) -> Result<PosteriorSamples> {
    cfg.validate()?;
    prior.validate()?;
    if x.is_empty() && !cfg.prior_only {
        return Err(Error::InvalidParameter("empty data series".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = initial_state(x, prior, cfg, &mut rng);
    let log_post = log_posterior(x, prior, &start, cfg.prior_only);
    let mut chain = Chain { x, prior, prior_only: cfg.prior_only, params: start, log_post, failures: 0 };
    let frozen = prior.is_point_mass();

    let mut step_d = cfg.step_d;
    let mut step_theta = cfg.step_theta;
    let mut step_scale = cfg.step_scale;
    let mut window = [MoveStats::default(); 3];
    let mut windows_done = 0usize;
    let initial: Vec<f64> = (0..=cfg.k_max).map(|j| if j == 0 { 1.0 } else { prior.birth_scale(j).min(1.0) }).collect();
    let mut tracker = ScaleTracker::new(initial.clone());
    let mut weights = initial;

    let mut d_moves = MoveStats::default();
    let mut theta_moves = MoveStats::default();
    let mut scale_moves = MoveStats::default();
    let mut births = MoveStats::default();
    let mut deaths = MoveStats::default();

    let retained = (cfg.iterations - cfg.burn_in).div_ceil(cfg.thin);
    let mut draws = Vec::with_capacity(retained);
    let mut iterations = Vec::with_capacity(retained);
    let mut log_posterior_trace = Vec::with_capacity(cfg.iterations);
    let mut stored_log_post = Vec::with_capacity(retained);

    for it in 0..cfg.iterations {
        let sampling = it >= cfg.burn_in;
        if !frozen {
            let a = chain.d_move(&mut rng, step_d);
            let b = chain.theta_move(&mut rng, step_theta, &weights);
            if sampling {
                d_moves.record(a);
                theta_moves.record(b);
            } else {
                window[0].record(a);
                window[1].record(b);
            }
            if rng.random::<f64>() < cfg.scale_rate {
                if let Some(acc) = chain.scale_move(&mut rng, step_scale) {
                    if sampling {
                        scale_moves.record(acc);
                    } else {
                        window[2].record(acc);
                    }
                }
            }
            if rng.random::<f64>() < cfg.jump_rate {
                let (is_birth, acc) = chain.jump_move(&mut rng, cfg.k_max);
                if sampling {
                    if is_birth {
                        births.record(acc);
                    } else {
                        deaths.record(acc);
                    }
                }
            }
        }
        if !sampling {
            tracker.observe(chain.params.theta());
        }
        if !sampling && (it + 1) % cfg.adapt_window == 0 {
            windows_done += 1;
            weights = tracker.weights(2.0 * cfg.adapt_window as f64);
            let gain = 1.0 / (windows_done as f64).sqrt();
            step_d *= (gain * (window[0].rate() - cfg.target_accept_d)).exp();
            step_theta *= (gain * (window[1].rate() - cfg.target_accept_theta)).exp();
            step_scale *= (gain * (window[2].rate() - cfg.target_accept_d)).exp();
            window = [MoveStats::default(); 3];
        }
        log_posterior_trace.push(chain.log_post);
        if sampling && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            draws.push(chain.params.clone());
            iterations.push(it);
            stored_log_post.push(chain.log_post);
        }
    }

    let d_series: Vec<f64> = draws.iter().map(|p| p.d()).collect();
    let k_max_seen = draws.iter().map(|p| p.order()).max().unwrap_or(0);
    let mut k_histogram = vec![0usize; k_max_seen + 1];
    for p in &draws {
        k_histogram[p.order()] += 1;
    }
    Ok(PosteriorSamples {
        draws,
        iterations,
        log_posterior: stored_log_post,
        diagnostics: Diagnostics {
            d_moves,
            theta_moves,
            scale_moves,
            births,
            deaths,
            ess_d: effective_sample_size(&d_series),
            k_histogram,
            log_posterior_trace,
            likelihood_failures: chain.failures,
            final_step_d: step_d,
            final_step_theta: step_theta,
            final_step_scale: step_scale,
        },
    })
}

/// Runs several chains concurrently; chain `i` uses `cfgs[i]`.
pub fn run_chains(x: &[f64], prior: &PriorSpec, cfgs: &[SamplerConfig]) -> Vec<Result<PosteriorSamples>> {
    cfgs.par_iter().map(|cfg| run_mcmc(x, prior, cfg)).collect()
}

/// Effective sample size by Geyer's initial monotone sequence estimator,
/// capped at the series length.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return n as f64;
    }
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = centered.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let rho: Vec<f64> = buf[..n].iter().map(|z| z.re / len as f64 / (n as f64 * var)).collect();

    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (rho[2 * k] + rho[2 * k + 1]).min(prev);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).clamp(1.0, n as f64)
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Posterior mean of `d` with an ESS-based standard error.
pub fn estimate_d(s: &PosteriorSamples) -> Result<McEstimate> {
    s.nonempty()?;
    let d: Vec<f64> = s.draws.iter().map(|p| p.d()).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(McEstimate { value: mean, std_error: (var / effective_sample_size(&d)).sqrt() })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    for &l in grid {
        if !l.is_finite() || l.abs() > std::f64::consts::PI * (1.0 + 4.0 * f64::EPSILON) {
            return Err(Error::FrequencyOutOfRange(l));
        }
        if l == 0.0 {
            return Err(Error::InvalidParameter("estimator grid must exclude 0".into()));
        }
    }
    Ok(())
}

/// The log-loss Bayes estimator `exp(E[log f])` as an FEXP point: the
/// posterior mean of `d` and of each `θ_j` (missing coefficients count as
/// zero), since `log f` is linear in `(d, θ)`.
pub fn log_mean_params(s: &PosteriorSamples) -> Result<FexpParams> {
    s.nonempty()?;
    let n = s.draws.len() as f64;
    let k = s.draws.iter().map(|p| p.order()).max().unwrap_or(0);
    let mut theta = vec![0.0; k + 1];
    let mut d = 0.0;
    for p in &s.draws {
        d += p.d();
        for (acc, t) in theta.iter_mut().zip(p.theta()) {
            *acc += t;
        }
    }
    theta.iter_mut().for_each(|t| *t /= n);
    FexpParams::new(d / n, theta)
}

/// `f̂(λ) = exp(E[log f(λ) | X])` on `grid`.
pub fn estimate_f_log(s: &PosteriorSamples, grid: &[f64]) -> Result<Vec<f64>> {
    s.nonempty()?;
    check_grid(grid)?;
    let n = s.draws.len() as f64;
    grid.iter()
        .map(|&l| {
            let mut acc = 0.0;
            for p in &s.draws {
                acc += p.log_spectrum(l)?;
            }
            Ok((acc / n).exp())
        })
        .collect()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log f̂₂(λ)` for a set of draws.
pub fn log_f_h_at(draws: &[FexpParams], lambda: f64) -> Result<f64> {
    let logs: Vec<f64> = draws.iter().map(|p| p.log_spectrum(lambda)).collect::<Result<_>>()?;
    let pos = log_sum_exp(logs.iter().copied());
    let neg = log_sum_exp(logs.iter().map(|v| -v));
    Ok(0.5 * (pos - neg))
}

/// `f̂₂(λ) = sqrt(E[f(λ)|X] / E[1/f(λ)|X])` on `grid`.
pub fn estimate_f_h(s: &PosteriorSamples, grid: &[f64]) -> Result<Vec<f64>> {
    s.nonempty()?;
    check_grid(grid)?;
    grid.iter().map(|&l| Ok(log_f_h_at(&s.draws, l)?.exp())).collect()
}

/// `f̂₂` as a spectral density usable by the divergence routines, written
/// as `|λ|^{-2d̄}` times a smooth factor with `d̄` the mean of `d`.
pub fn f_h_spectral(s: &PosteriorSamples) -> Result<SpectralFn> {
    let d_bar = estimate_d(s)?.value;
    let draws = s.draws.clone();
    Ok(SpectralFn::power_law(d_bar, move |l| {
        let pole = -2.0 * d_bar * l.abs().ln();
        log_f_h_at(&draws, l).map(|v| (v - pole).exp()).unwrap_or(f64::NAN)
    }))
}

/// Fraction of draws satisfying `pred`, with a binomial standard error
/// based on the effective sample size of the indicator series.
pub fn posterior_prob<P: Fn(&FexpParams) -> bool>(s: &PosteriorSamples, pred: P) -> Result<McEstimate> {
    s.nonempty()?;
    let ind: Vec<f64> = s.draws.iter().map(|p| if pred(p) { 1.0 } else { 0.0 }).collect();
    let p = ind.iter().sum::<f64>() / ind.len() as f64;
    let ess = effective_sample_size(&ind);
    Ok(McEstimate { value: p, std_error: (p * (1.0 - p) / ess).sqrt() })
}

/// Periodogram `I(λ_j) = |Σ_t x_t e^{-iλ_j t}|² / (2πn)` at
/// `λ_j = 2πj/n`, `j = 1..⌊(n-1)/2⌋`.
pub fn periodogram(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = 2.0 * std::f64::consts::PI * n as f64;
    (1..=(n - 1) / 2).map(|j| (2.0 * std::f64::consts::PI * j as f64 / n as f64, buf[j].norm_sqr() / norm)).collect()
}

/// Whittle log-likelihood `-Σ_j [log f(λ_j) + I(λ_j)/f(λ_j)]` over
/// `j = 1..⌊(n-1)/2⌋`; additive constants are dropped.
pub fn whittle_loglik(x: &[f64], f: &SpectralFn) -> Result<f64> {
    if x.len() < 4 {
        return Err(Error::InvalidParameter("Whittle likelihood needs n >= 4".into()));
    }
    let mut acc = 0.0;
    for (l, i) in periodogram(x) {
        let lf = f.log_eval(l)?;
        acc -= lf + i * (-lf).exp();
    }
    Ok(acc)
}

/// Writes draws as CSV with columns `iter,K,d,theta_0..theta_Kmax,log_posterior`;
/// coefficients beyond a draw's order are left empty.
pub fn write_samples_csv(path: &Path, s: &PosteriorSamples) -> Result<()> {
    let k_max = s.draws.iter().map(|p| p.order()).max().unwrap_or(0);
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let mut header = vec!["iter".to_string(), "K".into(), "d".into()];
    header.extend((0..=k_max).map(|j| format!("theta_{j}")));
    header.push("log_posterior".into());
    writeln!(w, "{}", header.join(","))?;
    for ((p, it), lp) in s.draws.iter().zip(&s.iterations).zip(&s.log_posterior) {
        let mut row = vec![it.to_string(), p.order().to_string(), p.d().to_string()];
        row.extend((0..=k_max).map(|j| p.theta().get(j).map(|t| t.to_string()).unwrap_or_default()));
        row.push(lp.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(draws: Vec<FexpParams>) -> PosteriorSamples {
        let n = draws.len();
        PosteriorSamples {
            draws,
            iterations: (0..n).collect(),
            log_posterior: vec![0.0; n],
            diagnostics: Diagnostics {
                d_moves: MoveStats::default(),
                theta_moves: MoveStats::default(),
                scale_moves: MoveStats::default(),
                births: MoveStats::default(),
                deaths: MoveStats::default(),
                ess_d: n as f64,
                k_histogram: vec![n],
                log_posterior_trace: vec![],
                likelihood_failures: 0,
                final_step_d: 0.0,
                final_step_theta: 0.0,
                final_step_scale: 0.0,
            },
        }
    }

    #[test]
    fn config_validation() {
        let ok = SamplerConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SamplerConfig { burn_in: 6000, ..ok.clone() }.validate().is_err());
        assert!(SamplerConfig { thin: 0, ..ok.clone() }.validate().is_err());
        assert!(SamplerConfig { step_d: 0.0, ..ok.clone() }.validate().is_err());
        let pmc = SamplerConfig { pmc: Some(PmcConfig { population: 100, rounds: 5 }), ..ok };
        assert!(matches!(pmc.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn estimate_d_trivial() {
        let a = FexpParams::new(0.1, vec![0.0]).unwrap();
        let b = FexpParams::new(0.3, vec![0.0]).unwrap();
        assert!((estimate_d(&samples(vec![b.clone(); 5])).unwrap().value - 0.3).abs() < 1e-15);
        assert!((estimate_d(&samples(vec![a, b])).unwrap().value - 0.2).abs() < 1e-15);
        assert!(matches!(estimate_d(&samples(vec![])), Err(Error::EmptySamples)));
    }

    #[test]
    fn estimators_on_scaled_pair() {
        let c: f64 = 3.0;
        let f = FexpParams::new(0.2, vec![0.1, -0.3]).unwrap();
        let cf = FexpParams::new(0.2, vec![0.1 + c.ln(), -0.3]).unwrap();
        let s = samples(vec![f.clone(), cf]);
        let grid = [0.3, 1.0, 2.5];
        let fl = estimate_f_log(&s, &grid).unwrap();
        let fh = estimate_f_h(&s, &grid).unwrap();
        for ((l, a), b) in grid.iter().zip(&fl).zip(&fh) {
            let expected = c.sqrt() * f.eval(*l).unwrap();
            assert!((a / expected - 1.0).abs() < 1e-13);
            assert!((b / expected - 1.0).abs() < 1e-13);
        }
        assert!(estimate_f_log(&s, &[0.0, 1.0]).is_err());
        assert!(estimate_f_h(&s, &[4.0]).is_err());
    }

    #[test]
    fn single_draw_estimators_coincide() {
        let f = FexpParams::new(-0.1, vec![0.4, 0.2, -0.1]).unwrap();
        let s = samples(vec![f.clone()]);
        let grid = crate::spectral::fourier_grid(16);
        let fl = estimate_f_log(&s, &grid).unwrap();
        let fh = estimate_f_h(&s, &grid).unwrap();
        for ((l, a), b) in grid.iter().zip(&fl).zip(&fh) {
            let v = f.eval(*l).unwrap();
            assert!((a / v - 1.0).abs() < 1e-13 && (b / v - 1.0).abs() < 1e-13);
        }
        assert_eq!(log_mean_params(&s).unwrap(), f);
    }

    #[test]
    fn posterior_prob_trivial() {
        let f = FexpParams::new(0.1, vec![0.0]).unwrap();
        let s = samples(vec![f; 10]);
        assert_eq!(posterior_prob(&s, |_| true).unwrap().value, 1.0);
        assert_eq!(posterior_prob(&s, |_| false).unwrap().value, 0.0);
    }

    #[test]
    fn ess_of_iid_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ess = effective_sample_size(&x);
        assert!(ess > 3000.0, "{ess}");
        // AR(1) with phi = 0.9 has ESS ≈ n (1-phi)/(1+phi)
        let mut ar = vec![0.0; 20000];
        for t in 1..ar.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            ar[t] = 0.9 * ar[t - 1] + e;
        }
        let ess = effective_sample_size(&ar);
        assert!((600.0..1600.0).contains(&ess), "{ess}");
        assert_eq!(effective_sample_size(&[1.0; 10]), 10.0);
    }

    #[test]
    fn whittle_needs_four_points() {
        let f: SpectralFn = FexpParams::new(0.0, vec![0.0]).unwrap().into();
        assert!(whittle_loglik(&[1.0, 2.0, 3.0], &f).is_err());
    }
}
