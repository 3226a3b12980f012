//! FEXP priors on `(K, d, θ_0..θ_K)`.
//!
//! Both variants share `K ~ Poisson(μ)` and `d` drawn on
//! `[-1/2 + t, 1/2 - t]`; they differ in the law of `θ` given `K`:
//!
//! * `DirichletFexp`: `θ_0 ~ N(0, σ₀²)`; `S_K = Σ_{j≥1} j|θ_j| ~ B·Beta(2,2)`;
//!   `(V_j = j|θ_j| / S_K) ~ Dirichlet(α_1..α_K)` with `α_j = c (1+j)^{-2}`;
//!   independent uniform signs.
//! * `FexpBeta`: `η_j = θ_j · max(j,1)^β` for `j = 0..K`; `|η| = S_K ~ U(0, A)`
//!   and `η/|η|` uniform on the unit sphere of `R^{K+1}`.
//!
//! Densities are with respect to Lebesgue measure on `(d, θ_0..θ_K)` for
//! each `K`, times counting measure on `K`.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spectral::FexpParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DDensity {
    Uniform,
    /// `Beta(a, b)` rescaled to the `d` interval.
    Beta {
        a: f64,
        b: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorVariant {
    DirichletFexp {
        b_bound: f64,
        alpha_scale: f64,
        theta0_sd: f64,
    },
    FexpBeta {
        beta: f64,
        a_bound: f64,
    },
    /// Degenerate prior at a single point.
    PointMass(FexpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub variant: PriorVariant,
    /// Poisson mean of `K`.
    pub mu: f64,
    /// Edge gap: `d ∈ [-1/2 + t, 1/2 - t]`.
    pub t: f64,
    pub d_density: DDensity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorDraw {
    pub params: FexpParams,
    pub log_density: f64,
}

impl PriorSpec {
    pub fn dirichlet_fexp(mu: f64, t: f64, b_bound: f64) -> Result<Self> {
        let spec = Self {
            variant: PriorVariant::DirichletFexp { b_bound, alpha_scale: 4.0, theta0_sd: 10.0 },
            mu,
            t,
            d_density: DDensity::Uniform,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fexp_beta(mu: f64, t: f64, beta: f64, a_bound: f64) -> Result<Self> {
        let spec = Self { variant: PriorVariant::FexpBeta { beta, a_bound }, mu, t, d_density: DDensity::Uniform };
        spec.validate()?;
        Ok(spec)
    }

    pub fn point_mass(params: FexpParams) -> Self {
        Self { variant: PriorVariant::PointMass(params), mu: 1.0, t: 0.05, d_density: DDensity::Uniform }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return bad(format!("mu = {} must be positive", self.mu));
        }
        if !(self.t > 0.0 && self.t < 0.5) {
            return bad(format!("t = {} must lie in (0, 1/2)", self.t));
        }
        if let DDensity::Beta { a, b } = self.d_density {
            if !(a > 0.0 && b > 0.0) {
                return bad("d density Beta parameters must be positive".into());
            }
        }
        match &self.variant {
            PriorVariant::DirichletFexp { b_bound, alpha_scale, theta0_sd } => {
                if !(*b_bound > 0.0 && *alpha_scale > 0.0 && *theta0_sd > 0.0) {
                    return bad("B, alpha scale and theta0 sd must be positive".into());
                }
            }
            PriorVariant::FexpBeta { beta, a_bound } => {
                if !(*beta > 0.0 && *a_bound > 0.0) {
                    return bad("beta and A must be positive".into());
                }
            }
            PriorVariant::PointMass(_) => {}
        }
        Ok(())
    }

    /// `[-1/2 + t, 1/2 - t]`.
    pub fn d_bounds(&self) -> (f64, f64) {
        (-0.5 + self.t, 0.5 - self.t)
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self.variant, PriorVariant::PointMass(_))
    }

    /// `log p(K)` for `K ~ Poisson(μ)`.
    pub fn log_pk(&self, k: usize) -> f64 {
        -self.mu + k as f64 * self.mu.ln() - ln_gamma(k as f64 + 1.0)
    }

    pub fn log_pd(&self, d: f64) -> f64 {
        let (lo, hi) = self.d_bounds();
        if !(d >= lo && d <= hi) {
            return f64::NEG_INFINITY;
        }
        let width = hi - lo;
        match self.d_density {
            DDensity::Uniform => -width.ln(),
            DDensity::Beta { a, b } => {
                let u = (d - lo) / width;
                if u <= 0.0 || u >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                (a - 1.0) * u.ln() + (b - 1.0) * (1.0 - u).ln() - ln_beta(a, b) - width.ln()
            }
        }
    }

    /// `α_j = c (1+j)^{-2}`.
    pub fn dirichlet_alpha(alpha_scale: f64, j: usize) -> f64 {
        alpha_scale / ((1 + j) as f64).powi(2)
    }

    /// `log π(θ | K)`.
    pub fn log_theta_density(&self, theta: &[f64]) -> f64 {
        let k = theta.len() - 1;
        match &self.variant {
            PriorVariant::DirichletFexp { b_bound, alpha_scale, theta0_sd } => {
                let z = theta[0] / theta0_sd;
                let mut lp = -0.5 * z * z - theta0_sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
                if k == 0 {
                    return lp;
                }
                let u: Vec<f64> = (1..=k).map(|j| j as f64 * theta[j].abs()).collect();
                if u.contains(&0.0) {
                    return f64::NEG_INFINITY;
                }
                let s: f64 = u.iter().sum();
                if s >= *b_bound {
                    return f64::NEG_INFINITY;
                }
                // S_K = B · Beta(2,2)
                let x = s / b_bound;
                lp += 6f64.ln() + x.ln() + (1.0 - x).ln() - b_bound.ln();
                // Dirichlet on V = u / S
                let alphas: Vec<f64> = (1..=k).map(|j| Self::dirichlet_alpha(*alpha_scale, j)).collect();
                let alpha_sum: f64 = alphas.iter().sum();
                lp += ln_gamma(alpha_sum) - alphas.iter().map(|&a| ln_gamma(a)).sum::<f64>();
                for (a, v) in alphas.iter().zip(&u) {
                    lp += (a - 1.0) * (v / s).ln();
                }
                // (S, V_1..V_{K-1}) -> u has Jacobian S^{K-1}; u_j = j|θ_j| with
                // a uniform sign contributes j/2 per coordinate
                lp -= (k as f64 - 1.0) * s.ln();
                lp += (1..=k).map(|j| (j as f64).ln()).sum::<f64>() - k as f64 * 2f64.ln();
                lp
            }
            PriorVariant::FexpBeta { beta, a_bound } => {
                let weights = fexp_beta_weights(*beta, k);
                let r2: f64 = theta.iter().zip(&weights).map(|(t, w)| (t * w).powi(2)).sum();
                let r = r2.sqrt();
                if r >= *a_bound || (k > 0 && r == 0.0) {
                    return f64::NEG_INFINITY;
                }
                // |η| ~ U(0, A), direction uniform on S^K: density of η is
                // 1 / (A r^K |S^K|); η_j = w_j θ_j
                let dim = (k + 1) as f64;
                let log_area = 2f64.ln() + 0.5 * dim * std::f64::consts::PI.ln() - ln_gamma(0.5 * dim);
                let log_r_term = if k == 0 { 0.0 } else { k as f64 * r.ln() };
                -a_bound.ln() - log_r_term - log_area + weights.iter().map(|w| w.ln()).sum::<f64>()
            }
            PriorVariant::PointMass(p) => {
                if p.theta() == theta {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `log p(K) + log π(d) + log π(θ | K)`; `-∞` off the support.
    pub fn log_density(&self, params: &FexpParams) -> f64 {
        if let PriorVariant::PointMass(p) = &self.variant {
            return if p == params { 0.0 } else { f64::NEG_INFINITY };
        }
        let ld = self.log_pd(params.d());
        if ld == f64::NEG_INFINITY {
            return ld;
        }
        self.log_pk(params.order()) + ld + self.log_theta_density(params.theta())
    }

    fn sample_d<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.d_bounds();
        let u = match self.d_density {
            DDensity::Uniform => rng.random::<f64>(),
            DDensity::Beta { a, b } => Beta::new(a, b).expect("validated").sample(rng),
        };
        lo + (hi - lo) * u
    }

    /// `θ_0..θ_K` given `K`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<f64> {
        match &self.variant {
            PriorVariant::DirichletFexp { b_bound, alpha_scale, theta0_sd } => {
                let mut theta = Vec::with_capacity(k + 1);
                theta.push(Normal::new(0.0, *theta0_sd).expect("validated").sample(rng));
                if k == 0 {
                    return theta;
                }
                let s = b_bound * Beta::new(2.0, 2.0).expect("constant").sample(rng);
                // log-space gamma draws: G(α) = G(α+1) U^{1/α} keeps tiny
                // shapes from underflowing
                let logs: Vec<f64> = (1..=k)
                    .map(|j| {
                        let a = Self::dirichlet_alpha(*alpha_scale, j);
                        let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
                        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                        g.ln() + u.ln() / a
                    })
                    .collect();
                let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let norm: f64 = logs.iter().map(|l| (l - max).exp()).sum();
                for (j, l) in logs.iter().enumerate() {
                    let v = (l - max).exp() / norm;
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    theta.push(sign * s * v / (j + 1) as f64);
                }
                theta
            }
            PriorVariant::FexpBeta { beta, a_bound } => {
                let r = a_bound * rng.random::<f64>();
                let z: Vec<f64> = (0..=k).map(|_| StandardNormal.sample(rng)).collect();
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let weights = fexp_beta_weights(*beta, k);
                z.iter().zip(&weights).map(|(v, w)| r * v / norm / w).collect()
            }
            PriorVariant::PointMass(p) => p.theta().to_vec(),
        }
    }

    /// One draw from the prior with its log density.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PriorDraw {
        let params = match &self.variant {
            PriorVariant::PointMass(p) => p.clone(),
            _ => loop {
                let k = Poisson::new(self.mu).expect("validated").sample(rng) as usize;
                let d = self.sample_d(rng);
                let theta = self.sample_theta(k, rng);
                // a Dirichlet coordinate can underflow to exactly zero,
                // which lies outside the open support
                if let Ok(p) = FexpParams::new(d, theta) {
                    if self.log_density(&p) > f64::NEG_INFINITY {
                        break p;
                    }
                }
            },
        };
        let log_density = self.log_density(&params);
        PriorDraw { params, log_density }
    }

    /// Standard deviation of the Gaussian birth proposal for coefficient
    /// `j ≥ 1`, set to the prior's typical magnitude of `|θ_j|` at order `j`.
    pub fn birth_scale(&self, j: usize) -> f64 {
        let jf = j.max(1) as f64;
        match &self.variant {
            PriorVariant::DirichletFexp { b_bound, alpha_scale, .. } => {
                let total: f64 = (1..=j).map(|i| Self::dirichlet_alpha(*alpha_scale, i)).sum();
                0.5 * b_bound * Self::dirichlet_alpha(*alpha_scale, j) / total / jf
            }
            PriorVariant::FexpBeta { beta, a_bound } => 0.5 * a_bound / (jf + 1.0).sqrt() / jf.powf(*beta),
            PriorVariant::PointMass(_) => 1.0,
        }
    }

    fn birth_spike_alpha(&self, j: usize) -> Option<f64> {
        match &self.variant {
            PriorVariant::DirichletFexp { alpha_scale, .. } => {
                Some(Self::dirichlet_alpha(*alpha_scale, j)).filter(|a| *a < 1.0)
            }
            _ => None,
        }
    }

    /// Draws a new coefficient `θ_j`, `j ≥ 1`, for a birth move: `N(0, s_j²)`
    /// with `s_j = birth_scale(j)`. When the prior density of `θ_j` has an
    /// `|θ_j|^{α_j - 1}` spike at zero (Dirichlet variant, `α_j < 1`), it is
    /// an equal mixture of that normal and `±s_j U^{1/α_j}`.
    pub fn sample_birth<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> f64 {
        let sd = self.birth_scale(j);
        match self.birth_spike_alpha(j) {
            Some(a) if rng.random::<bool>() => {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * (sd.ln() + u.ln() / a).exp()
            }
            _ => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
        }
    }

    /// Log density of `sample_birth(j)` at `u`.
    pub fn log_birth_density(&self, j: usize, u: f64) -> f64 {
        let sd = self.birth_scale(j);
        let normal = -0.5 * (u / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        match self.birth_spike_alpha(j) {
            None => normal,
            Some(a) => {
                let x = u.abs();
                let spike = if x > 0.0 && x < sd {
                    a.ln() + (a - 1.0) * x.ln() - a * sd.ln() - std::f64::consts::LN_2
                } else {
                    f64::NEG_INFINITY
                };
                let m = normal.max(spike);
                m + ((normal - m).exp() + (spike - m).exp()).ln() - std::f64::consts::LN_2
            }
        }
    }
}

/// `w_0 = 1`, `w_j = j^β`.
pub fn fexp_beta_weights(beta: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|j| (j.max(1) as f64).powf(beta)).collect()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Draws from `spec`.
pub fn sample_prior<R: Rng + ?Sized>(spec: &PriorSpec, rng: &mut R) -> PriorDraw {
    spec.sample(rng)
}

/// Log prior density of `params`; `-∞` off the support.
pub fn log_prior_density(spec: &PriorSpec, params: &FexpParams) -> f64 {
    spec.log_density(params)
}
