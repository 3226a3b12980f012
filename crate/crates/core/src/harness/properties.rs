//! Randomized divergence property suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::divergences::{b_n, check_b_h_inequality, h, kl_inf, kl_n, log_l2, ConstantMode};
use crate::error::Result;
use crate::spectral::{FexpParams, SpectralFn};

/// Order at which the finite-`n` scaling identities are checked.
const SCALING_N: usize = 16;

/// A random FEXP density with `d ∈ [-0.2, 0.3]` and order at most 3.
pub fn random_fexp<R: Rng + ?Sized>(rng: &mut R) -> FexpParams {
    let d = rng.random_range(-0.2..0.3);
    let k = rng.random_range(0..=3usize);
    let theta = (0..=k)
        .map(|j| {
            let sd = if j == 0 { 0.5 } else { 0.3 / (1.0 + j as f64) };
            Normal::new(0.0, sd).unwrap().sample(rng)
        })
        .collect();
    FexpParams::new(d, theta).expect("bounded draw")
}

/// A random pair with `|d₀ - d| ≤ max_dd`. With `perturb = Some(δ)` the
/// second density is the first moved by at most `δ` in every coordinate.
pub fn random_fexp_pair<R: Rng + ?Sized>(rng: &mut R, max_dd: f64, perturb: Option<f64>) -> (FexpParams, FexpParams) {
    let f0 = random_fexp(rng);
    let f = match perturb {
        Some(delta) => {
            let dd = delta.min(max_dd) * rng.random_range(-1.0..1.0);
            let theta = f0.theta().iter().map(|t| t + delta * rng.random_range(-1.0..1.0)).collect();
            FexpParams::new(f0.d() + dd, theta).expect("small perturbation")
        }
        None => {
            let g = random_fexp(rng);
            let d = f0.d() + max_dd * rng.random_range(-1.0..1.0);
            FexpParams::new(d, g.theta().to_vec()).expect("bounded draw")
        }
    };
    (f0, f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub case: usize,
    pub property: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub cases: usize,
    pub checks: Vec<PropertyCheck>,
    /// Cases in which `h < BH_REGIME`, where `b ≤ h |log h|` is checked.
    pub bh_regime_cases: usize,
}

impl PropertyReport {
    pub fn violations(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn passed(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn count(&self, property: &str) -> usize {
        self.checks.iter().filter(|c| c.property == property).count()
    }
}

fn check(case: usize, property: &str, lhs: f64, rhs: f64, holds: bool, detail: String) -> PropertyCheck {
    PropertyCheck {
        case,
        property: property.into(),
        lhs,
        rhs,
        holds: holds && lhs.is_finite() && rhs.is_finite(),
        detail,
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn case_checks(case: usize, f0: &FexpParams, f: &FexpParams, c: f64) -> Result<(Vec<PropertyCheck>, bool)> {
    let detail = format!("f0={f0} f={f}");
    let s0: SpectralFn = f0.clone().into();
    let s: SpectralFn = f.clone().into();
    let mut out = Vec::new();

    let hp = h(&s0, &s, ConstantMode::Paper)?;
    let l = log_l2(&s0, &s)?;
    let rhs = l / (2.0 * std::f64::consts::PI);
    // both sides carry quadrature error of order 1e-12 relative
    out.push(check(case, "h_ge_l_over_2pi", hp, rhs, hp >= rhs * (1.0 - 1e-10), detail.clone()));

    let bh = check_b_h_inequality(&s0, &s)?;
    if bh.in_regime {
        let bound = if bh.degenerate { 0.0 } else { bh.h * bh.h.ln().abs() };
        out.push(check(case, "b_le_h_abs_log_h", bh.b, bound, bh.holds, detail.clone()));
    }

    let kl = kl_inf(&s0, &s, ConstantMode::Paper)?;
    let min = kl.min(hp).min(bh.b).min(l);
    out.push(check(case, "nonnegative", min, 0.0, min >= 0.0, detail.clone()));

    let scaled = s0.clone().scaled(c);
    let lc = c.ln();
    let kl_exp = 0.5 * (1.0 / c - 1.0 + lc);
    let kl_got = kl_n(&s0, &scaled, SCALING_N)?;
    out.push(check(case, "scaling_kl_n", kl_got, kl_exp, close(kl_got, kl_exp, 1e-10), format!("{detail} c={c}")));
    let b_exp = (1.0 / c - 1.0).powi(2);
    let b_got = b_n(&s0, &scaled, SCALING_N)?;
    out.push(check(case, "scaling_b_n", b_got, b_exp, close(b_got, b_exp, 1e-10), format!("{detail} c={c}")));
    let l_exp = 2.0 * std::f64::consts::PI * lc * lc;
    let l_got = log_l2(&s0, &scaled)?;
    out.push(check(case, "scaling_l", l_got, l_exp, close(l_got, l_exp, 1e-12), format!("{detail} c={c}")));
    Ok((out, bh.in_regime))
}

/// Runs the divergence properties on `case_count` random FEXP pairs with
/// `|Δd| ≤ 0.1`. Odd cases are small perturbations, so that a good share
/// falls in the small-`h` regime. Errors are reported as failed checks.
pub fn validate_properties(seed: u64, case_count: usize) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut bh_regime_cases = 0;
    for case in 0..case_count {
        let perturb = (case % 2 == 1).then(|| 10f64.powf(rng.random_range(-3.0..-1.0)));
        let (f0, f) = random_fexp_pair(&mut rng, 0.1, perturb);
        let c = 10f64.powf(rng.random_range(-1.0..1.0));
        match case_checks(case, &f0, &f, c) {
            Ok((cs, in_regime)) => {
                bh_regime_cases += in_regime as usize;
                checks.extend(cs);
            }
            Err(e) => checks.push(check(case, "evaluation", f64::NAN, f64::NAN, false, format!("f0={f0} f={f}: {e}"))),
        }
    }
    PropertyReport { seed, cases: case_count, checks, bh_regime_cases }
}
