//! Divergences between Gaussian process laws indexed by spectral densities.
//!
//! Finite-order forms work on `T_n(f₀) T_n(f)⁻¹`; integral forms integrate
//! functions of `r(λ) = log f₀(λ) - log f(λ)` over `[-π, π]`.
//!
//! Two normalizations of the integral `KL` and `h` are offered. `Paper`
//! uses `1/π` and `1/2π`; `Szego` uses `1/4π` for both, which is the limit
//! of the finite-order quantities as `n → ∞`. On `f = c·f₀` the two differ
//! by exactly 4 (`KL`) and 2 (`h`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_checked;
use crate::spectral::SpectralFn;
use crate::toeplitz::{solve_matrix, trace_ratio_cov, ToeplitzCov, ToeplitzSolver, TraceMode, TRACE_AUTOCOV_TOL};

const QUAD_ABS_TOL: f64 = 1e-13;
const QUAD_REL_TOL: f64 = 1e-12;

/// Regime in which the `b ≤ h |log h|` inequality is asserted.
pub const BH_REGIME: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantMode {
    Paper,
    #[default]
    Szego,
}

struct Side {
    cov: ToeplitzCov,
    solver: ToeplitzSolver,
}

impl Side {
    fn new(f: &SpectralFn, n: usize) -> Result<Self> {
        let cov = ToeplitzCov::from_spectral(f, n, TRACE_AUTOCOV_TOL)?;
        let solver = cov.factor()?;
        Ok(Self { cov, solver })
    }
}

/// `KL_n` from already-factored sides.
fn kl_from_sides(num: &Side, den: &Side, mode: TraceMode) -> Result<f64> {
    let n = num.cov.n() as f64;
    let tr = trace_ratio_cov(&num.cov, &den.solver, mode)?.value;
    let logdet = (num.solver.logdet() - den.solver.logdet()) / n;
    Ok(0.5 * (tr - 1.0 - logdet))
}

/// `KL_n(f₀; f) = (1/2n)[tr(T(f₀)T(f)⁻¹) - n - log det(T(f₀)T(f)⁻¹)]` with
/// an exact trace.
pub fn kl_n(f0: &SpectralFn, f: &SpectralFn, n: usize) -> Result<f64> {
    kl_n_with(f0, f, n, TraceMode::Exact)
}

pub fn kl_n_with(f0: &SpectralFn, f: &SpectralFn, n: usize, mode: TraceMode) -> Result<f64> {
    kl_from_sides(&Side::new(f0, n)?, &Side::new(f, n)?, mode)
}

/// `h_n = KL_n(f₀;f) + KL_n(f;f₀)`.
pub fn h_n(f0: &SpectralFn, f: &SpectralFn, n: usize) -> Result<f64> {
    let a = Side::new(f0, n)?;
    let b = Side::new(f, n)?;
    Ok(kl_from_sides(&a, &b, TraceMode::Exact)? + kl_from_sides(&b, &a, TraceMode::Exact)?)
}

/// `d_n = min(KL_n(f₀;f), KL_n(f;f₀))`.
pub fn d_n(f0: &SpectralFn, f: &SpectralFn, n: usize) -> Result<f64> {
    let a = Side::new(f0, n)?;
    let b = Side::new(f, n)?;
    Ok(kl_from_sides(&a, &b, TraceMode::Exact)?.min(kl_from_sides(&b, &a, TraceMode::Exact)?))
}

fn b_from_sides(num: &Side, den: &Side) -> Result<f64> {
    // Y = T(f)⁻¹T(f₀) = (T(f₀)T(f)⁻¹)'; D = I - Y', tr(D²) = Σ D_ij D_ji
    let y = solve_matrix(&num.cov, &den.solver)?;
    let n = y.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dij = if i == j { 1.0 } else { 0.0 } - y[(j, i)];
            let dji = if i == j { 1.0 } else { 0.0 } - y[(i, j)];
            acc += dij * dji;
        }
    }
    Ok(acc / n as f64)
}

/// `b_n(f₀, f) = tr{(I - T(f₀)T(f)⁻¹)²} / n`.
pub fn b_n(f0: &SpectralFn, f: &SpectralFn, n: usize) -> Result<f64> {
    b_from_sides(&Side::new(f0, n)?, &Side::new(f, n)?)
}

/// Rejects pairs whose ratio `f₀/f` has a pole of order `power · 2Δd ≥ 1`.
fn check_integrable(f0: &SpectralFn, f: &SpectralFn, power: f64, what: &str) -> Result<()> {
    let excess = 2.0 * power * (f0.memory() - f.memory());
    if excess >= 1.0 {
        return Err(Error::InvalidParameter(format!("{what}: ratio pole of order {excess} is not integrable")));
    }
    Ok(())
}

/// `∫_{-π}^{π} φ(log f₀ - log f) dλ` for an even integrand.
fn integrate_log_ratio<F: Fn(f64) -> f64>(f0: &SpectralFn, f: &SpectralFn, phi: F) -> Result<f64> {
    let integrand = |l: f64| match (f0.log_eval(l), f.log_eval(l)) {
        (Ok(a), Ok(b)) => phi(a - b),
        _ => f64::NAN,
    };
    Ok(2.0 * integrate_checked(integrand, 0.0, PI, 1, QUAD_ABS_TOL, QUAD_REL_TOL)?.value)
}

/// `(1/2π) ∫ f/g`, the limit of `trace_ratio(f, g, n)`.
pub fn trace_ratio_limit(f: &SpectralFn, g: &SpectralFn) -> Result<f64> {
    check_integrable(f, g, 1.0, "trace limit")?;
    Ok(integrate_log_ratio(f, g, f64::exp)? / (2.0 * PI))
}

/// `∫ [f₀/f - 1 - log(f₀/f)]` weighted by `1/π` (paper) or `1/4π` (Szegő).
pub fn kl_inf(f0: &SpectralFn, f: &SpectralFn, mode: ConstantMode) -> Result<f64> {
    check_integrable(f0, f, 1.0, "KL_inf")?;
    let integral = integrate_log_ratio(f0, f, |r| r.exp_m1() - r)?;
    Ok(match mode {
        ConstantMode::Paper => integral / PI,
        ConstantMode::Szego => integral / (4.0 * PI),
    })
}

/// `∫ [f₀/f + f/f₀ - 2]` weighted by `1/2π` (paper) or `1/4π` (Szegő).
pub fn h(f0: &SpectralFn, f: &SpectralFn, mode: ConstantMode) -> Result<f64> {
    check_integrable(f0, f, 1.0, "h")?;
    check_integrable(f, f0, 1.0, "h")?;
    let integral = integrate_log_ratio(f0, f, |r| {
        let s = (0.5 * r).sinh();
        4.0 * s * s
    })?;
    Ok(match mode {
        ConstantMode::Paper => integral / (2.0 * PI),
        ConstantMode::Szego => integral / (4.0 * PI),
    })
}

/// `min(KL_∞(f₀;f), KL_∞(f;f₀))`.
pub fn d(f0: &SpectralFn, f: &SpectralFn, mode: ConstantMode) -> Result<f64> {
    Ok(kl_inf(f0, f, mode)?.min(kl_inf(f, f0, mode)?))
}

/// `b(f₀, f) = (1/2π) ∫ (f₀/f - 1)²`.
pub fn b(f0: &SpectralFn, f: &SpectralFn) -> Result<f64> {
    check_integrable(f0, f, 2.0, "b")?;
    Ok(integrate_log_ratio(f0, f, |r| r.exp_m1().powi(2))? / (2.0 * PI))
}

/// `ℓ(f, g) = ∫_{-π}^{π} (log f - log g)²`.
///
/// For two (scaled) FEXP densities this is evaluated from the cosine
/// expansion `log|1 - e^{iλ}| = -Σ_{j≥1} cos(jλ)/j`:
/// `2π Δθ₀² + π Σ_{j≥1} (Δθ_j + 2Δd/j)²`, with the tail beyond the larger
/// order summed through `π²/6`.
pub fn log_l2(f: &SpectralFn, g: &SpectralFn) -> Result<f64> {
    if let (Some((cf, pf)), Some((cg, pg))) = (f.as_scaled_fexp(), g.as_scaled_fexp()) {
        let dd = pf.d() - pg.d();
        let (tf, tg) = (pf.theta(), pg.theta());
        let k = tf.len().max(tg.len());
        let coef = |t: &[f64], j: usize| t.get(j).copied().unwrap_or(0.0);
        let dtheta0 = coef(tf, 0) - coef(tg, 0) + cf.ln() - cg.ln();
        let mut acc = 2.0 * PI * dtheta0 * dtheta0;
        let mut partial_zeta2 = 0.0;
        for j in 1..k {
            let jf = j as f64;
            let term = coef(tf, j) - coef(tg, j) + 2.0 * dd / jf;
            acc += PI * term * term;
            partial_zeta2 += 1.0 / (jf * jf);
        }
        let tail = (PI * PI / 6.0 - partial_zeta2).max(0.0);
        acc += PI * 4.0 * dd * dd * tail;
        return Ok(acc);
    }
    log_l2_quadrature(f, g)
}

/// `ℓ(f, g)` by quadrature, for any pair.
pub fn log_l2_quadrature(f: &SpectralFn, g: &SpectralFn) -> Result<f64> {
    integrate_log_ratio(f, g, |r| r * r)
}

/// Outcome of checking `b(f,f₀) ≤ h(f,f₀) |log h(f,f₀)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BhCheck {
    pub b: f64,
    /// Paper-normalized `h`.
    pub h: f64,
    pub holds: bool,
    /// `h = 0`: the right side is `0 · ∞` and the check holds vacuously.
    pub degenerate: bool,
    /// `h < BH_REGIME`, where the inequality is expected.
    pub in_regime: bool,
}

pub fn check_b_h_inequality(f0: &SpectralFn, f: &SpectralFn) -> Result<BhCheck> {
    let bv = b(f, f0)?;
    let hv = h(f, f0, ConstantMode::Paper)?;
    let degenerate = hv <= 0.0;
    let holds = degenerate || bv <= hv * hv.ln().abs();
    Ok(BhCheck { b: bv, h: hv, holds, degenerate, in_regime: hv < BH_REGIME })
}

/// Every divergence between `f₀` and `f`, finite-order at `n` and integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub n: usize,
    pub kl_n: f64,
    pub kl_n_reverse: f64,
    pub h_n: f64,
    pub d_n: f64,
    pub b_n: f64,
    pub kl_inf_paper: f64,
    pub kl_inf_szego: f64,
    pub h_paper: f64,
    pub h_szego: f64,
    pub d_paper: f64,
    pub b_paper: f64,
    pub l: f64,
    pub quadrature_tol: f64,
}

pub fn divergence_report(f0: &SpectralFn, f: &SpectralFn, n: usize) -> Result<DivergenceReport> {
    let a = Side::new(f0, n)?;
    let bside = Side::new(f, n)?;
    let kl = kl_from_sides(&a, &bside, TraceMode::Exact)?;
    let kl_rev = kl_from_sides(&bside, &a, TraceMode::Exact)?;
    let kl_inf_paper = kl_inf(f0, f, ConstantMode::Paper)?;
    Ok(DivergenceReport {
        n,
        kl_n: kl,
        kl_n_reverse: kl_rev,
        h_n: kl + kl_rev,
        d_n: kl.min(kl_rev),
        b_n: b_from_sides(&a, &bside)?,
        kl_inf_paper,
        kl_inf_szego: kl_inf_paper / 4.0,
        h_paper: h(f0, f, ConstantMode::Paper)?,
        h_szego: h(f0, f, ConstantMode::Szego)?,
        d_paper: d(f0, f, ConstantMode::Paper)?,
        b_paper: b(f0, f)?,
        l: log_l2(f0, f)?,
        quadrature_tol: QUAD_REL_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::FexpParams;

    fn fexp(d: f64, theta: &[f64]) -> SpectralFn {
        FexpParams::new(d, theta.to_vec()).unwrap().into()
    }

    #[test]
    fn identical_pair_is_zero() {
        let f = fexp(0.2, &[0.1, 0.3, -0.1]);
        assert!(kl_n(&f, &f, 32).unwrap().abs() < 1e-10);
        assert!(h_n(&f, &f, 16).unwrap().abs() < 1e-10);
        assert!(b_n(&f, &f, 16).unwrap().abs() < 1e-10);
        assert_eq!(kl_inf(&f, &f, ConstantMode::Paper).unwrap(), 0.0);
        assert_eq!(h(&f, &f, ConstantMode::Szego).unwrap(), 0.0);
        assert_eq!(b(&f, &f).unwrap(), 0.0);
        assert_eq!(log_l2(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn scaling_integral_forms() {
        let f0 = fexp(0.3, &[0.2, -0.4]);
        let c: f64 = 2.0;
        let f = f0.clone().scaled(c);
        let base = 1.0 / c - 1.0 + c.ln();
        let paper = kl_inf(&f0, &f, ConstantMode::Paper).unwrap();
        let szego = kl_inf(&f0, &f, ConstantMode::Szego).unwrap();
        assert!((paper - 2.0 * base).abs() < 1e-11, "{paper}");
        assert!((szego - 0.5 * base).abs() < 1e-11, "{szego}");
        let hp = h(&f0, &f, ConstantMode::Paper).unwrap();
        assert!((hp - (c + 1.0 / c - 2.0)).abs() < 1e-11);
        assert!((b(&f0, &f).unwrap() - (1.0 / c - 1.0).powi(2)).abs() < 1e-11);
        assert!((log_l2(&f0, &f).unwrap() - 2.0 * PI * c.ln().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn h_n_is_symmetric() {
        let f0 = fexp(0.1, &[0.0, 0.5]);
        let f = fexp(0.25, &[0.3, -0.2, 0.1]);
        assert_eq!(h_n(&f0, &f, 24).unwrap(), h_n(&f, &f0, 24).unwrap());
    }

    #[test]
    fn b_h_degenerate_and_out_of_regime() {
        let f = fexp(0.1, &[0.0, 0.2]);
        let c = check_b_h_inequality(&f, &f).unwrap();
        assert!(c.degenerate && c.holds);
        let far = fexp(-0.2, &[2.0, 1.0]);
        let c = check_b_h_inequality(&f, &far).unwrap();
        assert!(!c.in_regime && c.h.is_finite() && c.b.is_finite());
    }

    #[test]
    fn non_integrable_ratio_rejected() {
        let f0 = fexp(0.45, &[0.0]);
        let f = fexp(-0.1, &[0.0]);
        assert!(kl_inf(&f0, &f, ConstantMode::Szego).is_err());
        assert!(b(&f0, &f).is_err());
    }
}
