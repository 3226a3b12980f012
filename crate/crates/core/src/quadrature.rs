//! Double-exponential (tanh-sinh) quadrature.
//!
//! Abscissae cluster double-exponentially at both endpoints and the
//! integrand is never evaluated at an endpoint, so integrable algebraic
//! and logarithmic endpoint singularities (the spectral pole at zero) are
//! handled without special treatment.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const T_MAX: f64 = 6.5;
const MIN_LEVEL: usize = 3;
const MAX_LEVEL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Difference between the last two refinement levels.
    pub error: f64,
}

/// Node at parameter `t >= 0`: returns the distance from the endpoint and
/// the (unscaled by `h`) weight.
fn node(t: f64, width: f64) -> (f64, f64) {
    let u = FRAC_PI_2 * t.sinh();
    let e = (-2.0 * u).exp();
    // distance from the nearer endpoint: width / (1 + e^{2u})
    let offset = width * e / (1.0 + e);
    // (width/2) * (pi/2) cosh t / cosh^2 u
    let weight = width * 0.5 * FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
    (offset, weight)
}

fn contribution<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, t: f64) -> f64 {
    let width = b - a;
    let (offset, weight) = node(t.abs(), width);
    if weight == 0.0 || offset == 0.0 {
        return 0.0;
    }
    if t == 0.0 {
        return weight * f(a + offset);
    }
    let x = if t < 0.0 { a + offset } else { b - offset };
    if x <= a || x >= b {
        return 0.0;
    }
    weight * f(x)
}

/// Integrates `f` over `[a, b]` until successive levels differ by less
/// than `max(abs_tol, rel_tol * |I|)`. Returns the estimate even when the
/// tolerance is missed; the caller inspects `error`.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    if b <= a {
        return Quadrature { value: 0.0, error: 0.0 };
    }
    let mut sum = contribution(&f, a, b, 0.0);
    let mut k = 1.0;
    while k <= T_MAX {
        sum += contribution(&f, a, b, k) + contribution(&f, a, b, -k);
        k += 1.0;
    }
    let mut prev = sum;
    let mut error = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        let h = 0.5f64.powi(level as i32);
        let mut j = 1u64;
        loop {
            let t = j as f64 * h;
            if t > T_MAX {
                break;
            }
            sum += contribution(&f, a, b, t) + contribution(&f, a, b, -t);
            j += 2;
        }
        let estimate = sum * h;
        error = (estimate - prev).abs();
        prev = estimate;
        if level >= MIN_LEVEL && (error <= abs_tol || error <= rel_tol * estimate.abs()) {
            break;
        }
        if !estimate.is_finite() {
            break;
        }
    }
    Quadrature { value: prev, error }
}

/// Splits `[a, b]` into `panels` equal pieces and sums tanh-sinh estimates.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Quadrature {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let per_panel = abs_tol / panels as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        let q = tanh_sinh(&f, lo, hi, per_panel, rel_tol);
        value += q.value;
        error += q.error;
    }
    Quadrature { value, error }
}

/// `integrate_panels` that fails unless the achieved error is within
/// `max(abs_tol, rel_tol * |I|)` and the value is finite.
pub fn integrate_checked<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    let q = integrate_panels(f, a, b, panels, abs_tol, rel_tol);
    let allowed = abs_tol.max(rel_tol * q.value.abs());
    if !q.value.is_finite() || !(q.error <= allowed) {
        return Err(Error::Quadrature { requested: allowed, achieved: q.error });
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial() {
        let q = tanh_sinh(|x| x * x, 0.0, 3.0, 1e-14, 1e-14);
        assert!((q.value - 9.0).abs() < 1e-12, "{q:?}");
    }

    #[test]
    fn algebraic_endpoint_singularity() {
        // int_0^1 x^{-0.9} dx = 10
        let q = tanh_sinh(|x: f64| x.powf(-0.9), 0.0, 1.0, 1e-12, 1e-12);
        assert!((q.value - 10.0).abs() < 1e-8, "{q:?}");
    }

    #[test]
    fn log_singularity() {
        // int_0^1 ln x dx = -1
        let q = tanh_sinh(|x: f64| x.ln(), 0.0, 1.0, 1e-13, 1e-13);
        assert!((q.value + 1.0).abs() < 1e-11, "{q:?}");
    }

    #[test]
    fn oscillatory_panels() {
        // int_0^pi cos(40 x) e^{x} dx = (e^pi - 1) / (1 + 1600)
        let exact = (std::f64::consts::PI.exp() - 1.0) / 1601.0;
        let q = integrate_checked(|x: f64| (40.0 * x).cos() * x.exp(), 0.0, std::f64::consts::PI, 12, 1e-13, 1e-13)
            .unwrap();
        assert!((q.value - exact).abs() < 1e-11, "{q:?} vs {exact}");
    }
}
