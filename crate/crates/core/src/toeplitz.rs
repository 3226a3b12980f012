//! Symmetric positive definite Toeplitz systems via the Levinson-Durbin
//! recursion.
//!
//! A factorization keeps the reflection coefficients and innovation
//! variances `v_0..v_{n-1}`; `log det T_n = Σ_k log v_k` and solves rebuild
//! the predictors on the fly, so memory stays `O(n)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectral::{autocov, AutocovSeq, SpectralFn};

/// Innovation variances below `PD_FLOOR * γ(0)` are treated as loss of
/// positive definiteness.
pub const PD_FLOOR: f64 = 1e-13;

/// Largest order for which traces are computed by `n` explicit solves.
pub const EXACT_TRACE_CAP: usize = 512;

/// Autocovariance tolerance used when a trace routine builds `T_n(f)`
/// from a spectral density.
pub const TRACE_AUTOCOV_TOL: f64 = 1e-12;

/// `T_n(f)`, stored by its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzCov {
    gamma: AutocovSeq,
}

impl ToeplitzCov {
    pub fn new(gamma: AutocovSeq) -> Self {
        Self { gamma }
    }

    pub fn from_spectral(f: &SpectralFn, n: usize, tol: f64) -> Result<Self> {
        Ok(Self::new(autocov(f, n, tol)?))
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        self.gamma.gamma()
    }

    pub fn autocov(&self) -> &AutocovSeq {
        &self.gamma
    }

    pub fn factor(&self) -> Result<ToeplitzSolver> {
        factor(self)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        matvec(self, x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let g = self.gamma();
        DMatrix::from_fn(self.n(), self.n(), |i, j| g[i.abs_diff(j)])
    }
}

/// Factored `T_n`: reflection coefficients `κ_1..κ_{n-1}`, innovation
/// variances and the final prediction coefficients.
#[derive(Debug, Clone)]
pub struct ToeplitzSolver {
    gamma: Vec<f64>,
    reflection: Vec<f64>,
    innovations: Vec<f64>,
    predictor: Vec<f64>,
    logdet: f64,
}

/// In-place order update `φ_{k,j} = φ_{k-1,j} - κ φ_{k-1,k-j}`, then
/// `φ_{k,k} = κ`.
#[inline]
fn update_predictor(phi: &mut Vec<f64>, kappa: f64) {
    let m = phi.len();
    for i in 0..m / 2 {
        let a = phi[i];
        let b = phi[m - 1 - i];
        phi[i] = a - kappa * b;
        phi[m - 1 - i] = b - kappa * a;
    }
    if m % 2 == 1 {
        phi[m / 2] *= 1.0 - kappa;
    }
    phi.push(kappa);
}

/// `Σ_j a[j] b[len-1-j]` with independent partial sums so it vectorizes.
#[inline]
fn rev_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    for (ca, cb) in a.chunks_exact(4).zip(b.rchunks_exact(4)) {
        acc[0] += ca[0] * cb[3];
        acc[1] += ca[1] * cb[2];
        acc[2] += ca[2] * cb[1];
        acc[3] += ca[3] * cb[0];
    }
    let ra = a.chunks_exact(4).remainder();
    let rb = b.rchunks_exact(4).remainder();
    let tail: f64 = ra.iter().zip(rb.iter().rev()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Runs Durbin's recursion, calling `visit(k, φ_k, v_k)` after each order
/// update (including `k = 0` with an empty predictor).
fn durbin<F: FnMut(usize, &[f64], f64, f64)>(gamma: &[f64], mut visit: F) -> Result<()> {
    let n = gamma.len();
    let g0 = gamma[0];
    let floor = PD_FLOOR * g0;
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut v = g0;
    visit(0, &phi, v, 0.0);
    for k in 1..n {
        let kappa = (gamma[k] - rev_dot(&phi, &gamma[1..k])) / v;
        update_predictor(&mut phi, kappa);
        v *= 1.0 - kappa * kappa;
        if !(v > floor) {
            return Err(Error::NotPositiveDefinite { index: k, value: v });
        }
        visit(k, &phi, v, kappa);
    }
    Ok(())
}

/// Factors `T` in `O(n²)`; fails with the first index whose innovation
/// variance drops below `PD_FLOOR · γ(0)`.
pub fn factor(t: &ToeplitzCov) -> Result<ToeplitzSolver> {
    let gamma = t.gamma().to_vec();
    let n = gamma.len();
    let mut reflection = Vec::with_capacity(n.saturating_sub(1));
    let mut innovations = Vec::with_capacity(n);
    let mut predictor = Vec::new();
    durbin(&gamma, |k, phi, v, kappa| {
        if k > 0 {
            reflection.push(kappa);
        }
        innovations.push(v);
        if k + 1 == n {
            predictor = phi.to_vec();
        }
    })?;
    let logdet = innovations.iter().map(|v| v.ln()).sum();
    Ok(ToeplitzSolver { gamma, reflection, innovations, predictor, logdet })
}

impl ToeplitzSolver {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn innovations(&self) -> &[f64] {
        &self.innovations
    }

    pub fn reflection(&self) -> &[f64] {
        &self.reflection
    }

    /// Coefficients `φ_{n-1,1..n-1}` of the one-step predictor of the
    /// last observation.
    pub fn predictor(&self) -> &[f64] {
        &self.predictor
    }

    /// Smallest innovation variance relative to `γ(0)`.
    pub fn condition_diagnostic(&self) -> f64 {
        self.innovations.iter().cloned().fold(f64::INFINITY, f64::min) / self.gamma[0]
    }

    /// Solves `T x = b` by Levinson's recursion.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let g = &self.gamma;
        let mut x = Vec::with_capacity(n);
        x.push(b[0] / g[0]);
        let mut phi: Vec<f64> = Vec::with_capacity(n);
        for k in 1..n {
            update_predictor(&mut phi, self.reflection[k - 1]);
            let mut eps = b[k];
            for (j, xj) in x.iter().enumerate() {
                eps -= g[k - j] * xj;
            }
            let mu = eps / self.innovations[k];
            for j in 0..k {
                x[j] -= mu * phi[k - 1 - j];
            }
            x.push(mu);
        }
        Ok(x)
    }

    /// `x' T⁻¹ y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let s = self.solve(y)?;
        if x.len() != s.len() {
            return Err(Error::DimensionMismatch { expected: s.len(), got: x.len() });
        }
        Ok(x.iter().zip(&s).map(|(a, b)| a * b).sum())
    }

    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        self.bilinear(x, x)
    }
}

fn next_fft_len(n: usize) -> usize {
    (2 * n).next_power_of_two()
}

/// `T x` through a circulant embedding and the FFT.
pub fn matvec(t: &ToeplitzCov, x: &[f64]) -> Result<Vec<f64>> {
    let n = t.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let len = next_fft_len(n);
    let g = t.gamma();
    let mut c = vec![Complex::new(0.0, 0.0); len];
    c[0].re = g[0];
    for tau in 1..n {
        c[tau].re = g[tau];
        c[len - tau].re = g[tau];
    }
    let mut v = vec![Complex::new(0.0, 0.0); len];
    for (slot, xi) in v.iter_mut().zip(x) {
        slot.re = *xi;
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    fwd.process(&mut c);
    fwd.process(&mut v);
    for (a, b) in v.iter_mut().zip(&c) {
        *a *= b;
    }
    inv.process(&mut v);
    let scale = 1.0 / len as f64;
    Ok(v[..n].iter().map(|z| z.re * scale).collect())
}

/// Exact Gaussian log-density `-x'T⁻¹x/2 - log det T/2 - (n/2) log 2π`,
/// from one Durbin pass that also filters `x` into its innovations.
pub fn gauss_loglik(gamma: &AutocovSeq, x: &[f64]) -> Result<f64> {
    let g = gamma.gamma();
    let n = g.len();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let mut quad = 0.0;
    let mut logdet = 0.0;
    durbin(g, |k, phi, v, _| {
        let e = x[k] - rev_dot(phi, &x[..k]);
        quad += e * e / v;
        logdet += v.ln();
    })?;
    Ok(-0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceMode {
    /// `n` explicit solves; refuses `n > EXACT_TRACE_CAP`.
    Exact,
    /// Hutchinson estimator with Rademacher probes.
    Stochastic { probes: usize, seed: u64 },
    /// Exact up to the cap, stochastic above it.
    ExactOrStochastic { probes: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub value: f64,
    /// Zero for exact traces.
    pub std_error: f64,
    pub exact: bool,
}

/// `T(g)⁻¹ T(f)` as a dense matrix (the transpose of `T(f) T(g)⁻¹`).
pub fn solve_matrix(tf: &ToeplitzCov, sg: &ToeplitzSolver) -> Result<DMatrix<f64>> {
    let n = tf.n();
    if sg.n() != n {
        return Err(Error::DimensionMismatch { expected: sg.n(), got: n });
    }
    if n > EXACT_TRACE_CAP {
        return Err(Error::ExactTraceCap { n, cap: EXACT_TRACE_CAP });
    }
    let g = tf.gamma();
    let mut out = DMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = g[i.abs_diff(j)];
        }
        let y = sg.solve(&col)?;
        out.column_mut(j).copy_from_slice(&y);
    }
    Ok(out)
}

/// `(1/n) tr(T(f) T(g)⁻¹)` for already-built matrices.
pub fn trace_ratio_cov(tf: &ToeplitzCov, sg: &ToeplitzSolver, mode: TraceMode) -> Result<TraceEstimate> {
    let n = tf.n();
    let (exact, probes, seed) = match mode {
        TraceMode::Exact => {
            if n > EXACT_TRACE_CAP {
                return Err(Error::ExactTraceCap { n, cap: EXACT_TRACE_CAP });
            }
            (true, 0, 0)
        }
        TraceMode::Stochastic { probes, seed } => (false, probes, seed),
        TraceMode::ExactOrStochastic { probes, seed } => (n <= EXACT_TRACE_CAP, probes, seed),
    };
    if exact {
        let y = solve_matrix(tf, sg)?;
        return Ok(TraceEstimate { value: y.trace() / n as f64, std_error: 0.0, exact: true });
    }
    if probes < 2 {
        return Err(Error::InvalidParameter("stochastic trace needs at least 2 probes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(probes);
    for _ in 0..probes {
        let z: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let w = matvec(tf, &z)?;
        let y = sg.solve(&w)?;
        samples.push(z.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64);
    }
    let mean = samples.iter().sum::<f64>() / probes as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (probes - 1) as f64;
    Ok(TraceEstimate { value: mean, std_error: (var / probes as f64).sqrt(), exact: false })
}

/// `(1/n) tr(T_n(f) T_n(g)⁻¹)`.
pub fn trace_ratio(f: &SpectralFn, g: &SpectralFn, n: usize, mode: TraceMode) -> Result<TraceEstimate> {
    if mode == TraceMode::Exact && n > EXACT_TRACE_CAP {
        return Err(Error::ExactTraceCap { n, cap: EXACT_TRACE_CAP });
    }
    let tf = ToeplitzCov::from_spectral(f, n, TRACE_AUTOCOV_TOL)?;
    let sg = ToeplitzCov::from_spectral(g, n, TRACE_AUTOCOV_TOL)?.factor()?;
    trace_ratio_cov(&tf, &sg, mode)
}

/// `(1/n) tr(Π_i T_n(f_i) T_n(g_i)⁻¹)`, exact only.
pub fn trace_product(fs: &[SpectralFn], gs: &[SpectralFn], n: usize) -> Result<f64> {
    if fs.len() != gs.len() {
        return Err(Error::DimensionMismatch { expected: fs.len(), got: gs.len() });
    }
    if fs.is_empty() {
        return Err(Error::InvalidParameter("trace_product needs at least one pair".into()));
    }
    if n > EXACT_TRACE_CAP {
        return Err(Error::ExactTraceCap { n, cap: EXACT_TRACE_CAP });
    }
    let mut product: Option<DMatrix<f64>> = None;
    for (f, g) in fs.iter().zip(gs) {
        let tf = ToeplitzCov::from_spectral(f, n, TRACE_AUTOCOV_TOL)?;
        let sg = ToeplitzCov::from_spectral(g, n, TRACE_AUTOCOV_TOL)?.factor()?;
        let factor = solve_matrix(&tf, &sg)?.transpose();
        product = Some(match product {
            None => factor,
            Some(p) => p * factor,
        });
    }
    Ok(product.map(|p| p.trace()).unwrap_or(0.0) / n as f64)
}
