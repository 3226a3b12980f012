//! Python bindings for `longmem_core`.

use pyo3::exceptions::{PyNotImplementedError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use longmem_core::divergences::{self, ConstantMode};
use longmem_core::harness::{self as core_harness};
use longmem_core::posterior::{self as core_posterior};
use longmem_core::prior::{DDensity, PriorSpec};
use longmem_core::simulate::{self as core_simulate, SimMethod, SimRequest, SimSource};
use longmem_core::spectral::{self as core_spectral, SpectralFn};
use longmem_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Unsupported(msg) => PyNotImplementedError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn mode(paper: bool) -> ConstantMode {
    if paper {
        ConstantMode::Paper
    } else {
        ConstantMode::Szego
    }
}

/// FEXP spectral density `|1 - e^{iλ}|^{-2d} exp(Σ θ_j cos jλ)`.
#[pyclass(name = "FexpParams", module = "longmem", from_py_object)]
#[derive(Clone)]
struct PyFexp {
    inner: core_spectral::FexpParams,
}

impl PyFexp {
    fn spectral(&self) -> SpectralFn {
        self.inner.clone().into()
    }
}

#[pymethods]
impl PyFexp {
    #[new]
    fn new(d: f64, theta: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: core_spectral::FexpParams::new(d, theta).map_err(py_err)? })
    }

    /// ARFIMA(0, d, 0) with innovation variance `sigma2`.
    #[staticmethod]
    fn arfima(d: f64, sigma2: f64) -> PyResult<Self> {
        Ok(Self { inner: core_spectral::FexpParams::arfima(d, sigma2).map_err(py_err)? })
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.d()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta().to_vec()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn eval(&self, lam: f64) -> PyResult<f64> {
        self.inner.eval(lam).map_err(py_err)
    }

    fn log_eval(&self, lam: f64) -> PyResult<f64> {
        self.inner.log_spectrum(lam).map_err(py_err)
    }

    /// `γ(0..n)` to relative accuracy `tol`.
    #[pyo3(signature = (n, tol = 1e-12))]
    fn autocov(&self, n: usize, tol: f64) -> PyResult<Vec<f64>> {
        Ok(core_spectral::autocov(&self.spectral(), n, tol).map_err(py_err)?.gamma().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("FexpParams(d={}, theta={:?})", self.inner.d(), self.inner.theta())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

#[pyclass(name = "Prior", module = "longmem", from_py_object)]
#[derive(Clone)]
struct PyPrior {
    inner: PriorSpec,
}

#[pymethods]
impl PyPrior {
    #[staticmethod]
    #[pyo3(signature = (mu, t, b_bound, d_beta = None))]
    fn dirichlet_fexp(mu: f64, t: f64, b_bound: f64, d_beta: Option<(f64, f64)>) -> PyResult<Self> {
        let mut inner = PriorSpec::dirichlet_fexp(mu, t, b_bound).map_err(py_err)?;
        if let Some((a, b)) = d_beta {
            inner.d_density = DDensity::Beta { a, b };
            inner.validate().map_err(py_err)?;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (mu, t, beta, a_bound, d_beta = None))]
    fn fexp_beta(mu: f64, t: f64, beta: f64, a_bound: f64, d_beta: Option<(f64, f64)>) -> PyResult<Self> {
        let mut inner = PriorSpec::fexp_beta(mu, t, beta, a_bound).map_err(py_err)?;
        if let Some((a, b)) = d_beta {
            inner.d_density = DDensity::Beta { a, b };
            inner.validate().map_err(py_err)?;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn point_mass(params: PyFexp) -> Self {
        Self { inner: PriorSpec::point_mass(params.inner) }
    }

    fn log_density(&self, params: &PyFexp) -> f64 {
        self.inner.log_density(&params.inner)
    }

    /// `count` independent prior draws.
    #[pyo3(signature = (count, seed = 0))]
    fn sample(&self, count: usize, seed: u64) -> Vec<PyFexp> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| PyFexp { inner: self.inner.sample(&mut rng).params }).collect()
    }
}

#[pyclass(name = "SamplerConfig", module = "longmem", from_py_object)]
#[derive(Clone)]
struct PySampler {
    inner: core_posterior::SamplerConfig,
}

#[pymethods]
impl PySampler {
    #[new]
    #[pyo3(signature = (iterations = 6000, burn_in = 2000, thin = 4, seed = 0, k_max = 60, prior_only = false, pmc = None))]
    fn new(
        iterations: usize,
        burn_in: usize,
        thin: usize,
        seed: u64,
        k_max: usize,
        prior_only: bool,
        pmc: Option<(usize, usize)>,
    ) -> PyResult<Self> {
        let inner = core_posterior::SamplerConfig {
            iterations,
            burn_in,
            thin,
            seed,
            k_max,
            prior_only,
            pmc: pmc.map(|(population, rounds)| core_posterior::PmcConfig { population, rounds }),
            ..Default::default()
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
}

#[pyclass(name = "Posterior", module = "longmem")]
struct PyPosterior {
    inner: core_posterior::PosteriorSamples,
}

#[pymethods]
impl PyPosterior {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn draws(&self) -> Vec<PyFexp> {
        self.inner.draws.iter().map(|p| PyFexp { inner: p.clone() }).collect()
    }

    #[getter]
    fn d(&self) -> Vec<f64> {
        self.inner.draws.iter().map(|p| p.d()).collect()
    }

    #[getter]
    fn log_posterior(&self) -> Vec<f64> {
        self.inner.log_posterior.clone()
    }

    #[getter]
    fn ess_d(&self) -> f64 {
        self.inner.diagnostics.ess_d
    }

    #[getter]
    fn k_histogram(&self) -> Vec<usize> {
        self.inner.diagnostics.k_histogram.clone()
    }

    /// Posterior mean of `d` and its Monte Carlo standard error.
    fn estimate_d(&self) -> PyResult<(f64, f64)> {
        let e = core_posterior::estimate_d(&self.inner).map_err(py_err)?;
        Ok((e.value, e.std_error))
    }

    /// Log-mean estimator on `grid`.
    fn f_log(&self, grid: Vec<f64>) -> PyResult<Vec<f64>> {
        core_posterior::estimate_f_log(&self.inner, &grid).map_err(py_err)
    }

    /// Symmetrized estimator `sqrt(E f / E 1/f)` on `grid`.
    fn f_h(&self, grid: Vec<f64>) -> PyResult<Vec<f64>> {
        core_posterior::estimate_f_h(&self.inner, &grid).map_err(py_err)
    }

    fn prob_d_within(&self, d0: f64, eps: f64) -> PyResult<f64> {
        Ok(core_posterior::posterior_prob(&self.inner, |p| (p.d() - d0).abs() <= eps).map_err(py_err)?.value)
    }

    fn write_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        core_posterior::write_samples_csv(&path, &self.inner).map_err(py_err)
    }
}

/// `replicates` series of length `n` from `params`.
#[pyfunction]
#[pyo3(signature = (params, n, replicates = 1, seed = 0, method = "auto"))]
fn simulate(params: &PyFexp, n: usize, replicates: usize, seed: u64, method: &str) -> PyResult<Vec<Vec<f64>>> {
    let method = match method {
        "auto" => SimMethod::Auto,
        "circulant" => SimMethod::Circulant,
        "cholesky" => SimMethod::Cholesky,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let req = SimRequest::new(SimSource::Spectral(params.spectral()), n, replicates, seed).with_method(method);
    Ok(core_simulate::sample(&req).map_err(py_err)?.rows)
}

/// Exact Gaussian log-likelihood.
#[pyfunction]
fn loglik(x: Vec<f64>, params: &PyFexp) -> PyResult<f64> {
    core_posterior::fexp_loglik(&x, &params.inner).map_err(py_err)
}

#[pyfunction]
fn whittle_loglik(x: Vec<f64>, params: &PyFexp) -> PyResult<f64> {
    core_posterior::whittle_loglik(&x, &params.spectral()).map_err(py_err)
}

/// Runs the reversible-jump sampler on `x`.
#[pyfunction]
#[pyo3(signature = (x, prior, config = None))]
fn fit(py: Python<'_>, x: Vec<f64>, prior: &PyPrior, config: Option<&PySampler>) -> PyResult<PyPosterior> {
    let cfg = config.map(|c| c.inner.clone()).unwrap_or_default();
    let spec = prior.inner.clone();
    let inner = py.detach(move || core_posterior::run_mcmc(&x, &spec, &cfg)).map_err(py_err)?;
    Ok(PyPosterior { inner })
}

#[pyfunction]
fn kl_n(f0: &PyFexp, f: &PyFexp, n: usize) -> PyResult<f64> {
    divergences::kl_n(&f0.spectral(), &f.spectral(), n).map_err(py_err)
}

#[pyfunction]
fn h_n(f0: &PyFexp, f: &PyFexp, n: usize) -> PyResult<f64> {
    divergences::h_n(&f0.spectral(), &f.spectral(), n).map_err(py_err)
}

#[pyfunction]
fn b_n(f0: &PyFexp, f: &PyFexp, n: usize) -> PyResult<f64> {
    divergences::b_n(&f0.spectral(), &f.spectral(), n).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (f0, f, paper = false))]
fn kl_inf(f0: &PyFexp, f: &PyFexp, paper: bool) -> PyResult<f64> {
    divergences::kl_inf(&f0.spectral(), &f.spectral(), mode(paper)).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (f0, f, paper = false))]
fn h(f0: &PyFexp, f: &PyFexp, paper: bool) -> PyResult<f64> {
    divergences::h(&f0.spectral(), &f.spectral(), mode(paper)).map_err(py_err)
}

#[pyfunction]
fn b(f0: &PyFexp, f: &PyFexp) -> PyResult<f64> {
    divergences::b(&f0.spectral(), &f.spectral()).map_err(py_err)
}

/// `∫ (log f - log g)²` over `[-π, π]`.
#[pyfunction]
fn log_l2(f: &PyFexp, g: &PyFexp) -> PyResult<f64> {
    divergences::log_l2(&f.spectral(), &g.spectral()).map_err(py_err)
}

/// Runs a preset or config-file experiment; returns `(report_csv, summary_json)`.
#[pyfunction]
#[pyo3(signature = (preset = None, config = None, seed = None))]
fn run_experiment(
    py: Python<'_>,
    preset: Option<String>,
    config: Option<String>,
    seed: Option<u64>,
) -> PyResult<(String, String)> {
    let mut cfg = match (preset, config) {
        (_, Some(text)) => core_harness::ExperimentConfig::parse(&text),
        (Some(name), None) => core_harness::ExperimentConfig::preset(&name),
        (None, None) => core_harness::ExperimentConfig::preset("smoke"),
    }
    .map_err(py_err)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let report = py.detach(move || core_harness::run_experiment(&cfg)).map_err(py_err)?;
    Ok((report.to_csv(), report.summary_json().to_string()))
}

/// Randomized divergence property checks; returns `(passed, checks, violations)`.
#[pyfunction]
#[pyo3(signature = (seed = 0, cases = 200))]
fn validate_properties(seed: u64, cases: usize) -> (bool, usize, usize) {
    let report = core_harness::validate_properties(seed, cases);
    (report.passed(), report.checks.len(), report.violations().count())
}

#[pymodule]
fn longmem(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFexp>()?;
    m.add_class::<PyPrior>()?;
    m.add_class::<PySampler>()?;
    m.add_class::<PyPosterior>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(loglik, m)?)?;
    m.add_function(wrap_pyfunction!(whittle_loglik, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(kl_n, m)?)?;
    m.add_function(wrap_pyfunction!(h_n, m)?)?;
    m.add_function(wrap_pyfunction!(b_n, m)?)?;
    m.add_function(wrap_pyfunction!(kl_inf, m)?)?;
    m.add_function(wrap_pyfunction!(h, m)?)?;
    m.add_function(wrap_pyfunction!(b, m)?)?;
    m.add_function(wrap_pyfunction!(log_l2, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(validate_properties, m)?)?;
    Ok(())
}
