//! End-to-end experiments: simulate, fit, score.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind};
use super::properties::{random_fexp_pair, validate_properties, PropertyReport};
use crate::divergences::{h, kl_inf, kl_n, log_l2, log_l2_quadrature, trace_ratio_limit, ConstantMode};
use crate::error::Result;
use crate::posterior::{estimate_d, f_h_spectral, log_mean_params, posterior_prob, run_mcmc, SamplerConfig};
use crate::simulate::{sample, write_series_csv, SimRequest, SimSource};
use crate::spectral::SpectralFn;
use crate::toeplitz::{trace_ratio, TraceMode};

/// Thresholds for `P(|d - d₀| > ε | X)`.
pub const EPS_LEVELS: [f64; 3] = [0.05, 0.1, 0.25];

/// Fraction of failed tasks above which an experiment counts as failed.
pub const FAILURE_THRESHOLD: f64 = 0.2;

pub const FIT_COLUMNS: &[&str] = &[
    "n",
    "replicate",
    "status",
    "d_hat",
    "d_se",
    "abs_err_d",
    "l_fhat_f0",
    "l_fhat2_f0",
    "prob_eps_0.05",
    "prob_eps_0.1",
    "prob_eps_0.25",
    "h_paper_f0_fhat2",
    "ess_d",
    "mean_k",
];

pub const TRACE_COLUMNS: &[&str] =
    &["pair", "n", "status", "trace_ratio", "trace_limit", "trace_err", "kl_n", "kl_limit", "kl_err"];

pub const PROPERTY_COLUMNS: &[&str] = &["case", "property", "lhs", "rhs", "holds", "detail"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub n: usize,
    pub replicate: usize,
    /// `ok`, or the error that aborted this replicate.
    pub status: String,
    pub d_hat: f64,
    pub d_se: f64,
    pub abs_err_d: f64,
    /// `ℓ(f̂, f₀)` for the log-loss estimator.
    pub l_fhat_f0: f64,
    /// `ℓ(f̂₂, f₀)` for the `h`-loss estimator.
    pub l_fhat2_f0: f64,
    /// `P(|d - d₀| > ε | X)` for each of `EPS_LEVELS`.
    pub prob_eps: [f64; 3],
    pub h_paper_f0_fhat2: f64,
    pub ess_d: f64,
    pub mean_k: f64,
}

impl FitRow {
    fn failed(n: usize, replicate: usize, msg: String) -> Self {
        let nan = f64::NAN;
        Self {
            n,
            replicate,
            status: format!("failed: {msg}"),
            d_hat: nan,
            d_se: nan,
            abs_err_d: nan,
            l_fhat_f0: nan,
            l_fhat2_f0: nan,
            prob_eps: [nan; 3],
            h_paper_f0_fhat2: nan,
            ess_d: nan,
            mean_k: nan,
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub pair: usize,
    pub n: usize,
    pub status: String,
    pub trace_ratio: f64,
    pub trace_limit: f64,
    pub trace_err: f64,
    pub kl_n: f64,
    /// Szegő-normalized `KL_∞`.
    pub kl_limit: f64,
    pub kl_err: f64,
}

/// Medians over the successful replicates at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub n: usize,
    pub completed: usize,
    pub median_d_hat: f64,
    pub median_abs_err_d: f64,
    pub median_l_fhat_f0: f64,
    pub median_l_fhat2_f0: f64,
    pub median_prob_eps: [f64; 3],
    pub median_h_paper_f0_fhat2: f64,
    pub median_ess_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub fit_rows: Vec<FitRow>,
    pub trace_rows: Vec<TraceRow>,
    pub properties: Option<PropertyReport>,
    pub aggregates: Vec<Aggregate>,
    /// Least-squares slope of `log median ℓ(f̂, f₀)` against `log n`.
    pub slope_l: Option<f64>,
    pub tasks: usize,
    pub failed: usize,
    /// Wall-clock seconds per task, in row order. Kept out of the CSV.
    pub runtimes: Vec<f64>,
    pub total_runtime: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of `y` on `x`; `None` with fewer than two points.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).map(|(a, b)| (*a, *b)).filter(|(a, b)| a.is_finite() && b.is_finite()).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Chain seed for task `(n_index, replicate)`; independent of scheduling.
pub fn task_seed(base: u64, n_index: usize, replicate: usize) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(n_index as u64)) ^ replicate as u64)
}

/// Fits one series and scores the estimators against `truth`.
pub fn fit_and_score(x: &[f64], cfg: &ExperimentConfig, sampler: &SamplerConfig) -> Result<FitRow> {
    let s = run_mcmc(x, &cfg.prior, sampler)?;
    let f0: SpectralFn = cfg.truth.clone().into();
    let d0 = cfg.truth.d();
    let d = estimate_d(&s)?;
    let fhat: SpectralFn = log_mean_params(&s)?.into();
    let fhat2 = f_h_spectral(&s)?;
    let mut prob_eps = [0.0; 3];
    for (p, eps) in prob_eps.iter_mut().zip(EPS_LEVELS) {
        *p = posterior_prob(&s, |q| (q.d() - d0).abs() > eps)?.value;
    }
    let mean_k = s.draws.iter().map(|p| p.order() as f64).sum::<f64>() / s.len() as f64;
    Ok(FitRow {
        n: x.len(),
        replicate: 0,
        status: "ok".into(),
        d_hat: d.value,
        d_se: d.std_error,
        abs_err_d: (d.value - d0).abs(),
        l_fhat_f0: log_l2(&fhat, &f0)?,
        l_fhat2_f0: log_l2_quadrature(&fhat2, &f0)?,
        prob_eps,
        h_paper_f0_fhat2: h(&f0, &fhat2, ConstantMode::Paper)?,
        ess_d: s.diagnostics.ess_d,
        mean_k,
    })
}

fn run_fit(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(Vec<FitRow>, Vec<f64>)> {
    let n_max = *cfg.n_list.last().expect("validated");
    let sim = sample(&SimRequest::new(SimSource::Spectral(cfg.truth.clone().into()), n_max, cfg.replicates, cfg.seed))?;
    if let (Some(dir), true) = (out, cfg.write_series) {
        for (r, row) in sim.rows.iter().enumerate() {
            write_series_csv(
                &dir.join(format!("series_{r}.csv")),
                std::slice::from_ref(row),
                cfg.seed,
                &cfg.truth.to_string(),
            )?;
        }
    }
    let tasks: Vec<(usize, usize)> =
        (0..cfg.n_list.len()).flat_map(|i| (0..cfg.replicates).map(move |r| (i, r))).collect();
    let results: Vec<(FitRow, f64)> = tasks
        .par_iter()
        .map(|&(i, r)| {
            let n = cfg.n_list[i];
            let sampler = SamplerConfig { seed: task_seed(cfg.sampler.seed, i, r), ..cfg.sampler.clone() };
            let start = Instant::now();
            // each n uses a prefix of the replicate's longest series
            let row = match fit_and_score(&sim.rows[r][..n], cfg, &sampler) {
                Ok(row) => FitRow { replicate: r, ..row },
                Err(e) => FitRow::failed(n, r, e.to_string()),
            };
            (row, start.elapsed().as_secs_f64())
        })
        .collect();
    Ok(results.into_iter().unzip())
}

fn aggregate(cfg: &ExperimentConfig, rows: &[FitRow]) -> Vec<Aggregate> {
    cfg.n_list
        .iter()
        .map(|&n| {
            let ok: Vec<&FitRow> = rows.iter().filter(|r| r.n == n && r.ok()).collect();
            let med = |f: &dyn Fn(&FitRow) -> f64| median(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            Aggregate {
                n,
                completed: ok.len(),
                median_d_hat: med(&|r| r.d_hat),
                median_abs_err_d: med(&|r| r.abs_err_d),
                median_l_fhat_f0: med(&|r| r.l_fhat_f0),
                median_l_fhat2_f0: med(&|r| r.l_fhat2_f0),
                median_prob_eps: [med(&|r| r.prob_eps[0]), med(&|r| r.prob_eps[1]), med(&|r| r.prob_eps[2])],
                median_h_paper_f0_fhat2: med(&|r| r.h_paper_f0_fhat2),
                median_ess_d: med(&|r| r.ess_d),
            }
        })
        .collect()
}

fn trace_task(f0: &SpectralFn, f: &SpectralFn, pair: usize, n: usize) -> Result<TraceRow> {
    let mode = TraceMode::ExactOrStochastic { probes: 64, seed: pair as u64 };
    let tr = trace_ratio(f0, f, n, mode)?.value;
    let tr_lim = trace_ratio_limit(f0, f)?;
    let kl = kl_n(f0, f, n)?;
    let kl_lim = kl_inf(f0, f, ConstantMode::Szego)?;
    Ok(TraceRow {
        pair,
        n,
        status: "ok".into(),
        trace_ratio: tr,
        trace_limit: tr_lim,
        trace_err: (tr - tr_lim).abs(),
        kl_n: kl,
        kl_limit: kl_lim,
        kl_err: (kl - kl_lim).abs(),
    })
}

/// `pairs` seeded FEXP pairs with `|Δd| ≤ 0.1`.
pub fn trace_pairs(seed: u64, pairs: usize) -> Vec<(SpectralFn, SpectralFn)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs)
        .map(|_| {
            let (a, b) = random_fexp_pair(&mut rng, 0.1, None);
            (a.into(), b.into())
        })
        .collect()
}

fn run_trace(cfg: &ExperimentConfig) -> (Vec<TraceRow>, Vec<f64>) {
    let pairs = trace_pairs(cfg.seed, cfg.pairs);
    let tasks: Vec<(usize, usize)> = (0..pairs.len()).flat_map(|p| cfg.n_list.iter().map(move |&n| (p, n))).collect();
    let results: Vec<(TraceRow, f64)> = tasks
        .par_iter()
        .map(|&(p, n)| {
            let start = Instant::now();
            let row = trace_task(&pairs[p].0, &pairs[p].1, p, n).unwrap_or_else(|e| TraceRow {
                pair: p,
                n,
                status: format!("failed: {e}"),
                trace_ratio: f64::NAN,
                trace_limit: f64::NAN,
                trace_err: f64::NAN,
                kl_n: f64::NAN,
                kl_limit: f64::NAN,
                kl_err: f64::NAN,
            });
            (row, start.elapsed().as_secs_f64())
        })
        .collect();
    results.into_iter().unzip()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_in(cfg, None)
}

/// Runs `cfg`; with `out`, raw series dumps (if enabled) go there.
pub fn run_experiment_in(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = ExperimentReport {
        kind: cfg.kind,
        seed: cfg.seed,
        fit_rows: vec![],
        trace_rows: vec![],
        properties: None,
        aggregates: vec![],
        slope_l: None,
        tasks: 0,
        failed: 0,
        runtimes: vec![],
        total_runtime: 0.0,
    };
    match cfg.kind {
        ExperimentKind::Consistency | ExperimentKind::Rate => {
            let (rows, times) = run_fit(cfg, out)?;
            report.aggregates = aggregate(cfg, &rows);
            let x: Vec<f64> = report.aggregates.iter().map(|a| (a.n as f64).ln()).collect();
            let y: Vec<f64> = report.aggregates.iter().map(|a| a.median_l_fhat_f0.ln()).collect();
            report.slope_l = ols_slope(&x, &y);
            report.tasks = rows.len();
            report.failed = rows.iter().filter(|r| !r.ok()).count();
            report.fit_rows = rows;
            report.runtimes = times;
        }
        ExperimentKind::TraceLimits => {
            let (rows, times) = run_trace(cfg);
            report.tasks = rows.len();
            report.failed = rows.iter().filter(|r| r.status != "ok").count();
            report.trace_rows = rows;
            report.runtimes = times;
        }
        ExperimentKind::DivergenceProperties => {
            let props = validate_properties(cfg.seed, cfg.cases);
            report.tasks = props.cases;
            report.failed = props.violations().map(|c| c.case).collect::<std::collections::BTreeSet<_>>().len();
            report.properties = Some(props);
        }
    }
    report.total_runtime = start.elapsed().as_secs_f64();
    Ok(report)
}

fn num(v: f64) -> String {
    v.to_string()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ExperimentReport {
    pub fn failure_fraction(&self) -> f64 {
        if self.tasks == 0 {
            0.0
        } else {
            self.failed as f64 / self.tasks as f64
        }
    }

    pub fn exceeds_failure_threshold(&self) -> bool {
        self.failure_fraction() > FAILURE_THRESHOLD
    }

    /// `report.csv` contents. Deterministic for a fixed config: runtimes
    /// are left out.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match self.kind {
            ExperimentKind::Consistency | ExperimentKind::Rate => {
                let _ = writeln!(s, "{}", FIT_COLUMNS.join(","));
                for r in &self.fit_rows {
                    let fields = [
                        r.n.to_string(),
                        r.replicate.to_string(),
                        csv_field(&r.status),
                        num(r.d_hat),
                        num(r.d_se),
                        num(r.abs_err_d),
                        num(r.l_fhat_f0),
                        num(r.l_fhat2_f0),
                        num(r.prob_eps[0]),
                        num(r.prob_eps[1]),
                        num(r.prob_eps[2]),
                        num(r.h_paper_f0_fhat2),
                        num(r.ess_d),
                        num(r.mean_k),
                    ];
                    let _ = writeln!(s, "{}", fields.join(","));
                }
            }
            ExperimentKind::TraceLimits => {
                let _ = writeln!(s, "{}", TRACE_COLUMNS.join(","));
                for r in &self.trace_rows {
                    let fields = [
                        r.pair.to_string(),
                        r.n.to_string(),
                        csv_field(&r.status),
                        num(r.trace_ratio),
                        num(r.trace_limit),
                        num(r.trace_err),
                        num(r.kl_n),
                        num(r.kl_limit),
                        num(r.kl_err),
                    ];
                    let _ = writeln!(s, "{}", fields.join(","));
                }
            }
            ExperimentKind::DivergenceProperties => {
                let _ = writeln!(s, "{}", PROPERTY_COLUMNS.join(","));
                for c in self.properties.iter().flat_map(|p| &p.checks) {
                    let fields = [
                        c.case.to_string(),
                        c.property.clone(),
                        num(c.lhs),
                        num(c.rhs),
                        c.holds.to_string(),
                        csv_field(&c.detail),
                    ];
                    let _ = writeln!(s, "{}", fields.join(","));
                }
            }
        }
        s
    }

    /// Per-pair flags: did `trace_err` and `kl_err` decrease strictly
    /// along the `n` grid?
    pub fn trace_monotone(&self) -> Vec<(usize, bool, bool)> {
        let mut pairs: Vec<usize> = self.trace_rows.iter().map(|r| r.pair).collect();
        pairs.dedup();
        pairs
            .into_iter()
            .map(|p| {
                let rows: Vec<&TraceRow> = self.trace_rows.iter().filter(|r| r.pair == p).collect();
                let dec = |f: &dyn Fn(&TraceRow) -> f64| rows.windows(2).all(|w| f(w[1]) < f(w[0]));
                (p, dec(&|r| r.trace_err), dec(&|r| r.kl_err))
            })
            .collect()
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let properties = self.properties.as_ref().map(|p| {
            json!({
                "cases": p.cases,
                "checks": p.checks.len(),
                "bh_regime_cases": p.bh_regime_cases,
                "passed": p.passed(),
                "violations": p.violations().collect::<Vec<_>>(),
            })
        });
        let trace_monotone: Vec<_> = self
            .trace_monotone()
            .into_iter()
            .map(|(p, t, k)| json!({"pair": p, "trace_err_decreasing": t, "kl_err_decreasing": k}))
            .collect();
        json!({
            "kind": self.kind,
            "seed": self.seed,
            "tasks": self.tasks,
            "failed": self.failed,
            "failure_fraction": self.failure_fraction(),
            "failure_threshold_exceeded": self.exceeds_failure_threshold(),
            "aggregates": self.aggregates,
            "slope_l": self.slope_l,
            "trace_monotone": trace_monotone,
            "properties": properties,
            "runtimes": self.runtimes,
            "total_runtime": self.total_runtime,
        })
    }

    /// Writes `report.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        let json = serde_json::to_string_pretty(&self.summary_json()).map_err(|e| crate::Error::Io(e.to_string()))?;
        std::fs::write(dir.join("summary.json"), json + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_slope() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        let x = [1.0, 2.0, 3.0];
        assert!((ols_slope(&x, &[2.0, 0.5, -1.0]).unwrap() + 1.5).abs() < 1e-14);
        assert!(ols_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn task_seeds_differ() {
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..4 {
            for r in 0..10 {
                assert!(seen.insert(task_seed(7, i, r)));
            }
        }
    }
}
