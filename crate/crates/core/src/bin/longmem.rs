use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use longmem_core::harness::{fit_and_score, run_experiment_in, task_seed, validate_properties, ExperimentConfig};
use longmem_core::posterior::{run_mcmc, write_samples_csv, SamplerConfig};
use longmem_core::simulate::{read_series_csv, sample, write_series_csv, SimRequest, SimSource};
use longmem_core::{Error, Result};

/// Bayesian FEXP estimation for long-memory Gaussian series.
#[derive(Parser)]
#[command(name = "longmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate series from the configured truth at the largest n.
    Simulate(Common),
    /// Fit every series in a CSV written by `simulate`.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        series: PathBuf,
    },
    /// Run a configured experiment and write report.csv and summary.json.
    Experiment(Common),
    /// Run the randomized divergence property suite.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(Error),
    Threshold,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e)
    }
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => ExperimentConfig::preset("consistency")?,
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    std::fs::create_dir_all(&cfg.out)?;
    let n = *cfg.n_list.last().expect("validated");
    let sim = sample(&SimRequest::new(SimSource::Spectral(cfg.truth.clone().into()), n, cfg.replicates, cfg.seed))?;
    let path = cfg.out.join("series_0.csv");
    write_series_csv(&path, &sim.rows, cfg.seed, &cfg.truth.to_string())?;
    println!("wrote {} series of length {n} to {}", sim.rows.len(), path.display());
    Ok(())
}

fn fit(common: &Common, series: &Path) -> Result<()> {
    let cfg = common.load()?;
    std::fs::create_dir_all(&cfg.out)?;
    let (header, rows) = read_series_csv(series)?;
    let mut fits = Vec::new();
    for (r, x) in rows.iter().enumerate() {
        let sampler = SamplerConfig { seed: task_seed(cfg.sampler.seed, 0, r), ..cfg.sampler.clone() };
        let samples = run_mcmc(x, &cfg.prior, &sampler)?;
        write_samples_csv(&cfg.out.join(format!("samples_{r}.csv")), &samples)?;
        let row = fit_and_score(x, &cfg, &sampler)?;
        println!("series {r}: n = {} d_hat = {:.4} (se {:.4})", x.len(), row.d_hat, row.d_se);
        fits.push(json!({
            "series": r,
            "n": x.len(),
            "d_hat": row.d_hat,
            "d_se": row.d_se,
            "ess_d": row.ess_d,
            "mean_k": row.mean_k,
            "l_fhat_f0": row.l_fhat_f0,
            "prob_eps": row.prob_eps,
        }));
    }
    write_json(&cfg.out.join("fit.json"), &json!({"source_model": header.model, "fits": fits}))
}

fn experiment(common: &Common) -> std::result::Result<(), Failure> {
    let cfg = common.load()?;
    std::fs::create_dir_all(&cfg.out).map_err(Error::from)?;
    let report = run_experiment_in(&cfg, Some(&cfg.out))?;
    report.write(&cfg.out)?;
    for a in &report.aggregates {
        println!(
            "n = {:5}  median |d_hat - d0| = {:.4}  median l(fhat, f0) = {:.5}  median P(|d - d0| > 0.25) = {:.3}",
            a.n, a.median_abs_err_d, a.median_l_fhat_f0, a.median_prob_eps[2]
        );
    }
    if let Some(slope) = report.slope_l {
        println!("log-log slope of median l(fhat, f0): {slope:.3}");
    }
    println!("{} of {} tasks failed; outputs in {}", report.failed, report.tasks, cfg.out.display());
    if report.exceeds_failure_threshold() {
        return Err(Failure::Threshold);
    }
    Ok(())
}

fn validate(seed: u64, cases: usize, out: Option<&Path>) -> std::result::Result<(), Failure> {
    let report = validate_properties(seed, cases);
    for v in report.violations() {
        println!("violation: case {} {}: lhs = {} rhs = {} ({})", v.case, v.property, v.lhs, v.rhs, v.detail);
    }
    println!(
        "{} checks over {} cases ({} in the small-h regime): {}",
        report.checks.len(),
        report.cases,
        report.bh_regime_cases,
        if report.passed() { "all hold" } else { "FAILED" }
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        let value = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
        write_json(&dir.join("properties.json"), &value)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Threshold)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c).map_err(Failure::from),
        Command::Fit { common, series } => fit(common, series).map_err(Failure::from),
        Command::Experiment(c) => experiment(c),
        Command::Validate { seed, cases, out } => validate(*seed, *cases, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Threshold) => ExitCode::from(2),
    }
}
