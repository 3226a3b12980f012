//! Config-driven experiments and the divergence property suite.
//!
//! `report.csv` columns by kind:
//!
//! * `consistency`, `rate`: `n, replicate, status, d_hat, d_se, abs_err_d,
//!   l_fhat_f0, l_fhat2_f0, prob_eps_0.05, prob_eps_0.1, prob_eps_0.25,
//!   h_paper_f0_fhat2, ess_d, mean_k`
//! * `trace_limits`: `pair, n, status, trace_ratio, trace_limit, trace_err,
//!   kl_n, kl_limit, kl_err`
//! * `divergence_properties`: `case, property, lhs, rhs, holds, detail`
//!
//! `summary.json` holds `kind, seed, tasks, failed, failure_fraction,
//! failure_threshold_exceeded, aggregates, slope_l, trace_monotone,
//! properties, runtimes, total_runtime`.

mod config;
mod experiment;
mod properties;

pub use config::{ExperimentConfig, ExperimentKind, MAX_N};
pub use experiment::{
    fit_and_score, median, ols_slope, run_experiment, run_experiment_in, task_seed, trace_pairs, Aggregate,
    ExperimentReport, FitRow, TraceRow, EPS_LEVELS, FAILURE_THRESHOLD, FIT_COLUMNS, PROPERTY_COLUMNS, TRACE_COLUMNS,
};
pub use properties::{random_fexp, random_fexp_pair, validate_properties, PropertyCheck, PropertyReport};
