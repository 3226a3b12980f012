//! Flat `key = value` experiment configuration.
//!
//! One setting per line; `#` starts a comment; lists are comma separated;
//! nested specs use dotted keys (`prior.mu`, `sampler.iterations`). Keys
//! left out take their value from the `consistency` preset.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{PmcConfig, SamplerConfig};
use crate::prior::{DDensity, PriorSpec, PriorVariant};
use crate::spectral::FexpParams;

/// Largest series length an experiment may request.
pub const MAX_N: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Consistency,
    Rate,
    TraceLimits,
    DivergenceProperties,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Consistency => "consistency",
            Self::Rate => "rate",
            Self::TraceLimits => "trace_limits",
            Self::DivergenceProperties => "divergence_properties",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "consistency" => Self::Consistency,
            "rate" => Self::Rate,
            "trace_limits" => Self::TraceLimits,
            "divergence_properties" => Self::DivergenceProperties,
            other => return Err(Error::Config(format!("unknown experiment kind `{other}`"))),
        })
    }

    pub fn is_fit(self) -> bool {
        matches!(self, Self::Consistency | Self::Rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub truth: FexpParams,
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    pub seed: u64,
    pub out: PathBuf,
    /// Number of random FEXP pairs for `trace_limits`.
    pub pairs: usize,
    /// Number of random cases for `divergence_properties`.
    pub cases: usize,
    /// Dump the simulated series as `series_*.csv`.
    pub write_series: bool,
}

const LN_INV_2PI: f64 = -1.8378770664093453;

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            kind: ExperimentKind::Consistency,
            truth: FexpParams::arfima(0.3, 1.0)?,
            n_list: vec![128, 256, 512, 1024],
            replicates: 10,
            prior: PriorSpec::fexp_beta(2.0, 0.05, 1.5, 4.0)?,
            sampler: SamplerConfig { iterations: 4000, burn_in: 1500, thin: 2, seed: 1, ..SamplerConfig::default() },
            seed: 1,
            out: PathBuf::from("out"),
            pairs: 5,
            cases: 200,
            write_series: false,
        };
        let cfg = match name {
            "consistency" => base,
            "rate" => {
                Self { kind: ExperimentKind::Rate, truth: FexpParams::new(0.2, vec![LN_INV_2PI, 0.4, -0.2])?, ..base }
            }
            "trace_limits" => Self { kind: ExperimentKind::TraceLimits, n_list: vec![64, 128, 256, 512], ..base },
            "divergence_properties" => Self { kind: ExperimentKind::DivergenceProperties, ..base },
            "smoke" => Self {
                n_list: vec![64, 128],
                replicates: 2,
                sampler: SamplerConfig { iterations: 600, burn_in: 200, thin: 2, ..base.sampler.clone() },
                ..base
            },
            other => return Err(Error::Config(format!("unknown preset `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["consistency", "rate", "trace_limits", "divergence_properties", "smoke"]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must not be empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be strictly increasing".into()));
        }
        let max = *self.n_list.last().unwrap();
        if self.n_list[0] < 4 || max > MAX_N {
            return Err(Error::Config(format!("n_list entries must lie in [4, {MAX_N}]")));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        self.prior.validate()?;
        self.sampler.validate()?;
        Ok(())
    }

    /// Sets the top-level seed and the sampler seed together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sampler.seed = seed;
        self
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("kind", self.kind.as_str().into());
        put("seed", self.seed.to_string());
        put("out", self.out.display().to_string());
        put("n_list", join(self.n_list.iter()));
        put("replicates", self.replicates.to_string());
        put("pairs", self.pairs.to_string());
        put("cases", self.cases.to_string());
        put("write_series", self.write_series.to_string());
        put("truth.d", self.truth.d().to_string());
        put("truth.theta", join(self.truth.theta().iter()));

        let p = &self.prior;
        match &p.variant {
            PriorVariant::DirichletFexp { b_bound, alpha_scale, theta0_sd } => {
                put("prior.variant", "dirichlet_fexp".into());
                put("prior.b_bound", b_bound.to_string());
                put("prior.alpha_scale", alpha_scale.to_string());
                put("prior.theta0_sd", theta0_sd.to_string());
            }
            PriorVariant::FexpBeta { beta, a_bound } => {
                put("prior.variant", "fexp_beta".into());
                put("prior.beta", beta.to_string());
                put("prior.a_bound", a_bound.to_string());
            }
            PriorVariant::PointMass(q) => {
                put("prior.variant", "point_mass".into());
                put("prior.d", q.d().to_string());
                put("prior.theta", join(q.theta().iter()));
            }
        }
        put("prior.mu", p.mu.to_string());
        put("prior.t", p.t.to_string());
        match p.d_density {
            DDensity::Uniform => put("prior.d_density", "uniform".into()),
            DDensity::Beta { a, b } => {
                put("prior.d_density", "beta".into());
                put("prior.d_beta_a", a.to_string());
                put("prior.d_beta_b", b.to_string());
            }
        }

        let c = &self.sampler;
        put("sampler.iterations", c.iterations.to_string());
        put("sampler.burn_in", c.burn_in.to_string());
        put("sampler.thin", c.thin.to_string());
        put("sampler.step_d", c.step_d.to_string());
        put("sampler.step_theta", c.step_theta.to_string());
        put("sampler.jump_rate", c.jump_rate.to_string());
        put("sampler.scale_rate", c.scale_rate.to_string());
        put("sampler.step_scale", c.step_scale.to_string());
        put("sampler.adapt_window", c.adapt_window.to_string());
        put("sampler.target_accept_d", c.target_accept_d.to_string());
        put("sampler.target_accept_theta", c.target_accept_theta.to_string());
        put("sampler.k_max", c.k_max.to_string());
        put("sampler.seed", c.seed.to_string());
        put("sampler.prior_only", c.prior_only.to_string());
        if let Some(pmc) = &c.pmc {
            put("sampler.pmc.population", pmc.population.to_string());
            put("sampler.pmc.rounds", pmc.rounds.to_string());
        }
        s
    }

    /// Parses without validating, so that configs naming unsupported modes
    /// still load and fail later with a precise error.
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let base = Self::preset("consistency")?;

        let kind = match kv.take("kind") {
            Some(v) => ExperimentKind::parse(&v)?,
            None => base.kind,
        };
        let seed = kv.num("seed")?.unwrap_or(base.seed);
        let out = kv.take("out").map(PathBuf::from).unwrap_or(base.out.clone());
        let n_list = kv.list("n_list")?.unwrap_or(base.n_list.clone());
        let replicates = kv.num("replicates")?.unwrap_or(base.replicates);
        let pairs = kv.num("pairs")?.unwrap_or(base.pairs);
        let cases = kv.num("cases")?.unwrap_or(base.cases);
        let write_series = kv.num("write_series")?.unwrap_or(base.write_series);

        let truth_d = kv.num("truth.d")?.unwrap_or(base.truth.d());
        let sigma2: Option<f64> = kv.num("truth.sigma2")?;
        let truth = match (kv.list::<f64>("truth.theta")?, sigma2) {
            (Some(_), Some(_)) => return Err(Error::Config("give truth.theta or truth.sigma2, not both".into())),
            (Some(theta), None) => FexpParams::new(truth_d, theta)?,
            (None, Some(s2)) => FexpParams::arfima(truth_d, s2)?,
            (None, None) => FexpParams::new(truth_d, base.truth.theta().to_vec())?,
        };

        let prior = parse_prior(&mut kv, &base.prior)?;
        let sampler = parse_sampler(&mut kv, &base.sampler)?;
        kv.finish()?;
        Ok(Self { kind, truth, n_list, replicates, prior, sampler, seed, out, pairs, cases, write_series })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn join<T: ToString>(it: impl Iterator<Item = T>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn parse_prior(kv: &mut KeyValues, base: &PriorSpec) -> Result<PriorSpec> {
    let variant_name = kv.take("prior.variant");
    let variant = match variant_name.as_deref() {
        None => base.variant.clone(),
        Some("dirichlet_fexp") => PriorVariant::DirichletFexp {
            b_bound: kv.num("prior.b_bound")?.unwrap_or(2.0),
            alpha_scale: kv.num("prior.alpha_scale")?.unwrap_or(4.0),
            theta0_sd: kv.num("prior.theta0_sd")?.unwrap_or(10.0),
        },
        Some("fexp_beta") => PriorVariant::FexpBeta {
            beta: kv.num("prior.beta")?.unwrap_or(1.5),
            a_bound: kv.num("prior.a_bound")?.unwrap_or(4.0),
        },
        Some("point_mass") => {
            let d = kv.num("prior.d")?.ok_or_else(|| Error::Config("point_mass needs prior.d".into()))?;
            let theta = kv.list("prior.theta")?.ok_or_else(|| Error::Config("point_mass needs prior.theta".into()))?;
            PriorVariant::PointMass(FexpParams::new(d, theta)?)
        }
        Some(other) => return Err(Error::Config(format!("unknown prior.variant `{other}`"))),
    };
    if variant_name.is_none() {
        // variant-specific keys are only meaningful next to prior.variant
        for k in [
            "prior.b_bound",
            "prior.alpha_scale",
            "prior.theta0_sd",
            "prior.beta",
            "prior.a_bound",
            "prior.d",
            "prior.theta",
        ] {
            if kv.contains(k) {
                return Err(Error::Config(format!("`{k}` requires prior.variant")));
            }
        }
    }
    let d_density = match kv.take("prior.d_density").as_deref() {
        None | Some("uniform") => DDensity::Uniform,
        Some("beta") => DDensity::Beta {
            a: kv.num("prior.d_beta_a")?.ok_or_else(|| Error::Config("beta d_density needs prior.d_beta_a".into()))?,
            b: kv.num("prior.d_beta_b")?.ok_or_else(|| Error::Config("beta d_density needs prior.d_beta_b".into()))?,
        },
        Some(other) => return Err(Error::Config(format!("unknown prior.d_density `{other}`"))),
    };
    Ok(PriorSpec {
        variant,
        mu: kv.num("prior.mu")?.unwrap_or(base.mu),
        t: kv.num("prior.t")?.unwrap_or(base.t),
        d_density,
    })
}

fn parse_sampler(kv: &mut KeyValues, base: &SamplerConfig) -> Result<SamplerConfig> {
    let population: Option<usize> = kv.num("sampler.pmc.population")?;
    let rounds: Option<usize> = kv.num("sampler.pmc.rounds")?;
    let pmc = match (population, rounds) {
        (None, None) => None,
        (Some(population), Some(rounds)) => Some(PmcConfig { population, rounds }),
        _ => return Err(Error::Config("sampler.pmc needs both population and rounds".into())),
    };
    Ok(SamplerConfig {
        iterations: kv.num("sampler.iterations")?.unwrap_or(base.iterations),
        burn_in: kv.num("sampler.burn_in")?.unwrap_or(base.burn_in),
        thin: kv.num("sampler.thin")?.unwrap_or(base.thin),
        step_d: kv.num("sampler.step_d")?.unwrap_or(base.step_d),
        step_theta: kv.num("sampler.step_theta")?.unwrap_or(base.step_theta),
        jump_rate: kv.num("sampler.jump_rate")?.unwrap_or(base.jump_rate),
        scale_rate: kv.num("sampler.scale_rate")?.unwrap_or(base.scale_rate),
        step_scale: kv.num("sampler.step_scale")?.unwrap_or(base.step_scale),
        adapt_window: kv.num("sampler.adapt_window")?.unwrap_or(base.adapt_window),
        target_accept_d: kv.num("sampler.target_accept_d")?.unwrap_or(base.target_accept_d),
        target_accept_theta: kv.num("sampler.target_accept_theta")?.unwrap_or(base.target_accept_theta),
        k_max: kv.num("sampler.k_max")?.unwrap_or(base.k_max),
        seed: kv.num("sampler.seed")?.unwrap_or(base.seed),
        prior_only: kv.num("sampler.prior_only")?.unwrap_or(base.prior_only),
        pmc,
    })
}

struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let k = k.trim().to_string();
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Ok(Self(map))
    }

    fn contains(&self, k: &str) -> bool {
        self.0.contains_key(k)
    }

    fn take(&mut self, k: &str) -> Option<String> {
        self.0.remove(k)
    }

    fn num<T: std::str::FromStr>(&mut self, k: &str) -> Result<Option<T>> {
        self.take(k).map(|v| v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{k}`")))).transpose()
    }

    fn list<T: std::str::FromStr>(&mut self, k: &str) -> Result<Option<Vec<T>>> {
        self.take(k)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim().parse().map_err(|_| Error::Config(format!("bad list item `{item}` in `{k}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}
