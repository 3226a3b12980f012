//! Exact simulation of zero-mean stationary Gaussian series.
//!
//! The primary method is circulant embedding: `γ(0..m)` is wrapped into a
//! symmetric circulant of size `2m` whose FFT eigenvalues must be
//! nonnegative (up to `-1e-10 · max`, then clamped). `m` starts at `n - 1`
//! and doubles up to `8n`. Dense Cholesky is the fallback.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{autocov, AutocovSeq, SpectralFn};

pub const EIGEN_CLAMP: f64 = 1e-10;
pub const CHOLESKY_CAP: usize = 2048;
const AUTOCOV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    /// Circulant embedding with Cholesky fallback.
    #[default]
    Auto,
    Circulant,
    Cholesky,
}

#[derive(Debug, Clone)]
pub enum SimSource {
    Spectral(SpectralFn),
    Autocov(AutocovSeq),
}

#[derive(Debug, Clone)]
pub struct SimRequest {
    pub source: SimSource,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub method: SimMethod,
}

impl SimRequest {
    pub fn new(source: SimSource, n: usize, replicates: usize, seed: u64) -> Self {
        Self { source, n, replicates, seed, method: SimMethod::Auto }
    }

    pub fn with_method(mut self, method: SimMethod) -> Self {
        self.method = method;
        self
    }
}

/// `replicates × n` draws plus how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub rows: Vec<Vec<f64>>,
    /// `Circulant` or `Cholesky`, never `Auto`.
    pub method: SimMethod,
    /// Circulant size `2m` when the circulant method was used.
    pub embedding_size: Option<usize>,
}

/// Independent stream for replicate `index` under `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn autocov_len(source: &SimSource, len: usize) -> Result<Vec<f64>> {
    match source {
        SimSource::Spectral(f) => Ok(autocov(f, len, AUTOCOV_TOL)?.gamma().to_vec()),
        SimSource::Autocov(g) => {
            // any symmetric extension keeps T_n as the leading block; zeros
            // are the natural one for a finite sequence
            let mut v = g.gamma().to_vec();
            v.resize(len, 0.0);
            Ok(v)
        }
    }
}

struct Embedding {
    size: usize,
    sqrt_eigen: Vec<f64>,
}

fn try_embedding(gamma: &[f64], m: usize) -> std::result::Result<Embedding, f64> {
    let size = 2 * m;
    let mut c = vec![Complex::new(0.0, 0.0); size];
    c[0].re = gamma[0];
    for tau in 1..=m {
        c[tau].re = gamma[tau];
        if tau < m {
            c[size - tau].re = gamma[tau];
        }
    }
    FftPlanner::new().plan_fft_forward(size).process(&mut c);
    let max = c.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let min = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min < -EIGEN_CLAMP * max {
        return Err(min);
    }
    let scale = 1.0 / size as f64;
    Ok(Embedding { size, sqrt_eigen: c.iter().map(|z| (z.re.max(0.0) * scale).sqrt()).collect() })
}

fn circulant_embedding(source: &SimSource, n: usize) -> Result<Embedding> {
    let mut m = (n - 1).max(1);
    let mut worst = 0.0;
    while m <= 8 * n {
        let gamma = autocov_len(source, m + 1)?;
        match try_embedding(&gamma, m) {
            Ok(e) => return Ok(e),
            Err(min) => worst = min,
        }
        m *= 2;
    }
    Err(Error::EmbeddingFailed { size: m, min_eigenvalue: worst })
}

fn sample_circulant(e: &Embedding, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w: Vec<Complex<f64>> = e
        .sqrt_eigen
        .iter()
        .map(|s| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex::new(s * a, s * b)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(e.size).process(&mut w);
    w[..n].iter().map(|z| z.re).collect()
}

fn cholesky_factor(source: &SimSource, n: usize) -> Result<DMatrix<f64>> {
    if n > CHOLESKY_CAP {
        return Err(Error::TooLargeForFallback { n, cap: CHOLESKY_CAP });
    }
    let g = autocov_len(source, n)?;
    let t = DMatrix::from_fn(n, n, |i, j| g[i.abs_diff(j)]);
    let chol = t.cholesky().ok_or(Error::NotPositiveDefinite { index: 0, value: f64::NAN })?;
    Ok(chol.l())
}

/// Draws `replicates` independent series of length `n` from `N(0, T_n)`.
/// Replicate `r` uses stream `r` of `seed`, so output does not depend on
/// thread scheduling.
pub fn sample(req: &SimRequest) -> Result<SimOutput> {
    let n = req.n;
    if n == 0 || req.replicates == 0 {
        return Err(Error::InvalidParameter("n and replicates must be >= 1".into()));
    }
    if let SimSource::Spectral(f) = &req.source {
        if f.memory() >= 0.5 {
            return Err(Error::InvalidParameter("d must be below 1/2".into()));
        }
    }
    let embedding = match req.method {
        SimMethod::Cholesky => None,
        SimMethod::Circulant => Some(circulant_embedding(&req.source, n)?),
        SimMethod::Auto => match circulant_embedding(&req.source, n) {
            Ok(e) => Some(e),
            Err(Error::EmbeddingFailed { .. }) => None,
            Err(e) => return Err(e),
        },
    };
    let ids: Vec<u64> = (0..req.replicates as u64).collect();
    if let Some(e) = embedding {
        let rows = ids.par_iter().map(|&r| sample_circulant(&e, n, &mut replicate_rng(req.seed, r))).collect();
        return Ok(SimOutput { rows, method: SimMethod::Circulant, embedding_size: Some(e.size) });
    }
    let l = cholesky_factor(&req.source, n)?;
    let rows = ids
        .par_iter()
        .map(|&r| {
            let mut rng = replicate_rng(req.seed, r);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z = nalgebra::DVector::from_vec(z);
            (&l * z).iter().copied().collect()
        })
        .collect();
    Ok(SimOutput { rows, method: SimMethod::Cholesky, embedding_size: None })
}

/// Writes series as CSV: a `n,replicates,seed,model` header line, its
/// values, then one comma-separated row per replicate.
pub fn write_series_csv(path: &Path, rows: &[Vec<f64>], seed: u64, model: &str) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.len());
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "n,replicates,seed,model")?;
    writeln!(w, "{},{},{},{}", n, rows.len(), seed, model.replace(',', ";"))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Header of a series file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesHeader {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub model: String,
}

pub fn read_series_csv(path: &Path) -> Result<(SeriesHeader, Vec<Vec<f64>>)> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let bad = |m: &str| Error::Config(format!("{}: {m}", path.display()));
    let names = lines.next().ok_or_else(|| bad("empty file"))??;
    if names.trim() != "n,replicates,seed,model" {
        return Err(bad("missing n,replicates,seed,model header"));
    }
    let values = lines.next().ok_or_else(|| bad("missing header values"))??;
    let mut parts = values.splitn(4, ',');
    let mut field = |name: &str| parts.next().map(str::trim).ok_or_else(|| bad(name)).map(str::to_string);
    let n: usize = field("n")?.parse().map_err(|_| bad("n"))?;
    let replicates: usize = field("replicates")?.parse().map_err(|_| bad("replicates"))?;
    let seed: u64 = field("seed")?.parse().map_err(|_| bad("seed"))?;
    let model = field("model")?;
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| bad("non-numeric value"))?;
        if row.len() != n {
            return Err(bad("row length differs from n"));
        }
        rows.push(row);
    }
    if rows.len() != replicates {
        return Err(bad("row count differs from replicates"));
    }
    Ok((SeriesHeader { n, replicates, seed, model }, rows))
}
