use longmem_core::simulate::{read_series_csv, sample, write_series_csv, SimMethod, SimRequest, SimSource};
use longmem_core::spectral::{autocov, FexpParams, SpectralFn};

fn arfima(d: f64) -> SpectralFn {
    FexpParams::arfima(d, 1.0).unwrap().into()
}

fn sample_autocov(rows: &[Vec<f64>], lag: usize) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for x in rows {
        for t in 0..x.len() - lag {
            acc += x[t] * x[t + lag];
            count += 1;
        }
    }
    acc / count as f64
}

fn check_moments(method: SimMethod) {
    let f = arfima(0.3);
    let n = 64;
    let reps = 4000;
    let sim = sample(&SimRequest::new(SimSource::Spectral(f.clone()), n, reps, 99).with_method(method)).unwrap();
    assert_eq!(sim.method, method);
    assert_eq!(sim.rows.len(), reps);
    let gamma = autocov(&f, n, 1e-13).unwrap();
    let g0 = gamma.gamma()[0];
    let mean: f64 = sim.rows.iter().flatten().sum::<f64>() / (n * reps) as f64;
    // mean of a long-memory series converges slowly: var(x̄) ≈ Σ γ / n per replicate
    assert!(mean.abs() < 0.1, "mean {mean}");
    for lag in [0, 1, 2, 5, 10] {
        let est = sample_autocov(&sim.rows, lag);
        let want = gamma.gamma()[lag];
        assert!((est - want).abs() < 0.06 * g0, "{method:?} lag {lag}: {est} vs {want}");
    }
}

#[test]
fn cholesky_draws_have_target_autocovariance() {
    check_moments(SimMethod::Cholesky);
}

#[test]
fn circulant_draws_have_target_autocovariance() {
    check_moments(SimMethod::Circulant);
}

#[test]
fn auto_prefers_circulant_for_fexp() {
    let sim = sample(&SimRequest::new(SimSource::Spectral(arfima(0.2)), 256, 2, 3)).unwrap();
    assert_eq!(sim.method, SimMethod::Circulant);
    assert!(sim.embedding_size.unwrap() >= 2 * 255);
}

#[test]
fn replicate_streams_do_not_depend_on_replicate_count() {
    let f = arfima(0.25);
    for method in [SimMethod::Cholesky, SimMethod::Circulant] {
        let few = sample(&SimRequest::new(SimSource::Spectral(f.clone()), 100, 3, 11).with_method(method)).unwrap();
        let many = sample(&SimRequest::new(SimSource::Spectral(f.clone()), 100, 8, 11).with_method(method)).unwrap();
        assert_eq!(few.rows[..], many.rows[..3]);
        let again = sample(&SimRequest::new(SimSource::Spectral(f.clone()), 100, 3, 11).with_method(method)).unwrap();
        assert_eq!(few, again);
        let other = sample(&SimRequest::new(SimSource::Spectral(f.clone()), 100, 3, 12).with_method(method)).unwrap();
        assert_ne!(few.rows, other.rows);
    }
}

#[test]
fn autocov_source_matches_spectral_source() {
    let f = arfima(0.1);
    let gamma = autocov(&f, 50, 1e-13).unwrap();
    let a = sample(&SimRequest::new(SimSource::Spectral(f), 50, 2, 5).with_method(SimMethod::Cholesky)).unwrap();
    let b = sample(&SimRequest::new(SimSource::Autocov(gamma), 50, 2, 5).with_method(SimMethod::Cholesky)).unwrap();
    for (x, y) in a.rows.iter().flatten().zip(b.rows.iter().flatten()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn series_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let sim = sample(&SimRequest::new(SimSource::Spectral(arfima(0.3)), 40, 3, 8)).unwrap();
    write_series_csv(&path, &sim.rows, 8, "arfima").unwrap();
    let (header, rows) = read_series_csv(&path).unwrap();
    assert_eq!((header.n, header.replicates, header.seed, header.model.as_str()), (40, 3, 8, "arfima"));
    assert_eq!(rows, sim.rows);
}
