use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use longmem_core::divergences::{b_n, h_n, kl_inf, kl_n, log_l2, log_l2_quadrature, ConstantMode};
use longmem_core::harness::random_fexp;
use longmem_core::spectral::{autocov, autocov_quadrature, AutocovSeq, AutocovSource, FexpParams, SpectralFn};
use longmem_core::toeplitz::{gauss_loglik, trace_ratio, ToeplitzCov, TraceMode, TRACE_AUTOCOV_TOL};
use longmem_core::Error;

fn fexp(d: f64, theta: &[f64]) -> SpectralFn {
    FexpParams::new(d, theta.to_vec()).unwrap().into()
}

// 2π I_τ(1/2), modified Bessel functions of the first kind (mpmath, 30 digits)
const BESSEL_GAMMA: [f64; 5] =
    [6.682063089471705, 1.620397710437365, 0.20047224772224504, 0.01661972865940463, 0.00103550380938948];

#[test]
fn exp_cosine_autocov_is_bessel() {
    let f = fexp(0.0, &[0.0, 0.5]);
    for source in [autocov(&f, 5, 1e-14).unwrap(), autocov_quadrature(&f, 5, 1e-13).unwrap()] {
        for (g, want) in source.gamma().iter().zip(BESSEL_GAMMA) {
            assert!((g - want).abs() < 1e-12 * BESSEL_GAMMA[0], "{g} vs {want}");
        }
    }
}

#[test]
fn arfima_variance_matches_gamma_ratio() {
    // Γ(0.4)/Γ(0.7)² (mpmath)
    let want = 1.3164560621300047;
    let f: SpectralFn = FexpParams::arfima(0.3, 1.0).unwrap().into();
    let g = autocov(&f, 1, 1e-14).unwrap();
    assert_eq!(g.source(), AutocovSource::Analytic);
    assert!((g.gamma()[0] - want).abs() < 1e-13);
    let q = autocov_quadrature(&f, 1, 1e-12).unwrap();
    assert!((q.gamma()[0] - want).abs() < 1e-9, "{}", q.gamma()[0]);
}

#[test]
fn analytic_and_quadrature_autocov_agree() {
    for d in [-0.3, 0.0, 0.2, 0.4] {
        let f = fexp(d, &[0.1, 0.3, -0.2]);
        let a = autocov(&f, 64, 1e-13).unwrap();
        let q = autocov_quadrature(&f, 64, 1e-11).unwrap();
        let g0 = a.gamma()[0];
        for (tau, (x, y)) in a.gamma().iter().zip(q.gamma()).enumerate() {
            assert!((x - y).abs() < 1e-8 * g0, "d={d} tau={tau}: {x} vs {y}");
        }
    }
}

#[test]
fn autocov_sums_back_to_the_density() {
    // f(λ) = (1/2π) Σ_τ γ(τ) e^{-iτλ}
    let j = 100_000;
    let cases = [(0.0, 1e-10), (-0.2, 1e-4), (0.2, 2e-3)];
    for (d, tol) in cases {
        let params = FexpParams::new(d, vec![0.2, 0.4, -0.1]).unwrap();
        let g = autocov(&params.clone().into(), j + 1, 1e-15).unwrap();
        for lambda in [0.7, 1.5, 2.9] {
            let series: f64 =
                g.gamma()[0] + 2.0 * (1..=j).map(|t| g.gamma()[t] * (t as f64 * lambda).cos()).sum::<f64>();
            let f = params.eval(lambda).unwrap();
            assert!((series / (2.0 * PI) / f - 1.0).abs() < tol, "d={d} λ={lambda}: {} vs {f}", series / (2.0 * PI));
        }
    }
}

fn dense_loglik(t: &DMatrix<f64>, x: &[f64]) -> (f64, f64, DVector<f64>) {
    let chol = t.clone().cholesky().unwrap();
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let xv = DVector::from_row_slice(x);
    let sol = chol.solve(&xv);
    let ll = -0.5 * xv.dot(&sol) - 0.5 * logdet - 0.5 * x.len() as f64 * (2.0 * PI).ln();
    (ll, logdet, sol)
}

#[test]
fn levinson_matches_dense_cholesky() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in [1, 2, 3, 8, 33, 100] {
        let f: SpectralFn = random_fexp(&mut rng).into();
        let cov = ToeplitzCov::from_spectral(&f, n, 1e-13).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (ll_ref, logdet_ref, sol_ref) = dense_loglik(&cov.to_dense(), &x);
        let solver = cov.factor().unwrap();
        assert!((gauss_loglik(cov.autocov(), &x).unwrap() - ll_ref).abs() < 1e-10 * ll_ref.abs().max(1.0));
        assert!((solver.logdet() - logdet_ref).abs() < 1e-10 * logdet_ref.abs().max(1.0));
        let sol = solver.solve(&x).unwrap();
        for (a, b) in sol.iter().zip(sol_ref.iter()) {
            assert!((a - b).abs() < 1e-9 * sol_ref.amax().max(1.0));
        }
        let mv = cov.matvec(&x).unwrap();
        let mv_ref = cov.to_dense() * DVector::from_row_slice(&x);
        for (a, b) in mv.iter().zip(mv_ref.iter()) {
            assert!((a - b).abs() < 1e-12 * mv_ref.amax().max(1.0));
        }
    }
}

#[test]
fn near_singular_matrix_fails_loudly() {
    let gamma = AutocovSeq::new(vec![1.0, 1.0 - 1e-15, 1.0 - 4e-15]).unwrap();
    match gauss_loglik(&gamma, &[0.0, 0.0, 0.0]) {
        Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
        other => panic!("expected a positive-definiteness error, got {other:?}"),
    }
}

fn dense_kl(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    let cb = b.clone().cholesky().unwrap();
    let tr = cb.solve(a).trace();
    let la = 2.0 * a.clone().cholesky().unwrap().l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let lb = 2.0 * cb.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    0.5 * (tr / n - 1.0 - (la - lb) / n)
}

#[test]
fn finite_divergences_match_dense_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [4, 16, 48] {
        let f0: SpectralFn = random_fexp(&mut rng).into();
        let f: SpectralFn = random_fexp(&mut rng).into();
        let a = ToeplitzCov::from_spectral(&f0, n, TRACE_AUTOCOV_TOL).unwrap().to_dense();
        let b = ToeplitzCov::from_spectral(&f, n, TRACE_AUTOCOV_TOL).unwrap().to_dense();
        let kl = kl_n(&f0, &f, n).unwrap();
        let kl_ref = dense_kl(&a, &b);
        assert!((kl - kl_ref).abs() < 1e-9 * kl_ref.max(1.0));
        let h = h_n(&f0, &f, n).unwrap();
        assert!((h - kl_ref - dense_kl(&b, &a)).abs() < 1e-9 * h.max(1.0));
        // b_n = tr((I - Y')²)/n with Y = T(f)⁻¹T(f₀)
        let y = b.clone().cholesky().unwrap().solve(&a);
        let m = DMatrix::identity(n, n) - y.transpose();
        let b_ref = (&m * &m).trace() / n as f64;
        assert!((b_n(&f0, &f, n).unwrap() - b_ref).abs() < 1e-9 * b_ref.abs().max(1.0));
        let tr = trace_ratio(&f0, &f, n, TraceMode::Exact).unwrap().value;
        assert!((tr - y.trace() / n as f64).abs() < 1e-10 * tr.abs().max(1.0));
    }
}

#[test]
fn log_l2_closed_form_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let f: SpectralFn = random_fexp(&mut rng).into();
        let g: SpectralFn = random_fexp(&mut rng).into();
        let closed = log_l2(&f, &g).unwrap();
        let quad = log_l2_quadrature(&f, &g).unwrap();
        assert!((closed - quad).abs() < 1e-9 * closed.max(1e-3), "{closed} vs {quad}");
    }
}

#[test]
fn kl_limit_normalizations_differ_by_four() {
    let f0 = fexp(0.2, &[0.1, 0.3]);
    let f = fexp(0.15, &[0.0, 0.2, 0.1]);
    let paper = kl_inf(&f0, &f, ConstantMode::Paper).unwrap();
    let szego = kl_inf(&f0, &f, ConstantMode::Szego).unwrap();
    assert!((paper / szego - 4.0).abs() < 1e-12);
}
