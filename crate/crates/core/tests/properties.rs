use std::path::PathBuf;

use proptest::prelude::*;

use longmem_core::divergences::{h, kl_inf, kl_n, log_l2, ConstantMode};
use longmem_core::harness::{ExperimentConfig, ExperimentKind};
use longmem_core::posterior::{
    estimate_f_h, estimate_f_log, periodogram, whittle_loglik, PosteriorSamples, SamplerConfig,
};
use longmem_core::prior::{DDensity, PriorSpec, PriorVariant};
use longmem_core::spectral::{fourier_grid, FexpParams, SpectralFn};
use longmem_core::toeplitz::ToeplitzCov;

fn fexp_params() -> impl Strategy<Value = FexpParams> {
    (-0.3f64..0.4, prop::collection::vec(-0.8f64..0.8, 1..5)).prop_map(|(d, theta)| FexpParams::new(d, theta).unwrap())
}

fn close_pair() -> impl Strategy<Value = (FexpParams, FexpParams)> {
    (fexp_params(), -0.1f64..0.1, prop::collection::vec(-0.5f64..0.5, 1..5)).prop_map(|(f0, dd, theta)| {
        let f = FexpParams::new((f0.d() + dd).clamp(-0.45, 0.45), theta).unwrap();
        (f0, f)
    })
}

fn prior_spec() -> impl Strategy<Value = PriorSpec> {
    let variant = prop_oneof![
        (0.5f64..5.0, 0.5f64..8.0, 1.0f64..20.0).prop_map(|(b_bound, alpha_scale, theta0_sd)| {
            PriorVariant::DirichletFexp { b_bound, alpha_scale, theta0_sd }
        }),
        (0.5f64..3.0, 1.0f64..8.0).prop_map(|(beta, a_bound)| PriorVariant::FexpBeta { beta, a_bound }),
        fexp_params().prop_map(PriorVariant::PointMass),
    ];
    let d_density =
        prop_oneof![Just(DDensity::Uniform), (0.5f64..4.0, 0.5f64..4.0).prop_map(|(a, b)| DDensity::Beta { a, b }),];
    (variant, 0.1f64..6.0, 0.01f64..0.2, d_density).prop_map(|(variant, mu, t, d_density)| PriorSpec {
        variant,
        mu,
        t,
        d_density,
    })
}

fn sampler_config() -> impl Strategy<Value = SamplerConfig> {
    (
        1usize..5000,
        1usize..5000,
        1usize..20,
        0.01f64..3.0,
        0.01f64..3.0,
        0.0f64..=1.0,
        1usize..200,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(burn_in, extra, thin, step_d, step_theta, jump_rate, adapt_window, seed, prior_only)| {
            SamplerConfig {
                iterations: burn_in + extra,
                burn_in,
                thin,
                step_d,
                step_theta,
                jump_rate,
                adapt_window,
                seed,
                prior_only,
                ..SamplerConfig::default()
            }
        })
}

fn experiment_config() -> impl Strategy<Value = ExperimentConfig> {
    let kind = prop_oneof![
        Just(ExperimentKind::Consistency),
        Just(ExperimentKind::Rate),
        Just(ExperimentKind::TraceLimits),
        Just(ExperimentKind::DivergenceProperties),
    ];
    let n_list = prop::collection::btree_set(4usize..=2048, 1..6).prop_map(|s| s.into_iter().collect::<Vec<_>>());
    (
        kind,
        fexp_params(),
        n_list,
        1usize..50,
        prior_spec(),
        sampler_config(),
        any::<u64>(),
        "[a-z][a-z0-9_/]{0,12}",
        0usize..10,
        0usize..500,
        any::<bool>(),
    )
        .prop_map(|(kind, truth, n_list, replicates, prior, sampler, seed, out, pairs, cases, write_series)| {
            ExperimentConfig {
                kind,
                truth,
                n_list,
                replicates,
                prior,
                sampler,
                seed,
                out: PathBuf::from(out),
                pairs,
                cases,
                write_series,
            }
        })
}

fn samples_of(draws: Vec<FexpParams>) -> PosteriorSamples {
    let n = draws.len();
    let mut s = longmem_core::posterior::run_mcmc(
        &[],
        &PriorSpec::point_mass(draws[0].clone()),
        &SamplerConfig { iterations: 2, burn_in: 1, prior_only: true, ..SamplerConfig::default() },
    )
    .unwrap();
    s.draws = draws;
    s.iterations = (0..n).collect();
    s.log_posterior = vec![0.0; n];
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(cfg in experiment_config()) {
        let text = cfg.to_config_string();
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn toeplitz_solve_inverts_matvec(p in fexp_params(), n in 1usize..80, seed in any::<u64>()) {
        let cov = ToeplitzCov::from_spectral(&p.into(), n, 1e-13).unwrap();
        let x: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 500.0 - 1.0).collect();
        let b = cov.matvec(&x).unwrap();
        let back = cov.factor().unwrap().solve(&b).unwrap();
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (u, v) in back.iter().zip(&x) {
            prop_assert!((u - v).abs() < 1e-7 * scale);
        }
    }

    #[test]
    fn divergences_are_nonnegative_and_ordered((f0, f) in close_pair()) {
        let a: SpectralFn = f0.into();
        let b: SpectralFn = f.into();
        let hp = h(&a, &b, ConstantMode::Paper).unwrap();
        let l = log_l2(&a, &b).unwrap();
        prop_assert!(hp >= l / (2.0 * std::f64::consts::PI) * (1.0 - 1e-10));
        prop_assert!(kl_inf(&a, &b, ConstantMode::Szego).unwrap() >= 0.0);
        prop_assert!(kl_n(&a, &b, 16).unwrap() >= -1e-14);
        prop_assert!((h(&a, &b, ConstantMode::Paper).unwrap() - h(&b, &a, ConstantMode::Paper).unwrap()).abs() < 1e-10 * hp.max(1e-6));
    }

    #[test]
    fn h_estimator_is_bracketed_by_draws(draws in prop::collection::vec(fexp_params(), 1..8)) {
        let grid = fourier_grid(24);
        let s = samples_of(draws.clone());
        let fh = estimate_f_h(&s, &grid).unwrap();
        for (l, v) in grid.iter().zip(&fh) {
            let vals: Vec<f64> = draws.iter().map(|p| p.eval(*l).unwrap()).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            prop_assert!(*v >= lo * (1.0 - 1e-12) && *v <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn single_draw_estimators_agree(p in fexp_params()) {
        let grid = fourier_grid(20);
        let s = samples_of(vec![p.clone()]);
        let a = estimate_f_log(&s, &grid).unwrap();
        let b = estimate_f_h(&s, &grid).unwrap();
        for ((l, x), y) in grid.iter().zip(&a).zip(&b) {
            let v = p.eval(*l).unwrap();
            prop_assert!((x / v - 1.0).abs() < 1e-12 && (y / v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn whittle_scaling_identity(p in fexp_params(), c in 0.1f64..10.0, x in prop::collection::vec(-3.0f64..3.0, 4..64)) {
        let f: SpectralFn = p.clone().into();
        let base = whittle_loglik(&x, &f).unwrap();
        let scaled = whittle_loglik(&x, &f.clone().scaled(c)).unwrap();
        let correction: f64 = periodogram(&x).iter().map(|(l, i)| c.ln() + (1.0 / c - 1.0) * i / p.eval(*l).unwrap()).sum();
        prop_assert!((scaled - (base - correction)).abs() < 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn prior_draws_lie_in_support(spec in prior_spec(), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let draw = spec.sample(&mut rng);
        prop_assert!(draw.log_density.is_finite());
        let (lo, hi) = spec.d_bounds();
        if !spec.is_point_mass() {
            prop_assert!(draw.params.d() >= lo && draw.params.d() <= hi);
        }
    }
}
