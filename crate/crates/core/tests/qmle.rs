use std::sync::Arc;

use locstat_core::localize::BiasConfig;
use locstat_core::math::{median, norm_quantile};
use locstat_core::optim::OptimizerConfig;
use locstat_core::qmle::{
    bias_corrected_check, estimate_curve, estimate_theta, local_likelihood, local_score, sandwich_ci, ArMean, ExpAr,
    LikelihoodSpec, MeanScale,
};
use locstat_core::simulate::{model_burn_in, simulate_path, simulate_path_with, simulate_stationary, Stationary, DEFAULT_TOL};
use locstat_core::{make_builtin, make_kernel, Extras, FamilyKind, Kernel, KernelFamily, ModelSpec, ParameterCurve as C, Seed, Sequential};
use proptest::prelude::*;

/// `mu = theta`, `sigma = 1`, no analytic derivatives.
struct Shift;

impl MeanScale for Shift {
    fn lags(&self) -> usize {
        1
    }
    fn dim(&self) -> usize {
        1
    }
    fn mean(&self, _y: &[f64], theta: &[f64]) -> f64 {
        theta[0]
    }
    fn scale(&self, _y: &[f64], _theta: &[f64]) -> f64 {
        1.0
    }
}

fn spec(form: impl MeanScale + 'static, lo: f64, hi: f64) -> LikelihoodSpec {
    LikelihoodSpec::new(Arc::new(form), vec![(lo, hi)], 1e-6).unwrap()
}

fn ar_spec() -> LikelihoodSpec {
    spec(ArMean { p: 1, sigma: 1.0 }, -0.99, 0.99)
}

fn expar_model(theta: C) -> ModelSpec {
    make_builtin(FamilyKind::TvExpAr, vec![theta], Extras::expar(0.8)).unwrap()
}

fn ar_model(a: C) -> ModelSpec {
    make_builtin(FamilyKind::TvAr, vec![a, C::constant(1.0)], Extras::default()).unwrap()
}

fn epan() -> Kernel {
    make_kernel(KernelFamily::Epanechnikov)
}

fn weighted_ls(x: &[f64], k: &Kernel, b: f64, u: f64) -> f64 {
    let n = x.len();
    let (mut num, mut den) = (0.0, 0.0);
    for t in 2..=n {
        let w = k.eval((t as f64 / n as f64 - u) / b);
        num += w * x[t - 1] * x[t - 2];
        den += w * x[t - 2] * x[t - 2];
    }
    num / den
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn argmin_dominates_grid_and_truth(root in any::<u64>(), u in 0.2f64..0.8) {
        let m = expar_model(C::poly([0.2, 0.5]));
        let s = spec(ExpAr { a0: 0.8 }, 0.0, 2.0);
        let k = epan();
        let path = simulate_path(&m, 3000, Seed::new(root, 0)).unwrap();
        let opt = OptimizerConfig::default();
        let fit = estimate_theta(&path.values, &s, &k, 0.2, u, &opt).unwrap();
        let at = |t: f64| local_likelihood(&path.values, &s, &k, 0.2, u, &[t]).unwrap();
        let best = at(fit.theta_hat[0]);
        for i in 0..opt.grid_points {
            prop_assert!(best <= at(2.0 * i as f64 / (opt.grid_points - 1) as f64));
        }
        prop_assert!(best <= at(0.2 + 0.5 * u));
        if fit.theta_hat[0] > 0.0 && fit.theta_hat[0] < 2.0 {
            let g = local_score(&path.values, &s, &k, 0.2, u, &fit.theta_hat).unwrap();
            prop_assert!(g[0].abs() < 1e-6 * (1.0 + best.abs()), "score {}", g[0]);
        }
    }

    #[test]
    fn ar_fit_equals_weighted_least_squares(root in any::<u64>(), u in 0.15f64..0.85, a in -0.7f64..0.7) {
        let path = simulate_path(&ar_model(C::linear(a, a * 0.5)), 2000, Seed::new(root, 1)).unwrap();
        let k = epan();
        let fit = estimate_theta(&path.values, &ar_spec(), &k, 0.2, u, &OptimizerConfig::default()).unwrap();
        let exact = weighted_ls(&path.values, &k, 0.2, u);
        prop_assert!((fit.theta_hat[0] - exact).abs() < 1e-6, "{} vs {}", fit.theta_hat[0], exact);
    }

    #[test]
    fn ar_estimate_is_scale_invariant(root in any::<u64>(), c in 0.1f64..10.0) {
        let path = simulate_path(&ar_model(C::constant(0.4)), 1500, Seed::new(root, 2)).unwrap();
        let scaled: Vec<f64> = path.values.iter().map(|v| c * v).collect();
        let k = epan();
        let opt = OptimizerConfig::default();
        let a = estimate_theta(&path.values, &ar_spec(), &k, 0.25, 0.5, &opt).unwrap();
        let b = estimate_theta(&scaled, &ar_spec(), &k, 0.25, 0.5, &opt).unwrap();
        prop_assert!((a.theta_hat[0] - b.theta_hat[0]).abs() < 1e-8);
    }

    #[test]
    fn sandwich_is_the_scaled_inverse_information_product(root in any::<u64>()) {
        let path = simulate_path(&expar_model(C::constant(0.5)), 2000, Seed::new(root, 3)).unwrap();
        let k = epan();
        let (n, b) = (2000, 0.2);
        let fit = estimate_theta(&path.values, &spec(ExpAr { a0: 0.8 }, 0.0, 2.0), &k, b, 0.5, &OptimizerConfig::default()).unwrap();
        let (v, i) = (fit.v_hat[0], fit.i_hat[0]);
        let s = i / (v * v) * k.l2() / (n as f64 * b);
        prop_assert!((fit.sandwich[0] - s).abs() <= 1e-12 * s);
        let (lo, hi) = sandwich_ci(&fit, &k, n, b, 0.9).unwrap()[0];
        let half = norm_quantile(0.95) * s.sqrt();
        prop_assert!((hi - lo - 2.0 * half).abs() <= 1e-10 * half);
    }
}

#[test]
fn rectangular_likelihood_of_unit_noise() {
    let path = simulate_path(&ar_model(C::constant(0.0)), 20_000, Seed::new(1, 0)).unwrap();
    let x = &path.values;
    let rect = make_kernel(KernelFamily::Rectangular);
    let s = spec(Shift, -1.0, 1.0);
    let n = x.len();
    let direct = |b: f64| {
        (2..=n).filter(|t| ((*t as f64 / n as f64 - 0.5) / b).abs() <= 0.5).map(|t| 0.5 * x[t - 1] * x[t - 1]).sum::<f64>()
            / (n as f64 * b)
    };
    let l = local_likelihood(x, &s, &rect, 0.2, 0.5, &[0.0]).unwrap();
    assert!((l - direct(0.2)).abs() < 1e-12);
    assert!((l - 0.5).abs() < 0.03, "{l}");
    let global = local_likelihood(x, &s, &rect, 0.999, 0.5, &[0.0]).unwrap();
    assert!((global - direct(0.999)).abs() < 1e-12);

    for theta in [-0.6, -0.2, 0.3, 0.8] {
        let gap = local_likelihood(x, &s, &rect, 0.2, 0.5, &[theta]).unwrap() - l;
        assert!((gap - 0.5 * theta * theta).abs() < 0.03, "{theta}: {gap}");
    }
}

#[test]
fn information_estimates_at_the_truth() {
    let (a0, theta0) = (0.8, 0.5);
    let m = expar_model(C::constant(theta0));
    let s = simulate_stationary(&m, 0.5, 200_000, Seed::new(2, 0), DEFAULT_TOL).unwrap();
    let gmu2 = s.x.windows(2).map(|w| {
        let y = w[0];
        let g = -a0 * (-theta0 * y * y).exp() * y * y * y;
        g * g
    });
    let oracle = gmu2.sum::<f64>() / (s.x.len() - 1) as f64;
    let rect = make_kernel(KernelFamily::Rectangular);
    let fit = estimate_theta(&s.x, &spec(ExpAr { a0 }, theta0, theta0), &rect, 0.999, 0.5, &OptimizerConfig::default()).unwrap();
    assert_eq!(fit.theta_hat, vec![theta0]);
    assert!((fit.v_hat[0] / oracle - 1.0).abs() < 0.10, "V {} vs {oracle}", fit.v_hat[0]);
    assert!((fit.i_hat[0] / oracle - 1.0).abs() < 0.10, "I {} vs {oracle}", fit.i_hat[0]);
}

#[test]
fn interval_width_matches_asymptotic_width() {
    let (a0, theta0, u, n, reps) = (0.8, 0.5, 0.5, 16_000, 100);
    let m = expar_model(C::constant(theta0));
    let long = simulate_stationary(&m, u, 400_000, Seed::new(3, 0), DEFAULT_TOL).unwrap();
    let v = long.x.iter().map(|x| a0 * a0 * (-2.0 * theta0 * x * x).exp() * x.powi(6)).sum::<f64>() / long.x.len() as f64;
    let k = epan();
    let b = (n as f64).powf(-1.0 / 3.0);
    let theory = 2.0 * norm_quantile(0.95) * (k.l2() / (v * n as f64 * b)).sqrt();
    let pre = Stationary::with_burn_in(&m, 0.0, model_burn_in(&m, DEFAULT_TOL).unwrap()).unwrap();
    let s = spec(ExpAr { a0 }, 0.0, 2.0);
    let widths: Vec<f64> = (0..reps)
        .map(|r| {
            let path = simulate_path_with(&pre, n, Seed::new(4, r)).unwrap();
            let fit = estimate_theta(&path.values, &s, &k, b, u, &OptimizerConfig::default()).unwrap();
            let (lo, hi) = sandwich_ci(&fit, &k, n, b, 0.9).unwrap()[0];
            hi - lo
        })
        .collect();
    let mean = widths.iter().sum::<f64>() / reps as f64;
    assert!((mean / theory - 1.0).abs() < 0.15, "{mean} vs {theory}");
}

#[test]
fn constant_curve_is_homogeneous() {
    let m = expar_model(C::constant(0.5));
    let path = simulate_path(&m, 8000, Seed::new(5, 0)).unwrap();
    let grid = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    let fits: Vec<_> = estimate_curve(&path.values, &spec(ExpAr { a0: 0.8 }, 0.0, 2.0), &epan(), 0.2, &grid, &OptimizerConfig::default())
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let th: Vec<f64> = fits.iter().map(|f| f.theta_hat[0]).collect();
    let m = th.iter().sum::<f64>() / th.len() as f64;
    let sd = (th.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (th.len() - 1) as f64).sqrt();
    let half = fits.iter().map(|f| 0.5 * (f.ci[0].1 - f.ci[0].0)).sum::<f64>() / fits.len() as f64;
    assert!(sd < 3.0 * half, "sd {sd} half-width {half}");
    assert!(estimate_curve(&path.values, &ar_spec(), &epan(), 0.2, &[], &OptimizerConfig::default()).is_empty());
}

#[test]
fn curve_error_shrinks_uniformly() {
    let m = expar_model(C::poly([0.2, 0.5]));
    let s = spec(ExpAr { a0: 0.8 }, 0.0, 2.0);
    let grid = [0.25, 0.375, 0.5, 0.625, 0.75];
    let sup_err = |n: usize| {
        let b = (n as f64).powf(-1.0 / 3.0);
        let errs: Vec<f64> = (0..20)
            .map(|r| {
                let path = simulate_path(&m, n, Seed::new(6, r)).unwrap();
                estimate_curve(&path.values, &s, &epan(), b, &grid, &OptimizerConfig::default())
                    .into_iter()
                    .zip(grid)
                    .map(|(f, u)| (f.unwrap().theta_hat[0] - (0.2 + 0.5 * u)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        median(&errs)
    };
    let (small, large) = (sup_err(4000), sup_err(16_000));
    assert!(large < small, "{small} -> {large}");
}

#[test]
fn constant_coefficient_has_no_bias() {
    let m = ar_model(C::constant(0.5));
    let cfg = BiasConfig { n: 20_000, n_rep: 100, seed: Seed::new(7, 0) };
    let t = bias_corrected_check(&ar_spec(), &m, &epan(), &[0.1, 0.2, 0.4], 0.5, 0, 0.5, &cfg, &OptimizerConfig::default(), &Sequential)
        .unwrap();
    for r in &t.rows {
        let nb = 20_000.0 * r.b;
        assert!(r.bias_raw < 4.0 * r.se_raw + 3.0 / nb, "{r:?}");
        assert!(r.bias_coupled < 1e-6, "{r:?}");
    }
}
