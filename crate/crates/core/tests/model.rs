use locstat_core::model::contraction_report;
use locstat_core::{make_builtin, Extras, FamilyKind, InnovationLaw, ModelSpec, ParameterCurve as C, Seed};
use proptest::prelude::*;

fn differentiable_builtins() -> Vec<ModelSpec> {
    vec![
        make_builtin(FamilyKind::TvAr, vec![C::poly([0.1, 0.4]), C::poly([-0.2, 0.0, 0.3]), C::poly([1.0, 0.5])], Extras::default())
            .unwrap(),
        make_builtin(FamilyKind::TvArch, vec![C::constant(0.2), C::poly([0.0, 0.0, 0.95])], Extras::default()).unwrap(),
        make_builtin(FamilyKind::TvExpAr, vec![C::poly([0.2, 0.5])], Extras::expar(0.8)).unwrap(),
        make_builtin(
            FamilyKind::TvRc,
            vec![C::poly([0.0, 1.0]), C::constant(1.0), C::poly([0.2, 0.3]), C::poly([0.1, -0.1])],
            Extras::default(),
        )
        .unwrap(),
    ]
}

fn close(analytic: f64, fd: f64) -> bool {
    (analytic - fd).abs() <= 1e-4 * analytic.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn analytic_gradients_match_central_differences(
        eps in -3.0f64..3.0,
        y0 in -3.0f64..3.0,
        y1 in -3.0f64..3.0,
        u in 0.01f64..0.99,
    ) {
        let h = 1e-5;
        for m in differentiable_builtins() {
            let y: Vec<f64> = [y0, y1][..m.lags()].to_vec();
            let mut grad = vec![0.0; m.lags()];
            let du = m.gradient(eps, &y, u, &mut grad).unwrap();
            let fd_u = (m.eval(eps, &y, u + h) - m.eval(eps, &y, u - h)) / (2.0 * h);
            prop_assert!(close(du, fd_u), "{} du {} vs {}", m.name(), du, fd_u);
            for i in 0..m.lags() {
                let (mut hi, mut lo) = (y.clone(), y.clone());
                hi[i] += h;
                lo[i] -= h;
                let fd = (m.eval(eps, &hi, u) - m.eval(eps, &lo, u)) / (2.0 * h);
                prop_assert!(close(grad[i], fd), "{} dy{} {} vs {}", m.name(), i, grad[i], fd);
            }
        }
    }

    #[test]
    fn construction_is_deterministic(c0 in -0.45f64..0.45, c1 in -0.45f64..0.45, eps in -3.0f64..3.0, y in -5.0f64..5.0) {
        let build = || make_builtin(FamilyKind::TvAr, vec![C::poly([c0, c1]), C::constant(1.0)], Extras::default()).unwrap();
        let (a, b) = (build(), build());
        for k in 0..=16 {
            let u = k as f64 / 16.0;
            prop_assert_eq!(a.eval(eps, &[y], u).to_bits(), b.eval(eps, &[y], u).to_bits());
        }
    }

    #[test]
    fn empirical_lipschitz_respects_declared_weights(a in -0.95f64..0.95, slope in -0.5f64..0.5, root in any::<u64>()) {
        let lo = a.min(a + slope);
        let hi = a.max(a + slope);
        prop_assume!(lo > -0.99 && hi < 0.99);
        let m = make_builtin(FamilyKind::TvAr, vec![C::linear(a, a + slope), C::constant(1.0)], Extras::default()).unwrap();
        let r = contraction_report(&m, 100, Seed::new(root, 0)).unwrap();
        prop_assert!(r.empirical_lipschitz <= 1.0 + 3.0 * r.stderr + 1e-12, "{:?}", r);
    }
}

#[test]
fn arch_contraction_report_with_unit_second_moment() {
    let m = make_builtin(FamilyKind::TvArch, vec![C::constant(0.2), C::poly([0.0, 0.0, 0.95])], Extras::default()).unwrap();
    let r = contraction_report(&m, 200, Seed::new(4, 0)).unwrap();
    assert!(r.empirical_lipschitz <= 1.0 + 3.0 * r.stderr, "{r:?}");
    assert!(!r.flagged);
}

#[test]
fn standard_gaussian_sample_moments() {
    let m = make_builtin(FamilyKind::TvAr, vec![C::constant(0.0), C::constant(1.0)], Extras::default()).unwrap();
    assert_eq!(*m.innovation(), InnovationLaw::standard_gaussian());
    let n = 1_000_000;
    let draws = m.stream(Seed::new(11, 0)).window(0, n);
    let x = draws.as_slice();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let se_mean = (1.0 / n as f64).sqrt();
    let se_var = (2.0 / n as f64).sqrt();
    assert!(mean.abs() < 4.0 * se_mean, "mean {mean}");
    assert!((var - 1.0).abs() < 4.0 * se_var, "var {var}");
}
