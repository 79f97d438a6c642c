use locstat_core::simulate::{
    coupled_pair, model_burn_in, simulate_derivative, simulate_path, simulate_stationary, Stationary, DEFAULT_TOL,
};
use locstat_core::{make_builtin, Extras, FamilyKind, ModelSpec, ParameterCurve as C, Seed};
use proptest::prelude::*;

fn ar1(a: C) -> ModelSpec {
    make_builtin(FamilyKind::TvAr, vec![a, C::constant(1.0)], Extras::default()).unwrap()
}

fn reference_arch() -> ModelSpec {
    make_builtin(FamilyKind::TvArch, vec![C::constant(0.2), C::poly([0.0, 0.0, 0.95])], Extras::default()).unwrap()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
}

/// Mean and batch-means standard error.
fn batch_mean_se(x: &[f64], batches: usize) -> (f64, f64) {
    let len = x.len() / batches;
    let means: Vec<f64> = x.chunks_exact(len).map(|c| c.iter().sum::<f64>() / len as f64).collect();
    let (m, v) = mean_var(&means);
    (m, (v / batches as f64).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn path_replays_the_recursion_exactly(root in any::<u64>(), stream in 0u64..1000, n in 2usize..300) {
        let m = make_builtin(FamilyKind::TvAr, vec![C::poly([0.2, 0.3]), C::poly([-0.1, 0.2]), C::constant(1.0)], Extras::default()).unwrap();
        let seed = Seed::new(root, stream);
        let path = simulate_path(&m, n, seed).unwrap();
        let eps = m.stream(seed);
        for t in 1..=n as i64 {
            let y = [path.at(t - 1), path.at(t - 2)];
            let x = m.eval(eps.draw(t), &y, t as f64 / n as f64);
            prop_assert_eq!(x.to_bits(), path.at(t).to_bits());
        }
        prop_assert_eq!(path, simulate_path(&m, n, seed).unwrap());
    }

    #[test]
    fn arbitrary_starts_couple_within_tolerance(root in any::<u64>(), y0 in -50.0f64..50.0, u in 0.0f64..1.0) {
        for m in [reference_arch(), ar1(C::constant(0.9))] {
            let seed = Seed::new(root, 0);
            let tol = 1e-9;
            let s = simulate_stationary(&m, u, 50, seed, tol).unwrap();
            let eps = m.stream(seed);
            let mut y = y0;
            for t in (1 - s.burn_in as i64)..=50 {
                y = m.eval(eps.draw(t), &[y], u);
                if t >= 1 {
                    prop_assert!((y - s.x_at(t)).abs() < tol, "{} t={} {} vs {}", m.name(), t, y, s.x_at(t));
                }
            }
        }
    }

    #[test]
    fn coupled_pairs_are_deterministic(root in any::<u64>(), k in 0usize..6) {
        let m = reference_arch();
        let seed = Seed::new(root, 3);
        prop_assert_eq!(coupled_pair(&m, 0.7, k, 20, seed).unwrap(), coupled_pair(&m, 0.7, k, 20, seed).unwrap());
    }
}

#[test]
fn white_noise_path_has_unit_variance() {
    let path = simulate_path(&ar1(C::constant(0.0)), 100_000, Seed::new(1, 0)).unwrap();
    let (_, v) = mean_var(&path.values);
    assert!((0.98..=1.02).contains(&v), "{v}");
}

#[test]
fn arch_path_variance_grows_toward_the_end() {
    let path = simulate_path(&reference_arch(), 500, Seed::new(2, 0)).unwrap();
    let first = mean_var(&path.values[..50]).1;
    let last = mean_var(&path.values[450..]).1;
    assert!(last > first, "{first} {last}");
}

#[test]
fn stationary_ar_lag_one_autocorrelation() {
    let s = simulate_stationary(&ar1(C::constant(0.5)), 0.5, 1_000_000, Seed::new(3, 0), DEFAULT_TOL).unwrap();
    let (m, v) = mean_var(&s.x);
    let c1 = s.x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (s.x.len() - 1) as f64;
    assert!((c1 / v - 0.5).abs() < 0.01, "{}", c1 / v);
}

#[test]
fn stationary_arch_second_moment_fixed_point() {
    let s = simulate_stationary(&reference_arch(), 0.5, 1_000_000, Seed::new(4, 0), DEFAULT_TOL).unwrap();
    let sq: Vec<f64> = s.x.iter().map(|v| v * v).collect();
    let (m, se) = batch_mean_se(&sq, 100);
    let oracle = 0.2 / (1.0 - 0.95 * 0.25);
    assert!((m - oracle).abs() < 3.0 * se, "{m} vs {oracle} (se {se})");
}

#[test]
fn disjoint_blocks_share_moments() {
    let s = simulate_stationary(&reference_arch(), 0.8, 400_000, Seed::new(5, 0), DEFAULT_TOL).unwrap();
    let sq: Vec<f64> = s.x.iter().map(|v| v * v).collect();
    let (a, sa) = batch_mean_se(&sq[..200_000], 50);
    let (b, sb) = batch_mean_se(&sq[200_000..], 50);
    assert!((a - b).abs() < 4.0 * (sa * sa + sb * sb).sqrt(), "{a} {b}");
}

#[test]
fn derivative_matches_linear_process_series() {
    let m = ar1(C::poly([0.0, 0.5]));
    let u = 0.8;
    let (a, da) = (0.5 * u, 0.5);
    let seed = Seed::new(6, 0);
    let s = simulate_derivative(&m, u, 50, seed, DEFAULT_TOL, 1).unwrap();
    let eps = m.stream(seed);
    let d1 = s.d1.as_ref().unwrap();
    for t in 1..=50i64 {
        let series: f64 = (1..=200).map(|j| j as f64 * a.powi(j - 1) * da * eps.draw(t - j as i64)).sum();
        assert!((d1[(t - 1) as usize] - series).abs() < 1e-6, "t={t}");
    }
}

#[test]
fn saturating_expar_derivative_matches_finite_differences() {
    let m = make_builtin(FamilyKind::TvExpAr, vec![C::poly([0.3, 0.4])], Extras::expar(0.8)).unwrap();
    let burn = model_burn_in(&m, DEFAULT_TOL).unwrap();
    let (u, h, len) = (0.5, 1e-4, 2000);
    let centre = Stationary::with_burn_in(&m, u, burn).unwrap();
    let lead = centre.lead(1);
    let innov = m.stream(Seed::new(3, 0)).window(1 - lead as i64, lead + len);
    let d = centre.run(&innov, 1, len, 1).unwrap();
    let lo = Stationary::with_burn_in(&m, u - h, burn).unwrap().run(&innov, 1, len, 0).unwrap();
    let hi = Stationary::with_burn_in(&m, u + h, burn).unwrap().run(&innov, 1, len, 0).unwrap();
    let l1 = d.d1.unwrap().iter().zip(lo.x.iter().zip(&hi.x)).map(|(d, (a, b))| (d - (b - a) / (2.0 * h)).abs()).sum::<f64>()
        / len as f64;
    assert!(l1 < 1e-6, "{l1}");
}

#[test]
fn derivative_hoelder_constant_is_stable_across_seeds() {
    let m = make_builtin(FamilyKind::TvArch, vec![C::constant(0.2), C::poly([0.0, 0.0, 0.95])], Extras::default()).unwrap();
    let grid = [0.2, 0.35, 0.5, 0.65, 0.8];
    let fitted = |root: u64| {
        let burn = model_burn_in(&m, DEFAULT_TOL).unwrap();
        let len = 20_000;
        let lead = 2 * burn.steps;
        let innov = m.stream(Seed::new(root, 0)).window(1 - lead as i64, lead + len);
        let d: Vec<Vec<f64>> =
            grid.iter().map(|&u| Stationary::with_burn_in(&m, u, burn).unwrap().run(&innov, 1, len, 1).unwrap().d1.unwrap()).collect();
        let mut c: f64 = 0.0;
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                let l1 = d[i].iter().zip(&d[j]).map(|(a, b)| (a - b).abs()).sum::<f64>() / len as f64;
                c = c.max(l1 / (grid[j] - grid[i]));
            }
        }
        c
    };
    let (a, b) = (fitted(7), fitted(8));
    assert!(a.is_finite() && a > 0.0);
    assert!((a / b - 1.0).abs() < 0.25, "{a} {b}");
}
