use gpdrift::contrast::{
    curvature_estimate, least_squares_drift, minimize_contrast, ContrastModel, CurvatureConvention,
};
use gpdrift::drift::DriftModel;
use gpdrift::kernels::KernelModel;
use gpdrift::moments::{
    detrend, g_functional, moment_alpha, moment_beta, z_estimator, DetrendedSeries, GFunctional, MomentFunction,
};
use gpdrift::optim::NelderMeadOptions;
use gpdrift::simulate::{derive_seed, MethodPreference, ModelSimulator, PathSample, SamplingScheme};
use proptest::prelude::*;

fn kernel_strategy() -> impl Strategy<Value = KernelModel> {
    prop_oneof![
        (0.2..5.0f64, 0.1..5.0f64).prop_map(|(a, b)| KernelModel::gaussian(a, b).unwrap()),
        (0.2..5.0f64, 0.1..5.0f64, 0.3..5.0f64).prop_map(|(a, b, g)| KernelModel::rational_quadratic(a, b, g).unwrap()),
        (0.2..5.0f64, 0.1..3.0f64, 2.2..6.0f64).prop_map(|(a, b, nu)| KernelModel::matern(a, b, nu).unwrap()),
        (0.2..5.0f64, 0.1..3.0f64, 0.05..0.5f64)
            .prop_filter("beta * eps below 1", |(_, b, e)| b * e < 0.95)
            .prop_map(|(a, b, e)| KernelModel::mollified_ou(a, b, e).unwrap()),
    ]
}

fn case_one_path(n: usize, seed: u64) -> PathSample {
    let scheme = SamplingScheme::from_rule(n, 0.4).unwrap();
    let k = KernelModel::gaussian(1.0, 1.0).unwrap();
    ModelSimulator::new(&k, &DriftModel::exp_decay(2.0), &scheme, MethodPreference::Auto)
        .unwrap()
        .simulate(derive_seed(42, &[90, seed]))
}

fn values_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 3..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_even_and_bounded(k in kernel_strategy(), t in 0.0..50.0f64) {
        let k0 = k.eval(0.0);
        prop_assert_eq!(k.eval(t), k.eval(-t));
        prop_assert!(k.eval(t).abs() <= k0 * (1.0 + 1e-12));
    }

    #[test]
    fn local_variance_follows_the_curvature(k in kernel_strategy()) {
        let h = 1e-3;
        let v = k.local_variance(h).unwrap();
        let c = -k.d2_at_zero().unwrap();
        prop_assert!(v > 0.0);
        prop_assert!((v / (h * h) - c).abs() <= 0.05 * c, "{}: {} vs {}", k, v / (h * h), c);
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite(
        k in kernel_strategy(),
        mut grid in prop::collection::vec(0.0..20.0f64, 2..40),
    ) {
        grid.sort_by(f64::total_cmp);
        let g = k.gram_matrix(&grid);
        let trace = g.trace();
        let min = g.symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-10 * trace, "{}: smallest eigenvalue {}", k, min);
    }

    #[test]
    fn curvature_estimate_is_homogeneous(seed in 0u64..1000, c in 0.1..10.0f64) {
        let x = case_one_path(300, seed);
        let drift = DriftModel::exp_decay(2.0);
        let mut scaled = vec![x.values[0]];
        for i in 1..x.values.len() {
            let m = drift.eval(x.times[i - 1]) * x.h;
            let r = x.values[i] - x.values[i - 1] - m;
            scaled.push(scaled[i - 1] + c * r + m);
        }
        let y = PathSample::from_values(scaled, x.h).unwrap();
        let g1 = curvature_estimate(&x, &drift, CurvatureConvention::MomentMatched);
        let gc = curvature_estimate(&y, &drift, CurvatureConvention::MomentMatched);
        prop_assert!((gc / (c * c * g1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn drift_estimate_is_linear_in_the_drift_signal(seed in 0u64..1000, a in -5.0..5.0f64) {
        let x = case_one_path(300, seed);
        let family = DriftModel::exp_decay(0.0);
        let base = least_squares_drift(&x, &family).unwrap()[0];
        let mut shifted = x.values.clone();
        let mut acc = 0.0;
        for (v, t) in shifted.iter_mut().skip(1).zip(&x.times) {
            acc += a * (-t).exp() * x.h;
            *v += acc;
        }
        let y = PathSample::from_values(shifted, x.h).unwrap();
        let moved = least_squares_drift(&y, &family).unwrap()[0];
        prop_assert!((moved - base - a).abs() < 1e-9 * (1.0 + base.abs()), "{} vs {}", moved - base, a);
    }

    #[test]
    fn alpha_beta_identities(y in values_strategy(), h in 0.001..1.0f64) {
        let s = DetrendedSeries::new(y, h).unwrap();
        let sum: f64 = s.increments().iter().map(|d| d * d).sum();
        let rhs = sum / (s.n() as f64 * h * h);
        if let Ok(b) = moment_beta(&s) {
            prop_assert!((b * moment_alpha(&s) - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }
        let g = g_functional(&s, &GFunctional::SquaredIncrement);
        prop_assert!((g - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn square_moment_root_reproduces_alpha(y in values_strategy(), init in 0.1..10.0f64) {
        let s = DetrendedSeries::new(y, 0.1).unwrap();
        let a = moment_alpha(&s);
        prop_assume!(a > 1e-6);
        let template = KernelModel::gaussian(1.0, 1.0).unwrap();
        let z = z_estimator(&s, &[MomentFunction::square()], &template, &[0], &[init]).unwrap();
        prop_assert!((z.params[0] - a).abs() <= 1e-12 * a);
    }

    #[test]
    fn detrending_is_a_pure_shift(seed in 0u64..1000, xi in -5.0..5.0f64) {
        let x = case_one_path(200, seed);
        let d = DriftModel::exp_decay(xi);
        let s = detrend(&x, &d).unwrap();
        for i in 0..x.values.len() {
            let back = s.y[i] + d.integral(x.times[i]).unwrap();
            prop_assert!((back - x.values[i]).abs() < 1e-12 * (1.0 + x.values[i].abs()));
        }
    }

    #[test]
    fn tail_mass_is_nonincreasing(xi in -5.0..5.0f64, t in 0.0..30.0f64, dt in 0.0..10.0f64) {
        let d = DriftModel::exp_decay(xi);
        prop_assert!(d.tail_mass(t + dt).unwrap() <= d.tail_mass(t).unwrap());
    }

    #[test]
    fn seeds_determine_paths(seed in any::<u64>()) {
        let scheme = SamplingScheme::new(64, 0.1).unwrap();
        let k = KernelModel::gaussian(1.0, 1.0).unwrap();
        let sim = ModelSimulator::new(&k, &DriftModel::exp_decay(2.0), &scheme, MethodPreference::Auto).unwrap();
        prop_assert_eq!(sim.simulate(seed).values, sim.simulate(seed).values);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn minimizer_never_increases_the_contrast(
        seed in 0u64..1000,
        xi0 in 0.5..4.0f64,
        c0 in 0.2..5.0f64,
    ) {
        let x = case_one_path(300, seed);
        let model = ContrastModel::gaussian_curvature(&DriftModel::exp_decay(0.0));
        let init = [xi0, c0];
        let start = model.evaluate(&x, &init).unwrap();
        let fit = minimize_contrast(&x, &model, Some(&init), None, &NelderMeadOptions::default()).unwrap();
        prop_assert!(fit.report.diagnostics.contrast.unwrap() <= start);
        prop_assert_eq!(model.evaluate(&x, &fit.theta).unwrap(), fit.report.diagnostics.contrast.unwrap());
    }
}
