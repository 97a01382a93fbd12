mod common;

use approx::assert_relative_eq;
use gpdrift::drift::DriftModel;
use gpdrift::kernels::KernelModel;
use gpdrift::moments::{
    detrend, empirical_increment_moment, estimate_k4, g_functional, increment_moment_limit, k4_from_moments,
    moment_alpha, moment_beta, moment_equations, moment_long_run_variance, newey_west_variance, z_estimator,
    DetrendedSeries, GFunctional, MomentFunction,
};
use gpdrift::simulate::{derive_seed, MethodPreference, ModelSimulator, PathSample, SamplingScheme};
use gpdrift::Error;

use common::{k4::certify, mean, median, se};

const MASTER: u64 = 42;

fn series(y: &[f64], h: f64) -> DetrendedSeries {
    DetrendedSeries::new(y.to_vec(), h).unwrap()
}

fn drift_free_sim(kernel: &KernelModel, n: usize, a: f64) -> ModelSimulator {
    let scheme = SamplingScheme::from_rule(n, a).unwrap();
    ModelSimulator::new(kernel, &DriftModel::zero(), &scheme, MethodPreference::Auto).unwrap()
}

fn as_series(p: &PathSample) -> DetrendedSeries {
    series(&p.values, p.h)
}

#[test]
fn detrend_examples() {
    let k = KernelModel::gaussian(1.0, 1.0).unwrap();
    let scheme = SamplingScheme::from_rule(500, 0.4).unwrap();
    let sim = ModelSimulator::new(&k, &DriftModel::exp_decay(2.0), &scheme, MethodPreference::Auto).unwrap();
    let x = sim.simulate(3);
    let raw = detrend(&x, &DriftModel::exp_decay(0.0)).unwrap();
    assert_eq!(raw.y, x.values);
    let y = detrend(&x, &DriftModel::exp_decay(1.7)).unwrap();
    for (i, t) in x.times.iter().enumerate() {
        assert!((y.y[i] - (x.values[i] - 1.7 * (1.0 - (-t).exp()))).abs() < 1e-14);
    }
    assert_eq!(y.xi_used, vec![1.7]);

    let h = 0.05;
    let exact: Vec<f64> = (0..=300).map(|i| -2.0 * (-(i as f64) * h).exp_m1()).collect();
    let p = PathSample::from_values(exact, h).unwrap();
    let s = detrend(&p, &DriftModel::exp_decay(2.0)).unwrap();
    assert!(s.y.iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn alpha_and_beta_hand_values() {
    assert_eq!(moment_alpha(&series(&[3.0; 6], 0.1)), 9.0);
    assert_eq!(moment_alpha(&series(&[1.0, 2.0, 2.0, 5.0], 1.0)), 3.0);
    assert_eq!(moment_beta(&series(&[1.0, 2.0, 2.0], 1.0)).unwrap(), 0.2);
    let h = 0.1;
    let y = [1.0, 1.0 + h, 1.0, 1.0 + h, 1.0];
    let s = series(&y, h);
    let num: f64 = 4.0 * h * h;
    let den: f64 = 2.0 + 2.0 * (1.0 + h).powi(2);
    assert_relative_eq!(moment_beta(&s).unwrap(), num / (h * h * den), max_relative = 1e-14);
    assert!(matches!(
        moment_beta(&series(&[0.0, 0.0, 1.0], h)),
        Err(Error::DegenerateVariance(_))
    ));
}

#[test]
fn alpha_beta_product_identity() {
    let k = KernelModel::gaussian(1.3, 0.8).unwrap();
    let sim = drift_free_sim(&k, 1000, 0.4);
    for r in 0..10u64 {
        let s = as_series(&sim.sample_z(derive_seed(MASTER, &[30, r])));
        let lhs = moment_beta(&s).unwrap() * moment_alpha(&s);
        let rhs = s.increments().iter().map(|d| d * d).sum::<f64>() / (s.n() as f64 * s.h * s.h);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
    }
}

#[test]
fn detrending_at_truth_recovers_the_drift_free_statistic() {
    let k = KernelModel::gaussian(1.0, 1.0).unwrap();
    let d = DriftModel::exp_decay(2.0);
    let scheme = SamplingScheme::from_rule(1000, 0.4).unwrap();
    let sim = ModelSimulator::new(&k, &d, &scheme, MethodPreference::Auto).unwrap();
    for r in 0..5u64 {
        let seed = derive_seed(MASTER, &[31, r]);
        let z = sim.sample_z(seed);
        let x = sim.simulate(seed);
        let a_raw = moment_alpha(&as_series(&z));
        let a_det = moment_alpha(&detrend(&x, &d).unwrap());
        assert_relative_eq!(a_det, a_raw, max_relative = 1e-12);
        assert_eq!(moment_alpha(&detrend(&z, &DriftModel::exp_decay(0.0)).unwrap()), a_raw);
    }
}

#[test]
fn square_moment_root_is_moment_alpha() {
    let g = KernelModel::gaussian(1.0, 1.0).unwrap();
    let sim = drift_free_sim(&KernelModel::gaussian(2.2, 1.0).unwrap(), 500, 0.4);
    for r in 0..5u64 {
        let s = as_series(&sim.sample_z(derive_seed(MASTER, &[32, r])));
        let z = z_estimator(&s, &[MomentFunction::square()], &g, &[0], &[0.4]).unwrap();
        assert!((z.params[0] - moment_alpha(&s)).abs() <= 1e-12 * moment_alpha(&s));
        assert_eq!(z.params[1], 1.0);
    }
}

#[test]
fn exact_moments_at_init_return_init() {
    let s = series(&[1.0, -1.0, 1.0, -1.0, 1.0], 0.1);
    let g = KernelModel::gaussian(1.0, 3.0).unwrap();
    assert_eq!(moment_equations(&s, &[MomentFunction::square()], &g), vec![0.0]);
    let z = z_estimator(&s, &[MomentFunction::square()], &g, &[0], &[1.0]).unwrap();
    assert_eq!(z.params, vec![1.0, 3.0]);
    assert_eq!(z.iterations, 0);
    let q = series(&[3f64.sqrt().sqrt(), -(3f64.sqrt().sqrt()), 3f64.sqrt().sqrt()], 0.1);
    let z = z_estimator(&q, &[MomentFunction::fourth()], &g, &[0], &[1.0]).unwrap();
    assert!((z.params[0] - 1.0).abs() < 1e-12);
}

#[test]
fn fourth_moment_z_estimator_monte_carlo() {
    let truth = KernelModel::gaussian(1.0, 1.0).unwrap();
    let sim = drift_free_sim(&truth, 1000, 0.4);
    let est: Vec<f64> = (0..200u64)
        .map(|r| {
            let s = as_series(&sim.sample_z(derive_seed(MASTER, &[33, r])));
            z_estimator(&s, &[MomentFunction::fourth()], &truth, &[0], &[0.5])
                .unwrap()
                .params[0]
        })
        .collect();
    assert!(
        (mean(&est) - 1.0).abs() < 3.0 * se(&est),
        "alpha {} (se {})",
        mean(&est),
        se(&est)
    );
}

#[test]
fn two_even_moments_cannot_separate_alpha_and_beta() {
    let truth = KernelModel::gaussian(1.0, 1.0).unwrap();
    let s = as_series(&drift_free_sim(&truth, 500, 0.4).sample_z(5));
    let r = z_estimator(
        &s,
        &[MomentFunction::square(), MomentFunction::fourth()],
        &truth,
        &[0, 1],
        &[0.8, 1.2],
    );
    assert!(matches!(r, Err(Error::RootNotFound(_))), "{:?}", r.map(|z| z.params));
}

#[test]
fn custom_moment_function_uses_quadrature() {
    let truth = KernelModel::rational_quadratic(1.0, 1.0, 1.0).unwrap();
    let s = as_series(&drift_free_sim(&truth, 1000, 0.4).sample_z(6));
    let f = MomentFunction::custom("abs", f64::abs);
    let z = z_estimator(&s, &[f], &truth, &[0], &[1.0]).unwrap();
    let m = s.left_values().iter().map(|v| v.abs()).sum::<f64>() / s.n() as f64;
    let closed = std::f64::consts::FRAC_PI_2 * m * m;
    assert!((z.params[0] / closed - 1.0).abs() < 1e-6, "{} vs {closed}", z.params[0]);
}

#[test]
fn g_functional_examples() {
    let c = series(&[0.7; 10], 0.1);
    assert_eq!(g_functional(&c, &GFunctional::SquaredIncrement), 0.0);
    assert_eq!(g_functional(&c, &GFunctional::IncrementTimesSquare), 0.0);
    let k = KernelModel::gaussian(1.5, 2.0).unwrap();
    assert_relative_eq!(
        GFunctional::SquaredIncrement.limit(&k).unwrap(),
        3.0,
        max_relative = 1e-14
    );
    assert_eq!(GFunctional::IncrementTimesSquare.limit(&k).unwrap(), 0.0);
    let sq = GFunctional::custom("sq", |x, y| (y - x) * (y - x));
    assert_relative_eq!(sq.limit(&k).unwrap(), 3.0, max_relative = 1e-6);
    let cube = GFunctional::custom("cube", |x, y| (y - x) * y * y);
    assert!(cube.limit(&k).unwrap().abs() < 1e-8);
    let s = series(&[0.0, 0.1, 0.3], 0.1);
    assert_relative_eq!(
        g_functional(&s, &GFunctional::SquaredIncrement),
        0.05 / 0.02,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        g_functional(&s, &GFunctional::IncrementTimesSquare),
        (0.1 * 0.01 + 0.2 * 0.09) / 0.02,
        max_relative = 1e-14
    );
}

#[test]
fn increment_moment_examples() {
    let g = KernelModel::gaussian(1.0, 1.0).unwrap();
    assert_eq!(increment_moment_limit(&g, 1).unwrap(), 1.0);
    assert_eq!(increment_moment_limit(&g, 2).unwrap(), 3.0);
    assert_eq!(increment_moment_limit(&g, 3).unwrap(), 15.0);
    let rq = KernelModel::rational_quadratic(1.0, 2.0, 1.0).unwrap();
    let d = -common::fd2_at_zero(|t| rq.eval(t), 1e-2);
    assert_relative_eq!(
        increment_moment_limit(&rq, 2).unwrap(),
        3.0 * d * d,
        max_relative = 1e-8
    );
    let z = series(&[0.0; 8], 0.1);
    for kappa in 1..=3 {
        assert_eq!(empirical_increment_moment(&z, kappa).unwrap(), 0.0);
    }
    assert!(empirical_increment_moment(&z, 4).is_err());
    let s = series(&[0.0, 0.1, 0.3], 0.1);
    assert_relative_eq!(
        empirical_increment_moment(&s, 2).unwrap(),
        (1e-4 + 16e-4) / (2.0 * 1e-4),
        max_relative = 1e-12
    );
}

#[test]
fn increments_are_gaussian() {
    let truth = KernelModel::gaussian(1.0, 1.0).unwrap();
    let sim = drift_free_sim(&truth, 3000, 0.4);
    let ratios: Vec<f64> = (0..50u64)
        .map(|r| {
            let s = as_series(&sim.sample_z(derive_seed(MASTER, &[34, r])));
            empirical_increment_moment(&s, 2).unwrap() / empirical_increment_moment(&s, 1).unwrap().powi(2)
        })
        .collect();
    assert!((mean(&ratios) / 3.0 - 1.0).abs() < 0.10, "ratio {}", mean(&ratios));
}

#[test]
fn k4_inversion_of_exact_moments() {
    for (delta, k4, h) in [(1.0, 3.0, 0.05), (2.0, 7.5, 0.01), (0.3, 6.0, 0.1)] {
        let m4 = 3.0 * delta * delta - 0.5 * delta * k4 * h * h;
        assert_relative_eq!(k4_from_moments(delta, m4, h).unwrap(), k4, max_relative = 1e-9);
    }
    assert!(k4_from_moments(0.0, 1.0, 0.1).is_err());
}

#[test]
fn k4_median_over_replications() {
    for (kernel, target) in [
        (KernelModel::rational_quadratic(1.0, 1.0, 1.0).unwrap(), 6.0),
        (KernelModel::gaussian(1.0, 1.0).unwrap(), 3.0),
    ] {
        let sim = drift_free_sim(&kernel, 3000, 0.4);
        let zero = DriftModel::zero();
        let est: Vec<f64> = (0..500u64)
            .map(|r| estimate_k4(&sim.sample_z(derive_seed(MASTER, &[35, r])), &zero).unwrap())
            .collect();
        let m = median(&est);
        assert!((m / target - 1.0).abs() < 0.5, "{kernel}: median {m} vs {target}");
    }
    let h = 0.05;
    let flat = PathSample::from_values(vec![1.5; 101], h).unwrap();
    assert!(matches!(
        estimate_k4(&flat, &DriftModel::zero()),
        Err(Error::DegenerateVariance(_))
    ));
}

#[test]
fn k4_certification_on_a_million_increments() {
    for (kernel, target) in [
        (KernelModel::gaussian(1.0, 1.0).unwrap(), 3.0),
        (KernelModel::rational_quadratic(1.0, 1.0, 1.0).unwrap(), 6.0),
    ] {
        let c = certify(&kernel, 1000, 1000, 0.05, MASTER);
        assert_eq!(c.increments, 1_000_000);
        assert!(
            (c.second_difference / target - 1.0).abs() < 0.05,
            "{kernel}: {}",
            c.second_difference
        );
        assert!(
            (c.inversion / target - 1.0).abs() > 1.0,
            "{kernel}: inversion {}",
            c.inversion
        );
        assert!(
            (c.printed / target - 1.0).abs() > 1.0,
            "{kernel}: printed {}",
            c.printed
        );
    }
}

#[test]
fn long_run_variance() {
    let v: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert_relative_eq!(newey_west_variance(&v, Some(0)).unwrap(), 1.0, max_relative = 1e-12);
    assert!(newey_west_variance(&v, Some(5)).unwrap() < 0.2);
    let blocks: Vec<f64> = (0..2000).map(|i| if (i / 10) % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let v9 = newey_west_variance(&blocks, Some(9)).unwrap();
    assert!((v9 - 3.4).abs() < 0.05, "{v9}");
    assert!(newey_west_variance(&[1.0], None).is_err());
    let s = series(&v, 0.1);
    let lr = moment_long_run_variance(&s, &MomentFunction::square(), Some(3)).unwrap();
    assert!(lr.abs() < 1e-12);
}
