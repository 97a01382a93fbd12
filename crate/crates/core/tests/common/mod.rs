//! Independent oracles shared by the integration tests.
#![allow(dead_code, clippy::excessive_precision)]

/// 15-point Gauss–Kronrod nodes and weights on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = hl * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * hl, ((rk - rg) * hl).abs())
}

/// Adaptive Gauss–Kronrod (G7/K15) quadrature with absolute tolerance.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    let mut stack = vec![(a, b, abs_tol)];
    let mut total = 0.0;
    while let Some((l, r, tol)) = stack.pop() {
        let (v, err) = gk15(&f, l, r);
        if err <= tol || (r - l) < 1e-12 {
            total += v;
        } else {
            let m = 0.5 * (l + r);
            stack.push((l, m, 0.5 * tol));
            stack.push((m, r, 0.5 * tol));
        }
    }
    total
}

/// `∫ α e^{-β|t-s|} (1/(2ε)) e^{-|s|/ε} ds`, split at the kinks `s = 0` and `s = t`.
pub fn mollified_ou_by_quadrature(alpha: f64, beta: f64, eps: f64, t: f64) -> f64 {
    let f = |s: f64| alpha * (-beta * (t - s).abs()).exp() * (-(s.abs()) / eps).exp() / (2.0 * eps);
    let reach = 60.0 * eps.max(1.0 / beta);
    let lo = t.min(0.0);
    let hi = t.max(0.0);
    gauss_kronrod(f, lo - reach, lo, 1e-13)
        + if hi > lo { gauss_kronrod(f, lo, hi, 1e-13) } else { 0.0 }
        + gauss_kronrod(f, hi, hi + reach, 1e-13)
}

/// Richardson extrapolation of `d(h)` over `h, h/2, h/4, …`, assuming an error
/// expansion in the given powers of `h`.
pub fn richardson<D: Fn(f64) -> f64>(d: D, h: f64, powers: &[i32]) -> f64 {
    let mut row: Vec<f64> = (0..=powers.len()).map(|k| d(h / 2f64.powi(k as i32))).collect();
    for &p in powers {
        let r = 2f64.powi(p);
        row = row.windows(2).map(|w| (r * w[1] - w[0]) / (r - 1.0)).collect();
    }
    row[0]
}

/// `K''(0)` of an even function from `2[K(h) - K(0)]/h²`; odd powers of `|h|` are
/// eliminated too, so kernels that are only `C²` at the origin are covered.
pub fn fd2_at_zero<F: Fn(f64) -> f64>(k: F, h: f64) -> f64 {
    let k0 = k(0.0);
    richardson(|s| 2.0 * (k(s) - k0) / (s * s), h, &[1, 2, 3])
}

/// `K''''(0)` of a smooth even function from the five-point fourth difference.
pub fn fd4_at_zero<F: Fn(f64) -> f64>(k: F, h: f64) -> f64 {
    let k0 = k(0.0);
    richardson(|s| (2.0 * k(2.0 * s) - 8.0 * k(s) + 6.0 * k0) / s.powi(4), h, &[2, 4])
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (denominator m - 1).
pub fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

/// Standard error of the mean.
pub fn se(v: &[f64]) -> f64 {
    sd(v) / (v.len() as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

/// Path of `ΔX_i = ξ w(t_{i-1}) h` exactly, with `w(t) = e^{-t}`.
pub fn noise_free_exp_path(xi: f64, n: usize, h: f64) -> Vec<f64> {
    let mut x = vec![0.0; n + 1];
    for i in 1..=n {
        x[i] = x[i - 1] + xi * (-((i - 1) as f64) * h).exp() * h;
    }
    x
}

pub mod k4 {
    use gpdrift::drift::DriftModel;
    use gpdrift::kernels::KernelModel;
    use gpdrift::moments::{estimate_k4, k4_fourth_moment, FourthMomentK4};
    use gpdrift::simulate::{derive_seed, MethodPreference, ModelSimulator, SamplingScheme};

    /// Means of the second-difference estimator and of the two fourth-moment variants
    /// over `paths` drift-free paths of `n` increments with step `h`.
    pub struct Certification {
        pub second_difference: f64,
        pub inversion: f64,
        pub printed: f64,
        pub increments: usize,
    }

    pub fn certify(kernel: &KernelModel, paths: u64, n: usize, h: f64, master: u64) -> Certification {
        let scheme = SamplingScheme::new(n, h).unwrap();
        let zero = DriftModel::zero();
        let sim = ModelSimulator::new(kernel, &zero, &scheme, MethodPreference::Auto).unwrap();
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for r in 0..paths {
            let p = sim.sample_z(derive_seed(master, &[70, r]));
            a += estimate_k4(&p, &zero).unwrap();
            b += k4_fourth_moment(&p, &zero, FourthMomentK4::Inversion).unwrap();
            c += k4_fourth_moment(&p, &zero, FourthMomentK4::Printed).unwrap();
        }
        let m = paths as f64;
        Certification {
            second_difference: a / m,
            inversion: b / m,
            printed: c / m,
            increments: paths as usize * n,
        }
    }
}

pub mod exactness {
    use gpdrift::kernels::KernelModel;
    use gpdrift::simulate::{derive_seed, GpSampler, MethodPreference, SimulationMethod};

    use super::{mean, se};

    /// Per-path average of `Z_i Z_{i+k}` (the mean is known to be zero).
    pub fn raw_lag_products(z: &[f64], maxlag: usize) -> Vec<f64> {
        (0..=maxlag)
            .map(|k| z[..z.len() - k].iter().zip(&z[k..]).map(|(a, b)| a * b).sum::<f64>() / (z.len() - k) as f64)
            .collect()
    }

    /// Largest standardized deviation of the sample mean vector from 0 and of the
    /// sample second-moment matrix from the Gram matrix over `reps` draws of `n + 1` points.
    pub fn exact_law_worst_z(
        k: &KernelModel,
        n: usize,
        h: f64,
        pref: MethodPreference,
        reps: u64,
        master: u64,
    ) -> (SimulationMethod, f64) {
        let points = n + 1;
        let s = GpSampler::new(k, points, h, pref).unwrap();
        let mut sum = vec![0.0; points];
        let mut prod = vec![0.0; points * points];
        for r in 0..reps {
            let z = s.sample(derive_seed(master, &[3, points as u64, r]));
            for i in 0..points {
                sum[i] += z[i];
                for j in 0..=i {
                    prod[i * points + j] += z[i] * z[j];
                }
            }
        }
        let m = reps as f64;
        let grid: Vec<f64> = (0..points).map(|i| i as f64 * h).collect();
        let gram = k.gram_matrix(&grid);
        let mut worst = 0.0f64;
        for i in 0..points {
            worst = worst.max(((sum[i] / m) / (gram[(i, i)] / m).sqrt()).abs());
            for j in 0..=i {
                let g = gram[(i, j)];
                let se_c = ((gram[(i, i)] * gram[(j, j)] + g * g) / m).sqrt();
                worst = worst.max(((prod[i * points + j] / m - g) / se_c).abs());
            }
        }
        (s.method(), worst)
    }

    /// Largest two-sample standardized difference between circulant and Cholesky
    /// lag-product curves up to `maxlag`.
    pub fn method_agreement_worst_z(k: &KernelModel, n: usize, h: f64, reps: u64, maxlag: usize, master: u64) -> f64 {
        let curves = |pref: MethodPreference, stream: u64| -> Vec<Vec<f64>> {
            let s = GpSampler::new(k, n + 1, h, pref).unwrap();
            (0..reps)
                .map(|r| raw_lag_products(&s.sample(derive_seed(master, &[4, stream, r])), maxlag))
                .collect()
        };
        let a = curves(MethodPreference::Circulant, 0);
        let b = curves(MethodPreference::Cholesky, 1);
        (0..=maxlag)
            .map(|lag| {
                let va: Vec<f64> = a.iter().map(|c| c[lag]).collect();
                let vb: Vec<f64> = b.iter().map(|c| c[lag]).collect();
                ((mean(&va) - mean(&vb)) / (se(&va).powi(2) + se(&vb).powi(2)).sqrt()).abs()
            })
            .fold(0.0, f64::max)
    }
}
