//! One-dimensional quadrature used by the drift and moment code.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature on `[a, b]` with a mixed absolute/relative tolerance.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // seed the scale with a coarse composite rule so tiny integrals still get a sane floor
    let coarse = composite_simpson(&f, a, b, 64);
    let scale = coarse.abs().max(whole.abs()).max(f64::MIN_POSITIVE);
    let tol = rel_tol * scale;
    let mut evals = 0usize;
    let v = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut evals)?;
    if !v.is_finite() {
        return Err(Error::Numerical(format!(
            "quadrature on [{a}, {b}] produced a non-finite value"
        )));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite() && flm.is_finite() && frm.is_finite()) {
        return Err(Error::Numerical(format!("non-finite integrand value on [{a}, {b}]")));
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-300 {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || *evals > 5_000_000 {
        return Err(Error::Numerical(format!(
            "adaptive quadrature did not converge on [{a}, {b}] (last correction {delta:e}, tolerance {tol:e})"
        )));
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)?;
    Ok(l + r)
}

/// Fixed composite Simpson rule with `panels` (rounded up to even) sub-intervals.
pub fn composite_simpson<F>(f: &F, a: f64, b: f64, panels: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Gauss–Hermite rule for the weight `exp(-x^2)`: returns `(nodes, weights)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on the orthonormal Hermite recurrence with the usual asymptotic starts.
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[f(Z)]` for `Z ~ N(0, variance)` by `n`-point Gauss–Hermite quadrature.
pub fn gaussian_expectation<F>(f: F, variance: f64, n: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let (x, w) = gauss_hermite(n);
    let s = (2.0 * variance).sqrt();
    let norm = std::f64::consts::PI.sqrt();
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(s * xi)).sum::<f64>() / norm
}

/// `E f(Z)`, `Z ~ N(0, variance)`, by adaptive quadrature on each half line.
///
/// Suited to integrands with a kink at the origin, where Gauss–Hermite converges
/// slowly. Falls back to a 64-node Hermite rule if the adaptive rule fails.
pub fn gaussian_expectation_adaptive<F>(f: F, variance: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let s = variance.sqrt();
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let g = |u: f64| f(s * u) * (-0.5 * u * u).exp() / norm;
    match (
        adaptive_simpson(g, -12.0, 0.0, 1e-12),
        adaptive_simpson(g, 0.0, 12.0, 1e-12),
    ) {
        (Ok(a), Ok(b)) => a + b,
        _ => gaussian_expectation(f, variance, 64),
    }
}
