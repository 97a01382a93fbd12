//! De-trending, moment and Z-estimators for kernel parameters, the fourth-derivative
//! estimator, and the ergodic-limit statistics used as diagnostics.
//!
//! Index convention: sums run over `i = 1..=n` and pair the increment
//! `Δ_i Y = Y_i - Y_{i-1}` with the left value `Y_{i-1}`. The last value `Y_n`
//! therefore never enters a single-time average.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::quad;
use crate::simulate::PathSample;

/// Gauss–Hermite nodes used for user-supplied moment functions.
pub const HERMITE_NODES: usize = 64;

/// `Y_i = X_{t_i} - ∫_0^{t_i} μ_ξ̂(s) ds`, `i = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetrendedSeries {
    pub y: Vec<f64>,
    pub h: f64,
    pub xi_used: Vec<f64>,
}

impl DetrendedSeries {
    /// Series that is already drift-free.
    pub fn new(y: Vec<f64>, h: f64) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a series needs at least 2 values, got {}",
                y.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            y,
            h,
            xi_used: Vec::new(),
        })
    }

    /// Number of increments `n`.
    pub fn n(&self) -> usize {
        self.y.len() - 1
    }

    /// `Y_0, …, Y_{n-1}`.
    pub fn left_values(&self) -> &[f64] {
        &self.y[..self.y.len() - 1]
    }

    pub fn increments(&self) -> Vec<f64> {
        self.y.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Subtracts the integrated drift evaluated at the coefficients carried by `drift`.
pub fn detrend(path: &PathSample, drift: &DriftModel) -> Result<DetrendedSeries> {
    let mut y = Vec::with_capacity(path.values.len());
    for (&t, &x) in path.times.iter().zip(&path.values) {
        y.push(x - drift.integral(t)?);
    }
    let mut s = DetrendedSeries::new(y, path.h)?;
    s.xi_used = drift.xi().to_vec();
    Ok(s)
}

/// `α̂ = (1/n) Σ Y_{i-1}²`.
pub fn moment_alpha(series: &DetrendedSeries) -> f64 {
    let left = series.left_values();
    left.iter().map(|v| v * v).sum::<f64>() / left.len() as f64
}

/// `β̂ = Σ (Δ_i Y)² / (h² Σ Y_{i-1}²)`.
pub fn moment_beta(series: &DetrendedSeries) -> Result<f64> {
    let den: f64 = series.left_values().iter().map(|v| v * v).sum();
    if !(den > 0.0) {
        return Err(Error::DegenerateVariance(
            "sum of squared de-trended values is zero".into(),
        ));
    }
    let num: f64 = series.increments().iter().map(|d| d * d).sum();
    Ok(num / (series.h * series.h * den))
}

/// Moment function `f` in `Φ_n(σ) = (1/n) Σ f(Y_{i-1}) - E f(N(0, K_σ(0)))`.
#[derive(Clone)]
pub enum MomentFunction {
    /// `x^k`, with closed-form Gaussian expectation.
    Power(u32),
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl MomentFunction {
    pub fn square() -> Self {
        MomentFunction::Power(2)
    }

    pub fn fourth() -> Self {
        MomentFunction::Power(4)
    }

    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        MomentFunction::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Parses `x2`, `x4`, `x^k` or `pow<k>`.
    pub fn from_name(name: &str) -> Result<Self> {
        let s = name.trim().to_ascii_lowercase();
        let digits = s
            .strip_prefix("x^")
            .or_else(|| s.strip_prefix("pow"))
            .or_else(|| s.strip_prefix('x'))
            .ok_or_else(|| Error::Config(format!("unknown moment function `{name}`")))?;
        let k: u32 = digits
            .parse()
            .map_err(|_| Error::Config(format!("unknown moment function `{name}`")))?;
        if k == 0 || k > 16 {
            return Err(Error::Config(format!("moment power must be in 1..=16, got {k}")));
        }
        Ok(MomentFunction::Power(k))
    }

    pub fn name(&self) -> String {
        match self {
            MomentFunction::Power(k) => format!("x^{k}"),
            MomentFunction::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MomentFunction::Power(k) => x.powi(*k as i32),
            MomentFunction::Custom { f, .. } => f(x),
        }
    }

    /// `∫ f(z) φ_v(z) dz` for the centred normal density with variance `v`.
    pub fn gaussian_mean(&self, variance: f64) -> f64 {
        match self {
            MomentFunction::Power(k) if k % 2 == 1 => 0.0,
            MomentFunction::Power(k) => double_factorial(k - 1) * variance.powi((*k / 2) as i32),
            MomentFunction::Custom { f, .. } => quad::gaussian_expectation_adaptive(|z| f(z), variance),
        }
    }
}

impl fmt::Debug for MomentFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MomentFunction({})", self.name())
    }
}

fn double_factorial(k: u32) -> f64 {
    (1..=k).rev().step_by(2).map(f64::from).product()
}

/// Root of `Φ_n` over the free components of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZEstimate {
    /// Full parameter vector of the kernel family at the root.
    pub params: Vec<f64>,
    pub free: Vec<usize>,
    pub iterations: usize,
    /// `|Φ_n|_∞` at the returned point.
    pub residual: f64,
}

/// Evaluates `Φ_n(σ)` for a full kernel parameter vector.
pub fn moment_equations(series: &DetrendedSeries, fs: &[MomentFunction], kernel: &KernelModel) -> Vec<f64> {
    let left = series.left_values();
    let k0 = kernel.eval(0.0);
    fs.iter()
        .map(|f| {
            let emp = left.iter().map(|&y| f.eval(y)).sum::<f64>() / left.len() as f64;
            emp - f.gaussian_mean(k0)
        })
        .collect()
}

/// Solves `Φ_n(σ) = 0` for the components `free` of `template`'s parameters,
/// starting from `init` (one value per free component).
///
/// One equation uses a safeguarded secant iteration inside an expanding bracket;
/// several use damped Newton steps with a finite-difference Jacobian.
pub fn z_estimator(
    series: &DetrendedSeries,
    fs: &[MomentFunction],
    template: &KernelModel,
    free: &[usize],
    init: &[f64],
) -> Result<ZEstimate> {
    let q = free.len();
    if q == 0 || fs.len() != q || init.len() != q {
        return Err(Error::InvalidInput(format!(
            "z-estimation needs as many moment functions as free parameters and initial values (functions {}, free {}, init {})",
            fs.len(),
            q,
            init.len()
        )));
    }
    let np = template.params().len();
    if let Some(&j) = free.iter().find(|&&j| j >= np) {
        return Err(Error::InvalidInput(format!(
            "free index {j} out of range for {}",
            template.family()
        )));
    }
    let build = |s: &[f64]| -> Result<KernelModel> {
        let mut p = template.params().to_vec();
        for (&j, &v) in free.iter().zip(s) {
            p[j] = v;
        }
        template.with_params(p)
    };
    let phi = |s: &[f64]| -> Result<Vec<f64>> {
        let k = build(s)?;
        let v = moment_equations(series, fs, &k);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("moment equations not finite at {s:?}")));
        }
        Ok(v)
    };
    let finish = |s: Vec<f64>, iterations: usize| -> Result<ZEstimate> {
        let residual = phi(&s)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(ZEstimate {
            params: build(&s)?.params().to_vec(),
            free: free.to_vec(),
            iterations,
            residual,
        })
    };
    let f0 = phi(init)?;
    if f0.iter().all(|&v| v == 0.0) {
        return finish(init.to_vec(), 0);
    }
    if q == 1 {
        let (root, it) = scalar_root(|x| phi(&[x]).map(|v| v[0]), init[0], f0[0])?;
        return finish(vec![root], it);
    }
    let (root, it) = damped_newton(&phi, init, f0)?;
    finish(root, it)
}

/// Secant steps safeguarded by bisection, on a bracket found by geometric expansion
/// around a positive starting value.
fn scalar_root<F>(f: F, x0: f64, f0: f64) -> Result<(f64, usize)>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(x0 > 0.0) {
        return Err(Error::InvalidInput(format!("initial value must be positive, got {x0}")));
    }
    let mut lo = (x0, f0);
    let mut hi = (x0, f0);
    let mut bracket = None;
    let mut tried = Vec::new();
    for k in 1..=60 {
        let up = x0 * 2f64.powi(k);
        if let Ok(v) = f(up) {
            tried.push((up, v));
            if v.signum() != hi.1.signum() || v == 0.0 {
                bracket = Some(((hi.0, hi.1), (up, v)));
                break;
            }
            hi = (up, v);
        }
        let down = x0 * 0.5f64.powi(k);
        if let Ok(v) = f(down) {
            tried.push((down, v));
            if v.signum() != lo.1.signum() || v == 0.0 {
                bracket = Some(((down, v), (lo.0, lo.1)));
                break;
            }
            lo = (down, v);
        }
    }
    let ((mut a, mut fa), (mut b, mut fb)) = bracket.ok_or_else(|| {
        Error::RootNotFound(format!(
            "no sign change of the moment equation on [{:e}, {:e}] (values {:e} .. {:e})",
            lo.0, hi.0, lo.1, hi.1
        ))
    })?;
    if fa == 0.0 {
        return Ok((a, 0));
    }
    if fb == 0.0 {
        return Ok((b, 0));
    }
    let mut prev_width = f64::INFINITY;
    for it in 1..=200 {
        let width = b - a;
        let mut x = b - fb * (b - a) / (fb - fa);
        if !(x > a && x < b) || width > 0.5 * prev_width {
            x = 0.5 * (a + b);
        }
        prev_width = width;
        let fx = f(x)?;
        if fx == 0.0 || width <= 1e-15 * x.abs().max(1e-300) {
            return Ok((x, it));
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if (b - a) <= 2e-15 * b.abs() {
            let best = if fa.abs() < fb.abs() { a } else { b };
            return Ok((best, it));
        }
    }
    Err(Error::RootNotFound(format!(
        "bracketed root search on [{a:e}, {b:e}] did not converge"
    )))
}

fn damped_newton<F>(phi: &F, init: &[f64], f0: Vec<f64>) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let q = init.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = init.to_vec();
    let mut fx = f0;
    for it in 1..=200 {
        let mut jac = DMatrix::zeros(q, q);
        for j in 0..q {
            let step = 1e-6 * x[j].abs().max(1e-3);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let fp = phi(&xp)?;
            let fm = phi(&xm)?;
            for i in 0..q {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        let svd = jac.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::RootNotFound(format!(
                "moment Jacobian is singular at {x:?} (singular values {:?}); the moment functions do not identify the free parameters",
                svd.singular_values.as_slice()
            )));
        }
        let rhs = DVector::from_column_slice(&fx);
        let dx = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::RootNotFound(format!("singular Newton system at {x:?}")))?;
        let f_norm = norm(&fx);
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-10 {
            let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - lambda * d).collect();
            if let Ok(fc) = phi(&cand) {
                if norm(&fc) < (1.0 - 1e-4 * lambda) * f_norm {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let (cand, fc) = accepted
            .ok_or_else(|| Error::RootNotFound(format!("damped Newton stalled at {x:?} with |Φ| = {f_norm:e}")))?;
        let step = x
            .iter()
            .zip(&cand)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / a.abs().max(1e-12)));
        x = cand;
        fx = fc;
        if step < 1e-13 || norm(&fx) == 0.0 {
            return Ok((x, it));
        }
    }
    Err(Error::RootNotFound(format!(
        "damped Newton did not converge from {init:?}"
    )))
}

/// Two-argument statistic `G(Y_{i-1}, Y_i)` averaged as `(1/(n h²)) Σ G`.
#[derive(Clone)]
pub enum GFunctional {
    /// `(y - x)²`.
    SquaredIncrement,
    /// `(y - x) y²`.
    IncrementTimesSquare,
    Custom {
        name: String,
        g: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    },
}

impl GFunctional {
    pub fn custom<F>(name: impl Into<String>, g: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        GFunctional::Custom {
            name: name.into(),
            g: Arc::new(g),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "sq_increment" | "(y-x)^2" => Ok(GFunctional::SquaredIncrement),
            "increment_sq" | "(y-x)y^2" => Ok(GFunctional::IncrementTimesSquare),
            other => Err(Error::Config(format!("unknown functional `{other}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            GFunctional::SquaredIncrement => "(y-x)^2".into(),
            GFunctional::IncrementTimesSquare => "(y-x)y^2".into(),
            GFunctional::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            GFunctional::SquaredIncrement => (y - x) * (y - x),
            GFunctional::IncrementTimesSquare => (y - x) * y * y,
            GFunctional::Custom { g, .. } => g(x, y),
        }
    }

    /// Ergodic limit `(K''(0) / (2 K(0))) E[∂_y G(z, z) z - ∂_y² G(z, z) K(0)]`,
    /// `z ~ N(0, K(0))`.
    ///
    /// Built-ins use their exact derivatives; custom functionals use central
    /// differences in `y` and Gauss–Hermite quadrature.
    pub fn limit(&self, kernel: &KernelModel) -> Result<f64> {
        let k0 = kernel.eval(0.0);
        let k2 = kernel.d2_at_zero()?;
        let scale = k2 / (2.0 * k0);
        let expectation = match self {
            // ∂_y G(z,z) = 0, ∂_y² G = 2
            GFunctional::SquaredIncrement => -2.0 * k0,
            // ∂_y G(z,z) = z², ∂_y² G(z,z) = 4z: odd integrand
            GFunctional::IncrementTimesSquare => 0.0,
            GFunctional::Custom { g, .. } => {
                let integrand = |z: f64| {
                    let e = 1e-4 * z.abs().max(1.0);
                    let gp = g(z, z + e);
                    let g0 = g(z, z);
                    let gm = g(z, z - e);
                    let d1 = (gp - gm) / (2.0 * e);
                    let d2 = (gp - 2.0 * g0 + gm) / (e * e);
                    d1 * z - d2 * k0
                };
                quad::gaussian_expectation(integrand, k0, HERMITE_NODES)
            }
        };
        Ok(scale * expectation)
    }
}

impl fmt::Debug for GFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GFunctional({})", self.name())
    }
}

/// `(1/(n h²)) Σ_{i=1}^n G(Y_{i-1}, Y_i)`.
pub fn g_functional(series: &DetrendedSeries, g: &GFunctional) -> f64 {
    let n = series.n() as f64;
    let s: f64 = series.y.windows(2).map(|w| g.eval(w[0], w[1])).sum();
    s / (n * series.h * series.h)
}

/// Drift residuals `Δ_i X - μ_ξ(t_{i-1}) h`, `i = 1..=n`.
pub fn drift_residuals(path: &PathSample, drift: &DriftModel) -> Vec<f64> {
    let h = path.h;
    path.values
        .windows(2)
        .zip(&path.times)
        .map(|(w, &t)| w[1] - w[0] - drift.eval(t) * h)
        .collect()
}

/// `δ̂ = (1/(n h²)) Σ r_i²` and `m̂₄ = (1/(n h⁴)) Σ r_i⁴` of the drift residuals.
pub fn residual_moments(path: &PathSample, drift: &DriftModel) -> (f64, f64) {
    let r = drift_residuals(path, drift);
    let n = r.len() as f64;
    let h2 = path.h * path.h;
    let m2 = r.iter().map(|v| v * v).sum::<f64>() / (n * h2);
    let m4 = r.iter().map(|v| v.powi(4)).sum::<f64>() / (n * h2 * h2);
    (m2, m4)
}

/// Estimate of `∂_t⁴ K(0)` from squared second differences of the drift residuals,
/// `(1/((n-1) h⁴)) Σ (r_{i+1} - r_i)²`, whose mean is `6K(0) - 8K(h) + 2K(2h) = ∂⁴K(0) h⁴ + O(h⁶)`.
///
/// `drift` carries the fitted coefficients `ξ̂`.
pub fn estimate_k4(path: &PathSample, drift: &DriftModel) -> Result<f64> {
    let r = drift_residuals(path, drift);
    let (delta, _) = residual_moments(path, drift);
    if !(delta > 0.0) {
        return Err(Error::DegenerateVariance(format!(
            "residual curvature estimate is {delta:e}"
        )));
    }
    let h4 = path.h.powi(4);
    let m = r.len() - 1;
    let s: f64 = r.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(s / (m as f64 * h4))
}

/// Inverts `m₄ = 3δ² - ½ δ K4 h²` for `K4`: `2(3δ² - m₄) / (δ h²)`.
pub fn k4_from_moments(delta: f64, m4: f64, h: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::DegenerateVariance(format!(
            "curvature must be positive, got {delta:e}"
        )));
    }
    Ok(2.0 * (3.0 * delta * delta - m4) / (delta * h * h))
}

/// Fourth-moment variants of the `K4` estimator, kept for comparison with
/// [`estimate_k4`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourthMomentK4 {
    /// [`k4_from_moments`] applied to the residual moments.
    Inversion,
    /// `(1/h²) {3δ̂ - m̂₄/δ̂}`.
    Printed,
}

/// `K4` from the residual second and fourth moments. Both variants tend to zero for
/// Gaussian increments because `m̂₄ → 3δ̂²` with the same `δ̂`.
pub fn k4_fourth_moment(path: &PathSample, drift: &DriftModel, variant: FourthMomentK4) -> Result<f64> {
    let (delta, m4) = residual_moments(path, drift);
    match variant {
        FourthMomentK4::Inversion => k4_from_moments(delta, m4, path.h),
        FourthMomentK4::Printed => {
            if !(delta > 0.0) {
                return Err(Error::DegenerateVariance(format!(
                    "curvature must be positive, got {delta:e}"
                )));
            }
            Ok((3.0 * delta - m4 / delta) / (path.h * path.h))
        }
    }
}

/// `(1/(n h^{2κ})) Σ (Δ_i Y)^{2κ}`.
pub fn empirical_increment_moment(series: &DetrendedSeries, kappa: u32) -> Result<f64> {
    if !(1..=3).contains(&kappa) {
        return Err(Error::InvalidInput(format!("kappa must be 1, 2 or 3, got {kappa}")));
    }
    let p = 2 * kappa as i32;
    let s: f64 = series.increments().iter().map(|d| d.powi(p)).sum();
    Ok(s / (series.n() as f64 * series.h.powi(p)))
}

/// `((2κ)! / (2^κ κ!)) (-∂²K(0))^κ`.
pub fn increment_moment_limit(kernel: &KernelModel, kappa: u32) -> Result<f64> {
    if !(1..=3).contains(&kappa) {
        return Err(Error::InvalidInput(format!("kappa must be 1, 2 or 3, got {kappa}")));
    }
    let delta = -kernel.d2_at_zero()?;
    Ok(double_factorial(2 * kappa - 1) * delta.powi(kappa as i32))
}

/// Bartlett-weighted (Newey–West) long-run variance of a scalar series.
///
/// This is a plug-in approximation; it is not an exact value of the limiting
/// variance. The default bandwidth is `⌊4 (n/100)^{2/9}⌋`.
pub fn newey_west_variance(values: &[f64], bandwidth: Option<usize>) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidInput("long-run variance needs at least 2 values".into()));
    }
    let lags = bandwidth
        .unwrap_or_else(|| (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize)
        .min(n - 1);
    let mean = values.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let gamma = |k: usize| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let mut s = gamma(0);
    for k in 1..=lags {
        let w = 1.0 - k as f64 / (lags as f64 + 1.0);
        s += 2.0 * w * gamma(k);
    }
    Ok(s)
}

/// Newey–West approximation to `n Var(Φ_n(σ))` for one moment function.
pub fn moment_long_run_variance(series: &DetrendedSeries, f: &MomentFunction, bandwidth: Option<usize>) -> Result<f64> {
    let v: Vec<f64> = series.left_values().iter().map(|&y| f.eval(y)).collect();
    newey_west_variance(&v, bandwidth)
}
