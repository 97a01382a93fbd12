//! The local-Gauss contrast, its closed-form and numerical minimizers, and the
//! estimation pipelines for the Gaussian, Ornstein–Uhlenbeck and rational
//! quadratic kernel models.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticInfo;
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelModel};
use crate::moments::{self, DetrendedSeries};
use crate::optim::{self, Bounds, NelderMeadOptions};
use crate::simulate::PathSample;

/// Normalizing rate attached to an estimated component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rate {
    /// `h^{-1/2}`, for drift parameters.
    #[serde(rename = "h^-1/2")]
    InvSqrtStep,
    /// `n^{1/2}`, for kernel parameters.
    #[serde(rename = "n^1/2")]
    SqrtN,
}

impl Rate {
    pub fn factor(self, n: usize, h: f64) -> f64 {
        match self {
            Rate::InvSqrtStep => h.powf(-0.5),
            Rate::SqrtN => (n as f64).sqrt(),
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rate::InvSqrtStep => "h^-1/2",
            Rate::SqrtN => "n^1/2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    pub rate: Rate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

/// A component the pipeline could not estimate on this sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unresolved {
    pub name: String,
    pub reason: String,
    #[serde(skip)]
    pub error: Option<Error>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub method: String,
    pub n: usize,
    pub h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Estimates with rate labels, optional standard errors and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimates: Vec<ParamEstimate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unresolved: Vec<Unresolved>,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticInfo>,
}

impl EstimateReport {
    pub fn new(method: impl Into<String>, n: usize, h: f64) -> Self {
        Self {
            estimates: Vec::new(),
            unresolved: Vec::new(),
            diagnostics: Diagnostics {
                method: method.into(),
                n,
                h,
                ..Default::default()
            },
            asymptotics: None,
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, rate: Rate) {
        self.estimates.push(ParamEstimate {
            name: name.into(),
            value,
            rate,
            std_error: None,
        });
    }

    pub fn mark_unresolved(&mut self, name: impl Into<String>, error: Error) {
        self.unresolved.push(Unresolved {
            name: name.into(),
            reason: error.to_string(),
            error: Some(error),
        });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.estimates.iter().find(|e| e.name == name).map(|e| e.value)
    }

    /// The estimate, or the error that prevented it.
    pub fn value(&self, name: &str) -> Result<f64> {
        if let Some(v) = self.get(name) {
            return Ok(v);
        }
        match self.unresolved.iter().find(|u| u.name == name) {
            Some(u) => Err(u.error.clone().unwrap_or_else(|| Error::Numerical(u.reason.clone()))),
            None => Err(Error::InvalidInput(format!("no estimate named `{name}`"))),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.estimates.iter().map(|e| e.name.as_str()).collect()
    }
}

/// Drift coefficient names: `xi` for one profile, `xi_1, …, xi_p` otherwise.
pub fn drift_param_names(p: usize) -> Vec<String> {
    if p == 1 {
        vec!["xi".to_string()]
    } else {
        (1..=p).map(|k| format!("xi_{k}")).collect()
    }
}

/// `(1/n) Σ (Δ_i X - μ_ξ(t_{i-1}) h)² / v + log(v / h²)` with `v` the increment variance.
fn contrast_from_variance(path: &PathSample, drift: &DriftModel, v: f64) -> f64 {
    let h = path.h;
    let n = path.n() as f64;
    let ss: f64 = path
        .values
        .windows(2)
        .zip(&path.times)
        .map(|(w, &t)| {
            let r = w[1] - w[0] - drift.eval(t) * h;
            r * r
        })
        .sum();
    ss / (n * v) + (v / (h * h)).ln()
}

/// Local-Gauss contrast at the parameters carried by `drift` and `kernel`:
/// `(1/n) Σ (Δ_i X - μ_ξ(t_{i-1}) h)² / (2[K(0) - K(h)]) + log(2 h^{-2} [K(0) - K(h)])`.
pub fn local_gauss_contrast(path: &PathSample, drift: &DriftModel, kernel: &KernelModel) -> Result<f64> {
    let v = kernel.local_variance(path.h)?;
    Ok(contrast_from_variance(path, drift, v))
}

/// Which curvature estimate is reported for the leading-order variance `c δ h²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureConvention {
    /// `δ̂ = (1/(n h²)) Σ r_i²`, the moment-matching estimate of `-∂²K(0)`.
    #[default]
    MomentMatched,
    /// `δ̂ = (1/(2 n h²)) Σ r_i²`.
    HalfVariant,
}

impl CurvatureConvention {
    /// `c` in the variance `c δ h²`.
    pub fn factor(self) -> f64 {
        match self {
            CurvatureConvention::MomentMatched => 1.0,
            CurvatureConvention::HalfVariant => 2.0,
        }
    }
}

/// Increment-variance parameterization used by [`ContrastModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceModel {
    /// `2[K_σ(0) - K_σ(h)]` with the components `free` of `template` estimated.
    Exact { template: KernelModel, free: Vec<usize> },
    /// `c · s · h²` with a single curvature parameter `s` named `name`.
    LeadingOrder {
        name: String,
        convention: CurvatureConvention,
    },
}

/// Drift family plus variance parameterization; `θ = (ξ, σ_free)`.
#[derive(Debug, Clone)]
pub struct ContrastModel {
    pub drift: DriftModel,
    pub variance: VarianceModel,
}

impl ContrastModel {
    /// `(ξ, γ)` with `γ = αβ`, the Gaussian-kernel contrast to leading order.
    pub fn gaussian_curvature(drift: &DriftModel) -> Self {
        Self {
            drift: drift.clone(),
            variance: VarianceModel::LeadingOrder {
                name: "gamma".into(),
                convention: CurvatureConvention::MomentMatched,
            },
        }
    }

    /// `(ξ, δ)` with `δ = αβ²`, the rational quadratic contrast to leading order.
    pub fn rq_curvature(drift: &DriftModel, convention: CurvatureConvention) -> Self {
        Self {
            drift: drift.clone(),
            variance: VarianceModel::LeadingOrder {
                name: "delta".into(),
                convention,
            },
        }
    }

    /// Exact variance of `template`'s family with the listed components free.
    pub fn kernel(drift: &DriftModel, template: &KernelModel, free: &[usize]) -> Result<Self> {
        let np = template.params().len();
        if free.is_empty() || free.iter().any(|&j| j >= np) {
            return Err(Error::InvalidInput(format!(
                "free kernel components {free:?} are invalid for {}",
                template.family()
            )));
        }
        Ok(Self {
            drift: drift.clone(),
            variance: VarianceModel::Exact {
                template: template.clone(),
                free: free.to_vec(),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim() + self.sigma_names().len()
    }

    pub fn sigma_names(&self) -> Vec<String> {
        match &self.variance {
            VarianceModel::Exact { template, free } => free
                .iter()
                .map(|&j| template.family().param_names()[j].to_string())
                .collect(),
            VarianceModel::LeadingOrder { name, .. } => vec![name.clone()],
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut v = drift_param_names(self.drift.dim());
        v.extend(self.sigma_names());
        v
    }

    /// Drift at `θ_ξ` and the kernel at `θ_σ` (exact variance only).
    pub fn split(&self, theta: &[f64]) -> Result<(DriftModel, Option<KernelModel>)> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "parameter vector has length {}, expected {}",
                theta.len(),
                self.dim()
            )));
        }
        let p = self.drift.dim();
        let drift = self.drift.with_xi(theta[..p].to_vec())?;
        let kernel = match &self.variance {
            VarianceModel::Exact { template, free } => {
                let mut params = template.params().to_vec();
                for (&j, &v) in free.iter().zip(&theta[p..]) {
                    params[j] = v;
                }
                Some(template.with_params(params)?)
            }
            VarianceModel::LeadingOrder { .. } => None,
        };
        Ok((drift, kernel))
    }

    /// Increment variance implied by `θ`.
    pub fn increment_variance(&self, theta: &[f64], h: f64) -> Result<f64> {
        let (_, kernel) = self.split(theta)?;
        match (&self.variance, kernel) {
            (_, Some(k)) => k.local_variance(h),
            (VarianceModel::LeadingOrder { convention, .. }, None) => {
                let s = theta[self.drift.dim()];
                let v = convention.factor() * s * h * h;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::DegenerateVariance(format!(
                        "curvature parameter {s:e} gives variance {v:e}"
                    )));
                }
                Ok(v)
            }
            (VarianceModel::Exact { .. }, None) => unreachable!("exact model always yields a kernel"),
        }
    }

    /// `ℓ_n(θ)`.
    pub fn evaluate(&self, path: &PathSample, theta: &[f64]) -> Result<f64> {
        let v = self.increment_variance(theta, path.h)?;
        let (drift, _) = self.split(theta)?;
        Ok(contrast_from_variance(path, &drift, v))
    }

    /// Closed-form drift estimate followed by moment-based kernel pilots.
    pub fn pilot(&self, path: &PathSample) -> Result<Vec<f64>> {
        let xi = least_squares_drift(path, &self.drift)?;
        let fitted = self.drift.with_xi(xi.clone())?;
        let curvature = curvature_estimate(path, &fitted, CurvatureConvention::MomentMatched);
        let mut theta = xi;
        match &self.variance {
            VarianceModel::LeadingOrder { convention, .. } => {
                theta.push(curvature / convention.factor());
            }
            VarianceModel::Exact { template, free } => {
                let series = moments::detrend(path, &fitted)?;
                let guess = kernel_pilot(template, moments::moment_alpha(&series), curvature, path);
                theta.extend(free.iter().map(|&j| guess[j]));
            }
        }
        Ok(theta)
    }
}

/// Moment-based starting values for a full kernel parameter vector, falling back to
/// the template's values wherever the inversion is not available.
fn kernel_pilot(template: &KernelModel, alpha: f64, curvature: f64, path: &PathSample) -> Vec<f64> {
    let mut p = template.params().to_vec();
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if ok(alpha) {
        p[0] = alpha;
    }
    let a = p[0];
    let beta = match template.family() {
        KernelFamily::Gaussian => curvature / a,
        KernelFamily::RationalQuadratic => (curvature / a).sqrt(),
        KernelFamily::Matern => {
            let nu = p[2];
            (curvature * (nu - 1.0) / (a * nu)).sqrt()
        }
        KernelFamily::MollifiedOU => {
            let e = p[2];
            curvature * e / (a - curvature * e * e)
        }
        KernelFamily::ExponentialOU => {
            let s: f64 = path.increments().iter().map(|d| d * d).sum();
            s / (2.0 * a * path.n() as f64 * path.h)
        }
    };
    if ok(beta)
        && template
            .with_params({
                let mut q = p.clone();
                q[1] = beta;
                q
            })
            .is_ok()
    {
        p[1] = beta;
    }
    p
}

/// Closed-form least-squares drift `ξ̂ = (Σ w w^T)^{-1} Σ w Δ_i X / h`, with `w = w(t_{i-1})`.
///
/// For one profile this is `Σ w Δ_i X / (h Σ w²)`.
pub fn least_squares_drift(path: &PathSample, drift: &DriftModel) -> Result<Vec<f64>> {
    let p = drift.dim();
    let h = path.h;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for (w, &t) in path.values.windows(2).zip(&path.times) {
        let dx = w[1] - w[0];
        let g = drift.grad_xi(t);
        for j in 0..p {
            rhs[j] += g[j] * dx;
            for k in 0..p {
                gram[(j, k)] += g[j] * g[k];
            }
        }
    }
    if p == 1 {
        if !(gram[(0, 0)] > 0.0) {
            return Err(Error::UnidentifiableDrift(
                "profile vanishes on the grid (sum of w^2 is zero)".into(),
            ));
        }
        return Ok(vec![rhs[0] / (h * gram[(0, 0)])]);
    }
    let scale = gram.diagonal().max();
    let svd = gram.clone().svd(false, false);
    if !(scale > 0.0) || svd.singular_values.min() <= 1e-12 * scale {
        return Err(Error::UnidentifiableDrift(format!(
            "profile Gram matrix is singular (singular values {:?})",
            svd.singular_values.as_slice()
        )));
    }
    let sol = gram
        .cholesky()
        .ok_or_else(|| Error::UnidentifiableDrift("profile Gram matrix is not positive definite".into()))?
        .solve(&rhs);
    Ok(sol.iter().map(|v| v / h).collect())
}

/// `(1/(c n h²)) Σ (Δ_i X - μ_ξ(t_{i-1}) h)²` at the coefficients carried by `drift`.
pub fn curvature_estimate(path: &PathSample, drift: &DriftModel, convention: CurvatureConvention) -> f64 {
    let r = moments::drift_residuals(path, drift);
    let h2 = path.h * path.h;
    r.iter().map(|v| v * v).sum::<f64>() / (convention.factor() * r.len() as f64 * h2)
}

/// Closed-form `(ξ̂, γ̂)` of the Gaussian-kernel model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianKernelFit {
    pub xi: Vec<f64>,
    /// Estimate of `αβ = -∂²K(0)`.
    pub gamma: f64,
}

pub fn estimate_gaussian_kernel_model(path: &PathSample, drift: &DriftModel) -> Result<GaussianKernelFit> {
    let xi = least_squares_drift(path, drift)?;
    let fitted = drift.with_xi(xi.clone())?;
    let gamma = curvature_estimate(path, &fitted, CurvatureConvention::MomentMatched);
    Ok(GaussianKernelFit { xi, gamma })
}

/// Gaussian-kernel pipeline: `ξ̂`, `γ̂`, then `α̂` and `β̂ = γ̂/α̂` from the de-trended series.
pub fn gaussian_estimate(path: &PathSample, drift: &DriftModel) -> Result<EstimateReport> {
    let fit = estimate_gaussian_kernel_model(path, drift)?;
    let fitted = drift.with_xi(fit.xi.clone())?;
    let series = moments::detrend(path, &fitted)?;
    let alpha = moments::moment_alpha(&series);
    let mut report = EstimateReport::new("gaussian_closed_form", path.n(), path.h);
    for (name, v) in drift_param_names(fit.xi.len()).into_iter().zip(&fit.xi) {
        report.push(name, *v, Rate::InvSqrtStep);
    }
    report.push("gamma", fit.gamma, Rate::SqrtN);
    report.push("alpha", alpha, Rate::SqrtN);
    if alpha > 0.0 {
        report.push("beta", fit.gamma / alpha, Rate::SqrtN);
    } else {
        report.mark_unresolved(
            "beta",
            Error::DegenerateVariance("de-trended series is identically zero".into()),
        );
    }
    report.diagnostics.contrast =
        Some(ContrastModel::gaussian_curvature(drift).evaluate(path, &[fit.xi.clone(), vec![fit.gamma]].concat())?);
    Ok(report)
}

/// Result of [`minimize_contrast`].
pub struct ContrastFit {
    pub theta: Vec<f64>,
    pub report: EstimateReport,
}

/// Default box: drift coefficients free, kernel or curvature parameters in `[1e-12, 1e12]`.
pub fn default_bounds(model: &ContrastModel) -> Bounds {
    let p = model.drift.dim();
    let q = model.dim() - p;
    let mut lo = vec![f64::NEG_INFINITY; p];
    let mut hi = vec![f64::INFINITY; p];
    lo.extend(std::iter::repeat_n(1e-12, q));
    hi.extend(std::iter::repeat_n(1e12, q));
    Bounds { lo, hi }
}

/// Minimizes `ℓ_n(θ)` over a box by Nelder–Mead, starting from `init` or the moment pilot.
///
/// Points outside the parameter domain count as `+∞`. Non-convergence is reported
/// in the diagnostics; a NaN contrast is an error.
pub fn minimize_contrast(
    path: &PathSample,
    model: &ContrastModel,
    init: Option<&[f64]>,
    bounds: Option<&Bounds>,
    opts: &NelderMeadOptions,
) -> Result<ContrastFit> {
    let start = match init {
        Some(x) => x.to_vec(),
        None => model.pilot(path)?,
    };
    let default = default_bounds(model);
    let bounds = bounds.unwrap_or(&default);
    let mut start = start;
    bounds.project(&mut start);
    let objective = |theta: &[f64]| -> Result<f64> {
        match model.evaluate(path, theta) {
            Ok(v) => Ok(v),
            Err(Error::ParameterDomain(_)) | Err(Error::DegenerateVariance(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let m = optim::nelder_mead(objective, &start, bounds, opts)?;
    let mut report = EstimateReport::new("local_gauss_contrast_nelder_mead", path.n(), path.h);
    let p = model.drift.dim();
    for (i, (name, v)) in model.param_names().into_iter().zip(&m.x).enumerate() {
        let rate = if i < p { Rate::InvSqrtStep } else { Rate::SqrtN };
        report.push(name, *v, rate);
    }
    report.diagnostics.contrast = Some(m.value);
    report.diagnostics.iterations = Some(m.iterations);
    report.diagnostics.converged = Some(m.converged);
    if !m.converged {
        report
            .diagnostics
            .notes
            .push(format!("simplex did not converge within {} iterations", opts.max_iter));
    }
    Ok(ContrastFit { theta: m.x, report })
}

/// Scaling of the Ornstein–Uhlenbeck `β` estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuScaling {
    /// Matches `E[(Δ_i X)²] ≈ 2αβh` for the OU kernel and `αβh²/ε` for its mollified version.
    #[default]
    Consistent,
    /// Half of [`OuScaling::Consistent`].
    Printed,
}

impl OuScaling {
    fn divisor(self) -> f64 {
        match self {
            OuScaling::Consistent => 1.0,
            OuScaling::Printed => 2.0,
        }
    }
}

fn sum_sq_increments(path: &PathSample) -> f64 {
    path.increments().iter().map(|d| d * d).sum()
}

/// Mollified-kernel estimator `β̂^{(ε)} = ε Σ (Δ_i X)² / (α̂ n h²)` (consistent scaling),
/// or half of it with [`OuScaling::Printed`].
pub fn mollified_ou_beta(path: &PathSample, alpha_hat: f64, epsilon: f64, scaling: OuScaling) -> Result<f64> {
    if !(alpha_hat > 0.0 && alpha_hat.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "alpha estimate must be positive, got {alpha_hat}"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = path.n() as f64;
    let h = path.h;
    Ok(epsilon * sum_sq_increments(path) / (scaling.divisor() * alpha_hat * n * h * h))
}

/// SDE benchmark `β̂ = Σ (Δ_i X)² / (2 α n h)` (consistent scaling), or half of it.
pub fn sde_benchmark_beta(path: &PathSample, alpha: f64, scaling: OuScaling) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::ParameterDomain(format!("alpha must be positive, got {alpha}")));
    }
    let n = path.n() as f64;
    Ok(sum_sq_increments(path) / (2.0 * scaling.divisor() * alpha * n * path.h))
}

/// OU pipeline: `ξ̂` (if the drift is not zero), `α̂` from the de-trended series unless
/// `alpha_known` is given, and `β̂^{(ε)}` with `ε = h/2` by default.
pub fn ou_estimate(
    path: &PathSample,
    drift: &DriftModel,
    epsilon: Option<f64>,
    alpha_known: Option<f64>,
    scaling: OuScaling,
) -> Result<EstimateReport> {
    let mut report = EstimateReport::new("mollified_ou", path.n(), path.h);
    let fitted = if drift.is_zero() {
        drift.clone()
    } else {
        let xi = least_squares_drift(path, drift)?;
        for (name, v) in drift_param_names(xi.len()).into_iter().zip(&xi) {
            report.push(name, *v, Rate::InvSqrtStep);
        }
        drift.with_xi(xi)?
    };
    let alpha = match alpha_known {
        Some(a) => a,
        None => {
            let a = moments::moment_alpha(&moments::detrend(path, &fitted)?);
            report.push("alpha", a, Rate::SqrtN);
            a
        }
    };
    let eps = epsilon.unwrap_or(0.5 * path.h);
    let beta = mollified_ou_beta(path, alpha, eps, scaling)?;
    report.push("beta", beta, Rate::SqrtN);
    report.diagnostics.notes.push(format!("epsilon = {eps}"));
    Ok(report)
}

/// `γ̂ = 3αβ⁴ / (K4 - 3αβ⁴)`, the inversion of `∂⁴K(0) = 3αβ⁴(1+γ)/γ`.
pub fn rq_gamma_from_k4(alpha: f64, beta: f64, k4: f64) -> Result<f64> {
    let bound = 3.0 * alpha * beta.powi(4);
    if !(k4 > bound) {
        return Err(Error::GammaUnidentified { k4, bound });
    }
    Ok(bound / (k4 - bound))
}

/// Rational quadratic pipeline: `ξ̂ → δ̂ → α̂ → β̂ = √(δ̂/α̂) → K̂4 → γ̂`.
///
/// When `K̂4 ≤ 3α̂β̂⁴` the report carries `γ` as unresolved and the other estimates.
pub fn rq_estimate(path: &PathSample, drift: &DriftModel, convention: CurvatureConvention) -> Result<EstimateReport> {
    let mut report = EstimateReport::new("rational_quadratic_moments", path.n(), path.h);
    let xi = least_squares_drift(path, drift)?;
    let fitted = drift.with_xi(xi.clone())?;
    for (name, v) in drift_param_names(xi.len()).into_iter().zip(&xi) {
        report.push(name, *v, Rate::InvSqrtStep);
    }
    let delta = curvature_estimate(path, &fitted, convention);
    report.push("delta", delta, Rate::SqrtN);
    let series: DetrendedSeries = moments::detrend(path, &fitted)?;
    let alpha = moments::moment_alpha(&series);
    if !(alpha > 0.0) {
        return Err(Error::DegenerateVariance(
            "de-trended series is identically zero".into(),
        ));
    }
    report.push("alpha", alpha, Rate::SqrtN);
    let beta = (delta / alpha).sqrt();
    report.push("beta", beta, Rate::SqrtN);
    let k4 = moments::estimate_k4(path, &fitted)?;
    report.push("k4", k4, Rate::SqrtN);
    match rq_gamma_from_k4(alpha, beta, k4) {
        Ok(g) => report.push("gamma", g, Rate::SqrtN),
        Err(e) => report.mark_unresolved("gamma", e),
    }
    Ok(report)
}
