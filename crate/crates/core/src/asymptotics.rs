//! Asymptotic covariance blocks of the contrast estimator and the resulting
//! standard errors.
//!
//! With `D_n = diag(h^{-1/2} I_p, √n I_q)`, `D_n(θ̂ - θ₀)` is asymptotically normal
//! with block-diagonal covariance
//! `-∂²K(0) [2 ∫ (∂_ξ μ)^{⊗2} dt]^{-1}` for the drift and `V₂^{-1} V₁ V₂^{-1}` for the
//! kernel, where `V₁ = (½ ∂_σ log(-∂²K_σ(0)))^{⊗2}` and `V₂ = ∂²_σ log(-∂²K_σ(0))`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::contrast::{drift_param_names, EstimateReport, Rate};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::simulate::SamplingScheme;

/// Coordinates in which the kernel block is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    #[default]
    Natural,
    /// `φ = log σ` componentwise.
    Log,
}

/// How the derivatives of `log(-∂²K(0))` were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticInfo {
    pub drift_names: Vec<String>,
    pub drift_block: Vec<Vec<f64>>,
    pub sigma_names: Vec<String>,
    /// `None` when `V₂` is singular.
    pub sigma_block: Option<Vec<Vec<f64>>>,
    pub sigma_singular: bool,
    pub v1: Vec<Vec<f64>>,
    pub v2: Vec<Vec<f64>>,
    pub derivatives: DerivativeSource,
    pub parameterization: Parameterization,
    pub rates: [Rate; 2],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Row-major dense matrix as serialized in reports.
pub type Rows = Vec<Vec<f64>>;

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// `-∂²K(0) [2 ∫_0^∞ w w^T dt]^{-1}`.
pub fn drift_block(curvature: f64, drift: &DriftModel) -> Result<Vec<Vec<f64>>> {
    let g = from_rows(&drift.profile_gram_integral()?) * 2.0;
    let inv = g
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::NonInvertibleInformation("drift information integral is singular".into()))?;
    Ok(to_rows(&(inv * curvature)))
}

/// Central finite differences of `log(-∂²K_σ(0))` in all parameters.
pub fn fd_log_curvature_derivatives(kernel: &KernelModel) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = kernel.params().to_vec();
    let q = p.len();
    let f = |x: &[f64]| -> Result<f64> {
        let k = kernel.with_params(x.to_vec())?;
        Ok((-k.d2_at_zero()?).ln())
    };
    let f0 = f(&p)?;
    let step: Vec<f64> = p.iter().map(|v| 1e-4 * v.abs().max(1e-3)).collect();
    let mut g = vec![0.0; q];
    let mut hs = vec![vec![0.0; q]; q];
    for i in 0..q {
        let mut xp = p.clone();
        let mut xm = p.clone();
        xp[i] += step[i];
        xm[i] -= step[i];
        let (fp, fm) = (f(&xp)?, f(&xm)?);
        g[i] = (fp - fm) / (2.0 * step[i]);
        hs[i][i] = (fp - 2.0 * f0 + fm) / (step[i] * step[i]);
        for j in 0..i {
            let mut pp = p.clone();
            let mut pm = p.clone();
            let mut mp = p.clone();
            let mut mm = p.clone();
            pp[i] += step[i];
            pp[j] += step[j];
            pm[i] += step[i];
            pm[j] -= step[j];
            mp[i] -= step[i];
            mp[j] += step[j];
            mm[i] -= step[i];
            mm[j] -= step[j];
            let v = (f(&pp)? - f(&pm)? - f(&mp)? + f(&mm)?) / (4.0 * step[i] * step[j]);
            hs[i][j] = v;
            hs[j][i] = v;
        }
    }
    Ok((g, hs))
}

/// `V₂^{-1} V₁ V₂^{-1}` from a gradient and Hessian, or `None` if `V₂` is singular.
pub fn sigma_sandwich(grad: &[f64], hess: &[Vec<f64>]) -> (Rows, Rows, Option<Rows>) {
    let q = grad.len();
    let v1 = DMatrix::from_fn(q, q, |i, j| 0.25 * grad[i] * grad[j]);
    let v2 = from_rows(hess);
    let sv = v2.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let singular = q == 0 || !(smax > 0.0) || sv.min() <= 1e-10 * smax;
    let block = if singular {
        None
    } else {
        v2.clone().try_inverse().map(|inv| to_rows(&(&inv * &v1 * &inv)))
    };
    (to_rows(&v1), to_rows(&v2), block)
}

/// Covariance blocks at `kernel` and `drift` for the kernel components `free`.
pub fn fisher_blocks(
    kernel: &KernelModel,
    drift: &DriftModel,
    free: &[usize],
    parameterization: Parameterization,
) -> Result<AsymptoticInfo> {
    let np = kernel.params().len();
    if free.iter().any(|&j| j >= np) {
        return Err(Error::InvalidInput(format!(
            "free components {free:?} out of range for {}",
            kernel.family()
        )));
    }
    let curvature = -kernel.d2_at_zero()?;
    let mut notes = Vec::new();
    let (full_g, full_h, source) = match kernel.log_curvature_derivatives() {
        Ok((g, h)) => (g, h, DerivativeSource::Analytic),
        Err(Error::Unsupported(_)) => {
            let (g, h) = fd_log_curvature_derivatives(kernel)?;
            (g, h, DerivativeSource::FiniteDifference)
        }
        Err(e) => return Err(e),
    };
    let p = kernel.params();
    let mut g: Vec<f64> = free.iter().map(|&i| full_g[i]).collect();
    let mut hs: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| free.iter().map(|&j| full_h[i][j]).collect())
        .collect();
    if parameterization == Parameterization::Log {
        let s: Vec<f64> = free.iter().map(|&i| p[i]).collect();
        for a in 0..free.len() {
            for b in 0..free.len() {
                hs[a][b] *= s[a] * s[b];
            }
            hs[a][a] += s[a] * g[a];
        }
        for a in 0..free.len() {
            g[a] *= s[a];
        }
    }
    let (v1, v2, sigma_block) = sigma_sandwich(&g, &hs);
    let sigma_singular = sigma_block.is_none();
    if sigma_singular {
        notes.push(
            "V2 is singular: the kernel block is omitted because the local curvature does not identify these components"
                .into(),
        );
    }
    let names = kernel.family().param_names();
    Ok(AsymptoticInfo {
        drift_names: drift_param_names(drift.dim()),
        drift_block: drift_block(curvature, drift)?,
        sigma_names: free.iter().map(|&i| names[i].to_string()).collect(),
        sigma_block,
        sigma_singular,
        v1,
        v2,
        derivatives: source,
        parameterization,
        rates: [Rate::InvSqrtStep, Rate::SqrtN],
        notes,
    })
}

/// Blocks for the curvature parameterization `σ = -∂²K(0)` (named `name`).
pub fn fisher_blocks_curvature(curvature: f64, drift: &DriftModel, name: &str) -> Result<AsymptoticInfo> {
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "curvature must be positive, got {curvature}"
        )));
    }
    let g = vec![1.0 / curvature];
    let hs = vec![vec![-1.0 / (curvature * curvature)]];
    let (v1, v2, sigma_block) = sigma_sandwich(&g, &hs);
    Ok(AsymptoticInfo {
        drift_names: drift_param_names(drift.dim()),
        drift_block: drift_block(curvature, drift)?,
        sigma_names: vec![name.to_string()],
        sigma_singular: sigma_block.is_none(),
        sigma_block,
        v1,
        v2,
        derivatives: DerivativeSource::Analytic,
        parameterization: Parameterization::Natural,
        rates: [Rate::InvSqrtStep, Rate::SqrtN],
        notes: Vec::new(),
    })
}

/// Attaches `se(ξ̂_j) = √Σ_ξ[j,j] · h^{1/2}` and `se(σ̂_k) = √Σ_σ[k,k] / √n` by name.
pub fn standard_errors(report: &EstimateReport, info: &AsymptoticInfo, scheme: &SamplingScheme) -> EstimateReport {
    let mut out = report.clone();
    let sqrt_h = scheme.h.sqrt();
    let sqrt_n = (scheme.n as f64).sqrt();
    for e in out.estimates.iter_mut() {
        if let Some(j) = info.drift_names.iter().position(|n| *n == e.name) {
            e.std_error = Some(info.drift_block[j][j].max(0.0).sqrt() * sqrt_h);
        } else if let (Some(k), Some(b)) = (
            info.sigma_names.iter().position(|n| *n == e.name),
            info.sigma_block.as_ref(),
        ) {
            e.std_error = Some(b[k][k].max(0.0).sqrt() / sqrt_n);
        }
    }
    out.asymptotics = Some(info.clone());
    out
}
