//! Drift families linear in their parameters, `μ_ξ(t) = Σ_k ξ_k w_k(t)`.
//!
//! The common single-profile case is `μ_ξ(t) = ξ w(t)`. Profiles must be bounded
//! and integrable on `[0, ∞)`; tabulated and user-supplied profiles declare an
//! exponential tail rate which is trusted, not verified.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

const QUAD_REL_TOL: f64 = 1e-10;

/// A fixed shape `w(t)`.
#[derive(Clone)]
pub enum Profile {
    Zero,
    /// `w(t) = e^{-t}`.
    ExpDecay,
    Tabulated(TabulatedProfile),
    Custom(CustomProfile),
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::ExpDecay => (-t).exp(),
            Profile::Tabulated(p) => p.eval(t),
            Profile::Custom(p) => (p.f)(t),
        }
    }

    /// `∫_0^t w(s) ds`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        match self {
            Profile::Zero => Ok(0.0),
            Profile::ExpDecay => Ok(-(-t).exp_m1()),
            Profile::Tabulated(p) => Ok(p.integral(t)),
            Profile::Custom(p) => quad::adaptive_simpson(|s| (p.f)(s), 0.0, t, QUAD_REL_TOL),
        }
    }

    /// `∫_T^∞ |w(s)| ds`.
    pub fn abs_tail_mass(&self, from: f64) -> Result<f64> {
        match self {
            Profile::Zero => Ok(0.0),
            Profile::ExpDecay => Ok((-from).exp()),
            Profile::Tabulated(p) => Ok(p.abs_tail_mass(from)),
            Profile::Custom(p) => {
                let end = from.max(0.0) + p.horizon();
                quad::adaptive_simpson(|s| (p.f)(s).abs(), from, end, QUAD_REL_TOL)
            }
        }
    }

    /// Declared exponential decay rate of the tail (`None` for `Zero`).
    pub fn tail_rate(&self) -> Option<f64> {
        match self {
            Profile::Zero => None,
            Profile::ExpDecay => Some(1.0),
            Profile::Tabulated(p) => Some(p.tail_rate),
            Profile::Custom(p) => Some(p.tail_rate),
        }
    }

    /// Point beyond which the profile is negligible (integrand below ~1e-16 of its scale).
    pub fn horizon(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::ExpDecay => 40.0,
            Profile::Tabulated(p) => p.t.last().copied().unwrap_or(0.0) + 40.0 / p.tail_rate,
            Profile::Custom(p) => p.horizon(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Profile::Zero => "zero".into(),
            Profile::ExpDecay => "exp_decay".into(),
            Profile::Tabulated(_) => "table".into(),
            Profile::Custom(p) => p.name.clone(),
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Tabulated(p) => f
                .debug_struct("Tabulated")
                .field("knots", &p.t.len())
                .field("tail_rate", &p.tail_rate)
                .finish(),
            Profile::Custom(p) => f
                .debug_struct("Custom")
                .field("name", &p.name)
                .field("tail_rate", &p.tail_rate)
                .finish(),
            other => f.write_str(&other.name()),
        }
    }
}

/// Piecewise-linear profile on knots `t_0 = 0 < t_1 < …`, continued past the last
/// knot by `w_last · e^{-λ(t - t_last)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    t: Vec<f64>,
    w: Vec<f64>,
    tail_rate: f64,
    cumulative: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(t: Vec<f64>, w: Vec<f64>, tail_rate: f64) -> Result<Self> {
        if t.len() != w.len() || t.len() < 2 {
            return Err(Error::InvalidInput(
                "profile table needs at least two (t, w) rows of equal length".into(),
            ));
        }
        if t[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "profile table must start at t = 0, got {}",
                t[0]
            )));
        }
        if t.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidInput(
                "profile table times must be strictly increasing".into(),
            ));
        }
        if w.iter().chain(&t).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("profile table contains non-finite values".into()));
        }
        if !(tail_rate > 0.0 && tail_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "declared tail decay rate must be positive, got {tail_rate}"
            )));
        }
        let mut cumulative = Vec::with_capacity(t.len());
        cumulative.push(0.0);
        for i in 1..t.len() {
            let prev = cumulative[i - 1];
            cumulative.push(prev + 0.5 * (w[i] + w[i - 1]) * (t[i] - t[i - 1]));
        }
        Ok(Self {
            t,
            w,
            tail_rate,
            cumulative,
        })
    }

    /// Reads a two-column `t,w` CSV with a header row.
    pub fn from_csv(path: &Path, tail_rate: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut t = Vec::new();
        let mut w = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::InvalidInput(format!(
                    "{}: expected 2 columns (t, w), found {}",
                    path.display(),
                    rec.len()
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("{}: `{s}`: {e}", path.display())))
            };
            t.push(parse(&rec[0])?);
            w.push(parse(&rec[1])?);
        }
        Self::new(t, w, tail_rate)
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.t, &self.w)
    }

    fn segment(&self, t: f64) -> usize {
        // index i with t_i <= t < t_{i+1}
        match self.t.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.t.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.t.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let last = *self.t.last().unwrap();
        if t >= last {
            return self.w[self.w.len() - 1] * (-self.tail_rate * (t - last)).exp();
        }
        let i = self.segment(t);
        let f = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        self.w[i] + f * (self.w[i + 1] - self.w[i])
    }

    pub fn integral(&self, t: f64) -> f64 {
        let last = *self.t.last().unwrap();
        if t >= last {
            let wl = self.w[self.w.len() - 1];
            return self.cumulative[self.t.len() - 1] - wl * (-self.tail_rate * (t - last)).exp_m1() / self.tail_rate;
        }
        let i = self.segment(t);
        let wt = self.eval(t);
        self.cumulative[i] + 0.5 * (self.w[i] + wt) * (t - self.t[i])
    }

    fn abs_tail_mass(&self, from: f64) -> f64 {
        let last = *self.t.last().unwrap();
        let wl = self.w[self.w.len() - 1].abs();
        let tail_start = from.max(last);
        let mut mass = wl * (-self.tail_rate * (tail_start - last)).exp() / self.tail_rate;
        if from < last {
            let start = self.segment(from.max(0.0));
            for i in start..self.t.len() - 1 {
                let a = self.t[i].max(from);
                let b = self.t[i + 1];
                if b <= a {
                    continue;
                }
                mass += abs_linear_integral(a, self.eval(a), b, self.w[i + 1]);
            }
        }
        mass
    }
}

/// `∫_a^b |line|` for the line through `(a, fa)` and `(b, fb)`.
fn abs_linear_integral(a: f64, fa: f64, b: f64, fb: f64) -> f64 {
    if fa * fb >= 0.0 {
        0.5 * (fa.abs() + fb.abs()) * (b - a)
    } else {
        let root = a + (b - a) * fa / (fa - fb);
        0.5 * fa.abs() * (root - a) + 0.5 * fb.abs() * (b - root)
    }
}

/// User-supplied profile with a declared envelope `|w(t)| ≲ e^{-λt}`.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub tail_rate: f64,
}

impl CustomProfile {
    pub fn new<F>(name: impl Into<String>, tail_rate: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(tail_rate > 0.0 && tail_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "declared tail decay rate must be positive, got {tail_rate}"
            )));
        }
        Ok(Self {
            name: name.into(),
            f: Arc::new(f),
            tail_rate,
        })
    }

    fn horizon(&self) -> f64 {
        40.0 / self.tail_rate
    }
}

/// `μ_ξ(t) = Σ_k ξ_k w_k(t)`.
#[derive(Debug, Clone)]
pub struct DriftModel {
    profiles: Vec<Profile>,
    xi: Vec<f64>,
}

impl DriftModel {
    pub fn new(profiles: Vec<Profile>, xi: Vec<f64>) -> Result<Self> {
        if profiles.is_empty() || profiles.len() != xi.len() {
            return Err(Error::InvalidInput(format!(
                "drift needs one coefficient per profile ({} profiles, {} coefficients)",
                profiles.len(),
                xi.len()
            )));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("drift coefficients must be finite".into()));
        }
        Ok(Self { profiles, xi })
    }

    pub fn zero() -> Self {
        Self {
            profiles: vec![Profile::Zero],
            xi: vec![0.0],
        }
    }

    pub fn exp_decay(xi: f64) -> Self {
        Self {
            profiles: vec![Profile::ExpDecay],
            xi: vec![xi],
        }
    }

    pub fn scaled(profile: Profile, xi: f64) -> Self {
        Self {
            profiles: vec![profile],
            xi: vec![xi],
        }
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Number of drift parameters `p`.
    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn is_zero(&self) -> bool {
        self.profiles.iter().all(|p| matches!(p, Profile::Zero))
    }

    /// Same profiles, new coefficients.
    pub fn with_xi(&self, xi: Vec<f64>) -> Result<Self> {
        Self::new(self.profiles.clone(), xi)
    }

    /// `μ_ξ(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.profiles.iter().zip(&self.xi).map(|(p, x)| x * p.eval(t)).sum()
    }

    /// `∫_0^t μ_ξ(s) ds`; `t = ∞` gives the total mass.
    pub fn integral(&self, t: f64) -> Result<f64> {
        let mut s = 0.0;
        for (p, &x) in self.profiles.iter().zip(&self.xi) {
            if x == 0.0 || matches!(p, Profile::Zero) {
                continue;
            }
            let v = match p {
                Profile::Custom(_) if t.is_infinite() => p.integral(p.horizon())?,
                _ => p.integral(t)?,
            };
            s += x * v;
        }
        Ok(s)
    }

    /// `∂_ξ μ_ξ(t) = (w_1(t), …, w_p(t))`.
    pub fn grad_xi(&self, t: f64) -> Vec<f64> {
        self.profiles.iter().map(|p| p.eval(t)).collect()
    }

    /// `∫_T^∞ |μ_ξ(s)| ds`, the part of the drift mass not seen on a horizon `T`.
    pub fn tail_mass(&self, from: f64) -> Result<f64> {
        let active: Vec<(&Profile, f64)> = self
            .profiles
            .iter()
            .zip(self.xi.iter().copied())
            .filter(|(p, x)| *x != 0.0 && !matches!(p, Profile::Zero))
            .collect();
        match active.as_slice() {
            [] => Ok(0.0),
            [(p, x)] => Ok(x.abs() * p.abs_tail_mass(from)?),
            _ => {
                let end = active.iter().map(|(p, _)| p.horizon()).fold(from, f64::max);
                if end <= from {
                    return Ok(0.0);
                }
                quad::adaptive_simpson(|s| self.eval(s).abs(), from, end, QUAD_REL_TOL)
            }
        }
    }

    /// `∫_0^∞ w_j w_k dt`, the drift information integrals.
    pub fn profile_gram_integral(&self) -> Result<Vec<Vec<f64>>> {
        let p = self.dim();
        let mut out = vec![vec![0.0; p]; p];
        for j in 0..p {
            for k in 0..=j {
                let v = match (&self.profiles[j], &self.profiles[k]) {
                    (Profile::Zero, _) | (_, Profile::Zero) => 0.0,
                    (Profile::ExpDecay, Profile::ExpDecay) => 0.5,
                    (a, b) => {
                        let end = a.horizon().min(b.horizon()).max(1.0);
                        let f = |s: f64| a.eval(s) * b.eval(s);
                        integrate_until_negligible(&f, end)?
                    }
                };
                out[j][k] = v;
                out[k][j] = v;
            }
        }
        Ok(out)
    }

    /// Provenance description (tail declarations included).
    pub fn describe(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .profiles
            .iter()
            .zip(&self.xi)
            .map(|(p, x)| {
                serde_json::json!({
                    "profile": p.name(),
                    "xi": x,
                    "declared_tail_rate": p.tail_rate(),
                })
            })
            .collect();
        serde_json::Value::Array(terms)
    }
}

/// Integrates on `[0, end]` piecewise and stops once pieces fall below 1e-14 of the total.
fn integrate_until_negligible<F: Fn(f64) -> f64>(f: &F, end: f64) -> Result<f64> {
    let pieces = 32;
    let width = end / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let a = i as f64 * width;
        let part = quad::adaptive_simpson(f, a, a + width, QUAD_REL_TOL)?;
        total += part;
        if i > 0 && part.abs() < 1e-14 * total.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(total)
}

/// Drift as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    ExpDecay {
        xi: f64,
    },
    /// Tabulated profile, from a CSV `path` or inline `t`/`w` columns.
    Table {
        xi: f64,
        tail_rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w: Option<Vec<f64>>,
    },
}

impl DriftSpec {
    /// Builds the model; relative CSV paths resolve against `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<DriftModel> {
        match self {
            DriftSpec::Zero => Ok(DriftModel::zero()),
            DriftSpec::ExpDecay { xi } => Ok(DriftModel::exp_decay(*xi)),
            DriftSpec::Table {
                xi,
                tail_rate,
                path,
                t,
                w,
            } => {
                let table = match (path, t, w) {
                    (Some(p), None, None) => {
                        let p = Path::new(p);
                        let full = match base_dir {
                            Some(b) if p.is_relative() => b.join(p),
                            _ => p.to_path_buf(),
                        };
                        TabulatedProfile::from_csv(&full, *tail_rate)?
                    }
                    (None, Some(t), Some(w)) => TabulatedProfile::new(t.clone(), w.clone(), *tail_rate)?,
                    _ => {
                        return Err(Error::Config(
                            "table drift needs either `path` or both `t` and `w`".into(),
                        ))
                    }
                };
                Ok(DriftModel::scaled(Profile::Tabulated(table), *xi))
            }
        }
    }

    /// Inverse of [`DriftSpec::build`] for single-profile models; tables are inlined.
    pub fn from_model(model: &DriftModel) -> Option<Self> {
        if model.profiles().len() != 1 {
            return None;
        }
        let xi = model.xi()[0];
        match &model.profiles()[0] {
            Profile::Zero => Some(DriftSpec::Zero),
            Profile::ExpDecay => Some(DriftSpec::ExpDecay { xi }),
            Profile::Tabulated(p) => Some(DriftSpec::Table {
                xi,
                tail_rate: p.tail_rate,
                path: None,
                t: Some(p.t.clone()),
                w: Some(p.w.clone()),
            }),
            Profile::Custom(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_decay_values() {
        let d = DriftModel::exp_decay(2.0);
        assert_eq!(d.eval(0.0), 2.0);
        assert!(d.eval(800.0) == 0.0);
        assert!((d.integral(1.0).unwrap() - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((d.integral(f64::INFINITY).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(d.grad_xi(0.0), vec![1.0]);
        assert!((d.grad_xi(std::f64::consts::LN_2)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_drift() {
        let d = DriftModel::zero();
        assert_eq!(d.eval(3.0), 0.0);
        assert_eq!(d.integral(5.0).unwrap(), 0.0);
        assert_eq!(d.grad_xi(1.0), vec![0.0]);
        assert_eq!(d.tail_mass(1.0).unwrap(), 0.0);
        assert!(d.is_zero());
    }

    #[test]
    fn tail_mass_matches_closed_form() {
        let d = DriftModel::exp_decay(2.0);
        let t3 = 1000f64.powf(0.2);
        assert!((d.tail_mass(t3).unwrap() - 2.0 * (-t3).exp()).abs() < 1e-15);
        assert!((d.tail_mass(t3).unwrap() - 0.0374).abs() < 5e-4);
        let t1 = 1000f64.powf(0.6);
        let m = d.tail_mass(t1).unwrap();
        assert!((m / 7.7e-28 - 1.0).abs() < 0.05, "{m:e}");
    }

    #[test]
    fn table_reproduces_linear_segments_and_tail() {
        let p = TabulatedProfile::new(vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.5], 2.0).unwrap();
        assert_eq!(p.eval(0.5), 0.0);
        assert_eq!(p.eval(1.5), -0.25);
        assert!((p.eval(3.0) - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
        // ∫_0^2 = 0 + (-0.25) ; tail adds 0.5/2
        assert!((p.integral(2.0) + 0.25).abs() < 1e-15);
        assert!((p.integral(1e6) - 0.0).abs() < 1e-12);
        // roots at 1/2 and 5/3
        let mass = p.abs_tail_mass(0.0);
        let want = 0.25 + 0.25 + 0.5 * (2.0 / 3.0) + 0.5 * 0.5 * (1.0 / 3.0) + 0.25;
        assert!((mass - want).abs() < 1e-14, "{mass} vs {want}");
    }

    #[test]
    fn table_validation() {
        assert!(TabulatedProfile::new(vec![0.0], vec![1.0], 1.0).is_err());
        assert!(TabulatedProfile::new(vec![0.5, 1.0], vec![1.0, 1.0], 1.0).is_err());
        assert!(TabulatedProfile::new(vec![0.0, 0.0], vec![1.0, 1.0], 1.0).is_err());
        assert!(TabulatedProfile::new(vec![0.0, 1.0], vec![1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn custom_profile_uses_quadrature() {
        let p = CustomProfile::new("gauss_bump", 1.0, |t: f64| (-t * t).exp()).unwrap();
        let d = DriftModel::scaled(Profile::Custom(p), 3.0);
        let want = 3.0 * std::f64::consts::PI.sqrt() / 2.0 * statrs::function::erf::erf(1.5);
        assert!((d.integral(1.5).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn spec_round_trip() {
        #[derive(Deserialize)]
        struct Doc {
            drift: DriftSpec,
        }
        let d: Doc = toml::from_str(r#"drift = {profile="exp_decay", xi=2.0}"#).unwrap();
        assert_eq!(d.drift, DriftSpec::ExpDecay { xi: 2.0 });
        let m = d.drift.build(None).unwrap();
        assert_eq!(DriftSpec::from_model(&m), Some(DriftSpec::ExpDecay { xi: 2.0 }));
        assert!(toml::from_str::<Doc>(r#"drift = {profile="exp_decay", xi=2.0, q=1}"#).is_err());
    }

    #[test]
    fn profile_gram_integral_exp_decay() {
        let d = DriftModel::exp_decay(1.0);
        assert_eq!(d.profile_gram_integral().unwrap(), vec![vec![0.5]]);
        let p = CustomProfile::new("e2", 1.0, |t: f64| (-t).exp()).unwrap();
        let d = DriftModel::scaled(Profile::Custom(p), 1.0);
        assert!((d.profile_gram_integral().unwrap()[0][0] - 0.5).abs() < 1e-10);
    }
}
