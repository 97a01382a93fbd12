//! Stationary covariance kernels `K_σ(t)`, their derivatives at the origin and
//! Gram-matrix assembly.
//!
//! Every family is evaluated at `|t|`. Parameter vectors are positional:
//!
//! | family              | params            |
//! |---------------------|-------------------|
//! | `Gaussian`          | `[α, β]`          |
//! | `Matern`            | `[α, β, ν]`       |
//! | `RationalQuadratic` | `[α, β, γ]`       |
//! | `ExponentialOU`     | `[α, β]`          |
//! | `MollifiedOU`       | `[α, β, ε]`       |
//!
//! `MollifiedOU` is the OU kernel `α e^{-β|t|}` convolved with the Laplace
//! density `(1/2ε) e^{-|s|/ε}`, which has the closed form
//! `α (e^{-βt} - βε e^{-t/ε}) / (1 - β²ε²)` for `βε < 1`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values at or below this are treated as a vanished local variance.
pub const DEGENERATE_VARIANCE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Matern,
    #[serde(alias = "rq")]
    RationalQuadratic,
    #[serde(rename = "exponential_ou", alias = "ou")]
    ExponentialOU,
    #[serde(rename = "mollified_ou")]
    MollifiedOU,
}

impl KernelFamily {
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            KernelFamily::Gaussian | KernelFamily::ExponentialOU => &["alpha", "beta"],
            KernelFamily::Matern => &["alpha", "beta", "nu"],
            KernelFamily::RationalQuadratic => &["alpha", "beta", "gamma"],
            KernelFamily::MollifiedOU => &["alpha", "beta", "epsilon"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern => "matern",
            KernelFamily::RationalQuadratic => "rational_quadratic",
            KernelFamily::ExponentialOU => "exponential_ou",
            KernelFamily::MollifiedOU => "mollified_ou",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(KernelFamily::Gaussian),
            "matern" => Ok(KernelFamily::Matern),
            "rational_quadratic" | "rq" => Ok(KernelFamily::RationalQuadratic),
            "exponential_ou" | "ou" | "exponential" => Ok(KernelFamily::ExponentialOU),
            "mollified_ou" => Ok(KernelFamily::MollifiedOU),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The Laplace mollifier `φ_ε(s) = (1/2ε) e^{-|s|/ε}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    epsilon: f64,
}

impl MollifierSpec {
    pub fn laplace(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "mollifier bandwidth must be positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn density(&self, s: f64) -> f64 {
        (-s.abs() / self.epsilon).exp() / (2.0 * self.epsilon)
    }
}

/// A validated kernel: family plus positional parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct KernelModel {
    family: KernelFamily,
    params: Vec<f64>,
}

impl KernelModel {
    pub fn new(family: KernelFamily, params: Vec<f64>) -> Result<Self> {
        let names = family.param_names();
        if params.len() != names.len() {
            return Err(Error::ParameterDomain(format!(
                "{family} expects {} parameters ({}), got {}",
                names.len(),
                names.join(", "),
                params.len()
            )));
        }
        for (name, &v) in names.iter().zip(&params) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ParameterDomain(format!(
                    "{family}: parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        if family == KernelFamily::MollifiedOU {
            let be = params[1] * params[2];
            if be >= 1.0 {
                return Err(Error::ParameterDomain(format!(
                    "mollified_ou requires beta*epsilon < 1, got {be}"
                )));
            }
        }
        Ok(Self { family, params })
    }

    pub fn gaussian(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, vec![alpha, beta])
    }

    pub fn matern(alpha: f64, beta: f64, nu: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern, vec![alpha, beta, nu])
    }

    pub fn rational_quadratic(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::RationalQuadratic, vec![alpha, beta, gamma])
    }

    pub fn exponential_ou(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(KernelFamily::ExponentialOU, vec![alpha, beta])
    }

    pub fn mollified_ou(alpha: f64, beta: f64, epsilon: f64) -> Result<Self> {
        Self::new(KernelFamily::MollifiedOU, vec![alpha, beta, epsilon])
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Same family with a new parameter vector.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::new(self.family, params)
    }

    /// The Laplace mollifier of a `MollifiedOU` kernel.
    pub fn mollifier(&self) -> Option<MollifierSpec> {
        (self.family == KernelFamily::MollifiedOU).then(|| MollifierSpec {
            epsilon: self.params[2],
        })
    }

    /// `K_σ(|t|)`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        let p = &self.params;
        match self.family {
            KernelFamily::Gaussian => p[0] * (-0.5 * p[1] * t * t).exp(),
            KernelFamily::RationalQuadratic => {
                let (a, b, g) = (p[0], p[1], p[2]);
                a * (-g * (b * b * t * t / (2.0 * g)).ln_1p()).exp()
            }
            KernelFamily::ExponentialOU => p[0] * (-p[1] * t).exp(),
            KernelFamily::MollifiedOU => {
                let (a, b, e) = (p[0], p[1], p[2]);
                a * ((-b * t).exp() - b * e * (-t / e).exp()) / (1.0 - b * b * e * e)
            }
            KernelFamily::Matern => matern_eval(p[0], p[1], p[2], t),
        }
    }

    /// `∂_t K_σ(0)`: zero for every family that is differentiable at the origin.
    pub fn d1_at_zero(&self) -> Result<f64> {
        match self.family {
            KernelFamily::ExponentialOU => Err(Error::NotTwiceDifferentiable {
                family: "exponential_ou",
            }),
            _ => Ok(0.0),
        }
    }

    /// `∂_t² K_σ(0)`, strictly negative.
    pub fn d2_at_zero(&self) -> Result<f64> {
        let p = &self.params;
        match self.family {
            KernelFamily::Gaussian => Ok(-p[0] * p[1]),
            KernelFamily::RationalQuadratic => Ok(-p[0] * p[1] * p[1]),
            KernelFamily::MollifiedOU => {
                let (a, b, e) = (p[0], p[1], p[2]);
                Ok(-a * b / (e * (1.0 + b * e)))
            }
            KernelFamily::Matern => {
                let (a, b, nu) = (p[0], p[1], p[2]);
                if nu <= 1.0 {
                    return Err(Error::Unsupported(format!(
                        "matern with nu = {nu} is not twice differentiable at 0 (needs nu > 1)"
                    )));
                }
                Ok(-a * b * b * nu / (nu - 1.0))
            }
            KernelFamily::ExponentialOU => Err(Error::NotTwiceDifferentiable {
                family: "exponential_ou",
            }),
        }
    }

    /// `∂_t⁴ K_σ(0)`.
    pub fn d4_at_zero(&self) -> Result<f64> {
        let p = &self.params;
        match self.family {
            KernelFamily::Gaussian => Ok(3.0 * p[0] * p[1] * p[1]),
            KernelFamily::RationalQuadratic => {
                let (a, b, g) = (p[0], p[1], p[2]);
                Ok(3.0 * a * b.powi(4) * (1.0 + g) / g)
            }
            KernelFamily::Matern => {
                let (a, b, nu) = (p[0], p[1], p[2]);
                if nu <= 2.0 {
                    return Err(Error::Unsupported(format!(
                        "matern with nu = {nu} has no fourth derivative at 0 (needs nu > 2)"
                    )));
                }
                Ok(3.0 * a * b.powi(4) * nu * nu / ((nu - 1.0) * (nu - 2.0)))
            }
            KernelFamily::MollifiedOU | KernelFamily::ExponentialOU => Err(Error::Unsupported(format!(
                "{} is not four times differentiable at 0",
                self.family
            ))),
        }
    }

    /// `2[K(0) - K(h)]` without the degeneracy guard; zero at `h = 0`.
    pub fn increment_variance(&self, h: f64) -> f64 {
        let h = h.abs();
        let p = &self.params;
        match self.family {
            KernelFamily::Gaussian => -2.0 * p[0] * (-0.5 * p[1] * h * h).exp_m1(),
            KernelFamily::RationalQuadratic => {
                let (a, b, g) = (p[0], p[1], p[2]);
                -2.0 * a * (-g * (b * b * h * h / (2.0 * g)).ln_1p()).exp_m1()
            }
            KernelFamily::ExponentialOU => -2.0 * p[0] * (-p[1] * h).exp_m1(),
            KernelFamily::MollifiedOU => {
                let (a, b, e) = (p[0], p[1], p[2]);
                2.0 * a * (-(-b * h).exp_m1() + b * e * (-h / e).exp_m1()) / (1.0 - b * b * e * e)
            }
            KernelFamily::Matern => 2.0 * (self.eval(0.0) - self.eval(h)),
        }
    }

    /// Variance of a drift-free increment over a step `h`: `2[K(0) - K(h)]`.
    ///
    /// Raises [`Error::DegenerateVariance`] when the value is not above
    /// [`DEGENERATE_VARIANCE`], since it is used as a denominator.
    pub fn local_variance(&self, h: f64) -> Result<f64> {
        let v = self.increment_variance(h);
        if !(v > DEGENERATE_VARIANCE) || !v.is_finite() {
            return Err(Error::DegenerateVariance(format!(
                "2[K(0) - K(h)] = {v:e} for {} at h = {h:e}",
                self.family
            )));
        }
        Ok(v)
    }

    /// Gram matrix `M[i][j] = K(|t_i - t_j|)`.
    pub fn gram_matrix(&self, grid: &[f64]) -> DMatrix<f64> {
        let n = grid.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.eval(0.0);
            for j in 0..i {
                let v = self.eval(grid[i] - grid[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Gradient and Hessian of `log(-∂_t² K_σ(0))` with respect to all parameters.
    pub fn log_curvature_derivatives(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let p = &self.params;
        let q = p.len();
        let mut g = vec![0.0; q];
        let mut hs = vec![vec![0.0; q]; q];
        match self.family {
            KernelFamily::Gaussian => {
                g[0] = 1.0 / p[0];
                g[1] = 1.0 / p[1];
                hs[0][0] = -1.0 / (p[0] * p[0]);
                hs[1][1] = -1.0 / (p[1] * p[1]);
            }
            KernelFamily::RationalQuadratic => {
                g[0] = 1.0 / p[0];
                g[1] = 2.0 / p[1];
                hs[0][0] = -1.0 / (p[0] * p[0]);
                hs[1][1] = -2.0 / (p[1] * p[1]);
            }
            KernelFamily::Matern => {
                let nu = p[2];
                if nu <= 1.0 {
                    return Err(Error::Unsupported(format!(
                        "matern with nu = {nu} is not twice differentiable at 0"
                    )));
                }
                g[0] = 1.0 / p[0];
                g[1] = 2.0 / p[1];
                g[2] = 1.0 / nu - 1.0 / (nu - 1.0);
                hs[0][0] = -1.0 / (p[0] * p[0]);
                hs[1][1] = -2.0 / (p[1] * p[1]);
                hs[2][2] = -1.0 / (nu * nu) + 1.0 / ((nu - 1.0) * (nu - 1.0));
            }
            KernelFamily::MollifiedOU => {
                let (a, b, e) = (p[0], p[1], p[2]);
                let s = 1.0 + b * e;
                g[0] = 1.0 / a;
                g[1] = 1.0 / b - e / s;
                g[2] = -1.0 / e - b / s;
                hs[0][0] = -1.0 / (a * a);
                hs[1][1] = -1.0 / (b * b) + e * e / (s * s);
                hs[1][2] = -1.0 / (s * s);
                hs[2][1] = hs[1][2];
                hs[2][2] = 1.0 / (e * e) + b * b / (s * s);
            }
            KernelFamily::ExponentialOU => {
                return Err(Error::NotTwiceDifferentiable {
                    family: "exponential_ou",
                })
            }
        }
        Ok((g, hs))
    }
}

impl fmt::Display for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family)?;
        for (i, (n, v)) in self.family.param_names().iter().zip(&self.params).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        f.write_str(")")
    }
}

/// Serialized form, e.g. `{family = "gaussian", alpha = 1.0, beta = 1.0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    #[serde(alias = "rbf")]
    Gaussian {
        alpha: f64,
        beta: f64,
    },
    Matern {
        alpha: f64,
        beta: f64,
        nu: f64,
    },
    #[serde(alias = "rq")]
    RationalQuadratic {
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    #[serde(rename = "exponential_ou", alias = "ou")]
    ExponentialOU {
        alpha: f64,
        beta: f64,
    },
    #[serde(rename = "mollified_ou")]
    MollifiedOU {
        alpha: f64,
        beta: f64,
        epsilon: f64,
    },
}

impl TryFrom<KernelSpec> for KernelModel {
    type Error = Error;

    fn try_from(s: KernelSpec) -> Result<Self> {
        match s {
            KernelSpec::Gaussian { alpha, beta } => KernelModel::gaussian(alpha, beta),
            KernelSpec::Matern { alpha, beta, nu } => KernelModel::matern(alpha, beta, nu),
            KernelSpec::RationalQuadratic { alpha, beta, gamma } => KernelModel::rational_quadratic(alpha, beta, gamma),
            KernelSpec::ExponentialOU { alpha, beta } => KernelModel::exponential_ou(alpha, beta),
            KernelSpec::MollifiedOU { alpha, beta, epsilon } => KernelModel::mollified_ou(alpha, beta, epsilon),
        }
    }
}

impl From<KernelModel> for KernelSpec {
    fn from(k: KernelModel) -> Self {
        let p = k.params;
        match k.family {
            KernelFamily::Gaussian => KernelSpec::Gaussian {
                alpha: p[0],
                beta: p[1],
            },
            KernelFamily::Matern => KernelSpec::Matern {
                alpha: p[0],
                beta: p[1],
                nu: p[2],
            },
            KernelFamily::RationalQuadratic => KernelSpec::RationalQuadratic {
                alpha: p[0],
                beta: p[1],
                gamma: p[2],
            },
            KernelFamily::ExponentialOU => KernelSpec::ExponentialOU {
                alpha: p[0],
                beta: p[1],
            },
            KernelFamily::MollifiedOU => KernelSpec::MollifiedOU {
                alpha: p[0],
                beta: p[1],
                epsilon: p[2],
            },
        }
    }
}

fn matern_eval(alpha: f64, beta: f64, nu: f64, t: f64) -> f64 {
    let x = (2.0 * nu).sqrt() * beta * t;
    if x == 0.0 {
        return alpha;
    }
    // 2^{1-ν}/Γ(ν) · x^ν K_ν(x)
    let log_pref = (1.0 - nu) * std::f64::consts::LN_2 - statrs::function::gamma::ln_gamma(nu);
    alpha * scaled_bessel_k(nu, x, log_pref)
}

/// `exp(log_pref) · x^ν K_ν(x)` from `K_ν(x) = ∫_0^∞ e^{-x cosh u} cosh(νu) du`.
///
/// The integrand is analytic in a strip, so the trapezoid rule converges
/// geometrically; exponents are combined in log space to avoid overflow at small `x`.
fn scaled_bessel_k(nu: f64, x: f64, log_pref: f64) -> f64 {
    let base = log_pref + nu * x.ln();
    let log_f = |u: f64| {
        let e = base - x * u.cosh() + nu * u;
        // cosh(νu) = e^{νu}(1 + e^{-2νu})/2
        e + (0.5 * (1.0 + (-2.0 * nu * u).exp())).ln()
    };
    // peak of -x cosh u + νu sits at sinh u = ν/x
    let u_peak = (nu / x).asinh();
    let peak = log_f(u_peak);
    let step = 0.02;
    let mut sum = 0.5 * log_f(0.0).exp();
    let mut k = 1usize;
    loop {
        let u = step * k as f64;
        let lf = log_f(u);
        let v = lf.exp();
        sum += v;
        if u > u_peak && lf < peak - 40.0 {
            break;
        }
        if k > 200_000 {
            break;
        }
        k += 1;
    }
    sum * step
}
