//! Exact sampling of stationary Gaussian paths on the grid `t_i = i h`, `i = 0..=n`,
//! plus superposition of the integrated drift.
//!
//! The primary sampler embeds the Toeplitz covariance in a circulant matrix and
//! draws through the FFT. When the embedding has negative spectral mass beyond
//! `1e-12 · max eigenvalue` the embedding is enlarged (zero-free padding with
//! further kernel lags); if that still fails the sampler falls back to a dense
//! Cholesky factor for up to [`CHOLESKY_MAX_POINTS`] points.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::drift::{DriftModel, DriftSpec};
use crate::error::{Error, Result};
use crate::kernels::KernelModel;

/// Relative tolerance on negative circulant eigenvalues.
pub const SPECTRAL_NEGATIVITY_TOL: f64 = 1e-12;
/// Largest grid handled by the dense fallback.
pub const CHOLESKY_MAX_POINTS: usize = 5001;
/// Largest relative jitter added to the Gram diagonal before giving up.
pub const MAX_JITTER: f64 = 1e-10;
const MAX_PADDING_FACTOR: usize = 64;

/// Grid `t_i = i h`, `i = 0..=n`, optionally generated by `h = n^{-a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub n: usize,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_exponent: Option<f64>,
}

/// Whether a rule `h = n^{-a}` sends `h → 0` and `n h → ∞` as `n` grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub step_vanishes: bool,
    pub horizon_diverges: bool,
}

impl SamplingScheme {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("need n >= 2 increments, got {n}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        Ok(Self {
            n,
            h,
            rule_exponent: None,
        })
    }

    /// `h = n^{-a}`.
    pub fn from_rule(n: usize, a: f64) -> Result<Self> {
        let mut s = Self::new(n, (n as f64).powf(-a))?;
        s.rule_exponent = Some(a);
        Ok(s)
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.n).map(|i| i as f64 * self.h).collect()
    }

    /// `T = n h`.
    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.h
    }

    /// Asymptotic regime of the generating rule; `None` for a fixed step.
    pub fn regime(&self) -> Option<Regime> {
        self.rule_exponent.map(|a| Regime {
            step_vanishes: a > 0.0,
            horizon_diverges: a < 1.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMethod {
    CirculantEmbedding,
    Cholesky,
}

impl fmt::Display for SimulationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimulationMethod::CirculantEmbedding => "circulant_embedding",
            SimulationMethod::Cholesky => "cholesky",
        })
    }
}

/// Which sampler to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodPreference {
    /// Circulant embedding with Cholesky fallback.
    #[default]
    Auto,
    /// Circulant embedding only; fails instead of falling back.
    Circulant,
    Cholesky,
}

/// Generating model recorded with synthetic paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub kernel: KernelModel,
    /// `None` when the drift has no serializable form (user callables).
    pub drift: Option<DriftSpec>,
}

/// One observed trajectory `X_{t_0}, …, X_{t_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub h: f64,
    pub seed: Option<u64>,
    pub truth: Option<Truth>,
    pub method: Option<SimulationMethod>,
}

impl PathSample {
    /// Wraps observed values on `t_i = i h`.
    pub fn from_values(values: Vec<f64>, h: f64) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "a path needs at least 3 observations, got {}",
                values.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
        }
        let times = (0..values.len()).map(|i| i as f64 * h).collect();
        Ok(Self {
            times,
            values,
            h,
            seed: None,
            truth: None,
            method: None,
        })
    }

    /// Number of increments `n`.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    /// `Δ_i X = X_{t_i} - X_{t_{i-1}}`, `i = 1..=n`.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn scheme(&self) -> SamplingScheme {
        SamplingScheme {
            n: self.n(),
            h: self.h,
            rule_exponent: None,
        }
    }

    /// Sidecar location for a CSV path: same stem, `.json` extension.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes `t,x` CSV plus the JSON provenance sidecar.
    pub fn write(&self, csv_path: &Path, scheme: Option<&SamplingScheme>) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(["t", "x"])?;
        for (t, x) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), x.to_string()])?;
        }
        w.flush()?;
        let sidecar = PathSidecar {
            n: self.n(),
            h: self.h,
            rule_exponent: scheme.and_then(|s| s.rule_exponent),
            seed: self.seed,
            method: self.method,
            truth: self.truth.clone(),
        };
        fs::write(
            Self::sidecar_path(csv_path),
            serde_json::to_string_pretty(&sidecar)? + "\n",
        )?;
        Ok(())
    }

    /// Reads a `t,x` CSV; the sidecar is used when present.
    pub fn read(csv_path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(csv_path)?;
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "x" {
            return Err(Error::InvalidInput(format!(
                "{}: expected header `t,x`",
                csv_path.display()
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("{} row {}: `{s}`: {e}", csv_path.display(), line + 2)))
            };
            times.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        if times.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "{}: need at least 3 rows",
                csv_path.display()
            )));
        }
        let sidecar_path = Self::sidecar_path(csv_path);
        let sidecar: Option<PathSidecar> = if sidecar_path.exists() {
            Some(serde_json::from_str(&fs::read_to_string(&sidecar_path)?)?)
        } else {
            None
        };
        let h = sidecar.as_ref().map(|s| s.h).unwrap_or(times[1] - times[0]);
        let scale = times.last().unwrap().abs().max(1.0);
        for (i, &t) in times.iter().enumerate() {
            if (t - i as f64 * h).abs() > 1e-9 * scale {
                return Err(Error::InvalidInput(format!(
                    "{}: times are not equispaced with step {h} (row {})",
                    csv_path.display(),
                    i + 2
                )));
            }
        }
        let mut path = Self::from_values(values, h)?;
        path.times = times;
        if let Some(s) = sidecar {
            path.seed = s.seed;
            path.truth = s.truth;
            path.method = s.method;
        }
        Ok(path)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathSidecar {
    n: usize,
    h: f64,
    #[serde(default)]
    rule_exponent: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    method: Option<SimulationMethod>,
    #[serde(default)]
    truth: Option<Truth>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `parts` under `master`; independent of evaluation order.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

enum Factor {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky { lower: DMatrix<f64> },
}

/// Prepared exact sampler for `N(0, Gram)` on a fixed equispaced grid.
///
/// The factorization is computed once; [`GpSampler::sample`] is then cheap and
/// may be called from many threads.
pub struct GpSampler {
    points: usize,
    factor: Factor,
    method: SimulationMethod,
    embedding_size: Option<usize>,
    jitter: f64,
}

impl fmt::Debug for GpSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GpSampler")
            .field("points", &self.points)
            .field("method", &self.method)
            .field("embedding_size", &self.embedding_size)
            .field("jitter", &self.jitter)
            .finish()
    }
}

impl GpSampler {
    /// Sampler for `points` grid values `t_i = i h`.
    pub fn new(kernel: &KernelModel, points: usize, h: f64, pref: MethodPreference) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidInput("sampler needs at least one grid point".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
        }
        match pref {
            MethodPreference::Cholesky => Self::cholesky(kernel, points, h),
            MethodPreference::Circulant => Self::circulant(kernel, points, h).and_then(|s| {
                s.ok_or_else(|| {
                    Error::Simulation(format!(
                        "circulant embedding of {kernel} on {points} points has negative spectral mass"
                    ))
                })
            }),
            MethodPreference::Auto => match Self::circulant(kernel, points, h)? {
                Some(s) => Ok(s),
                None if points <= CHOLESKY_MAX_POINTS => Self::cholesky(kernel, points, h),
                None => Err(Error::Simulation(format!(
                    "circulant embedding failed for {kernel} and {points} points exceeds the Cholesky limit"
                ))),
            },
        }
    }

    pub fn method(&self) -> SimulationMethod {
        self.method
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Circulant size actually used, if any.
    pub fn embedding_size(&self) -> Option<usize> {
        self.embedding_size
    }

    /// Diagonal jitter added by the Cholesky path (absolute).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn circulant(kernel: &KernelModel, points: usize, h: f64) -> Result<Option<Self>> {
        if points == 1 {
            let v = kernel.eval(0.0);
            let fft = FftPlanner::new().plan_fft_forward(1);
            return Ok(Some(Self {
                points,
                factor: Factor::Circulant {
                    sqrt_eig: vec![v.sqrt()],
                    fft,
                },
                method: SimulationMethod::CirculantEmbedding,
                embedding_size: Some(1),
                jitter: 0.0,
            }));
        }
        let minimal = 2 * (points - 1);
        let mut sizes = vec![minimal];
        let mut m = minimal.next_power_of_two();
        if m == minimal {
            m *= 2;
        }
        while m <= minimal * MAX_PADDING_FACTOR {
            sizes.push(m);
            m *= 2;
        }
        let mut planner = FftPlanner::new();
        for m in sizes {
            let fft = planner.plan_fft_forward(m);
            let mut row: Vec<Complex<f64>> = (0..m)
                .map(|k| Complex::new(kernel.eval(k.min(m - k) as f64 * h), 0.0))
                .collect();
            fft.process(&mut row);
            let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
            let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
            if !(max > 0.0) || !max.is_finite() {
                return Err(Error::Simulation(format!(
                    "circulant spectrum of {kernel} is not positive"
                )));
            }
            if min >= -SPECTRAL_NEGATIVITY_TOL * max {
                let scale = 1.0 / m as f64;
                let sqrt_eig = row.iter().map(|c| (c.re.max(0.0) * scale).sqrt()).collect();
                return Ok(Some(Self {
                    points,
                    factor: Factor::Circulant { sqrt_eig, fft },
                    method: SimulationMethod::CirculantEmbedding,
                    embedding_size: Some(m),
                    jitter: 0.0,
                }));
            }
        }
        Ok(None)
    }

    fn cholesky(kernel: &KernelModel, points: usize, h: f64) -> Result<Self> {
        if points > CHOLESKY_MAX_POINTS {
            return Err(Error::Simulation(format!(
                "Cholesky fallback limited to {CHOLESKY_MAX_POINTS} points, got {points}"
            )));
        }
        let grid: Vec<f64> = (0..points).map(|i| i as f64 * h).collect();
        let gram = kernel.gram_matrix(&grid);
        let k0 = kernel.eval(0.0);
        for rel in [0.0, 1e-14, 1e-12, MAX_JITTER] {
            let mut m = gram.clone();
            let jitter = rel * k0;
            for i in 0..points {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = m.cholesky() {
                return Ok(Self {
                    points,
                    factor: Factor::Cholesky { lower: ch.unpack() },
                    method: SimulationMethod::Cholesky,
                    embedding_size: None,
                    jitter,
                });
            }
        }
        Err(Error::Simulation(format!(
            "Cholesky factorization of the {points}-point Gram matrix of {kernel} failed with jitter up to {MAX_JITTER:e}·K(0)"
        )))
    }

    /// One draw of `(Z_{t_0}, …, Z_{t_{N-1}})` from the stream `seed`.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.factor {
            Factor::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(self.points);
                buf.into_iter().map(|c| c.re).collect()
            }
            Factor::Cholesky { lower } => {
                let e = DVector::from_iterator(self.points, (0..self.points).map(|_| StandardNormal.sample(rng)));
                (lower * e).iter().copied().collect()
            }
        }
    }
}

/// Prepared sampler for the drifted model `X_t = Z_t + ∫_0^t μ(s) ds` on a scheme.
pub struct ModelSimulator {
    kernel: KernelModel,
    drift: DriftModel,
    scheme: SamplingScheme,
    sampler: GpSampler,
    drift_path: Vec<f64>,
}

impl ModelSimulator {
    pub fn new(
        kernel: &KernelModel,
        drift: &DriftModel,
        scheme: &SamplingScheme,
        pref: MethodPreference,
    ) -> Result<Self> {
        let sampler = GpSampler::new(kernel, scheme.n + 1, scheme.h, pref)?;
        let drift_path = scheme
            .grid()
            .iter()
            .map(|&t| drift.integral(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kernel: kernel.clone(),
            drift: drift.clone(),
            scheme: *scheme,
            sampler,
            drift_path,
        })
    }

    pub fn sampler(&self) -> &GpSampler {
        &self.sampler
    }

    pub fn scheme(&self) -> &SamplingScheme {
        &self.scheme
    }

    /// `∫_0^{t_i} μ(s) ds` on the grid.
    pub fn drift_path(&self) -> &[f64] {
        &self.drift_path
    }

    /// Drift-free draw `Z` for `seed`.
    pub fn sample_z(&self, seed: u64) -> PathSample {
        let values = self.sampler.sample(seed);
        self.wrap(values, seed, false)
    }

    /// `X = Z + ∫μ` for `seed`; the same seed gives the same `Z` as [`Self::sample_z`].
    pub fn simulate(&self, seed: u64) -> PathSample {
        let mut values = self.sampler.sample(seed);
        for (v, d) in values.iter_mut().zip(&self.drift_path) {
            *v += d;
        }
        self.wrap(values, seed, true)
    }

    fn wrap(&self, values: Vec<f64>, seed: u64, with_drift: bool) -> PathSample {
        let drift = if with_drift {
            DriftSpec::from_model(&self.drift)
        } else {
            Some(DriftSpec::Zero)
        };
        PathSample {
            times: self.scheme.grid(),
            values,
            h: self.scheme.h,
            seed: Some(seed),
            truth: Some(Truth {
                kernel: self.kernel.clone(),
                drift,
            }),
            method: Some(self.sampler.method()),
        }
    }
}

/// Drift-free path `Z` with law `N(0, Gram)`.
pub fn sample_stationary_gp(kernel: &KernelModel, scheme: &SamplingScheme, seed: u64) -> Result<PathSample> {
    let sim = ModelSimulator::new(kernel, &DriftModel::zero(), scheme, MethodPreference::Auto)?;
    Ok(sim.sample_z(seed))
}

/// Drifted path `X_{t_i} = Z_{t_i} + ∫_0^{t_i} μ(s) ds`.
pub fn simulate_model(
    kernel: &KernelModel,
    drift: &DriftModel,
    scheme: &SamplingScheme,
    seed: u64,
) -> Result<PathSample> {
    let sim = ModelSimulator::new(kernel, drift, scheme, MethodPreference::Auto)?;
    Ok(sim.simulate(seed))
}

/// Biased sample autocovariance of mean-removed values for lags `0..=maxlag`.
pub fn empirical_covariance(values: &[f64], maxlag: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if maxlag >= n {
        return Err(Error::InvalidInput(format!(
            "maxlag {maxlag} must be below the series length {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = values.iter().map(|v| v - mean).collect();
    Ok((0..=maxlag)
        .map(|k| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_rule_and_regime() {
        let s = SamplingScheme::from_rule(1000, 0.4).unwrap();
        assert!((s.h - 1000f64.powf(-0.4)).abs() < 1e-15);
        assert_eq!(s.grid().len(), 1001);
        assert_eq!(s.grid()[0], 0.0);
        assert_eq!(
            s.regime(),
            Some(Regime {
                step_vanishes: true,
                horizon_diverges: true
            })
        );
        assert!(
            !SamplingScheme::from_rule(10, 1.2)
                .unwrap()
                .regime()
                .unwrap()
                .horizon_diverges
        );
        assert!(SamplingScheme::new(1, 0.1).is_err());
        assert!(SamplingScheme::new(5, 0.0).is_err());
    }

    #[test]
    fn derive_seed_is_stable_and_spreads() {
        assert_eq!(derive_seed(42, &[1, 2]), derive_seed(42, &[1, 2]));
        assert_ne!(derive_seed(42, &[1, 2]), derive_seed(42, &[2, 1]));
        assert_ne!(derive_seed(42, &[0]), derive_seed(43, &[0]));
    }

    #[test]
    fn same_seed_same_path() {
        let k = KernelModel::gaussian(1.0, 1.0).unwrap();
        let s = SamplingScheme::new(200, 0.1).unwrap();
        let a = sample_stationary_gp(&k, &s, 7).unwrap();
        let b = sample_stationary_gp(&k, &s, 7).unwrap();
        assert_eq!(a.values, b.values);
        let c = sample_stationary_gp(&k, &s, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn drift_shift_is_exact() {
        let k = KernelModel::gaussian(1.0, 1.0).unwrap();
        let s = SamplingScheme::from_rule(300, 0.4).unwrap();
        let d = DriftModel::exp_decay(2.0);
        let sim = ModelSimulator::new(&k, &d, &s, MethodPreference::Auto).unwrap();
        let z = sim.sample_z(3);
        let x = sim.simulate(3);
        for (i, t) in s.grid().iter().enumerate() {
            assert_eq!(x.values[i], z.values[i] + sim.drift_path()[i]);
            assert!((sim.drift_path()[i] - 2.0 * -(-t).exp_m1()).abs() < 1e-15);
        }
        assert_eq!(x.values[0], z.values[0]);
        let zero = simulate_model(&k, &DriftModel::zero(), &s, 3).unwrap();
        assert_eq!(zero.values, z.values);
    }

    #[test]
    fn empirical_covariance_basics() {
        let c = empirical_covariance(&[2.0; 10], 3).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-15));
        assert!(empirical_covariance(&[1.0, 2.0], 2).is_err());
        let c = empirical_covariance(&[1.0, -1.0, 1.0, -1.0], 1).unwrap();
        assert_eq!(c, vec![1.0, -0.75]);
    }

    #[test]
    fn padding_rescues_short_smooth_grids() {
        // horizon ~3.5 leaves K(T) ≈ 2e-3, so the minimal embedding is indefinite
        let k = KernelModel::gaussian(1.0, 1.0).unwrap();
        let s = SamplingScheme::from_rule(500, 0.8).unwrap();
        let g = GpSampler::new(&k, s.n + 1, s.h, MethodPreference::Auto).unwrap();
        assert_eq!(g.method(), SimulationMethod::CirculantEmbedding);
        assert!(g.embedding_size().unwrap() > 2 * s.n);
    }

    #[test]
    fn single_point_variance() {
        let k = KernelModel::rational_quadratic(2.0, 1.0, 1.0).unwrap();
        let g = GpSampler::new(&k, 1, 0.1, MethodPreference::Auto).unwrap();
        let reps = 100_000;
        let m2 = (0..reps).map(|s| g.sample(s)[0].powi(2)).sum::<f64>() / reps as f64;
        // Var(Z²) = 2 K(0)²
        let se = (2.0f64 * 4.0 / reps as f64).sqrt();
        assert!((m2 - 2.0).abs() < 3.0 * se, "{m2}");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let k = KernelModel::gaussian(1.0, 1.0).unwrap();
        let s = SamplingScheme::from_rule(50, 0.4).unwrap();
        let p = simulate_model(&k, &DriftModel::exp_decay(2.0), &s, 11).unwrap();
        let f = dir.path().join("path.csv");
        p.write(&f, Some(&s)).unwrap();
        let q = PathSample::read(&f).unwrap();
        assert_eq!(p, q);
    }
}
