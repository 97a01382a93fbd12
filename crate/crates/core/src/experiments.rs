//! Monte Carlo harness for the simulation study: exponentially decaying drift,
//! Gaussian kernel, and the closed-form estimators `ξ̂`, `α̂`, `β̂`.
//!
//! * Case I: `h = n^{-0.4}`; `α̂` and `β̂` use the true `ξ₀` for de-trending and
//!   `β̂ = γ̂ / α₀`.
//! * Case II: `h = n^{-0.4}`; everything uses `ξ̂` and `β̂ = γ̂ / α̂`.
//! * Case III: as Case I with `h = n^{-0.8}`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::contrast::{self, CurvatureConvention, Rate};
use crate::drift::DriftModel;
use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::moments;
use crate::simulate::{derive_seed, MethodPreference, ModelSimulator, SamplingScheme};

pub const ESTIMATORS: [&str; 3] = ["xi", "alpha", "beta"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
    III,
    Custom,
}

impl Case {
    fn id(self) -> u64 {
        match self {
            Case::I => 1,
            Case::II => 2,
            Case::III => 3,
            Case::Custom => 4,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
            Case::Custom => "custom",
        })
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            "CUSTOM" => Ok(Case::Custom),
            other => Err(Error::Config(format!(
                "unknown case `{other}` (expected I, II, III or custom)"
            ))),
        }
    }
}

/// One Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub case: Case,
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    /// `a` in `h = n^{-a}`.
    pub h_exponent: f64,
    pub xi0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    /// Use `ξ̂` and `α̂` downstream instead of the true values.
    pub joint: bool,
}

impl ExperimentConfig {
    pub fn preset(case: Case) -> Self {
        let (h_exponent, joint) = match case {
            Case::I | Case::Custom => (0.4, false),
            Case::II => (0.4, true),
            Case::III => (0.8, false),
        };
        Self {
            case,
            n_values: vec![500, 1000, 3000],
            reps: 500,
            master_seed: 42,
            h_exponent,
            xi0: 2.0,
            alpha0: 1.0,
            beta0: 1.0,
            joint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 2) {
            return Err(Error::Config(format!(
                "n values must be at least 2, got {:?}",
                self.n_values
            )));
        }
        if !(self.h_exponent > 0.0 && self.h_exponent.is_finite()) {
            return Err(Error::Config(format!(
                "h exponent must be positive, got {}",
                self.h_exponent
            )));
        }
        if !self.xi0.is_finite() {
            return Err(Error::Config("xi0 must be finite".into()));
        }
        KernelModel::gaussian(self.alpha0, self.beta0)?;
        if self.case != Case::Custom {
            let p = Self::preset(self.case);
            if p.h_exponent != self.h_exponent || p.joint != self.joint {
                return Err(Error::Config(format!(
                    "case {} fixes h_exponent = {} and joint = {}; use case = \"custom\" to change them",
                    self.case, p.h_exponent, p.joint
                )));
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelModel> {
        KernelModel::gaussian(self.alpha0, self.beta0)
    }

    pub fn drift(&self) -> DriftModel {
        DriftModel::exp_decay(self.xi0)
    }

    pub fn scheme(&self, n: usize) -> Result<SamplingScheme> {
        SamplingScheme::from_rule(n, self.h_exponent)
    }

    pub fn truth(&self, estimator: &str) -> Option<f64> {
        match estimator {
            "xi" => Some(self.xi0),
            "alpha" => Some(self.alpha0),
            "beta" => Some(self.beta0),
            _ => None,
        }
    }

    /// Seed of replication `rep` at sample size `n`.
    pub fn seed(&self, n: usize, rep: usize) -> u64 {
        derive_seed(self.master_seed, &[self.case.id(), n as u64, rep as u64])
    }
}

/// Configuration as written in a file; omitted fields take the case preset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub case: Option<String>,
    pub n_values: Option<Vec<usize>>,
    pub reps: Option<usize>,
    #[serde(alias = "seed")]
    pub master_seed: Option<u64>,
    pub h_exponent: Option<f64>,
    pub xi0: Option<f64>,
    pub alpha0: Option<f64>,
    pub beta0: Option<f64>,
    pub joint: Option<bool>,
}

impl ExperimentSpec {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let case = match &self.case {
            Some(s) => s.parse()?,
            None => Case::I,
        };
        let mut c = ExperimentConfig::preset(case);
        if let Some(v) = &self.n_values {
            c.n_values = v.clone();
        }
        if let Some(v) = self.reps {
            c.reps = v;
        }
        if let Some(v) = self.master_seed {
            c.master_seed = v;
        }
        if let Some(v) = self.h_exponent {
            c.h_exponent = v;
        }
        if let Some(v) = self.xi0 {
            c.xi0 = v;
        }
        if let Some(v) = self.alpha0 {
            c.alpha0 = v;
        }
        if let Some(v) = self.beta0 {
            c.beta0 = v;
        }
        if let Some(v) = self.joint {
            c.joint = v;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Estimates from one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub case: String,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub h: f64,
    pub xi: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub error: Option<String>,
}

impl RepRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn get(&self, estimator: &str) -> Option<f64> {
        match estimator {
            "xi" => self.xi,
            "alpha" => self.alpha,
            "beta" => self.beta,
            "gamma" => self.gamma,
            _ => None,
        }
    }
}

struct RepEstimates {
    xi: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

fn estimate_rep(config: &ExperimentConfig, sim: &ModelSimulator, seed: u64) -> Result<RepEstimates> {
    let path = sim.simulate(seed);
    let family = DriftModel::exp_decay(0.0);
    let xi = contrast::least_squares_drift(&path, &family)?[0];
    let xi_used = if config.joint { xi } else { config.xi0 };
    let fitted = DriftModel::exp_decay(xi_used);
    let series = moments::detrend(&path, &fitted)?;
    let alpha = moments::moment_alpha(&series);
    let gamma = contrast::curvature_estimate(&path, &fitted, CurvatureConvention::MomentMatched);
    let denom = if config.joint { alpha } else { config.alpha0 };
    if !(denom > 0.0) {
        return Err(Error::DegenerateVariance(
            "de-trended series is identically zero".into(),
        ));
    }
    Ok(RepEstimates {
        xi,
        alpha,
        beta: gamma / denom,
        gamma,
    })
}

/// Runs every `(n, rep)` cell on `jobs` worker threads (all cores when `None`).
///
/// Records come back sorted by `(n, rep)` and do not depend on `jobs`.
pub fn run_case(config: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<RepRecord>> {
    config.validate()?;
    let kernel = config.kernel()?;
    let drift = config.drift();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Simulation(format!("cannot start worker pool: {e}")))?;
    let mut out = Vec::with_capacity(config.reps * config.n_values.len());
    for &n in &config.n_values {
        let scheme = config.scheme(n)?;
        let sim = ModelSimulator::new(&kernel, &drift, &scheme, MethodPreference::Auto)?;
        let case = config.case.to_string();
        let records: Vec<RepRecord> = pool.install(|| {
            (0..config.reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = config.seed(n, rep);
                    let mut r = RepRecord {
                        case: case.clone(),
                        n,
                        rep,
                        seed,
                        h: scheme.h,
                        xi: None,
                        alpha: None,
                        beta: None,
                        gamma: None,
                        error: None,
                    };
                    match estimate_rep(config, &sim, seed) {
                        Ok(e) => {
                            r.xi = Some(e.xi);
                            r.alpha = Some(e.alpha);
                            r.beta = Some(e.beta);
                            r.gamma = Some(e.gamma);
                        }
                        Err(e) => r.error = Some(e.to_string()),
                    }
                    r
                })
                .collect()
        });
        out.extend(records);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub case: String,
    pub n: usize,
    pub estimator: String,
    pub mean: f64,
    /// Sample standard deviation with denominator `reps_ok - 1`; absent for one record.
    pub sd: Option<f64>,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub truth: Option<f64>,
    /// `∫_{T_n}^∞ |μ(s)| ds` at `T_n = n h`.
    pub dri_tail_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub warnings: Vec<String>,
}

impl SummaryTable {
    pub fn row(&self, n: usize, estimator: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.n == n && r.estimator == estimator)
    }
}

/// Sample mean and standard deviation (denominator `m - 1`).
pub fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt());
    (mean, sd)
}

/// Per `(n, estimator)` means and standard deviations over successful replications.
pub fn summarize(config: &ExperimentConfig, records: &[RepRecord]) -> Result<SummaryTable> {
    let drift = config.drift();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &n in &config.n_values {
        let cell: Vec<&RepRecord> = records.iter().filter(|r| r.n == n).collect();
        let failed = cell.iter().filter(|r| !r.ok()).count();
        let tail = drift.tail_mass(config.scheme(n)?.horizon())?;
        for est in ESTIMATORS {
            let values: Vec<f64> = cell.iter().filter(|r| r.ok()).filter_map(|r| r.get(est)).collect();
            if values.is_empty() {
                warnings.push(format!(
                    "case {} n = {n}: no successful replications for {est}",
                    config.case
                ));
                continue;
            }
            let (mean, sd) = mean_sd(&values);
            rows.push(SummaryRow {
                case: config.case.to_string(),
                n,
                estimator: est.to_string(),
                mean,
                sd,
                reps_ok: values.len(),
                reps_failed: failed,
                truth: config.truth(est),
                dri_tail_mass: tail,
            });
        }
        if failed > 0 {
            warnings.push(format!(
                "case {} n = {n}: {failed} failed replications excluded",
                config.case
            ));
        }
    }
    Ok(SummaryTable { rows, warnings })
}

/// Normal QQ pairs for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqData {
    pub estimator: String,
    pub n: usize,
    pub theoretical: Vec<f64>,
    pub empirical: Vec<f64>,
    /// Pearson correlation of the pairs.
    pub correlation: f64,
}

/// How centred estimates are scaled before pairing with normal quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QqScaling {
    /// Multiply by the rate factor only.
    Rate(Rate),
    /// Multiply by the rate and divide by an asymptotic standard deviation.
    Studentized(Rate, f64),
}

/// Standard-normal quantiles at plotting positions `(i - 0.5)/m`.
pub fn normal_plotting_positions(m: usize) -> Vec<f64> {
    let z = Normal::standard();
    (1..=m).map(|i| z.inverse_cdf((i as f64 - 0.5) / m as f64)).collect()
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, _) = mean_sd(a);
    let (mb, _) = mean_sd(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Sorted `rate · (θ̂ - θ₀)` (optionally studentized) against normal quantiles.
pub fn qq_from_values(
    estimator: &str,
    n: usize,
    h: f64,
    values: &[f64],
    truth: f64,
    scaling: QqScaling,
) -> Result<QqData> {
    if values.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "QQ data for {estimator} at n = {n} needs at least 3 values, got {}",
            values.len()
        )));
    }
    let (rate, sd) = match scaling {
        QqScaling::Rate(r) => (r, 1.0),
        QqScaling::Studentized(r, s) => (r, s),
    };
    let f = rate.factor(n, h) / sd;
    let mut empirical: Vec<f64> = values.iter().map(|v| f * (v - truth)).collect();
    empirical.sort_by(f64::total_cmp);
    let theoretical = normal_plotting_positions(empirical.len());
    let correlation = correlation(&theoretical, &empirical);
    Ok(QqData {
        estimator: estimator.to_string(),
        n,
        theoretical,
        empirical,
        correlation,
    })
}

/// QQ data from replication records with the estimator's own rate.
pub fn qq_data(config: &ExperimentConfig, records: &[RepRecord], estimator: &str, n: usize) -> Result<QqData> {
    let truth = config
        .truth(estimator)
        .ok_or_else(|| Error::InvalidInput(format!("unknown estimator `{estimator}`")))?;
    let rate = if estimator == "xi" {
        Rate::InvSqrtStep
    } else {
        Rate::SqrtN
    };
    let h = config.scheme(n)?.h;
    let values: Vec<f64> = records
        .iter()
        .filter(|r| r.n == n && r.ok())
        .filter_map(|r| r.get(estimator))
        .collect();
    qq_from_values(estimator, n, h, &values, truth, QqScaling::Rate(rate))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary_csv(path: &Path, table: &SummaryTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "case",
        "n",
        "estimator",
        "mean",
        "sd",
        "reps_ok",
        "reps_failed",
        "truth",
        "dri_tail_mass",
    ])?;
    for r in &table.rows {
        w.write_record([
            r.case.clone(),
            r.n.to_string(),
            r.estimator.clone(),
            r.mean.to_string(),
            opt(r.sd),
            r.reps_ok.to_string(),
            r.reps_failed.to_string(),
            opt(r.truth),
            r.dri_tail_mass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv(path: &Path, records: &[RepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["case", "n", "rep", "seed", "h", "xi", "alpha", "beta", "gamma", "error"])?;
    for r in records {
        w.write_record([
            r.case.clone(),
            r.n.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.h.to_string(),
            opt(r.xi),
            opt(r.alpha),
            opt(r.beta),
            opt(r.gamma),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_records_csv`].
pub fn read_records_csv(path: &Path) -> Result<Vec<RepRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 10 {
            return Err(Error::InvalidInput(format!("{}: expected 10 columns", path.display())));
        }
        let num = |i: usize| -> Result<Option<f64>> {
            let s = rec[i].trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::InvalidInput(format!("{}: bad number `{s}`", path.display())))
        };
        let int = |i: usize| -> Result<u64> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{}: bad integer `{}`", path.display(), &rec[i])))
        };
        out.push(RepRecord {
            case: rec[0].to_string(),
            n: int(1)? as usize,
            rep: int(2)? as usize,
            seed: int(3)?,
            h: num(4)?.unwrap_or(f64::NAN),
            xi: num(5)?,
            alpha: num(6)?,
            beta: num(7)?,
            gamma: num(8)?,
            error: (!rec[9].is_empty()).then(|| rec[9].to_string()),
        });
    }
    Ok(out)
}

pub fn write_qq_csv(path: &Path, qq: &QqData) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theoretical", "empirical"])?;
    for (t, e) in qq.theoretical.iter().zip(&qq.empirical) {
        w.write_record([t.to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `qq_<estimator>_<n>.csv` inside `dir`.
pub fn qq_file_name(dir: &Path, estimator: &str, n: usize) -> PathBuf {
    dir.join(format!("qq_{estimator}_{n}.csv"))
}

/// Everything a replicate run produces.
pub struct ExperimentOutput {
    pub records: Vec<RepRecord>,
    pub summary: SummaryTable,
    pub qq: Vec<QqData>,
}

/// Runs the study and writes `summary.csv`, `records.csv` and the QQ files into `dir`.
pub fn run_and_write(config: &ExperimentConfig, jobs: Option<usize>, dir: &Path) -> Result<ExperimentOutput> {
    let records = run_case(config, jobs)?;
    let summary = summarize(config, &records)?;
    fs::create_dir_all(dir)?;
    write_summary_csv(&dir.join("summary.csv"), &summary)?;
    write_records_csv(&dir.join("records.csv"), &records)?;
    let mut qq = Vec::new();
    for &n in &config.n_values {
        for est in ESTIMATORS {
            if let Ok(q) = qq_data(config, &records, est, n) {
                write_qq_csv(&qq_file_name(dir, est, n), &q)?;
                qq.push(q);
            }
        }
    }
    Ok(ExperimentOutput { records, summary, qq })
}
