use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use gpdrift::asymptotics::{fisher_blocks, fisher_blocks_curvature, standard_errors, AsymptoticInfo, Parameterization};
use gpdrift::contrast::{
    drift_param_names, gaussian_estimate, least_squares_drift, minimize_contrast, ou_estimate, rq_estimate,
    ContrastModel, CurvatureConvention, EstimateReport, OuScaling,
};
use gpdrift::drift::{DriftModel, DriftSpec};
use gpdrift::experiments::{
    qq_data, qq_file_name, read_records_csv, run_and_write, run_case, write_qq_csv, ESTIMATORS,
};
use gpdrift::kernels::{KernelFamily, KernelModel, KernelSpec};
use gpdrift::moments::{
    detrend, empirical_increment_moment, estimate_k4, g_functional, increment_moment_limit, moment_alpha, moment_beta,
    moment_long_run_variance, z_estimator, GFunctional, MomentFunction,
};
use gpdrift::optim::NelderMeadOptions;
use gpdrift::simulate::{MethodPreference, ModelSimulator, PathSample, SamplingScheme};
use gpdrift::{Error, Result};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::config::{Loaded, Provenance, SamplingConfig};

pub const DEFAULT_SEED: u64 = 42;
const DEFAULT_N: usize = 1000;
const DEFAULT_H_EXPONENT: f64 = 0.4;
const DEFAULT_MAX_LAG: f64 = 5.0;
const DEFAULT_LAG_STEPS: usize = 50;

fn named<T: DeserializeOwned>(what: &str, name: &str) -> Result<T> {
    serde_json::from_value(Value::String(name.to_string()))
        .map_err(|_| Error::Config(format!("unknown {what} `{name}`")))
}

fn outcome(r: Result<f64>) -> Value {
    match r {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_path(input: Option<&str>, command: &str) -> Result<(PathSample, Vec<PathBuf>)> {
    let input = input.ok_or_else(|| Error::Config(format!("{command} needs an input path (--input)")))?;
    let csv = PathBuf::from(input);
    let path = PathSample::read(&csv)?;
    let sidecar = PathSample::sidecar_path(&csv);
    let mut inputs = vec![csv];
    if sidecar.exists() {
        inputs.push(sidecar);
    }
    Ok((path, inputs))
}

fn drift_spec_for(loaded: &Loaded, path: &PathSample) -> DriftSpec {
    loaded
        .config
        .drift
        .clone()
        .or_else(|| path.truth.as_ref().and_then(|t| t.drift.clone()))
        .unwrap_or(DriftSpec::ExpDecay { xi: 0.0 })
}

fn kernel_spec_for(loaded: &Loaded, path: &PathSample) -> Option<KernelSpec> {
    loaded
        .config
        .kernel
        .clone()
        .or_else(|| path.truth.as_ref().map(|t| KernelSpec::from(t.kernel.clone())))
}

fn fitted_drift(report: &EstimateReport, drift: &DriftModel) -> Result<DriftModel> {
    if drift.is_zero() {
        return Ok(drift.clone());
    }
    let xi = drift_param_names(drift.dim())
        .iter()
        .map(|name| report.value(name))
        .collect::<Result<Vec<_>>>()?;
    drift.with_xi(xi)
}

pub fn simulate(loaded: &Loaded, out: &Path) -> Result<Provenance> {
    let c = &loaded.config;
    let kernel_spec = c
        .kernel
        .clone()
        .unwrap_or(KernelSpec::Gaussian { alpha: 1.0, beta: 1.0 });
    let drift_spec = c.drift.clone().unwrap_or(DriftSpec::ExpDecay { xi: 2.0 });
    let mut sampling = c.sampling.clone().unwrap_or_default();
    let scheme = resolve_scheme(&mut sampling)?;
    let pref = match sampling.method.as_deref().unwrap_or("auto") {
        "auto" => MethodPreference::Auto,
        "circulant" => MethodPreference::Circulant,
        "cholesky" => MethodPreference::Cholesky,
        other => return Err(Error::Config(format!("unknown sampling method `{other}`"))),
    };
    sampling.method.get_or_insert_with(|| "auto".into());
    let seed = c.seed.unwrap_or(DEFAULT_SEED);
    let kernel = KernelModel::try_from(kernel_spec.clone())?;
    let drift = drift_spec.build(loaded.base_dir.as_deref())?;
    let path = ModelSimulator::new(&kernel, &drift, &scheme, pref)?.simulate(seed);

    fs::create_dir_all(out)?;
    let csv = out.join("path.csv");
    path.write(&csv, Some(&scheme))?;
    let drift_spec = DriftSpec::from_model(&drift).unwrap_or(drift_spec);
    let mut prov = Provenance::new(
        "simulate",
        json!({ "seed": seed, "kernel": kernel_spec, "drift": drift_spec, "sampling": sampling }),
    );
    prov.seed = Some(seed);
    prov.outputs = vec![csv.clone(), PathSample::sidecar_path(&csv)];
    Ok(prov)
}

fn resolve_scheme(sampling: &mut SamplingConfig) -> Result<SamplingScheme> {
    let n = *sampling.n.get_or_insert(DEFAULT_N);
    match (sampling.h, sampling.h_exponent) {
        (Some(_), Some(_)) => Err(Error::Config(
            "set either sampling.h or sampling.h_exponent, not both".into(),
        )),
        (Some(h), None) => SamplingScheme::new(n, h),
        (None, a) => SamplingScheme::from_rule(n, *sampling.h_exponent.get_or_insert(a.unwrap_or(DEFAULT_H_EXPONENT))),
    }
}

pub fn estimate(loaded: &Loaded, out: &Path) -> Result<Provenance> {
    let mut est = loaded.config.estimate.clone().unwrap_or_default();
    let (path, inputs) = read_path(est.input.as_deref(), "estimate")?;
    let drift_spec = drift_spec_for(loaded, &path);
    let drift = drift_spec.build(loaded.base_dir.as_deref())?;
    let kernel_spec = kernel_spec_for(loaded, &path);
    let family = kernel_spec
        .clone()
        .map(KernelModel::try_from)
        .transpose()?
        .map(|k| k.family());
    let method = est.method.clone().unwrap_or_else(|| {
        match family {
            Some(KernelFamily::RationalQuadratic) => "rq",
            Some(KernelFamily::ExponentialOU | KernelFamily::MollifiedOU) => "ou",
            Some(KernelFamily::Matern) => "contrast",
            Some(KernelFamily::Gaussian) | None => "gaussian",
        }
        .to_string()
    });
    est.method = Some(method.clone());

    let mut used_kernel = None;
    let (report, info) = match method.as_str() {
        "gaussian" => {
            let report = gaussian_estimate(&path, &drift)?;
            let info = report
                .value("gamma")
                .and_then(|g| fisher_blocks_curvature(g, &fitted_drift(&report, &drift)?, "gamma"));
            (report, info)
        }
        "rq" => {
            let convention: CurvatureConvention =
                named("convention", est.convention.get_or_insert("moment_matched".into()))?;
            let report = rq_estimate(&path, &drift, convention)?;
            let info = report
                .value("delta")
                .and_then(|d| fisher_blocks_curvature(d, &fitted_drift(&report, &drift)?, "delta"));
            (report, info)
        }
        "ou" => {
            let scaling: OuScaling = named("OU scaling", est.ou_scaling.get_or_insert("consistent".into()))?;
            let eps = *est.epsilon.get_or_insert(0.5 * path.h);
            let report = ou_estimate(&path, &drift, Some(eps), est.alpha_known, scaling)?;
            let info = (|| {
                let alpha = match est.alpha_known {
                    Some(a) => a,
                    None => report.value("alpha")?,
                };
                let k = KernelModel::mollified_ou(alpha, report.value("beta")?, eps)?;
                fisher_blocks(&k, &fitted_drift(&report, &drift)?, &[1], Parameterization::Natural)
            })();
            (report, info)
        }
        "contrast" => {
            let spec = kernel_spec
                .clone()
                .ok_or_else(|| Error::Config("the contrast method needs a [kernel] template".into()))?;
            let template = KernelModel::try_from(spec.clone())?;
            used_kernel = Some(spec);
            let free = est.free.get_or_insert_with(|| vec![1]).clone();
            let model = ContrastModel::kernel(&drift, &template, &free)?;
            let fit = minimize_contrast(&path, &model, est.init.as_deref(), None, &NelderMeadOptions::default())?;
            let info = model.split(&fit.theta).and_then(|(d, k)| {
                let k = k.ok_or_else(|| Error::Numerical("contrast fit returned no kernel".into()))?;
                fisher_blocks(&k, &d, &free, Parameterization::Natural)
            });
            (fit.report, info)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown estimation method `{other}` (expected gaussian, rq, ou or contrast)"
            )))
        }
    };
    let report = attach(report, info, &path);

    fs::create_dir_all(out)?;
    let file = out.join("estimate.json");
    write_json(&file, &report)?;
    let mut config = json!({ "estimate": est, "drift": drift_spec });
    if let Some(k) = used_kernel {
        config["kernel"] = json!(k);
    }
    let mut prov = Provenance::new("estimate", config);
    prov.seed = path.seed;
    prov.inputs = inputs;
    prov.outputs = vec![file];
    Ok(prov)
}

fn attach(report: EstimateReport, info: Result<AsymptoticInfo>, path: &PathSample) -> EstimateReport {
    match info {
        Ok(info) => standard_errors(&report, &info, &path.scheme()),
        Err(e) => {
            let mut report = report;
            report
                .diagnostics
                .notes
                .push(format!("standard errors unavailable: {e}"));
            report
        }
    }
}

pub fn moments(loaded: &Loaded, out: &Path) -> Result<Provenance> {
    let mut cfg = loaded.config.moments.clone().unwrap_or_default();
    let (path, inputs) = read_path(cfg.input.as_deref(), "moments")?;
    let drift_spec = drift_spec_for(loaded, &path);
    let drift = drift_spec.build(loaded.base_dir.as_deref())?;
    let fit = *cfg.fit_drift.get_or_insert(true);
    let fitted = if fit && !drift.is_zero() {
        drift.with_xi(least_squares_drift(&path, &drift)?)?
    } else {
        drift.clone()
    };
    let series = detrend(&path, &fitted)?;
    let kernel_spec = kernel_spec_for(loaded, &path);
    let kernel = kernel_spec.clone().map(KernelModel::try_from).transpose()?;

    let increments: Vec<Value> = (1..=3)
        .map(|kappa| {
            let mut row = json!({ "kappa": kappa, "value": outcome(empirical_increment_moment(&series, kappa)) });
            if let Some(k) = &kernel {
                row["limit"] = outcome(increment_moment_limit(k, kappa));
            }
            row
        })
        .collect();

    let g_names = cfg
        .functionals
        .get_or_insert_with(|| vec!["(y-x)^2".into(), "(y-x)y^2".into()])
        .clone();
    let functionals = g_names
        .iter()
        .map(|name| {
            let g = GFunctional::from_name(name)?;
            let mut row = json!({ "name": g.name(), "value": g_functional(&series, &g) });
            if let Some(k) = &kernel {
                row["limit"] = outcome(g.limit(k));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = json!({
        "n": path.n(),
        "h": path.h,
        "drift": fitted.describe(),
        "alpha": moment_alpha(&series),
        "beta": outcome(moment_beta(&series)),
        "k4": outcome(estimate_k4(&path, &fitted)),
        "increment_moments": increments,
        "functionals": functionals,
    });

    let mut config = json!({ "drift": drift_spec });
    if let Some(names) = cfg.functions.clone() {
        let fs = names
            .iter()
            .map(|n| MomentFunction::from_name(n))
            .collect::<Result<Vec<_>>>()?;
        let spec = kernel_spec
            .clone()
            .unwrap_or(KernelSpec::Gaussian { alpha: 1.0, beta: 1.0 });
        let template = KernelModel::try_from(spec.clone())?;
        let free = cfg.free.get_or_insert_with(|| (0..fs.len()).collect()).clone();
        let init = match &cfg.init {
            Some(v) => v.clone(),
            None => free
                .iter()
                .map(|&j| template.params().get(j).copied().unwrap_or(f64::NAN))
                .collect(),
        };
        cfg.init = Some(init.clone());
        let z = z_estimator(&series, &fs, &template, &free, &init)?;
        let lrv: Vec<Value> = fs
            .iter()
            .map(|f| json!({ "function": f.name(), "value": outcome(moment_long_run_variance(&series, f, cfg.bandwidth)) }))
            .collect();
        report["z_estimate"] = json!({
            "family": template.family(),
            "functions": fs.iter().map(MomentFunction::name).collect::<Vec<_>>(),
            "result": z,
        });
        report["long_run_variance"] = json!(lrv);
        config["kernel"] = json!(spec);
    } else if let Some(spec) = kernel_spec {
        config["kernel"] = json!(spec);
    }
    config["moments"] = json!(cfg);

    fs::create_dir_all(out)?;
    let file = out.join("moments.json");
    write_json(&file, &report)?;
    let mut prov = Provenance::new("moments", config);
    prov.seed = path.seed;
    prov.inputs = inputs;
    prov.outputs = vec![file];
    Ok(prov)
}

pub fn replicate(loaded: &Loaded, out: &Path, jobs: Option<usize>) -> Result<Provenance> {
    let config = loaded.config.experiment.clone().unwrap_or_default().resolve()?;
    let result = run_and_write(&config, jobs, out)?;
    for row in &result.summary.rows {
        let sd = row.sd.map_or("-".to_string(), |s| format!("{s:.4}"));
        println!(
            "case {} n={} {}: mean {:.4} sd {} ({} ok)",
            row.case, row.n, row.estimator, row.mean, sd, row.reps_ok
        );
    }
    for w in &result.summary.warnings {
        eprintln!("warning: {w}");
    }
    let mut prov = Provenance::new("replicate", json!({ "experiment": config }));
    prov.seed = Some(config.master_seed);
    prov.jobs = jobs;
    prov.outputs = vec![out.join("summary.csv"), out.join("records.csv")];
    for q in &result.qq {
        prov.outputs.push(qq_file_name(out, &q.estimator, q.n));
    }
    Ok(prov)
}

pub fn qq(loaded: &Loaded, out: &Path, jobs: Option<usize>) -> Result<Provenance> {
    let config = loaded.config.experiment.clone().unwrap_or_default().resolve()?;
    let input = loaded.config.qq.as_ref().and_then(|q| q.input.clone());
    let (records, n_values, inputs) = match &input {
        Some(p) => {
            let p = PathBuf::from(p);
            let records = read_records_csv(&p)?;
            let ns: BTreeSet<usize> = records.iter().map(|r| r.n).collect();
            (records, ns.into_iter().collect(), vec![p])
        }
        None => (run_case(&config, jobs)?, config.n_values.clone(), Vec::new()),
    };
    fs::create_dir_all(out)?;
    let mut prov = Provenance::new("qq", json!({ "experiment": config, "qq": { "input": input } }));
    let mut summary = Vec::new();
    for &n in &n_values {
        for est in ESTIMATORS {
            match qq_data(&config, &records, est, n) {
                Ok(q) => {
                    let file = qq_file_name(out, est, n);
                    write_qq_csv(&file, &q)?;
                    println!("{est} n={n}: QQ correlation {:.4}", q.correlation);
                    summary.push(json!({ "estimator": est, "n": n, "correlation": q.correlation }));
                    prov.outputs.push(file);
                }
                Err(e) => eprintln!("warning: {est} n={n}: {e}"),
            }
        }
    }
    if summary.is_empty() {
        return Err(Error::Numerical(
            "no QQ data could be formed from the replications".into(),
        ));
    }
    let file = out.join("qq.json");
    write_json(&file, &summary)?;
    prov.outputs.push(file);
    prov.seed = Some(config.master_seed);
    prov.jobs = jobs;
    prov.inputs = inputs;
    Ok(prov)
}

pub fn kernel_info(loaded: &Loaded, out: &Path) -> Result<Provenance> {
    let spec = loaded
        .config
        .kernel
        .clone()
        .ok_or_else(|| Error::Config("kernel-info needs a [kernel] table (or --set kernel.family=...)".into()))?;
    let kernel = KernelModel::try_from(spec.clone())?;
    let mut grid = loaded.config.kernel_info.clone().unwrap_or_default();
    let lags = match &grid.lags {
        Some(l) => l.clone(),
        None => {
            let max = *grid.max_lag.get_or_insert(DEFAULT_MAX_LAG);
            let steps = *grid.steps.get_or_insert(DEFAULT_LAG_STEPS);
            if !(max > 0.0 && max.is_finite()) || steps == 0 {
                return Err(Error::Config(format!(
                    "lag grid needs max_lag > 0 and steps >= 1, got {max} and {steps}"
                )));
            }
            (0..=steps).map(|i| max * i as f64 / steps as f64).collect()
        }
    };
    if let Some(bad) = lags.iter().find(|l| !l.is_finite()) {
        return Err(Error::Config(format!("lags must be finite, got {bad}")));
    }

    fs::create_dir_all(out)?;
    let csv = out.join("kernel_info.csv");
    let mut text = String::from("lag,value,increment_variance\n");
    for &t in &lags {
        text.push_str(&format!(
            "{},{},{}\n",
            t,
            kernel.eval(t),
            kernel.increment_variance(t.abs())
        ));
    }
    fs::write(&csv, text)?;
    let params: serde_json::Map<String, Value> = kernel
        .family()
        .param_names()
        .iter()
        .zip(kernel.params())
        .map(|(n, v)| (n.to_string(), json!(v)))
        .collect();
    let info = json!({
        "family": kernel.family(),
        "params": params,
        "k0": kernel.eval(0.0),
        "d1_at_zero": outcome(kernel.d1_at_zero()),
        "d2_at_zero": outcome(kernel.d2_at_zero()),
        "d4_at_zero": outcome(kernel.d4_at_zero()),
    });
    let file = out.join("kernel_info.json");
    write_json(&file, &info)?;
    let mut prov = Provenance::new("kernel-info", json!({ "kernel": spec, "kernel_info": grid }));
    prov.outputs = vec![csv, file];
    Ok(prov)
}
