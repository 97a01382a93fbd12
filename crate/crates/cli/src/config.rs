use std::fs;
use std::path::{Path, PathBuf};

use gpdrift::drift::DriftSpec;
use gpdrift::experiments::ExperimentSpec;
use gpdrift::kernels::KernelSpec;
use gpdrift::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Default output directory when neither `--out` nor this variable is set.
pub const OUT_DIR_ENV: &str = "GPDRIFT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "gpdrift-out";

/// Every section a configuration file may contain.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub kernel: Option<KernelSpec>,
    pub drift: Option<DriftSpec>,
    pub sampling: Option<SamplingConfig>,
    pub estimate: Option<EstimateConfig>,
    pub moments: Option<MomentsConfig>,
    pub experiment: Option<ExperimentSpec>,
    pub qq: Option<QqConfig>,
    pub kernel_info: Option<KernelInfoConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub n: Option<usize>,
    /// Fixed step; mutually exclusive with `h_exponent`.
    pub h: Option<f64>,
    /// `a` in `h = n^{-a}`.
    pub h_exponent: Option<f64>,
    /// `auto`, `circulant` or `cholesky`.
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub input: Option<String>,
    /// `gaussian`, `rq`, `ou` or `contrast`.
    pub method: Option<String>,
    /// `moment_matched` or `half_variant`.
    pub convention: Option<String>,
    pub epsilon: Option<f64>,
    pub alpha_known: Option<f64>,
    /// `consistent` or `printed`.
    pub ou_scaling: Option<String>,
    pub free: Option<Vec<usize>>,
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub input: Option<String>,
    pub functions: Option<Vec<String>>,
    pub functionals: Option<Vec<String>>,
    pub free: Option<Vec<usize>>,
    pub init: Option<Vec<f64>>,
    /// Refit the drift coefficients before de-trending.
    pub fit_drift: Option<bool>,
    pub bandwidth: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QqConfig {
    pub input: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelInfoConfig {
    pub lags: Option<Vec<f64>>,
    pub max_lag: Option<f64>,
    pub steps: Option<usize>,
}

/// A parsed configuration together with the directory relative paths resolve against.
pub struct Loaded {
    pub config: Config,
    pub base_dir: Option<PathBuf>,
}

/// Reads a TOML or JSON file (or the `config` of a manifest), applies overrides and validates keys.
pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Loaded> {
    let mut value = match path {
        Some(p) => read_value(p)?,
        None => Value::Object(Map::new()),
    };
    for (key, v) in overrides {
        let alias = match key.as_str() {
            "experiment.master_seed" => Some("seed"),
            "experiment.seed" => Some("master_seed"),
            _ => None,
        };
        if let (Some(a), Some(exp)) = (alias, value.get_mut("experiment").and_then(Value::as_object_mut)) {
            exp.remove(a);
        }
        set_path(&mut value, key, v.clone())?;
    }
    let config: Config = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    let base_dir = path.and_then(|p| p.parent()).map(Path::to_path_buf);
    Ok(Loaded { config, base_dir })
}

fn read_value(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    match value {
        Value::Object(mut m) if m.contains_key("config_sha256") => match m.remove("config") {
            Some(c) => Ok(c),
            None => Err(Error::Config(format!("{}: manifest has no config", path.display()))),
        },
        Value::Object(_) => Ok(value),
        _ => Err(Error::Config(format!("{}: top level must be a table", path.display()))),
    }
}

/// Parses `key=value`; the value is read as JSON when possible and as a string otherwise.
pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, v) = raw
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{raw}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{raw}` has an empty key")));
    }
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((key.to_string(), value))
}

/// Sets a dotted key, creating intermediate tables.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{key}`: `{}` is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Resolves the output directory: flag, then environment, then the default.
pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    }
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Versions {
    gpdrift: &'static str,
    gpdrift_cli: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    versions: Versions,
    seed: Option<u64>,
    jobs: Option<usize>,
    config_sha256: String,
    config: &'a Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Provenance of one run, written as `manifest.json` next to the outputs.
pub struct Provenance {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Provenance {
    pub fn new(command: &'static str, config: Value) -> Self {
        Self {
            command,
            seed: None,
            jobs: None,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let digest = |p: &PathBuf| -> Result<FileDigest> {
            let shown = p.strip_prefix(dir).unwrap_or(p);
            Ok(FileDigest {
                path: shown.display().to_string(),
                sha256: sha256_hex(&fs::read(p)?),
            })
        };
        let manifest = Manifest {
            command: self.command,
            versions: Versions {
                gpdrift: gpdrift::VERSION,
                gpdrift_cli: env!("CARGO_PKG_VERSION"),
            },
            seed: self.seed,
            jobs: self.jobs,
            config_sha256: sha256_hex(serde_json::to_string(&self.config)?.as_bytes()),
            config: &self.config,
            inputs: self.inputs.iter().map(digest).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(digest).collect::<Result<_>>()?,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_json_or_string() {
        assert_eq!(
            parse_override("kernel.alpha=2").unwrap(),
            ("kernel.alpha".into(), Value::from(2))
        );
        assert_eq!(parse_override("kernel.family=rq").unwrap().1, Value::from("rq"));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("a..b=1").is_err());
    }

    #[test]
    fn dotted_keys_create_tables() {
        let mut v = Value::Object(Map::new());
        set_path(&mut v, "sampling.n", Value::from(10)).unwrap();
        set_path(&mut v, "seed", Value::from(3)).unwrap();
        assert_eq!(v["sampling"]["n"], 10);
        assert!(set_path(&mut v, "seed.x", Value::from(1)).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = load(None, &[("bogus".into(), Value::from(1))]).err().unwrap();
        assert!(err.is_config());
        let err = load(None, &[("sampling.m".into(), Value::from(1))]).err().unwrap();
        assert!(err.is_config());
        assert!(load(None, &[("sampling.n".into(), Value::from(5))]).is_ok());
    }
}
