//! Run configuration: a strict, versioned JSON schema with dotted-path
//! overrides.

use std::path::{Path, PathBuf};

use dualcloak::attacks::AttackConfig;
use dualcloak::zoo::{DEFAULT_ENSEMBLE, DEFAULT_HOLDOUT};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default = "default_ensemble")]
    pub ensemble: Vec<String>,
    #[serde(default = "default_holdout")]
    pub holdout: Option<String>,
    #[serde(default = "default_generator")]
    pub generator: String,
    #[serde(default)]
    pub attribute: AttributeSpec,
    #[serde(default)]
    pub parser: ParserSpec,
    /// One image used for every input, or a directory paired by file name.
    pub target_image: PathBuf,
    pub io: IoSpec,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for per-image jobs; 0 means one per logical core.
    #[serde(default)]
    pub workers: usize,
    /// False-accept rate used by `calibrate`.
    #[serde(default = "default_far")]
    pub far: f64,
    /// Output of `calibrate`, read by `evaluate`.
    #[serde(default)]
    pub thresholds: Option<PathBuf>,
    #[serde(default)]
    pub api: ApiSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    /// Built-in direction of the generator ("smile", "age", "none").
    pub name: String,
    /// JSON direction file; takes precedence over `name`.
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Replaces the direction's own strength.
    #[serde(default)]
    pub strength: Option<f64>,
}

impl Default for AttributeSpec {
    fn default() -> Self {
        Self {
            name: "smile".into(),
            file: None,
            strength: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParserSpec {
    pub name: String,
    #[serde(default)]
    pub annotation_dir: Option<PathBuf>,
    #[serde(default)]
    pub hair_label: Option<u8>,
}

impl Default for ParserSpec {
    fn default() -> Self {
        Self {
            name: "annotation".into(),
            annotation_dir: None,
            hair_label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSpec {
    /// An image file or a directory of images.
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiSpec {
    /// Service base URL, or "mock" for an in-process server backed by the
    /// holdout embedder. Unset disables API scoring.
    #[serde(default)]
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
    /// Maximum requests in flight; 1 keeps scoring sequential.
    pub parallelism: usize,
}

impl Default for ApiSpec {
    fn default() -> Self {
        Self {
            endpoint: None,
            timeout_secs: 10.0,
            retries: 2,
            parallelism: 1,
        }
    }
}

fn default_ensemble() -> Vec<String> {
    DEFAULT_ENSEMBLE.iter().map(|s| s.to_string()).collect()
}

fn default_holdout() -> Option<String> {
    Some(DEFAULT_HOLDOUT.to_string())
}

fn default_generator() -> String {
    "toy-decoder".into()
}

fn default_far() -> f64 {
    0.01
}

/// A parsed config together with the directory relative paths resolve
/// against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Sets `path` (dot separated) inside `root` to `value`, creating objects
/// along the way. The value is parsed as JSON when possible and taken as a
/// string otherwise.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> CliResult<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::usage(format!("bad override path `{path}`")));
    }
    let mut cur = root;
    for key in &keys[..keys.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::usage(format!("`{path}`: `{key}` is not inside an object")))?;
        cur = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| CliError::usage(format!("`{path}` does not point into an object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> CliResult<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| CliError::usage(format!("override `{s}` is not of the form key=value")))
}

/// Deserializes with field-level error paths and checks invariants.
pub fn from_value(value: Value) -> CliResult<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::usage(format!("config field `{path}`: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path, overrides: &[(String, String)]) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    for (k, v) in overrides {
        apply_override(&mut value, k, v)?;
    }
    let config = from_value(value)?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig { config, base_dir })
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::usage(format!(
                "config field `schema_version`: expected {CONFIG_SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        self.attack
            .validate()
            .map_err(|e| CliError::usage(format!("config field `attack`: {e}")))?;
        if self.ensemble.is_empty() {
            return Err(CliError::usage("config field `ensemble`: at least one embedder is required"));
        }
        if !(self.far > 0.0 && self.far <= 1.0) {
            return Err(CliError::usage(format!("config field `far`: {} is not in (0, 1]", self.far)));
        }
        if !(self.api.timeout_secs > 0.0) || self.api.parallelism == 0 {
            return Err(CliError::usage(
                "config field `api`: timeout_secs and parallelism must be positive",
            ));
        }
        Ok(())
    }

    /// Evaluation needs a holdout model outside the attack ensemble.
    pub fn holdout_for_evaluation(&self) -> CliResult<&str> {
        let h = self
            .holdout
            .as_deref()
            .ok_or_else(|| CliError::usage("config field `holdout`: required for evaluation"))?;
        if self.ensemble.iter().any(|e| e == h) {
            return Err(CliError::usage(format!(
                "config field `holdout`: `{h}` is also in the attack ensemble"
            )));
        }
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "schema_version": 1,
            "target_image": "t.png",
            "io": {"input": "in", "output": "out"}
        })
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = from_value(minimal()).unwrap();
        assert_eq!(cfg.attack, AttackConfig::default());
        assert_eq!(cfg.ensemble.len(), 3);
        assert_eq!(cfg.far, 0.01);
        assert_eq!(cfg.holdout_for_evaluation().unwrap(), "convnet-d");
    }

    #[test]
    fn unknown_keys_name_the_field() {
        let mut v = minimal();
        v["attack"] = json!({"epsilonn": 0.1});
        let err = from_value(v).unwrap_err().to_string();
        assert!(err.contains("attack"), "{err}");
        assert!(err.contains("epsilonn"), "{err}");
    }

    #[test]
    fn overrides_parse_json_or_fall_back_to_strings() {
        let mut v = minimal();
        apply_override(&mut v, "attack.mode", "pgd").unwrap();
        apply_override(&mut v, "attack.off_steps", "3").unwrap();
        apply_override(&mut v, "ensemble", r#"["toy-linear"]"#).unwrap();
        let cfg = from_value(v).unwrap();
        assert_eq!(cfg.attack.mode.as_str(), "pgd");
        assert_eq!(cfg.attack.off_steps, 3);
        assert_eq!(cfg.ensemble, vec!["toy-linear"]);
    }

    #[test]
    fn holdout_inside_ensemble_is_rejected() {
        let mut v = minimal();
        v["holdout"] = json!("convnet-a");
        assert!(from_value(v).unwrap().holdout_for_evaluation().is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = from_value(minimal()).unwrap();
        let again = from_value(serde_json::from_str(&cfg.to_json()).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
