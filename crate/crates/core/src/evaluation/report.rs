use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, AttackMode};
use crate::error::{Error, Result};

/// Bumped whenever a field is added, removed or changes meaning.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelScore {
    pub model: String,
    pub asr: f64,
    pub tau: f64,
    /// True when the model took no part in crafting the attack.
    pub black_box: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub mode: AttackMode,
    pub per_model: Vec<ModelScore>,
    pub fid: Option<f64>,
    pub api_mean_confidence: Option<f64>,
    pub n_images: usize,
    pub config_echo: AttackConfig,
    /// Files that could not be paired and were left out.
    #[serde(default)]
    pub unpaired: Vec<String>,
}

impl EvaluationReport {
    pub fn new(config: AttackConfig, n_images: usize) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            mode: config.mode,
            per_model: Vec::new(),
            fid: None,
            api_mean_confidence: None,
            n_images,
            config_echo: config,
            unpaired: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::param(format!(
                "report schema_version {} is not {REPORT_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        for s in &self.per_model {
            if !(0.0..=1.0).contains(&s.asr) {
                return Err(Error::param(format!("asr {} of {} outside [0, 1]", s.asr, s.model)));
            }
        }
        if self.fid.is_some_and(|f| !(f >= 0.0)) {
            return Err(Error::param("fid must be non-negative"));
        }
        if self.api_mean_confidence.is_some_and(|c| !(0.0..=100.0).contains(&c)) {
            return Err(Error::param("api_mean_confidence outside [0, 100]"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: Self = serde_json::from_str(&text)?;
        report.validate()?;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut r = EvaluationReport::new(AttackConfig::default(), 3);
        r.per_model.push(ModelScore {
            model: "m".into(),
            asr: 0.5,
            tau: 0.3,
            black_box: true,
        });
        r.fid = Some(1.25);
        let back: EvaluationReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        back.validate().unwrap();
    }

    #[test]
    fn invariants_checked() {
        let mut r = EvaluationReport::new(AttackConfig::default(), 1);
        r.api_mean_confidence = Some(101.0);
        assert!(r.validate().is_err());
    }
}
