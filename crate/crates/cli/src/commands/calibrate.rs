use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use dualcloak::embedding::{calibrate_threshold, cosine_similarity, embed, FaceEmbedding};
use dualcloak::image::load_image;
use dualcloak::zoo::Zoo;
use serde::{Deserialize, Serialize};

use crate::components::embedders;
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::util::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRecord {
    pub tau: f64,
    pub far: f64,
    pub n_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub type ThresholdTable = BTreeMap<String, ThresholdRecord>;

/// Reads a JSON list of `[image_a, image_b]` paths, relative to the list file.
pub fn load_pairs(path: &Path) -> CliResult<Vec<(PathBuf, PathBuf)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw: Vec<(PathBuf, PathBuf)> = serde_json::from_str(&text).map_err(|e| {
        CliError::usage(format!("{}: expected a list of [a, b] image pairs: {e}", path.display()))
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let fix = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
    Ok(raw.into_iter().map(|(a, b)| (fix(a), fix(b))).collect())
}

pub fn load_thresholds(path: &Path) -> CliResult<ThresholdTable> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: not a threshold table: {e}", path.display())))
}

/// Calibrates every ensemble member and the holdout on impostor pairs.
pub fn cmd_calibrate(loaded: &LoadedConfig, zoo: &Zoo, pairs_file: &Path) -> CliResult<ThresholdTable> {
    let cfg = &loaded.config;
    let pairs = load_pairs(pairs_file)?;
    if pairs.is_empty() {
        return Err(CliError::usage(format!("{} lists no pairs", pairs_file.display())));
    }
    let mut names = cfg.ensemble.clone();
    if let Some(h) = &cfg.holdout {
        if !names.contains(h) {
            names.push(h.clone());
        }
    }
    let models = embedders(zoo, &names)?;
    let mut images = HashMap::new();
    for p in pairs.iter().flat_map(|(a, b)| [a, b]) {
        if !images.contains_key(p) {
            images.insert(p.clone(), load_image(p)?);
        }
    }
    let warning = ((pairs.len() as f64) < 1.0 / cfg.far).then(|| {
        format!(
            "{} pairs is fewer than 1/far = {:.0}; tau is interpolated from sparse tail data",
            pairs.len(),
            (1.0 / cfg.far).ceil()
        )
    });
    if let Some(w) = &warning {
        tracing::warn!("{w}");
    }
    let mut table = ThresholdTable::new();
    for model in &models {
        let mut cache: HashMap<&PathBuf, FaceEmbedding> = HashMap::new();
        let mut scores = Vec::with_capacity(pairs.len());
        for (a, b) in &pairs {
            for p in [a, b] {
                if !cache.contains_key(p) {
                    cache.insert(p, embed(model.as_ref(), &images[p])?);
                }
            }
            scores.push(cosine_similarity(&cache[a], &cache[b])?);
        }
        let thr = calibrate_threshold(&scores, cfg.far)?;
        table.insert(
            model.name().to_string(),
            ThresholdRecord {
                tau: thr.tau,
                far: thr.far,
                n_pairs: scores.len(),
                warning: warning.clone(),
            },
        );
    }
    Ok(table)
}

pub fn write_thresholds(path: &Path, table: &ThresholdTable) -> CliResult<()> {
    write_json(path, table)
}
