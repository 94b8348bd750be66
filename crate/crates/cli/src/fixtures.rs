//! Writes a self-contained synthetic fixture set: source faces with parsing
//! annotations, target faces of other identities, impostor pairs for
//! threshold calibration, and a ready-to-run config.

use std::path::{Path, PathBuf};

use dualcloak::image::save_image;
use dualcloak::synth::{stream_rng, Population, DEFAULT_SIZE};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{
    ApiSpec, AttributeSpec, IoSpec, ParserSpec, RunConfig, CONFIG_SCHEMA_VERSION,
};
use crate::error::CliResult;
use crate::util::{create_dir, write_json};

pub const PAIRS_FILE: &str = "impostor_pairs.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureOptions {
    pub pairs: usize,
    pub impostor_ids: usize,
    pub impostor_pairs: usize,
    pub seed: u64,
    pub size: usize,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            pairs: 50,
            impostor_ids: 100,
            impostor_pairs: 500,
            seed: 99,
            size: DEFAULT_SIZE,
        }
    }
}

pub fn pair_name(i: usize) -> String {
    format!("face_{i:03}")
}

/// Source `i` is identity `i`; its target is identity `pairs + i`.
pub fn write_fixture_set(dir: &Path, opts: &FixtureOptions) -> CliResult<PathBuf> {
    for sub in ["sources", "targets", "annotations", "impostors"] {
        create_dir(&dir.join(sub))?;
    }
    let people = Population::new(opts.seed, "fixture", 2 * opts.pairs);
    for i in 0..opts.pairs {
        let name = pair_name(i);
        let (src, labels) = people.face(i, 0, opts.size)?;
        let (tgt, _) = people.face(opts.pairs + i, 0, opts.size)?;
        save_image(&src, dir.join("sources").join(format!("{name}.png")))?;
        save_image(&tgt, dir.join("targets").join(format!("{name}.png")))?;
        labels.save_png(dir.join("annotations").join(format!("{name}.png")))?;
    }

    let strangers = Population::new(opts.seed, "impostor", opts.impostor_ids.max(2));
    let photo = |i: usize, k: usize| format!("impostors/imp_{i:03}_{k}.png");
    for i in 0..strangers.len() {
        for k in 0..2 {
            save_image(&strangers.face(i, k, opts.size)?.0, dir.join(photo(i, k)))?;
        }
    }
    let mut rng = stream_rng(opts.seed, "impostor-pairs", 0);
    let n = strangers.len();
    let pairs: Vec<(String, String)> = (0..opts.impostor_pairs)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            (photo(a, rng.random_range(0..2)), photo(b, rng.random_range(0..2)))
        })
        .collect();
    write_json(&dir.join(PAIRS_FILE), &pairs)?;

    let config = RunConfig {
        schema_version: CONFIG_SCHEMA_VERSION,
        attack: Default::default(),
        ensemble: dualcloak::zoo::DEFAULT_ENSEMBLE.iter().map(|s| s.to_string()).collect(),
        holdout: Some(dualcloak::zoo::DEFAULT_HOLDOUT.to_string()),
        generator: "toy-decoder".into(),
        attribute: AttributeSpec::default(),
        parser: ParserSpec {
            name: "annotation".into(),
            annotation_dir: Some("annotations".into()),
            hair_label: None,
        },
        target_image: "targets".into(),
        io: IoSpec {
            input: "sources".into(),
            output: "out".into(),
        },
        seed: opts.seed,
        workers: 0,
        far: 0.01,
        thresholds: Some("out/thresholds.json".into()),
        api: ApiSpec::default(),
    };
    let path = dir.join(CONFIG_FILE);
    write_json(&path, &config)?;
    Ok(path)
}
