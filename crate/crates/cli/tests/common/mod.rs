#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dualcloak::zoo::Zoo;
use dualcloak_cli::config::{load, LoadedConfig};
use dualcloak_cli::fixtures::{write_fixture_set, FixtureOptions};

/// Cache shared by every test in this target so trained models are reused.
pub fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("dualcloak-cache")
}

pub fn zoo() -> Zoo {
    Zoo::with_cache_dir(Some(cache_dir()))
}

/// Overrides that swap the trained models for instant linear ones.
pub const FAST: &[(&str, &str)] = &[
    ("ensemble", r#"["toy-linear"]"#),
    ("holdout", "toy-linear-b"),
    ("generator", "identity"),
    ("attribute.name", "none"),
    ("attack.off_steps", "3"),
    ("attack.n_latent_steps", "2"),
    ("workers", "2"),
];

pub fn small_fixture(dir: &Path, pairs: usize) -> PathBuf {
    let opts = FixtureOptions {
        pairs,
        impostor_ids: 12,
        impostor_pairs: 40,
        ..FixtureOptions::default()
    };
    write_fixture_set(dir, &opts).unwrap()
}

pub fn load_with(config: &Path, base: &[(&str, &str)], extra: &[(&str, &str)]) -> LoadedConfig {
    let overrides: Vec<(String, String)> = base
        .iter()
        .chain(extra)
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    load(config, &overrides).unwrap()
}

pub fn fast_config(config: &Path, extra: &[(&str, &str)]) -> LoadedConfig {
    load_with(config, FAST, extra)
}

pub fn fast_args() -> Vec<String> {
    FAST.iter().flat_map(|(k, v)| ["--set".to_string(), format!("{k}={v}")]).collect()
}

pub fn run_bin(args: &[String]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualcloak"))
        .args(args)
        .env("DUALCLOAK_CACHE", cache_dir())
        .output()
        .expect("binary runs")
}

pub fn strs(args: &[&str]) -> Vec<String> {
    args.iter().map(|s| s.to_string()).collect()
}
