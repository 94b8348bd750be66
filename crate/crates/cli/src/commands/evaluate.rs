use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use dualcloak::embedding::VerificationThreshold;
use dualcloak::evaluation::{
    attack_success_rate, fid, mean_api_confidence, EvaluationReport, FeatureExtractor, ModelScore,
    RandomProjectionExtractor, VerificationServiceClient,
};
use dualcloak::image::load_image;
use dualcloak::zoo::Zoo;
use dualcloak::ImageTensor;
use dualcloak_service::{ClientOptions, HttpVerificationClient, MockServer};

use crate::commands::calibrate::{load_thresholds, ThresholdTable};
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_PARTIAL};
use crate::util::list_images;

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub protected: PathBuf,
    /// Defaults to the config's `target_image`.
    pub targets: Option<PathBuf>,
    /// Defaults to the config's `thresholds`.
    pub thresholds: Option<PathBuf>,
    /// `mock` or a service URL; overrides `api.endpoint`.
    pub api: Option<String>,
    pub allow_partial: bool,
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub report: EvaluationReport,
    pub exit_code: u8,
}

fn tau_for(table: &ThresholdTable, model: &str) -> CliResult<VerificationThreshold> {
    let rec = table.get(model).ok_or_else(|| {
        CliError::usage(format!("threshold table has no entry for `{model}`; run calibrate first"))
    })?;
    Ok(VerificationThreshold::new(rec.tau, rec.far)?)
}

/// FID between clean inputs and their protected versions, when the clean
/// inputs can be found by name.
fn fid_against_inputs(loaded: &LoadedConfig, names: &[String], protected: &[ImageTensor]) -> CliResult<Option<f64>> {
    let input = loaded.resolve(&loaded.config.io.input);
    if !input.is_dir() {
        return Ok(None);
    }
    let clean = list_images(&input)?;
    if names.iter().any(|n| !clean.contains_key(n)) {
        return Ok(None);
    }
    let ex = RandomProjectionExtractor::default();
    let mut fa = Vec::with_capacity(names.len());
    for n in names {
        fa.push(ex.extract(&load_image(&clean[n])?)?);
    }
    let fb = protected.iter().map(|p| ex.extract(p)).collect::<Result<Vec<_>, _>>()?;
    Ok(Some(fid(&fa, &fb)?))
}

pub fn cmd_evaluate(loaded: &LoadedConfig, zoo: &Zoo, opts: &EvaluateOptions) -> CliResult<EvaluateOutcome> {
    let cfg = &loaded.config;
    let holdout = cfg.holdout_for_evaluation()?;
    let protected = list_images(&opts.protected)?;
    if protected.is_empty() {
        return Err(CliError::usage(format!("no images in {}", opts.protected.display())));
    }
    let target_path = opts
        .targets
        .clone()
        .unwrap_or_else(|| loaded.resolve(&cfg.target_image));
    let single_target = target_path.is_file();
    let targets = list_images(&target_path)?;

    let mut names = Vec::new();
    let mut unpaired = Vec::new();
    let (mut prot_imgs, mut tgt_imgs) = (Vec::new(), Vec::new());
    for (name, path) in &protected {
        let t = if single_target {
            targets.values().next()
        } else {
            targets.get(name)
        };
        match t {
            Some(t) => {
                names.push(name.clone());
                prot_imgs.push(load_image(path)?);
                tgt_imgs.push(load_image(t)?);
            }
            None => unpaired.push(name.clone()),
        }
    }
    if !single_target {
        unpaired.extend(targets.keys().filter(|n| !protected.contains_key(*n)).cloned());
    }
    unpaired.sort();
    for n in &unpaired {
        tracing::warn!("unpaired file `{n}` excluded");
    }
    if names.is_empty() {
        return Err(CliError::usage("no protected image has a matching target"));
    }

    let table_path = opts
        .thresholds
        .clone()
        .or_else(|| cfg.thresholds.as_ref().map(|p| loaded.resolve(p)))
        .ok_or_else(|| CliError::usage("no threshold table: pass --thresholds or set `thresholds`"))?;
    let table = load_thresholds(&table_path)?;

    let mut report = EvaluationReport::new(cfg.attack.clone(), names.len());
    let mut scored: BTreeMap<&str, bool> = BTreeMap::new();
    scored.insert(holdout, true);
    for m in &cfg.ensemble {
        scored.insert(m, false);
    }
    for (model, black_box) in scored {
        let thr = tau_for(&table, model)?;
        let embedder = zoo.embedder(model)?;
        let asr = attack_success_rate(&prot_imgs, &tgt_imgs, embedder.as_ref(), &thr)?;
        report.per_model.push(ModelScore {
            model: model.to_string(),
            asr,
            tau: thr.tau,
            black_box,
        });
    }
    report.fid = fid_against_inputs(loaded, &names, &prot_imgs)?;

    if let Some(endpoint) = opts.api.clone().or_else(|| cfg.api.endpoint.clone()) {
        let copts = ClientOptions {
            timeout_secs: cfg.api.timeout_secs,
            retries: cfg.api.retries,
            backoff_ms: 100,
        };
        let _server;
        let url = if endpoint == "mock" {
            let addr: SocketAddr = "127.0.0.1:0".parse().expect("literal address");
            let server = MockServer::start(zoo.embedder(holdout)?, addr)?;
            let url = server.url();
            _server = server;
            url
        } else {
            endpoint
        };
        let client = HttpVerificationClient::new(&url, copts)?;
        let pairs: Vec<_> = prot_imgs.iter().zip(&tgt_imgs).collect();
        report.api_mean_confidence = Some(mean_api_confidence(
            &client as &dyn VerificationServiceClient,
            &pairs,
            cfg.api.parallelism,
        )?);
    }
    report.unpaired = unpaired;
    report.validate()?;
    let exit_code = if !report.unpaired.is_empty() && !opts.allow_partial {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    };
    Ok(EvaluateOutcome { report, exit_code })
}

pub fn default_report_path(loaded: &LoadedConfig) -> PathBuf {
    loaded.resolve(&loaded.config.io.output).join("report.json")
}

pub fn write_report(path: &Path, report: &EvaluationReport) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        crate::util::create_dir(dir)?;
    }
    Ok(report.save(path)?)
}
