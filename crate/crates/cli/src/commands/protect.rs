use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dualcloak::attacks::{AttackContext, AttackMode, AttackResult, AttackStatus, StrategyRegistry};
use dualcloak::image::{load_image, save_image};
use dualcloak::zoo::{Zoo, ZOO_VERSION};
use dualcloak::ImageTensor;
use serde::{Deserialize, Serialize};

use crate::components::{for_attack, Components};
use crate::config::{LoadedConfig, RunConfig};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_PARTIAL};
use crate::util::{create_dir, image_seed, list_images, run_pool, worker_count, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeInfo {
    pub name: String,
    pub strength: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub ensemble: Vec<String>,
    pub generator: Option<String>,
    pub attribute: Option<AttributeInfo>,
    pub parser: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageStatus {
    Ok,
    EmptyMask,
    Failed,
}

/// Outcome for one input image. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub name: String,
    pub input_file: String,
    pub seed: u64,
    pub status: ImageStatus,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub protected: Option<String>,
    #[serde(default)]
    pub intermediate: Option<String>,
    #[serde(default)]
    pub mask: Option<String>,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub loss_trace: Vec<f64>,
    /// Largest absolute pixel change relative to the pixel-stage input.
    #[serde(default)]
    pub delta_linf: Option<f64>,
    #[serde(default)]
    pub latent_offset_linf: Option<f64>,
}

/// Everything needed to reproduce a protect run. Wall-clock timings live
/// in a separate file so this one is byte-stable across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub zoo_version: u32,
    pub config: RunConfig,
    pub components: ComponentInfo,
    pub images: Vec<ImageRecord>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_secs: f64,
    pub per_image_secs: Vec<(String, f64)>,
}

#[derive(Debug)]
pub struct ProtectOutcome {
    pub manifest: Manifest,
    pub output_dir: PathBuf,
    pub exit_code: u8,
}

enum Targets {
    Single(ImageTensor),
    ByName(PathBuf, BTreeMap<String, PathBuf>),
}

impl Targets {
    fn for_name(&self, name: &str) -> Result<ImageTensor, String> {
        match self {
            Targets::Single(t) => Ok(t.clone()),
            Targets::ByName(dir, found) => {
                let path = found
                    .get(name)
                    .ok_or_else(|| format!("no target named `{name}` in {}", dir.display()))?;
                load_image(path).map_err(|e| e.to_string())
            }
        }
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

struct Job<'a> {
    name: &'a str,
    path: &'a Path,
}

fn protect_one(
    job: &Job<'_>,
    cfg: &RunConfig,
    parts: &Components,
    registry: &StrategyRegistry,
    targets: &Targets,
    out: &Path,
) -> (ImageRecord, f64) {
    let start = Instant::now();
    let file = job.path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut rec = ImageRecord {
        name: job.name.to_string(),
        input_file: file,
        seed: image_seed(cfg.seed, job.name),
        status: ImageStatus::Failed,
        error: None,
        protected: None,
        intermediate: None,
        mask: None,
        iterations: 0,
        loss_trace: Vec::new(),
        delta_linf: None,
        latent_offset_linf: None,
    };
    let result = (|| -> Result<(ImageTensor, AttackResult), String> {
        let src = load_image(job.path).map_err(|e| e.to_string())?;
        let tgt = targets.for_name(job.name)?;
        let mut ctx = AttackContext::new(&src, &tgt, &parts.ensemble);
        if let Some(g) = &parts.generator {
            ctx = ctx.with_generator(g.as_ref());
        }
        if let Some(a) = &parts.attribute {
            ctx = ctx.with_attribute(a);
        }
        if let Some(p) = &parts.parser {
            ctx = ctx.with_parser(p.as_ref(), job.name);
        }
        let r = registry.run(&ctx, &cfg.attack).map_err(|e| e.to_string())?;
        Ok((src, r))
    })();
    match result {
        Err(e) => rec.error = Some(e),
        Ok((src, r)) => {
            let save = |dir: &str, img: &ImageTensor| -> Result<String, String> {
                let rel = format!("{dir}/{}.png", job.name);
                save_image(img, out.join(&rel)).map_err(|e| e.to_string())?;
                Ok(rel)
            };
            let saved = (|| -> Result<(), String> {
                rec.protected = Some(save("protected", &r.protected_image)?);
                if let Some(x) = &r.intermediate_on_manifold {
                    rec.intermediate = Some(save("intermediate", x)?);
                }
                if let Some(m) = &r.mask_used {
                    let rel = format!("masks/{}.png", job.name);
                    m.save_png(out.join(&rel)).map_err(|e| e.to_string())?;
                    rec.mask = Some(rel);
                }
                Ok(())
            })();
            rec.delta_linf = Some(linf(
                r.protected_image.as_slice(),
                r.pixel_stage_input(&src).as_slice(),
            ));
            rec.latent_offset_linf = r
                .latent_offset
                .as_ref()
                .map(|l| l.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            rec.iterations = r.iterations;
            rec.loss_trace = r.loss_trace;
            match saved {
                Ok(()) => {
                    rec.status = match r.status {
                        AttackStatus::Ok => ImageStatus::Ok,
                        AttackStatus::EmptyMask => ImageStatus::EmptyMask,
                    }
                }
                Err(e) => rec.error = Some(e),
            }
        }
    }
    if let Some(e) = &rec.error {
        tracing::warn!(image = job.name, "protect failed: {e}");
    }
    (rec, start.elapsed().as_secs_f64())
}

/// Protects every input image and writes outputs, `manifest.json` and
/// `timings.json` to the configured output directory.
pub fn cmd_protect(loaded: &LoadedConfig, zoo: &Zoo) -> CliResult<ProtectOutcome> {
    let start = Instant::now();
    let cfg = &loaded.config;
    let inputs = list_images(&loaded.resolve(&cfg.io.input))?;
    if inputs.is_empty() {
        return Err(CliError::usage(format!("no input images in {}", cfg.io.input.display())));
    }
    let target_path = loaded.resolve(&cfg.target_image);
    let targets = if target_path.is_dir() {
        let found = list_images(&target_path)?;
        Targets::ByName(target_path, found)
    } else if target_path.is_file() {
        Targets::Single(load_image(&target_path)?)
    } else {
        return Err(CliError::usage(format!(
            "config field `target_image`: {} does not exist",
            target_path.display()
        )));
    };
    let parts = for_attack(zoo, loaded)?;
    let out = loaded.resolve(&cfg.io.output);
    for sub in ["protected", "intermediate", "masks"] {
        let _ = std::fs::remove_dir_all(out.join(sub));
    }
    create_dir(&out.join("protected"))?;
    if cfg.attack.mode.uses_generator() {
        create_dir(&out.join("intermediate"))?;
    }
    if !matches!(cfg.attack.mode, AttackMode::Pgd | AttackMode::Age) {
        create_dir(&out.join("masks"))?;
    }

    let registry = StrategyRegistry::with_builtins();
    let jobs: Vec<Job<'_>> = inputs
        .iter()
        .map(|(name, path)| Job { name, path })
        .collect();
    let results = run_pool(&jobs, worker_count(cfg.workers), |job| {
        protect_one(job, cfg, &parts, &registry, &targets, &out)
    });

    let n_failed = results.iter().filter(|(r, _)| r.status == ImageStatus::Failed).count();
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        zoo_version: ZOO_VERSION,
        config: cfg.clone(),
        components: ComponentInfo {
            ensemble: parts.ensemble.names(),
            generator: parts.generator.as_ref().map(|g| g.name().to_string()),
            attribute: parts.attribute.as_ref().map(|a| AttributeInfo {
                name: a.name().to_string(),
                strength: a.strength(),
                dim: a.dim(),
            }),
            parser: parts.parser.as_ref().map(|p| p.name().to_string()),
        },
        n_ok: results.len() - n_failed,
        n_failed,
        images: results.iter().map(|(r, _)| r.clone()).collect(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    let timings = Timings {
        total_secs: start.elapsed().as_secs_f64(),
        per_image_secs: results.iter().map(|(r, t)| (r.name.clone(), *t)).collect(),
    };
    write_json(&out.join(TIMINGS_FILE), &timings)?;
    Ok(ProtectOutcome {
        exit_code: if n_failed > 0 { EXIT_PARTIAL } else { EXIT_OK },
        manifest,
        output_dir: out,
    })
}
