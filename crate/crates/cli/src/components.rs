use std::sync::Arc;

use dualcloak::embedding::{EmbedderEnsemble, FaceEmbedder};
use dualcloak::manifold::{AttributeDirection, GenerativeModel};
use dualcloak::masking::FaceParser;
use dualcloak::zoo::Zoo;

use crate::config::LoadedConfig;
use crate::error::CliResult;

/// The models a run needs, resolved by name.
pub struct Components {
    pub ensemble: EmbedderEnsemble,
    pub generator: Option<Arc<dyn GenerativeModel>>,
    pub attribute: Option<AttributeDirection>,
    pub parser: Option<Arc<dyn FaceParser>>,
}

pub fn embedders(zoo: &Zoo, names: &[String]) -> CliResult<Vec<Arc<dyn FaceEmbedder>>> {
    Ok(names.iter().map(|n| zoo.embedder(n)).collect::<Result<_, _>>()?)
}

pub fn parser(zoo: &Zoo, loaded: &LoadedConfig) -> CliResult<Arc<dyn FaceParser>> {
    let spec = &loaded.config.parser;
    let dir = spec.annotation_dir.as_ref().map(|d| loaded.resolve(d));
    Ok(zoo.parser(&spec.name, dir.as_deref(), spec.hair_label)?)
}

/// Loads only what `config.attack.mode` uses.
pub fn for_attack(zoo: &Zoo, loaded: &LoadedConfig) -> CliResult<Components> {
    let cfg = &loaded.config;
    let ensemble = EmbedderEnsemble::new(embedders(zoo, &cfg.ensemble)?)?;
    let mode = cfg.attack.mode;
    let (generator, attribute) = if mode.uses_generator() {
        let gen = zoo.generator(&cfg.generator)?;
        let attr = match &cfg.attribute.file {
            Some(f) => AttributeDirection::load_json(loaded.resolve(f))?,
            None => zoo.attribute(&cfg.generator, &cfg.attribute.name)?,
        };
        let attr = match cfg.attribute.strength {
            Some(s) => attr.with_strength(s),
            None => attr,
        };
        (Some(gen), Some(attr))
    } else {
        (None, None)
    };
    let parser = if mode.uses_parser() {
        Some(parser(zoo, loaded)?)
    } else {
        None
    };
    Ok(Components {
        ensemble,
        generator,
        attribute,
        parser,
    })
}
