//! Attack strategies behind one trait, looked up by mode name.

use std::collections::BTreeMap;

use super::dual::{age_ftm, StageMask};
use super::latent::age_attack;
use super::pixel::pixel_attack;
use super::{AttackConfig, AttackMode, AttackResult};
use crate::embedding::{DistanceObjective, EmbedderEnsemble};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::manifold::{AttributeDirection, GenerativeModel};
use crate::masking::FaceParser;

/// Everything an attack may draw on for one image.
#[derive(Clone, Copy)]
pub struct AttackContext<'a> {
    pub source: &'a ImageTensor,
    pub target: &'a ImageTensor,
    pub ensemble: &'a EmbedderEnsemble,
    pub generator: Option<&'a dyn GenerativeModel>,
    /// Defaults to a zero-strength attribute when absent.
    pub attribute: Option<&'a AttributeDirection>,
    pub parser: Option<&'a dyn FaceParser>,
    /// Key used by lookup parsers (normally the file stem).
    pub image_id: &'a str,
}

impl<'a> AttackContext<'a> {
    pub fn new(source: &'a ImageTensor, target: &'a ImageTensor, ensemble: &'a EmbedderEnsemble) -> Self {
        Self {
            source,
            target,
            ensemble,
            generator: None,
            attribute: None,
            parser: None,
            image_id: "",
        }
    }

    pub fn with_generator(mut self, gen: &'a dyn GenerativeModel) -> Self {
        self.generator = Some(gen);
        self
    }

    pub fn with_attribute(mut self, attr: &'a AttributeDirection) -> Self {
        self.attribute = Some(attr);
        self
    }

    pub fn with_parser(mut self, parser: &'a dyn FaceParser, image_id: &'a str) -> Self {
        self.parser = Some(parser);
        self.image_id = image_id;
        self
    }

    fn generator_for(&self, mode: AttackMode) -> Result<&'a dyn GenerativeModel> {
        self.generator.ok_or(Error::MissingComponent {
            mode: mode.as_str(),
            component: "a generative model",
        })
    }

    fn parser_check(&self, mode: AttackMode) -> Result<()> {
        if mode.uses_parser() && self.parser.is_none() {
            return Err(Error::MissingComponent {
                mode: mode.as_str(),
                component: "a face parser",
            });
        }
        Ok(())
    }

    fn attribute_for(&self, gen: &dyn GenerativeModel) -> AttributeDirection {
        self.attribute
            .cloned()
            .unwrap_or_else(|| AttributeDirection::none(gen.latent_dim()))
    }
}

pub trait AttackStrategy: Send + Sync {
    fn mode(&self) -> AttackMode;

    fn name(&self) -> &'static str {
        self.mode().as_str()
    }

    /// Runs with `cfg`; the mode field of `cfg` is overridden by this strategy's mode.
    fn run(&self, ctx: &AttackContext<'_>, cfg: &AttackConfig) -> Result<AttackResult>;
}

/// Pixel-space attack under a stage mask (`pgd`, `tma`, `ftm`).
pub struct PixelStrategy {
    mode: AttackMode,
    mask: StageMask,
}

impl PixelStrategy {
    pub fn new(mode: AttackMode) -> Option<Self> {
        match mode {
            AttackMode::Pgd | AttackMode::Tma | AttackMode::Ftm => Some(Self {
                mode,
                mask: StageMask::for_mode(mode)?,
            }),
            _ => None,
        }
    }
}

impl AttackStrategy for PixelStrategy {
    fn mode(&self) -> AttackMode {
        self.mode
    }

    fn run(&self, ctx: &AttackContext<'_>, cfg: &AttackConfig) -> Result<AttackResult> {
        let cfg = cfg.clone().with_mode(self.mode);
        cfg.validate()?;
        ctx.parser_check(self.mode)?;
        ctx.source.ensure_same_shape(ctx.target)?;
        let mask = self.mask.compute(ctx.source, ctx.parser, ctx.image_id, &cfg)?;
        let objective = DistanceObjective::new(cfg.objective, ctx.ensemble, ctx.source, ctx.target)?;
        let out = pixel_attack(ctx.source, &objective, &mask, &cfg)?;
        Ok(AttackResult {
            protected_image: out.image,
            intermediate_on_manifold: None,
            mask_used: (self.mask != StageMask::Full).then_some(mask),
            loss_trace: out.loss_trace,
            mode: self.mode,
            iterations: cfg.off_steps,
            latent_offset: None,
            status: out.status,
        })
    }
}

/// Attribute-guided latent attack (`age`).
pub struct LatentStrategy;

impl AttackStrategy for LatentStrategy {
    fn mode(&self) -> AttackMode {
        AttackMode::Age
    }

    fn run(&self, ctx: &AttackContext<'_>, cfg: &AttackConfig) -> Result<AttackResult> {
        let cfg = cfg.clone().with_mode(AttackMode::Age);
        let gen = ctx.generator_for(AttackMode::Age)?;
        let attr = ctx.attribute_for(gen);
        age_attack(ctx.source, ctx.target, ctx.ensemble, gen, &attr, &cfg)
    }
}

/// Latent attack then a masked pixel attack (`age-tma`, `age-ftm`).
pub struct DualStrategy {
    mode: AttackMode,
}

impl DualStrategy {
    pub fn new(mode: AttackMode) -> Option<Self> {
        matches!(mode, AttackMode::AgeTma | AttackMode::AgeFtm).then_some(Self { mode })
    }
}

impl AttackStrategy for DualStrategy {
    fn mode(&self) -> AttackMode {
        self.mode
    }

    fn run(&self, ctx: &AttackContext<'_>, cfg: &AttackConfig) -> Result<AttackResult> {
        let cfg = cfg.clone().with_mode(self.mode);
        ctx.parser_check(self.mode)?;
        let gen = ctx.generator_for(self.mode)?;
        let attr = ctx.attribute_for(gen);
        age_ftm(
            ctx.source,
            ctx.target,
            ctx.ensemble,
            gen,
            &attr,
            ctx.parser,
            ctx.image_id,
            &cfg,
        )
    }
}

/// Name-keyed set of attack strategies.
pub struct StrategyRegistry {
    entries: BTreeMap<String, Box<dyn AttackStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// All six built-in modes.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        for mode in [AttackMode::Pgd, AttackMode::Tma, AttackMode::Ftm] {
            reg.register(Box::new(PixelStrategy::new(mode).expect("pixel mode")));
        }
        reg.register(Box::new(LatentStrategy));
        for mode in [AttackMode::AgeTma, AttackMode::AgeFtm] {
            reg.register(Box::new(DualStrategy::new(mode).expect("dual mode")));
        }
        reg
    }

    /// Adds or replaces the strategy under its name.
    pub fn register(&mut self, strategy: Box<dyn AttackStrategy>) {
        self.entries.insert(strategy.name().to_string(), strategy);
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn AttackStrategy> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownName {
                kind: "attack mode",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn run(&self, ctx: &AttackContext<'_>, cfg: &AttackConfig) -> Result<AttackResult> {
        self.get(cfg.mode.as_str())?.run(ctx, cfg)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// Runs `cfg.mode` through the built-in registry.
pub fn run_attack(ctx: &AttackContext<'_>, cfg: &AttackConfig) -> Result<AttackResult> {
    StrategyRegistry::with_builtins().run(ctx, cfg)
}
