use super::latent::{check_attribute, latent_point, latent_step, run_latent, scheduled_offset};
use super::pixel::{pixel_attack, pixel_step, sample_mask};
use super::{AttackConfig, AttackMode, AttackResult, AttackStatus, Composition};
use crate::embedding::{DistanceObjective, EmbedderEnsemble};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::manifold::{decode_point, encode, AttributeDirection, GenerativeModel};
use crate::masking::{hair_texture_mask, texture_mask, BinaryMask, FaceParser};

/// Which pixels a pixel-space stage may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageMask {
    Full,
    /// Texture pixels of the stage input.
    Texture,
    /// Texture pixels inside the parsed hair region of the stage input.
    HairTexture,
}

impl StageMask {
    pub fn for_mode(mode: AttackMode) -> Option<Self> {
        match mode {
            AttackMode::Pgd => Some(StageMask::Full),
            AttackMode::Tma | AttackMode::AgeTma => Some(StageMask::Texture),
            AttackMode::Ftm | AttackMode::AgeFtm => Some(StageMask::HairTexture),
            AttackMode::Age => None,
        }
    }

    pub fn compute(
        &self,
        img: &ImageTensor,
        parser: Option<&dyn FaceParser>,
        image_id: &str,
        cfg: &AttackConfig,
    ) -> Result<BinaryMask> {
        match self {
            StageMask::Full => Ok(BinaryMask::ones(img.height(), img.width())),
            StageMask::Texture => texture_mask(img, cfg.gamma, cfg.blur),
            StageMask::HairTexture => {
                let parser = parser.ok_or(Error::MissingComponent {
                    mode: "ftm",
                    component: "a face parser",
                })?;
                hair_texture_mask(img, parser, image_id, cfg.gamma, cfg.blur)
            }
        }
    }
}

/// Latent attack followed by a masked pixel attack whose mask is extracted
/// from the latent attack's output (`age-tma` / `age-ftm`, chosen by
/// `cfg.mode`).
#[allow(clippy::too_many_arguments)]
pub fn age_ftm(
    img: &ImageTensor,
    target: &ImageTensor,
    ens: &EmbedderEnsemble,
    gen: &dyn GenerativeModel,
    attr: &AttributeDirection,
    parser: Option<&dyn FaceParser>,
    image_id: &str,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    img.ensure_same_shape(target)?;
    let stage = match cfg.mode {
        AttackMode::AgeTma => StageMask::Texture,
        AttackMode::AgeFtm => StageMask::HairTexture,
        other => {
            return Err(Error::param(format!(
                "composed attack needs mode age-tma or age-ftm, got {other}"
            )))
        }
    };
    let objective = DistanceObjective::new(cfg.objective, ens, img, target)?;
    match cfg.composition {
        Composition::Sequential => {
            sequential(img, &objective, gen, attr, parser, image_id, stage, cfg)
        }
        Composition::Alternating => {
            alternating(img, &objective, gen, attr, parser, image_id, stage, cfg)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn sequential(
    img: &ImageTensor,
    objective: &DistanceObjective,
    gen: &dyn GenerativeModel,
    attr: &AttributeDirection,
    parser: Option<&dyn FaceParser>,
    image_id: &str,
    stage: StageMask,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let latent = run_latent(img, objective, gen, attr, cfg)?;
    let mask = stage.compute(&latent.image, parser, image_id, cfg)?;
    let pixel = pixel_attack(&latent.image, objective, &mask, cfg)?;
    let mut trace = latent.loss_trace;
    trace.extend_from_slice(&pixel.loss_trace[1..]);
    Ok(AttackResult {
        protected_image: pixel.image,
        intermediate_on_manifold: Some(latent.image),
        mask_used: Some(mask),
        loss_trace: trace,
        mode: cfg.mode,
        iterations: cfg.n_latent_steps + cfg.off_steps,
        latent_offset: Some(latent.offset),
        status: pixel.status,
    })
}

/// Applies `delta` on `mask` over `base` and clamps.
fn compose(base: &ImageTensor, delta: &[f64], active: &[bool]) -> Result<ImageTensor> {
    let data = base
        .as_slice()
        .iter()
        .zip(delta)
        .zip(active)
        .map(|((b, d), a)| if *a { (b + d).clamp(0.0, 1.0) } else { *b })
        .collect();
    base.with_data(data)
}

#[allow(clippy::too_many_arguments)]
fn alternating(
    img: &ImageTensor,
    objective: &DistanceObjective,
    gen: &dyn GenerativeModel,
    attr: &AttributeDirection,
    parser: Option<&dyn FaceParser>,
    image_id: &str,
    stage: StageMask,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    check_attribute(gen, attr)?;
    let z = encode(gen, img)?;
    let n = cfg.n_latent_steps;
    let rounds = n.max(cfg.off_steps);
    let mut lambda = vec![0.0; z.dim()];
    let mut w = latent_point(z.as_slice(), &lambda, &scheduled_offset(attr, 0, n)?);
    let mut x_age = decode_point(gen, &w)?;
    let mut mask = stage.compute(&x_age, parser, image_id, cfg)?;
    let mut active = sample_mask(&mask, x_age.channels());
    let mut delta = vec![0.0; x_age.len()];
    let mut current = compose(&x_age, &delta, &active)?;
    let mut trace = vec![objective.value(&current)?];

    for r in 0..rounds {
        if r < n {
            let (_, grad) = objective.value_and_grad(&current)?;
            latent_step(gen, &w, &grad, &mut lambda, cfg)?;
            w = latent_point(z.as_slice(), &lambda, &scheduled_offset(attr, r + 1, n)?);
            x_age = decode_point(gen, &w)?;
            mask = stage.compute(&x_age, parser, image_id, cfg)?;
            active = sample_mask(&mask, x_age.channels());
            current = compose(&x_age, &delta, &active)?;
        }
        if r < cfg.off_steps {
            let (_, grad) = objective.value_and_grad(&current)?;
            let next = pixel_step(
                x_age.as_slice(),
                &mut delta,
                &grad,
                &active,
                cfg.epsilon_iter,
                cfg.epsilon,
            );
            current = x_age.with_data(next)?;
        }
        trace.push(objective.value(&current)?);
    }
    let status = if cfg.off_steps > 0 && mask.is_empty() {
        AttackStatus::EmptyMask
    } else {
        AttackStatus::Ok
    };
    Ok(AttackResult {
        protected_image: current,
        intermediate_on_manifold: Some(x_age),
        mask_used: Some(mask),
        loss_trace: trace,
        mode: cfg.mode,
        iterations: rounds,
        latent_offset: Some(lambda),
        status,
    })
}
