use super::pixel::sign;
use super::{AttackConfig, AttackMode, AttackResult, AttackStatus};
use crate::embedding::{DistanceObjective, EmbedderEnsemble};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::manifold::{attribute_schedule, decode_point, decode_point_vjp, encode, AttributeDirection, GenerativeModel};

/// Output of the latent stage, shared with the composed modes.
pub(crate) struct LatentOutcome {
    pub image: ImageTensor,
    pub offset: Vec<f64>,
    pub loss_trace: Vec<f64>,
}

/// Attribute offset at step `k`; zero everywhere when there are no steps.
pub(crate) fn scheduled_offset(attr: &AttributeDirection, k: usize, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        Ok(vec![0.0; attr.dim()])
    } else {
        attribute_schedule(attr, k.min(n), n)
    }
}

pub(crate) fn latent_point(z: &[f64], lambda: &[f64], offset: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(lambda)
        .zip(offset)
        .map(|((z, l), a)| z + l + a)
        .collect()
}

/// One projected sign step on `lambda` from an image-space gradient at
/// latent point `w`.
pub(crate) fn latent_step(
    gen: &dyn GenerativeModel,
    w: &[f64],
    image_grad: &[f64],
    lambda: &mut [f64],
    cfg: &AttackConfig,
) -> Result<()> {
    let g = decode_point_vjp(gen, w, image_grad)?;
    for (l, gi) in lambda.iter_mut().zip(&g) {
        *l = (*l - cfg.eta_iter * sign(*gi)).clamp(-cfg.eta, cfg.eta);
    }
    Ok(())
}

pub(crate) fn check_attribute(gen: &dyn GenerativeModel, attr: &AttributeDirection) -> Result<()> {
    if attr.dim() != gen.latent_dim() {
        return Err(Error::param(format!(
            "attribute `{}` has dim {} but generator {} has latent dim {}",
            attr.name(),
            attr.dim(),
            gen.name(),
            gen.latent_dim()
        )));
    }
    Ok(())
}

pub(crate) fn run_latent(
    img: &ImageTensor,
    objective: &DistanceObjective,
    gen: &dyn GenerativeModel,
    attr: &AttributeDirection,
    cfg: &AttackConfig,
) -> Result<LatentOutcome> {
    check_attribute(gen, attr)?;
    let z = encode(gen, img)?;
    let n = cfg.n_latent_steps;
    let mut lambda = vec![0.0; z.dim()];
    let mut w = latent_point(z.as_slice(), &lambda, &scheduled_offset(attr, 0, n)?);
    let mut current = decode_point(gen, &w)?;
    let mut trace = Vec::with_capacity(n + 1);
    for k in 0..n {
        let (value, grad) = objective.value_and_grad(&current)?;
        trace.push(value);
        latent_step(gen, &w, &grad, &mut lambda, cfg)?;
        w = latent_point(z.as_slice(), &lambda, &scheduled_offset(attr, k + 1, n)?);
        current = decode_point(gen, &w)?;
    }
    trace.push(objective.value(&current)?);
    Ok(LatentOutcome {
        image: current,
        offset: lambda,
        loss_trace: trace,
    })
}

/// Attribute-guided latent attack: perturbs `E(img)` inside an L-infinity
/// ball of radius `eta` while the attribute offset ramps from 0 to full.
pub fn age_attack(
    img: &ImageTensor,
    target: &ImageTensor,
    ens: &EmbedderEnsemble,
    gen: &dyn GenerativeModel,
    attr: &AttributeDirection,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    img.ensure_same_shape(target)?;
    let objective = DistanceObjective::new(cfg.objective, ens, img, target)?;
    let out = run_latent(img, &objective, gen, attr, cfg)?;
    Ok(AttackResult {
        intermediate_on_manifold: Some(out.image.clone()),
        protected_image: out.image,
        mask_used: None,
        loss_trace: out.loss_trace,
        mode: AttackMode::Age,
        iterations: cfg.n_latent_steps,
        latent_offset: Some(out.offset),
        status: AttackStatus::Ok,
    })
}
