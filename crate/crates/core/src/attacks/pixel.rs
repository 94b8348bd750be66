use tracing::warn;

use super::{AttackConfig, AttackMode, AttackResult, AttackStatus};
use crate::embedding::{DistanceObjective, EmbedderEnsemble, Objective};
use crate::error::Result;
use crate::image::ImageTensor;
use crate::masking::BinaryMask;

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct PixelOutcome {
    pub image: ImageTensor,
    pub loss_trace: Vec<f64>,
    pub status: AttackStatus,
}

/// Alternating `+step` / `-step` offsets on the active samples, clamped to
/// the image range; `delta` is re-derived from the result.
fn pixel_start(base: &[f64], delta: &mut [f64], active: &[bool], step: f64) -> Vec<f64> {
    let mut out = base.to_vec();
    for i in 0..base.len() {
        if active[i] {
            let d = if i % 2 == 0 { step } else { -step };
            out[i] = (base[i] + d).clamp(0.0, 1.0);
            delta[i] = out[i] - base[i];
        }
    }
    out
}

/// Expands a per-pixel mask to one flag per sample.
pub(crate) fn sample_mask(mask: &BinaryMask, channels: usize) -> Vec<bool> {
    mask.bits()
        .iter()
        .flat_map(|&b| std::iter::repeat_n(b, channels))
        .collect()
}

/// One projected sign-gradient step on `delta`, restricted to `active`
/// samples. Returns the new image; `delta` is re-derived from it.
pub(crate) fn pixel_step(
    base: &[f64],
    delta: &mut [f64],
    grad: &[f64],
    active: &[bool],
    step: f64,
    budget: f64,
) -> Vec<f64> {
    let mut out = base.to_vec();
    for i in 0..base.len() {
        if !active[i] {
            delta[i] = 0.0;
            continue;
        }
        let d = (delta[i] - step * sign(grad[i])).clamp(-budget, budget);
        let v = (base[i] + d).clamp(0.0, 1.0);
        delta[i] = v - base[i];
        out[i] = v;
    }
    out
}

/// Masked projected sign-gradient descent from `stage_input` on `objective`.
///
/// Samples outside `mask` are copied from `stage_input` bit for bit.
pub fn pixel_attack(
    stage_input: &ImageTensor,
    objective: &DistanceObjective,
    mask: &BinaryMask,
    cfg: &AttackConfig,
) -> Result<PixelOutcome> {
    mask.ensure_matches(stage_input)?;
    let initial = objective.value(stage_input)?;
    let steps = cfg.off_steps;
    if steps > 0 && mask.is_empty() {
        warn!("pixel-stage mask is empty; leaving the image unchanged");
        return Ok(PixelOutcome {
            image: stage_input.clone(),
            loss_trace: vec![initial; steps + 1],
            status: AttackStatus::EmptyMask,
        });
    }

    let active = sample_mask(mask, stage_input.channels());
    let base = stage_input.as_slice();
    let mut delta = vec![0.0; base.len()];
    let mut current = stage_input.clone();
    if steps > 0 && cfg.objective == Objective::Dodge {
        // The source itself is a stationary point of the dodge objective (its
        // gradient vanishes there), so start from a +/- step checkerboard.
        let start = pixel_start(base, &mut delta, &active, cfg.epsilon_iter.min(cfg.epsilon));
        current = stage_input.with_data(start)?;
    }
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(initial);
    for k in 0..steps {
        let (value, grad) = objective.value_and_grad(&current)?;
        if k > 0 {
            trace.push(value);
        }
        let next = pixel_step(base, &mut delta, &grad, &active, cfg.epsilon_iter, cfg.epsilon);
        current = stage_input.with_data(next)?;
    }
    if steps > 0 {
        trace.push(objective.value(&current)?);
    }
    Ok(PixelOutcome {
        image: current,
        loss_trace: trace,
        status: AttackStatus::Ok,
    })
}

/// Pixel-space attack toward `target` restricted to `mask` (all pixels when
/// `None`). The mode recorded in the result is `cfg.mode`.
pub fn masked_pgd(
    img: &ImageTensor,
    target: &ImageTensor,
    ens: &EmbedderEnsemble,
    mask: Option<&BinaryMask>,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    img.ensure_same_shape(target)?;
    let objective = DistanceObjective::new(cfg.objective, ens, img, target)?;
    let full;
    let mask = match mask {
        Some(m) => m,
        None => {
            full = BinaryMask::ones(img.height(), img.width());
            &full
        }
    };
    let out = pixel_attack(img, &objective, mask, cfg)?;
    Ok(AttackResult {
        protected_image: out.image,
        intermediate_on_manifold: None,
        mask_used: (cfg.mode != AttackMode::Pgd).then(|| mask.clone()),
        loss_trace: out.loss_trace,
        mode: cfg.mode,
        iterations: cfg.off_steps,
        latent_offset: None,
        status: out.status,
    })
}
