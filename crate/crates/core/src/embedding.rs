//! Face-recognition embedders, the ensemble cosine objective, and
//! FAR-calibrated verification.
//!
//! Similarity convention: everything here works in cosine-similarity space.
//! A pair is accepted as the same identity when `cos >= tau`.

use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Feature vector produced by an embedder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaceEmbedding(pub Vec<f64>);

impl FaceEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Upstream gradient callback for [`FaceEmbedder::embed_vjp`].
pub type Upstream<'a> = dyn FnMut(&FaceEmbedding) -> Result<Vec<f64>> + 'a;

/// A differentiable face-recognition model.
pub trait FaceEmbedder: Send + Sync {
    fn name(&self) -> &str;

    fn embed_dim(&self) -> usize;

    /// Required `(height, width, channels)`, if the model is size-specific.
    fn input_shape(&self) -> Option<(usize, usize, usize)> {
        None
    }

    /// `false` makes the ensemble serialize calls into this model.
    fn concurrent_safe(&self) -> bool {
        true
    }

    fn embed(&self, img: &ImageTensor) -> Result<FaceEmbedding>;

    /// Computes `f(img)`, asks `upstream` for `dL/df` at that point, and
    /// returns `f(img)` together with `dL/d img` (same layout as the pixels).
    fn embed_vjp(
        &self,
        img: &ImageTensor,
        upstream: &mut Upstream<'_>,
    ) -> Result<(FaceEmbedding, Vec<f64>)>;
}

/// Guards a model that cannot take concurrent calls.
pub struct Serialized {
    inner: Arc<dyn FaceEmbedder>,
    lock: Mutex<()>,
}

impl Serialized {
    pub fn new(inner: Arc<dyn FaceEmbedder>) -> Self {
        Self {
            inner,
            lock: Mutex::new(()),
        }
    }
}

impl FaceEmbedder for Serialized {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn embed_dim(&self) -> usize {
        self.inner.embed_dim()
    }

    fn input_shape(&self) -> Option<(usize, usize, usize)> {
        self.inner.input_shape()
    }

    fn embed(&self, img: &ImageTensor) -> Result<FaceEmbedding> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        self.inner.embed(img)
    }

    fn embed_vjp(
        &self,
        img: &ImageTensor,
        upstream: &mut Upstream<'_>,
    ) -> Result<(FaceEmbedding, Vec<f64>)> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        self.inner.embed_vjp(img, upstream)
    }
}

fn check_input(model: &dyn FaceEmbedder, img: &ImageTensor) -> Result<()> {
    if let Some(shape) = model.input_shape() {
        if shape != img.shape() {
            return Err(Error::Embed {
                model: model.name().to_string(),
                reason: format!("expects a {shape:?} image, got {:?}", img.shape()),
            });
        }
    }
    Ok(())
}

fn check_output(model: &dyn FaceEmbedder, e: &FaceEmbedding) -> Result<()> {
    if e.len() != model.embed_dim() {
        return Err(Error::Embed {
            model: model.name().to_string(),
            reason: format!("declared dim {} but produced {}", model.embed_dim(), e.len()),
        });
    }
    Ok(())
}

/// Embeds one image, enforcing the model's input and output contracts.
pub fn embed(model: &dyn FaceEmbedder, img: &ImageTensor) -> Result<FaceEmbedding> {
    check_input(model, img)?;
    let e = model.embed(img)?;
    check_output(model, &e)?;
    Ok(e)
}

fn checked_norms(a: &FaceEmbedding, b: &FaceEmbedding) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: format!("embedding of length {}", a.len()),
            actual: format!("length {}", b.len()),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::DegenerateEmbedding(
            "cosine similarity of a zero or non-finite vector".into(),
        ));
    }
    Ok((na, nb))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine_similarity(a: &FaceEmbedding, b: &FaceEmbedding) -> Result<f64> {
    checked_norms(a, b)?;
    // One square root of the product keeps cos(a, a) at exactly 1.
    let denom = (dot(&a.0, &a.0) * dot(&b.0, &b.0)).sqrt();
    Ok((dot(&a.0, &b.0) / denom).clamp(-1.0, 1.0))
}

/// `d cos(a, b) / d a`.
pub fn cosine_similarity_grad(a: &FaceEmbedding, b: &FaceEmbedding) -> Result<Vec<f64>> {
    let (na, nb) = checked_norms(a, b)?;
    let cos = dot(&a.0, &b.0) / (na * nb);
    Ok(a
        .0
        .iter()
        .zip(&b.0)
        .map(|(ai, bi)| bi / (na * nb) - cos * ai / (na * na))
        .collect())
}

/// Non-empty ordered list of embedders, equally weighted.
#[derive(Clone)]
pub struct EmbedderEnsemble {
    members: Vec<Arc<dyn FaceEmbedder>>,
}

impl std::fmt::Debug for EmbedderEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl EmbedderEnsemble {
    pub fn new(members: Vec<Arc<dyn FaceEmbedder>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::param("embedder ensemble must not be empty"));
        }
        let members = members
            .into_iter()
            .map(|m| {
                if m.concurrent_safe() {
                    m
                } else {
                    Arc::new(Serialized::new(m)) as Arc<dyn FaceEmbedder>
                }
            })
            .collect();
        Ok(Self { members })
    }

    pub fn single(member: Arc<dyn FaceEmbedder>) -> Self {
        Self::new(vec![member]).expect("one member")
    }

    pub fn members(&self) -> &[Arc<dyn FaceEmbedder>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|m| m.name().to_string()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.members.iter().any(|m| m.name() == name)
    }

    pub fn embed_all(&self, img: &ImageTensor) -> Result<Vec<FaceEmbedding>> {
        self.members.iter().map(|m| embed(m.as_ref(), img)).collect()
    }
}

/// `sum over members of (1 - cos(f(img), f(target)))`, in `[0, 2 * members]`.
pub fn ensemble_distance(
    ens: &EmbedderEnsemble,
    img: &ImageTensor,
    target: &ImageTensor,
) -> Result<f64> {
    DistanceObjective::toward(ens, target)?.value(img)
}

/// Which way the attack pushes the ensemble distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Minimize the distance to a target identity.
    #[default]
    Impersonate,
    /// Maximize the distance to the source's own embedding.
    Dodge,
}

/// Ensemble distance to fixed reference embeddings, with its pixel gradient.
///
/// Reference embeddings are computed once; each evaluation embeds only the
/// candidate image.
#[derive(Clone)]
pub struct DistanceObjective {
    ensemble: EmbedderEnsemble,
    references: Vec<FaceEmbedding>,
    sign: f64,
}

impl DistanceObjective {
    pub fn toward(ens: &EmbedderEnsemble, target: &ImageTensor) -> Result<Self> {
        Ok(Self {
            ensemble: ens.clone(),
            references: ens.embed_all(target)?,
            sign: 1.0,
        })
    }

    pub fn away_from(ens: &EmbedderEnsemble, source: &ImageTensor) -> Result<Self> {
        Ok(Self {
            sign: -1.0,
            ..Self::toward(ens, source)?
        })
    }

    pub fn new(
        objective: Objective,
        ens: &EmbedderEnsemble,
        source: &ImageTensor,
        target: &ImageTensor,
    ) -> Result<Self> {
        match objective {
            Objective::Impersonate => Self::toward(ens, target),
            Objective::Dodge => Self::away_from(ens, source),
        }
    }

    pub fn ensemble(&self) -> &EmbedderEnsemble {
        &self.ensemble
    }

    /// Signed objective value (the quantity being minimized).
    pub fn value(&self, img: &ImageTensor) -> Result<f64> {
        let mut total = 0.0;
        for (m, r) in self.ensemble.members.iter().zip(&self.references) {
            let e = embed(m.as_ref(), img)?;
            total += 1.0 - cosine_similarity(&e, r)?;
        }
        Ok(self.sign * total)
    }

    /// Signed objective value and its gradient with respect to the pixels.
    pub fn value_and_grad(&self, img: &ImageTensor) -> Result<(f64, Vec<f64>)> {
        let mut total = 0.0;
        let mut grad = vec![0.0; img.len()];
        let sign = self.sign;
        for (m, r) in self.ensemble.members.iter().zip(&self.references) {
            check_input(m.as_ref(), img)?;
            let mut upstream = |e: &FaceEmbedding| -> Result<Vec<f64>> {
                let g = cosine_similarity_grad(e, r)?;
                Ok(g.into_iter().map(|v| -sign * v).collect())
            };
            let (e, g) = m.embed_vjp(img, &mut upstream)?;
            check_output(m.as_ref(), &e)?;
            if g.len() != grad.len() {
                return Err(Error::Embed {
                    model: m.name().to_string(),
                    reason: format!("gradient has {} entries for {} pixels", g.len(), grad.len()),
                });
            }
            total += 1.0 - cosine_similarity(&e, r)?;
            for (acc, v) in grad.iter_mut().zip(g) {
                *acc += v;
            }
        }
        Ok((sign * total, grad))
    }
}

/// Cosine threshold together with the false-accept rate it was fit at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationThreshold {
    pub tau: f64,
    pub far: f64,
}

impl VerificationThreshold {
    pub fn new(tau: f64, far: f64) -> Result<Self> {
        if !(far > 0.0 && far <= 1.0) {
            return Err(Error::param(format!("far must be in (0, 1], got {far}")));
        }
        if !(-1.0..=1.0).contains(&tau) {
            return Err(Error::param(format!("tau must be in [-1, 1], got {tau}")));
        }
        Ok(Self { tau, far })
    }
}

/// Threshold at the `(1 - far)` quantile of impostor similarities.
///
/// Quantile rule: with sorted scores `s(1) <= ... <= s(n)` and `p = 1 - far`,
/// the 1-based position is `h = n*p + 1/2`; the result interpolates linearly
/// between `s(floor h)` and `s(floor h + 1)`, clamped to `s(1)` / `s(n)` at
/// the ends.
pub fn calibrate_threshold(impostor_scores: &[f64], far: f64) -> Result<VerificationThreshold> {
    if impostor_scores.is_empty() {
        return Err(Error::param("impostor score list is empty"));
    }
    if !(far > 0.0 && far <= 1.0) {
        return Err(Error::param(format!("far must be in (0, 1], got {far}")));
    }
    if let Some(bad) = impostor_scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::param(format!("non-finite impostor score {bad}")));
    }
    let mut sorted = impostor_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let h = n as f64 * (1.0 - far) + 0.5;
    let tau = if h <= 1.0 {
        sorted[0]
    } else if h >= n as f64 {
        sorted[n - 1]
    } else {
        let lo = h.floor();
        let frac = h - lo;
        let i = lo as usize - 1;
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    };
    VerificationThreshold::new(tau.clamp(-1.0, 1.0), far)
}

/// Same-identity decision: `cos(a, b) >= tau`.
pub fn verify(a: &FaceEmbedding, b: &FaceEmbedding, thr: &VerificationThreshold) -> Result<bool> {
    Ok(cosine_similarity(a, b)? >= thr.tau)
}

/// `f(x) = A * flatten(x)` with a fixed Gaussian matrix.
#[derive(Debug, Clone)]
pub struct ToyLinear {
    name: String,
    shape: (usize, usize, usize),
    dim: usize,
    /// Row-major `dim x (h*w*c)`.
    matrix: Vec<f64>,
}

impl ToyLinear {
    pub fn seeded(name: impl Into<String>, shape: (usize, usize, usize), dim: usize, seed: u64) -> Self {
        let inputs = shape.0 * shape.1 * shape.2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (inputs as f64).sqrt();
        let matrix = (0..dim * inputs)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            name: name.into(),
            shape,
            dim,
            matrix,
        }
    }

    pub fn from_matrix(
        name: impl Into<String>,
        shape: (usize, usize, usize),
        dim: usize,
        matrix: Vec<f64>,
    ) -> Result<Self> {
        let inputs = shape.0 * shape.1 * shape.2;
        if matrix.len() != dim * inputs {
            return Err(Error::Shape {
                expected: format!("{dim}x{inputs} matrix"),
                actual: format!("{} entries", matrix.len()),
            });
        }
        Ok(Self {
            name: name.into(),
            shape,
            dim,
            matrix,
        })
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    fn forward(&self, x: &[f64]) -> FaceEmbedding {
        FaceEmbedding(self.matrix.chunks(x.len()).map(|row| dot(row, x)).collect())
    }
}

impl FaceEmbedder for ToyLinear {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed_dim(&self) -> usize {
        self.dim
    }

    fn input_shape(&self) -> Option<(usize, usize, usize)> {
        Some(self.shape)
    }

    fn embed(&self, img: &ImageTensor) -> Result<FaceEmbedding> {
        check_input(self, img)?;
        Ok(self.forward(img.as_slice()))
    }

    fn embed_vjp(
        &self,
        img: &ImageTensor,
        upstream: &mut Upstream<'_>,
    ) -> Result<(FaceEmbedding, Vec<f64>)> {
        check_input(self, img)?;
        let e = self.forward(img.as_slice());
        let g = upstream(&e)?;
        let mut grad = vec![0.0; img.len()];
        for (row, gi) in self.matrix.chunks(img.len()).zip(&g) {
            for (acc, a) in grad.iter_mut().zip(row) {
                *acc += gi * a;
            }
        }
        Ok((e, grad))
    }
}
