//! Encoder/generator interface for latent-space edits.
//!
//! Attribute conditioning is an additive latent offset:
//! `decode(z, a, s) = clamp(G(z + s * strength * direction))`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{clamp_slice, ImageTensor};
use crate::linalg::sorted_sym_eigen;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Unit latent direction with a separate signed edit strength.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDirection {
    name: String,
    direction: Vec<f64>,
    strength: f64,
}

/// On-disk form: `{name, dim, direction, strength}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeFile {
    pub name: String,
    pub dim: usize,
    pub direction: Vec<f64>,
    pub strength: f64,
}

const UNIT_TOLERANCE: f64 = 1e-6;

impl AttributeDirection {
    /// Normalizes `direction`; rejects zero or non-finite vectors.
    pub fn new(name: impl Into<String>, direction: Vec<f64>, strength: f64) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) || !strength.is_finite() {
            return Err(Error::param("attribute direction must be finite and nonzero"));
        }
        Ok(Self {
            name: name.into(),
            direction: direction.into_iter().map(|v| v / norm).collect(),
            strength,
        })
    }

    /// Zero-strength attribute (no edit) in a `dim`-dimensional latent space.
    pub fn none(dim: usize) -> Self {
        let mut direction = vec![0.0; dim.max(1)];
        direction[0] = 1.0;
        Self {
            name: "none".into(),
            direction,
            strength: 0.0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }

    /// `strength * direction`.
    pub fn full_offset(&self) -> Vec<f64> {
        self.direction.iter().map(|d| self.strength * d).collect()
    }

    pub fn to_file(&self) -> AttributeFile {
        AttributeFile {
            name: self.name.clone(),
            dim: self.dim(),
            direction: self.direction.clone(),
            strength: self.strength,
        }
    }

    pub fn from_file(file: AttributeFile) -> Result<Self> {
        if file.direction.len() != file.dim {
            return Err(Error::param(format!(
                "attribute `{}` declares dim {} but has {} entries",
                file.name,
                file.dim,
                file.direction.len()
            )));
        }
        let norm = file.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::param(format!(
                "attribute `{}` direction must be unit length, got norm {norm}",
                file.name
            )));
        }
        if !file.strength.is_finite() {
            return Err(Error::param("attribute strength must be finite"));
        }
        Ok(Self {
            name: file.name,
            direction: file.direction,
            strength: file.strength,
        })
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_str(&text)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Attribute offset at step `k` of `n_total`: `(k / n_total) * strength * direction`.
pub fn attribute_schedule(attr: &AttributeDirection, k: usize, n_total: usize) -> Result<Vec<f64>> {
    if n_total == 0 {
        return Err(Error::param("attribute schedule needs at least one step"));
    }
    if k > n_total {
        return Err(Error::param(format!("schedule step {k} exceeds {n_total}")));
    }
    let factor = k as f64 / n_total as f64;
    Ok(attr.full_offset().into_iter().map(|v| factor * v).collect())
}

/// Encoder `E` plus base generator `G`.
pub trait GenerativeModel: Send + Sync {
    fn name(&self) -> &str;

    fn latent_dim(&self) -> usize;

    fn output_shape(&self) -> (usize, usize, usize);

    fn concurrent_safe(&self) -> bool {
        true
    }

    fn encode(&self, img: &ImageTensor) -> Result<LatentCode>;

    /// `G(w)` before range clamping, channels-last.
    fn generate_raw(&self, w: &[f64]) -> Result<Vec<f64>>;

    /// `J_G(w)^T * grad` for a gradient over the raw output.
    fn generate_vjp(&self, w: &[f64], grad: &[f64]) -> Result<Vec<f64>>;
}

fn check_latent(gen: &dyn GenerativeModel, len: usize) -> Result<()> {
    if len != gen.latent_dim() {
        return Err(Error::param(format!(
            "{} expects latent dim {}, got {len}",
            gen.name(),
            gen.latent_dim()
        )));
    }
    Ok(())
}

pub fn encode(gen: &dyn GenerativeModel, img: &ImageTensor) -> Result<LatentCode> {
    if img.shape() != gen.output_shape() {
        return Err(Error::Manifold {
            model: gen.name().to_string(),
            reason: format!("expects a {:?} image, got {:?}", gen.output_shape(), img.shape()),
        });
    }
    let z = gen.encode(img)?;
    check_latent(gen, z.dim())?;
    Ok(z)
}

/// Decodes `w` (a latent point that already includes any offsets).
pub fn decode_point(gen: &dyn GenerativeModel, w: &[f64]) -> Result<ImageTensor> {
    check_latent(gen, w.len())?;
    let (h, wd, c) = gen.output_shape();
    let mut raw = gen.generate_raw(w)?;
    clamp_slice(&mut raw);
    ImageTensor::new(h, wd, c, raw)
}

/// Gradient with respect to `w` of a scalar whose gradient over the clamped
/// output image is `grad`. Samples clamped away from the range pass no gradient.
pub fn decode_point_vjp(gen: &dyn GenerativeModel, w: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    check_latent(gen, w.len())?;
    let raw = gen.generate_raw(w)?;
    let gated: Vec<f64> = raw
        .iter()
        .zip(grad)
        .map(|(r, g)| if (0.0..=1.0).contains(r) { *g } else { 0.0 })
        .collect();
    gen.generate_vjp(w, &gated)
}

/// `clamp(G(z + attr_scale * strength * direction))`.
pub fn decode(
    gen: &dyn GenerativeModel,
    z: &LatentCode,
    attr: &AttributeDirection,
    attr_scale: f64,
) -> Result<ImageTensor> {
    check_latent(gen, z.dim())?;
    check_latent(gen, attr.dim())?;
    let w: Vec<f64> = z
        .0
        .iter()
        .zip(attr.full_offset())
        .map(|(z, a)| z + attr_scale * a)
        .collect();
    decode_point(gen, &w)
}

/// Latent space equal to pixel space: `E = flatten`, `G = identity`.
#[derive(Debug, Clone)]
pub struct ToyIdentity {
    shape: (usize, usize, usize),
}

impl ToyIdentity {
    pub fn new(shape: (usize, usize, usize)) -> Self {
        Self { shape }
    }
}

impl GenerativeModel for ToyIdentity {
    fn name(&self) -> &str {
        "identity"
    }

    fn latent_dim(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    fn output_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn encode(&self, img: &ImageTensor) -> Result<LatentCode> {
        Ok(LatentCode(img.as_slice().to_vec()))
    }

    fn generate_raw(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(w.to_vec())
    }

    fn generate_vjp(&self, _w: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
        Ok(grad.to_vec())
    }
}

/// Linear decoder fit by principal components, with a whitened latent:
/// `G(z) = mean + sum_i z_i * scale_i * u_i`, `E(x)_i = u_i . (x - mean) / scale_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDecoder {
    name: String,
    shape: (usize, usize, usize),
    mean: Vec<f64>,
    /// Row-major `d x pixels`, unit rows.
    basis: Vec<f64>,
    /// Standard deviation of the training data along each basis row.
    scales: Vec<f64>,
}

const DECODER_MAGIC: &[u8; 8] = b"DCDEC001";

impl ToyDecoder {
    pub fn fit(name: impl Into<String>, images: &[ImageTensor], latent_dim: usize) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::param("no images to fit the decoder"))?;
        let shape = first.shape();
        if images.iter().any(|i| i.shape() != shape) {
            return Err(Error::param("decoder training images must share one shape"));
        }
        let n = images.len();
        if latent_dim == 0 || latent_dim >= n {
            return Err(Error::param(format!(
                "latent dim {latent_dim} must be in 1..{n} for {n} training images"
            )));
        }
        let d_pix = first.len();
        let mut mean = vec![0.0; d_pix];
        for img in images {
            for (m, v) in mean.iter_mut().zip(img.as_slice()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let centered = DMatrix::from_fn(n, d_pix, |i, j| images[i].as_slice()[j] - mean[j]);
        let gram = &centered * centered.transpose();
        let (vals, vecs) = sorted_sym_eigen(&gram);
        let mut basis = Vec::with_capacity(latent_dim * d_pix);
        let mut scales = Vec::with_capacity(latent_dim);
        for i in 0..latent_dim {
            let lambda = vals[i];
            if lambda <= 1e-12 {
                return Err(Error::param(format!(
                    "training data has rank below the latent dim {latent_dim}"
                )));
            }
            let u = centered.transpose() * vecs.column(i) / lambda.sqrt();
            basis.extend(u.iter().copied());
            scales.push((lambda / (n - 1).max(1) as f64).sqrt());
        }
        Ok(Self {
            name: name.into(),
            shape,
            mean,
            basis,
            scales,
        })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(8 * (self.basis.len() + self.mean.len() + 64));
        buf.extend_from_slice(DECODER_MAGIC);
        let name = self.name.as_bytes();
        for v in [name.len(), self.shape.0, self.shape.1, self.shape.2, self.scales.len()] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        buf.extend_from_slice(name);
        for v in self.mean.iter().chain(&self.scales).chain(&self.basis) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 48 || &bytes[..8] != DECODER_MAGIC {
            return Err(bad("not a decoder file"));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap()) as usize;
        let (name_len, h, w, c, d) = (word(0), word(1), word(2), word(3), word(4));
        let pixels = h * w * c;
        let start = 48 + name_len;
        let expected = start + 8 * (pixels + d + d * pixels);
        if bytes.len() != expected {
            return Err(bad("truncated decoder file"));
        }
        let name = String::from_utf8(bytes[48..start].to_vec()).map_err(|_| bad("bad name"))?;
        let floats: Vec<f64> = bytes[start..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self {
            name,
            shape: (h, w, c),
            mean: floats[..pixels].to_vec(),
            scales: floats[pixels..pixels + d].to_vec(),
            basis: floats[pixels + d..].to_vec(),
        })
    }
}

impl GenerativeModel for ToyDecoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn latent_dim(&self) -> usize {
        self.scales.len()
    }

    fn output_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn encode(&self, img: &ImageTensor) -> Result<LatentCode> {
        let centered: Vec<f64> = img.as_slice().iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(LatentCode(
            self.basis
                .chunks(centered.len())
                .zip(&self.scales)
                .map(|(u, s)| u.iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>() / s)
                .collect(),
        ))
    }

    fn generate_raw(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.mean.clone();
        for ((u, s), z) in self.basis.chunks(out.len()).zip(&self.scales).zip(w) {
            let k = z * s;
            for (o, ui) in out.iter_mut().zip(u) {
                *o += k * ui;
            }
        }
        Ok(out)
    }

    fn generate_vjp(&self, _w: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .basis
            .chunks(grad.len())
            .zip(&self.scales)
            .map(|(u, s)| s * u.iter().zip(grad).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}
