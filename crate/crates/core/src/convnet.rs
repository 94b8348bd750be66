//! Small convolutional face embedder.
//!
//! A fixed random convolution stack produces spatial features; a linear
//! discriminant head is fit on identity-labelled images so that images of
//! the same identity land close in cosine space.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{FaceEmbedder, FaceEmbedding, Upstream};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::linalg::sorted_sym_eigen;
use crate::nn::{ConvStack, Layer, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvArch {
    pub kernel: usize,
    pub channels: (usize, usize),
    pub pools: (usize, usize),
    pub gain: f64,
}

impl ConvArch {
    pub fn build(&self, in_c: usize, seed: u64) -> ConvStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ConvStack {
            layers: vec![
                Layer::conv_random(&mut rng, self.kernel, in_c, self.channels.0, self.gain),
                Layer::Tanh,
                Layer::AvgPool {
                    factor: self.pools.0,
                },
                Layer::conv_random(&mut rng, self.kernel, self.channels.0, self.channels.1, self.gain),
                Layer::Tanh,
                Layer::AvgPool {
                    factor: self.pools.1,
                },
            ],
        }
    }
}

/// Shrinkage added to the within-class scatter, relative to its mean diagonal.
const LDA_SHRINKAGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConvNet {
    name: String,
    input_shape: (usize, usize, usize),
    stack: ConvStack,
    dim: usize,
    /// Feature mean subtracted before projection.
    mean: Vec<f64>,
    /// Row-major `dim x features`.
    projection: Vec<f64>,
}

impl ToyConvNet {
    /// Fits the discriminant head on `(image, identity)` samples.
    pub fn train(
        name: impl Into<String>,
        input_shape: (usize, usize, usize),
        arch: ConvArch,
        seed: u64,
        samples: &[(ImageTensor, usize)],
        dim: usize,
    ) -> Result<Self> {
        let name = name.into();
        let stack = arch.build(input_shape.2, seed);
        let (fh, fw, fc) = stack
            .output_shape(input_shape)
            .ok_or_else(|| Error::param(format!("architecture does not fit input {input_shape:?}")))?;
        let n_features = fh * fw * fc;
        if samples.is_empty() {
            return Err(Error::param("no training samples"));
        }
        let mut net = Self {
            name,
            input_shape,
            stack,
            dim,
            mean: vec![0.0; n_features],
            projection: Vec::new(),
        };

        let feats: Vec<Vec<f64>> = samples
            .iter()
            .map(|(img, _)| net.features(img))
            .collect::<Result<_>>()?;
        let n_ids = samples.iter().map(|(_, id)| id + 1).max().unwrap_or(0);
        if dim == 0 || dim >= n_ids.max(2) {
            return Err(Error::param(format!(
                "embedding dim {dim} must be in 1..{} for {n_ids} identities",
                n_ids.max(2)
            )));
        }

        let n = feats.len() as f64;
        let mut mean = DVector::zeros(n_features);
        let mut class_sum = vec![DVector::zeros(n_features); n_ids];
        let mut class_n = vec![0usize; n_ids];
        for (f, (_, id)) in feats.iter().zip(samples) {
            let v = DVector::from_column_slice(f);
            mean += &v;
            class_sum[*id] += v;
            class_n[*id] += 1;
        }
        mean /= n;
        let class_mean: Vec<DVector<f64>> = class_sum
            .into_iter()
            .zip(&class_n)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { s })
            .collect();

        let mut within = DMatrix::zeros(feats.len(), n_features);
        for (row, (f, (_, id))) in feats.iter().zip(samples).enumerate() {
            for j in 0..n_features {
                within[(row, j)] = f[j] - class_mean[*id][j];
            }
        }
        let mut sw = within.transpose() * &within / n;
        let mut between = DMatrix::zeros(n_ids, n_features);
        for (c, m) in class_mean.iter().enumerate() {
            let w = (class_n[c] as f64 / n).sqrt();
            for j in 0..n_features {
                between[(c, j)] = w * (m[j] - mean[j]);
            }
        }
        let sb = between.transpose() * &between;

        let shrink = LDA_SHRINKAGE * sw.trace() / n_features as f64;
        for i in 0..n_features {
            sw[(i, i)] += shrink.max(1e-12);
        }
        let (sw_vals, sw_vecs) = sorted_sym_eigen(&sw);
        let inv_sqrt = DMatrix::from_diagonal(&sw_vals.map(|v| 1.0 / v.max(1e-12).sqrt()));
        let whiten = sw_vecs * inv_sqrt;
        let sb_white = whiten.transpose() * sb * &whiten;
        let (_, dirs) = sorted_sym_eigen(&sb_white);
        let proj = whiten * dirs.columns(0, dim);

        net.mean = mean.iter().copied().collect();
        // proj is features x dim and column-major, so its raw storage is
        // exactly the row-major dim x features layout.
        net.projection = proj.iter().copied().collect();
        Ok(net)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let net: Self = serde_json::from_str(&text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        let (fh, fw, fc) = self
            .stack
            .output_shape(self.input_shape)
            .ok_or_else(|| Error::param("stored architecture does not fit its input shape"))?;
        let nf = fh * fw * fc;
        if self.mean.len() != nf || self.projection.len() != nf * self.dim {
            return Err(Error::param("stored head does not match feature size"));
        }
        Ok(())
    }

    fn to_tensor(&self, img: &ImageTensor) -> Result<Tensor3> {
        if img.shape() != self.input_shape {
            return Err(Error::Embed {
                model: self.name.clone(),
                reason: format!("expects a {:?} image, got {:?}", self.input_shape, img.shape()),
            });
        }
        let (h, w, c) = self.input_shape;
        Ok(Tensor3 {
            h,
            w,
            c,
            data: img.as_slice().iter().map(|v| v - 0.5).collect(),
        })
    }

    /// Output of the convolution stack, flattened.
    pub fn features(&self, img: &ImageTensor) -> Result<Vec<f64>> {
        Ok(self.stack.forward(self.to_tensor(img)?).data)
    }

    fn project(&self, features: &[f64]) -> FaceEmbedding {
        let centered: Vec<f64> = features.iter().zip(&self.mean).map(|(f, m)| f - m).collect();
        FaceEmbedding(
            self.projection
                .chunks(centered.len())
                .map(|row| row.iter().zip(&centered).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }
}

impl FaceEmbedder for ToyConvNet {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed_dim(&self) -> usize {
        self.dim
    }

    fn input_shape(&self) -> Option<(usize, usize, usize)> {
        Some(self.input_shape)
    }

    fn embed(&self, img: &ImageTensor) -> Result<FaceEmbedding> {
        Ok(self.project(&self.features(img)?))
    }

    fn embed_vjp(
        &self,
        img: &ImageTensor,
        upstream: &mut Upstream<'_>,
    ) -> Result<(FaceEmbedding, Vec<f64>)> {
        let acts = self.stack.forward_trace(self.to_tensor(img)?);
        let last = acts.last().expect("trace has the input");
        let e = self.project(&last.data);
        let g = upstream(&e)?;
        let mut g_feat = vec![0.0; last.data.len()];
        for (row, gi) in self.projection.chunks(g_feat.len()).zip(&g) {
            for (acc, a) in g_feat.iter_mut().zip(row) {
                *acc += gi * a;
            }
        }
        let g_out = Tensor3 {
            data: g_feat,
            ..*last
        };
        let g_in = self.stack.backward(&acts, g_out);
        Ok((e, g_in.data))
    }
}
