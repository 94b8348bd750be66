use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::linalg::{mean_and_covariance, sqrt_psd};

/// Added to both covariances before the matrix square root.
const COVARIANCE_JITTER: f64 = 1e-6;

/// Frechet distance between Gaussian fits of two feature sets:
/// `|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
///
/// The trace of the product root is computed as
/// `Tr((S_a^(1/2) S_b S_a^(1/2))^(1/2))`, which only needs symmetric
/// eigendecompositions.
pub fn fid(features_a: &[Vec<f64>], features_b: &[Vec<f64>]) -> Result<f64> {
    if features_a.is_empty() || features_b.is_empty() {
        return Err(Error::param("FID needs non-empty feature sets"));
    }
    let dim = features_a[0].len();
    if dim == 0
        || features_a.iter().chain(features_b).any(|f| f.len() != dim)
    {
        return Err(Error::param("FID feature vectors must share one nonzero dimension"));
    }
    let (mu_a, mut cov_a) = mean_and_covariance(features_a);
    let (mu_b, mut cov_b) = mean_and_covariance(features_b);
    for i in 0..dim {
        cov_a[(i, i)] += COVARIANCE_JITTER;
        cov_b[(i, i)] += COVARIANCE_JITTER;
    }
    let mean_term = (&mu_a - &mu_b).norm_squared();
    let root_a = sqrt_psd(&cov_a);
    let inner = &root_a * &cov_b * &root_a;
    let cross = sqrt_psd(&inner).trace();
    let value = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

/// Maps images to feature vectors for FID.
pub trait FeatureExtractor: Send + Sync {
    fn dim(&self) -> usize;
    fn extract(&self, img: &ImageTensor) -> Result<Vec<f64>>;
}

/// Fixed Gaussian projection of `pool x pool` block means of the image.
#[derive(Debug, Clone)]
pub struct RandomProjectionExtractor {
    pool: usize,
    dim: usize,
    seed: u64,
}

impl RandomProjectionExtractor {
    pub fn new(pool: usize, dim: usize, seed: u64) -> Self {
        Self {
            pool: pool.max(1),
            dim,
            seed,
        }
    }

    fn pooled(&self, img: &ImageTensor) -> Vec<f64> {
        let (h, w, c) = img.shape();
        let (ph, pw) = (h.div_ceil(self.pool), w.div_ceil(self.pool));
        let mut sums = vec![0.0; ph * pw * c];
        let mut counts = vec![0usize; ph * pw];
        for y in 0..h {
            for x in 0..w {
                let cell = (y / self.pool) * pw + x / self.pool;
                counts[cell] += 1;
                for ch in 0..c {
                    sums[cell * c + ch] += img.get(y, x, ch);
                }
            }
        }
        for (cell, n) in counts.iter().enumerate() {
            for ch in 0..c {
                sums[cell * c + ch] /= *n as f64;
            }
        }
        sums
    }
}

impl Default for RandomProjectionExtractor {
    fn default() -> Self {
        Self::new(4, 16, 0x5eed)
    }
}

impl FeatureExtractor for RandomProjectionExtractor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn extract(&self, img: &ImageTensor) -> Result<Vec<f64>> {
        let pooled = self.pooled(img);
        // The matrix depends only on the seed and the pooled size, so it is
        // regenerated on the fly instead of being stored per image size.
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ pooled.len() as u64);
        let scale = 1.0 / (pooled.len() as f64).sqrt();
        Ok((0..self.dim)
            .map(|_| {
                pooled
                    .iter()
                    .map(|p| p * scale * rng.sample::<f64, _>(StandardNormal))
                    .sum()
            })
            .collect())
    }
}
