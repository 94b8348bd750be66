//! Separable Gaussian blur with reflect padding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlurParams {
    pub kernel_size: usize,
    pub sigma: f64,
}

impl Default for BlurParams {
    fn default() -> Self {
        Self {
            kernel_size: 19,
            sigma: 5.0,
        }
    }
}

impl BlurParams {
    pub fn new(kernel_size: usize, sigma: f64) -> Result<Self> {
        let p = Self { kernel_size, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::param(format!(
                "blur kernel size must be odd and >= 1, got {}",
                self.kernel_size
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("blur sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        self.kernel_size / 2
    }

    /// Normalized 1D taps, index `radius` is the center.
    pub fn kernel_1d(&self) -> Vec<f64> {
        let r = self.radius() as isize;
        let denom = 2.0 * self.sigma * self.sigma;
        let mut taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / denom).exp()).collect();
        let sum: f64 = taps.iter().sum();
        for t in &mut taps {
            *t /= sum;
        }
        taps
    }
}

/// Mirror index into `0..n` without repeating the edge sample (`-1 -> 1`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Blurs raw channels-last samples without any range handling.
pub fn gaussian_blur_raw(
    data: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    params: BlurParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    if data.len() != height * width * channels {
        return Err(Error::Shape {
            expected: format!("{} samples", height * width * channels),
            actual: format!("{} samples", data.len()),
        });
    }
    let taps = params.kernel_1d();
    let r = params.radius() as isize;

    let mut horiz = vec![0.0; data.len()];
    for y in 0..height {
        let row = y * width;
        for x in 0..width {
            for c in 0..channels {
                let mut acc = 0.0;
                for (k, t) in taps.iter().enumerate() {
                    let sx = reflect(x as isize + k as isize - r, width);
                    acc += t * data[(row + sx) * channels + c];
                }
                horiz[(row + x) * channels + c] = acc;
            }
        }
    }

    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                let mut acc = 0.0;
                for (k, t) in taps.iter().enumerate() {
                    let sy = reflect(y as isize + k as isize - r, height);
                    acc += t * horiz[(sy * width + x) * channels + c];
                }
                out[(y * width + x) * channels + c] = acc;
            }
        }
    }
    Ok(out)
}

/// Per-channel Gaussian blur. Output has the input's shape and stays in `[0, 1]`.
pub fn gaussian_blur(img: &ImageTensor, params: BlurParams) -> Result<ImageTensor> {
    let (h, w, c) = img.shape();
    let out = gaussian_blur_raw(img.as_slice(), h, w, c, params)?;
    img.with_data(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_mirrors_without_edge_repeat() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(0, 5), 0);
        assert_eq!(reflect(-13, 5), 3);
        assert_eq!(reflect(-3, 1), 0);
        assert_eq!(reflect(3, 2), 1);
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(BlurParams::new(4, 1.0).is_err());
        assert!(BlurParams::new(0, 1.0).is_err());
        assert!(BlurParams::new(3, 0.0).is_err());
        let img = ImageTensor::filled(4, 4, 1, 0.5).unwrap();
        let bad = BlurParams {
            kernel_size: 18,
            sigma: 5.0,
        };
        assert!(gaussian_blur(&img, bad).is_err());
    }

    #[test]
    fn default_params() {
        let p = BlurParams::default();
        assert_eq!(p.kernel_size, 19);
        assert_eq!(p.sigma, 5.0);
        let sum: f64 = p.kernel_1d().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }
}
