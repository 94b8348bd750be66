//! Canonical image representation and PNG/JPEG I/O.
//!
//! Every module works on [`ImageTensor`]: channels-last `f64` samples in
//! `[0, 1]`. Decoding and encoding are the only places where byte values
//! appear.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    /// Builds an image, rejecting values outside `[0, 1]` or a data length
    /// that disagrees with the shape.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        Self::check_shape(height, width, channels, data.len())?;
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image by projecting every value into `[0, 1]`. NaN maps to 0.
    pub fn from_clamped(
        height: usize,
        width: usize,
        channels: usize,
        mut data: Vec<f64>,
    ) -> Result<Self> {
        Self::check_shape(height, width, channels, data.len())?;
        clamp_slice(&mut data);
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::from_clamped(height, width, channels, data)
    }

    fn check_shape(height: usize, width: usize, channels: usize, len: usize) -> Result<()> {
        if height == 0 || width == 0 {
            return Err(Error::param(format!("empty image {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::param(format!("unsupported channel count {channels}")));
        }
        if len != height * width * channels {
            return Err(Error::Shape {
                expected: format!("{} samples", height * width * channels),
                actual: format!("{len} samples"),
            });
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    /// Same shape, new samples; the samples are clamped into range.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::from_clamped(self.height, self.width, self.channels, data)
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_same_shape(&self, other: &ImageTensor) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: format!("{:?}", self.shape()),
                actual: format!("{:?}", other.shape()),
            })
        }
    }

    /// Largest absolute per-sample difference.
    pub fn max_abs_diff(&self, other: &ImageTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Converts to three channels by replicating a gray channel.
    pub fn to_rgb(&self) -> ImageTensor {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageTensor {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(height, width, channels, data)
    }

    /// Encodes as an 8-bit non-interlaced PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_png(&mut out)
            .map_err(|e| Error::param(format!("png encoding failed: {e}")))?;
        Ok(out)
    }

    fn write_png<W: std::io::Write>(&self, w: W) -> image::ImageResult<()> {
        let color = if self.channels == 1 {
            ExtendedColorType::L8
        } else {
            ExtendedColorType::Rgb8
        };
        PngEncoder::new(w).write_image(
            &self.to_bytes(),
            self.width as u32,
            self.height as u32,
            color,
        )
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| Error::Format {
            path: "<memory>".into(),
            reason: e.to_string(),
        })?;
        Ok(from_dynamic(img))
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn clamp_slice(data: &mut [f64]) {
    for v in data {
        *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    }
}

/// Projects every value into `[0, 1]`.
pub fn clamp01(img: &ImageTensor) -> ImageTensor {
    let mut out = img.clone();
    clamp_slice(&mut out.data);
    out
}

fn from_dynamic(img: DynamicImage) -> ImageTensor {
    let (width, height) = (img.width() as usize, img.height() as usize);
    let gray = matches!(
        img,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
    );
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let (channels, data): (usize, Vec<f64>) = match (gray, sixteen) {
        (true, false) => (1, img.to_luma8().iter().map(|&b| f64::from(b) / 255.0).collect()),
        (true, true) => (1, img.to_luma16().iter().map(|&b| f64::from(b) / 65535.0).collect()),
        (false, false) => (3, img.to_rgb8().iter().map(|&b| f64::from(b) / 255.0).collect()),
        (false, true) => (3, img.to_rgb16().iter().map(|&b| f64::from(b) / 65535.0).collect()),
    };
    ImageTensor {
        height,
        width,
        channels,
        data,
    }
}

/// Decodes a PNG or JPEG file into `[0, 1]` samples. Alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(from_dynamic(img))
}

/// Writes an 8-bit PNG (gray for one channel, RGB for three).
pub fn save_image(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    img.write_png(BufWriter::new(file)).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::param(format!("png encoding failed: {other}")),
    })
}
