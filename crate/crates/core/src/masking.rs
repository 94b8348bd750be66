//! Texture extraction by unsharp masking, face-parsing label maps, and the
//! hair-texture mask used by the masked pixel attacks.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blur::{gaussian_blur_raw, BlurParams};
use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Default texture threshold on `[0, 1]`-scaled samples.
pub const DEFAULT_GAMMA: f64 = 0.003;

/// Per-pixel `{0, 1}` mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Shape {
                expected: format!("{} mask bits", height * width),
                actual: format!("{} mask bits", bits.len()),
            });
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub fn matches_image(&self, img: &ImageTensor) -> bool {
        self.height == img.height() && self.width == img.width()
    }

    pub fn ensure_matches(&self, img: &ImageTensor) -> Result<()> {
        if self.matches_image(img) {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: format!("{}x{} mask", img.height(), img.width()),
                actual: format!("{}x{} mask", self.height, self.width),
            })
        }
    }

    /// Mask as a one-channel image with samples 0.0 / 1.0.
    pub fn to_image(&self) -> ImageTensor {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        ImageTensor::new(self.height, self.width, 1, data).expect("mask shape is valid")
    }

    /// Writes an 8-bit grayscale PNG with values {0, 255}.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::image::save_image(&self.to_image(), path)
    }

    /// Reads a grayscale PNG; any nonzero sample is set.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = crate::image::load_image(path)?;
        let c = img.channels();
        let bits = img
            .as_slice()
            .chunks(c)
            .map(|px| px.iter().any(|v| *v > 0.0))
            .collect();
        Self::new(img.height(), img.width(), bits)
    }
}

/// Label id table for a parser, with one designated hair label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSet {
    pub labels: Vec<(u8, String)>,
    pub hair: u8,
}

impl LabelSet {
    /// The 19-class CelebAMask-HQ table, hair = 17.
    pub fn celebamask_hq() -> Self {
        const NAMES: [&str; 19] = [
            "background", "skin", "l_brow", "r_brow", "l_eye", "r_eye", "eye_g", "l_ear",
            "r_ear", "ear_r", "nose", "mouth", "u_lip", "l_lip", "neck", "neck_l", "cloth",
            "hair", "hat",
        ];
        Self {
            labels: NAMES
                .iter()
                .enumerate()
                .map(|(i, n)| (i as u8, (*n).to_string()))
                .collect(),
            hair: 17,
        }
    }

    pub fn contains(&self, id: u8) -> bool {
        self.labels.iter().any(|(l, _)| *l == id)
    }

    pub fn name_of(&self, id: u8) -> Option<&str> {
        self.labels
            .iter()
            .find(|(l, _)| *l == id)
            .map(|(_, n)| n.as_str())
    }

    pub fn id_of(&self, name: &str) -> Option<u8> {
        self.labels.iter().find(|(_, n)| n == name).map(|(l, _)| *l)
    }
}

impl Default for LabelSet {
    fn default() -> Self {
        Self::celebamask_hq()
    }
}

/// Per-pixel component labels produced by a face parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Shape {
                expected: format!("{} labels", height * width),
                actual: format!("{} labels", labels.len()),
            });
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Reads an 8-bit indexed PNG (raw palette indices) or 8-bit grayscale PNG.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let fmt = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::IDENTITY);
        let mut reader = decoder.read_info().map_err(|e| fmt(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| fmt("image too large".into()))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(|e| fmt(e.to_string()))?;
        if info.bit_depth != png::BitDepth::Eight
            || !matches!(
                info.color_type,
                png::ColorType::Indexed | png::ColorType::Grayscale
            )
        {
            return Err(fmt(format!(
                "label maps must be 8-bit indexed or grayscale, got {:?} {:?}",
                info.color_type, info.bit_depth
            )));
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let mut labels = Vec::with_capacity(w * h);
        for row in buf[..info.buffer_size()].chunks(info.line_size) {
            labels.extend_from_slice(&row[..w]);
        }
        Self::new(h, w, labels)
    }

    /// Writes an 8-bit indexed PNG whose palette index equals the label id.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(label_palette());
        let encode_err = |e: png::EncodingError| match e {
            png::EncodingError::IoError(io) => Error::io(path, io),
            other => Error::param(format!("png encoding failed: {other}")),
        };
        let mut writer = enc.write_header().map_err(encode_err)?;
        writer.write_image_data(&self.labels).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
        Ok(())
    }
}

fn label_palette() -> Vec<u8> {
    // Deterministic, visually distinct colors; index 0 stays black.
    let mut pal = Vec::with_capacity(256 * 3);
    for i in 0u32..256 {
        if i == 0 {
            pal.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        let h = i.wrapping_mul(2654435761);
        pal.extend_from_slice(&[(h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8]);
    }
    pal
}

/// Pixelwise face-component labeling.
///
/// `image_id` lets lookup-style parsers locate an annotation; model-backed
/// parsers ignore it.
pub trait FaceParser: Send + Sync {
    fn name(&self) -> &str;

    fn label_set(&self) -> &LabelSet;

    /// `false` makes callers serialize `parse` calls.
    fn concurrent_safe(&self) -> bool {
        true
    }

    fn parse(&self, img: &ImageTensor, image_id: &str) -> Result<LabelMap>;
}

/// Reads ground-truth annotations `<dir>/<image_id>.png`.
#[derive(Debug, Clone)]
pub struct AnnotationParser {
    dir: PathBuf,
    labels: LabelSet,
}

impl AnnotationParser {
    pub fn new(dir: impl Into<PathBuf>, labels: LabelSet) -> Self {
        Self {
            dir: dir.into(),
            labels,
        }
    }

    pub fn annotation_path(&self, image_id: &str) -> PathBuf {
        self.dir.join(format!("{image_id}.png"))
    }
}

impl FaceParser for AnnotationParser {
    fn name(&self) -> &str {
        "annotation"
    }

    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn parse(&self, _img: &ImageTensor, image_id: &str) -> Result<LabelMap> {
        LabelMap::load_png(self.annotation_path(image_id)).map_err(|e| Error::Parse {
            parser: self.name().into(),
            reason: e.to_string(),
        })
    }
}

/// Returns one fixed label map for every image.
#[derive(Debug, Clone)]
pub struct StaticParser {
    map: LabelMap,
    labels: LabelSet,
}

impl StaticParser {
    pub fn new(map: LabelMap, labels: LabelSet) -> Self {
        Self { map, labels }
    }
}

impl FaceParser for StaticParser {
    fn name(&self) -> &str {
        "static"
    }

    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn parse(&self, _img: &ImageTensor, _image_id: &str) -> Result<LabelMap> {
        Ok(self.map.clone())
    }
}

/// Runs a parser and checks its output against the parser contract.
pub fn parse_face(parser: &dyn FaceParser, img: &ImageTensor, image_id: &str) -> Result<LabelMap> {
    let map = parser.parse(img, image_id)?;
    let fail = |reason: String| Error::Parse {
        parser: parser.name().to_string(),
        reason,
    };
    if map.height != img.height() || map.width != img.width() {
        return Err(fail(format!(
            "label map is {}x{}, image is {}x{}",
            map.height,
            map.width,
            img.height(),
            img.width()
        )));
    }
    let set = parser.label_set();
    if let Some(bad) = map.labels.iter().find(|l| !set.contains(**l)) {
        return Err(fail(format!("label {bad} is not in the parser's label set")));
    }
    Ok(map)
}

/// `|x - blur(x)|` reduced to one value per pixel by the channel maximum.
pub fn high_freq(img: &ImageTensor, params: BlurParams) -> Result<Vec<f64>> {
    let (h, w, c) = img.shape();
    let blurred = gaussian_blur_raw(img.as_slice(), h, w, c, params)?;
    Ok(img
        .as_slice()
        .chunks(c)
        .zip(blurred.chunks(c))
        .map(|(x, b)| {
            x.iter()
                .zip(b)
                .map(|(x, b)| (x - b).abs().min(1.0))
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Texture mask: set where the high-frequency map strictly exceeds `gamma`.
pub fn texture_mask(img: &ImageTensor, gamma: f64, params: BlurParams) -> Result<BinaryMask> {
    if !(gamma >= 0.0) {
        return Err(Error::param(format!("gamma must be >= 0, got {gamma}")));
    }
    let hf = high_freq(img, params)?;
    BinaryMask::new(img.height(), img.width(), hf.into_iter().map(|v| v > gamma).collect())
}

pub fn hair_mask(labels: &LabelMap, label_set: &LabelSet, hair_label: u8) -> Result<BinaryMask> {
    if !label_set.contains(hair_label) {
        return Err(Error::param(format!("hair label {hair_label} is not in the label set")));
    }
    BinaryMask::new(
        labels.height,
        labels.width,
        labels.labels.iter().map(|l| *l == hair_label).collect(),
    )
}

/// Pixelwise AND.
pub fn combine_masks(texture: &BinaryMask, hair: &BinaryMask) -> Result<BinaryMask> {
    if texture.height != hair.height || texture.width != hair.width {
        return Err(Error::param(format!(
            "cannot combine a {}x{} mask with a {}x{} mask",
            texture.height, texture.width, hair.height, hair.width
        )));
    }
    BinaryMask::new(
        texture.height,
        texture.width,
        texture.bits.iter().zip(&hair.bits).map(|(a, b)| *a && *b).collect(),
    )
}

/// Hair-restricted texture mask for one image.
pub fn hair_texture_mask(
    img: &ImageTensor,
    parser: &dyn FaceParser,
    image_id: &str,
    gamma: f64,
    blur: BlurParams,
) -> Result<BinaryMask> {
    let texture = texture_mask(img, gamma, blur)?;
    let labels = parse_face(parser, img, image_id)?;
    let set = parser.label_set();
    let hair = hair_mask(&labels, set, set.hair)?;
    combine_masks(&texture, &hair)
}

/// Red overlay of `mask` on `img`, for previews.
pub fn overlay(img: &ImageTensor, mask: &BinaryMask, alpha: f64) -> Result<ImageTensor> {
    mask.ensure_matches(img)?;
    let rgb = img.to_rgb();
    let mut data = rgb.as_slice().to_vec();
    for (i, px) in data.chunks_mut(3).enumerate() {
        if mask.bits[i] {
            px[0] = px[0] * (1.0 - alpha) + alpha;
            px[1] *= 1.0 - alpha;
            px[2] *= 1.0 - alpha;
        }
    }
    rgb.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_of(h: usize, w: usize, f: impl Fn(usize, usize) -> u8) -> LabelMap {
        let mut v = Vec::new();
        for y in 0..h {
            for x in 0..w {
                v.push(f(y, x));
            }
        }
        LabelMap::new(h, w, v).unwrap()
    }

    #[test]
    fn constant_image_has_no_texture() {
        let img = ImageTensor::filled(24, 20, 3, 0.37).unwrap();
        let hf = high_freq(&img, BlurParams::default()).unwrap();
        assert!(hf.iter().all(|v| v.abs() < 1e-12));
        let m = texture_mask(&img, DEFAULT_GAMMA, BlurParams::default()).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn zero_gamma_marks_every_nonzero_response() {
        let img = ImageTensor::from_fn(16, 16, 1, |y, x, _| ((x * 7 + y * 3) % 5) as f64 / 4.0).unwrap();
        let p = BlurParams::new(5, 1.5).unwrap();
        let hf = high_freq(&img, p).unwrap();
        let m = texture_mask(&img, 0.0, p).unwrap();
        for (bit, v) in m.bits().iter().zip(&hf) {
            assert_eq!(*bit, *v > 0.0);
        }
        assert!(texture_mask(&img, -0.1, p).is_err());
    }

    #[test]
    fn hair_mask_examples() {
        let set = LabelSet::celebamask_hq();
        let none = map_of(5, 7, |_, _| 1);
        assert!(hair_mask(&none, &set, 17).unwrap().is_empty());
        let all = map_of(5, 7, |_, _| 17);
        assert_eq!(hair_mask(&all, &set, 17).unwrap().count_ones(), 35);
        let checker = map_of(5, 7, |y, x| if (x + y) % 2 == 0 { 17 } else { 0 });
        // ceil(35 / 2)
        assert_eq!(hair_mask(&checker, &set, 17).unwrap().count_ones(), 18);
        assert!(hair_mask(&all, &set, 200).is_err());
    }

    #[test]
    fn combine_examples() {
        let t = BinaryMask::from_fn(6, 6, |y, x| (x * y) % 3 == 1);
        assert_eq!(combine_masks(&t, &BinaryMask::ones(6, 6)).unwrap(), t);
        let a = BinaryMask::from_fn(6, 6, |y, _| y < 3);
        let b = BinaryMask::from_fn(6, 6, |y, _| y >= 3);
        assert!(combine_masks(&a, &b).unwrap().is_empty());
        assert!(combine_masks(&a, &BinaryMask::ones(5, 6)).is_err());
    }

    #[test]
    fn parse_face_validates_labels_and_shape() {
        let set = LabelSet::celebamask_hq();
        let img = ImageTensor::filled(4, 4, 3, 0.5).unwrap();
        let good = StaticParser::new(map_of(4, 4, |_, _| 17), set.clone());
        assert_eq!(parse_face(&good, &img, "x").unwrap().labels(), &[17; 16]);
        let bad_label = StaticParser::new(map_of(4, 4, |_, _| 99), set.clone());
        assert!(matches!(parse_face(&bad_label, &img, "x"), Err(Error::Parse { .. })));
        let bad_shape = StaticParser::new(map_of(3, 4, |_, _| 1), set);
        assert!(parse_face(&bad_shape, &img, "x").is_err());
    }

    #[test]
    fn label_png_round_trip_and_missing_annotation() {
        let dir = tempfile::tempdir().unwrap();
        let map = map_of(9, 11, |y, x| ((y * 11 + x) % 19) as u8);
        map.save_png(dir.path().join("a.png")).unwrap();
        assert_eq!(LabelMap::load_png(dir.path().join("a.png")).unwrap(), map);

        let parser = AnnotationParser::new(dir.path(), LabelSet::default());
        let img = ImageTensor::filled(9, 11, 3, 0.2).unwrap();
        assert_eq!(parse_face(&parser, &img, "a").unwrap(), map);
        assert!(matches!(parse_face(&parser, &img, "missing"), Err(Error::Parse { .. })));
    }

    #[test]
    fn mask_png_uses_0_and_255() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_fn(5, 5, |y, x| y == x);
        let p = dir.path().join("m.png");
        m.save_png(&p).unwrap();
        let img = crate::image::load_image(&p).unwrap();
        assert_eq!(img.channels(), 1);
        assert!(img.as_slice().iter().all(|v| *v == 0.0 || *v == 1.0));
        assert_eq!(BinaryMask::load_png(&p).unwrap(), m);
    }
}
