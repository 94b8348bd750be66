//! Procedural face images with exact parsing annotations.
//!
//! Faces are drawn from a handful of identity parameters (skin tone, head
//! shape, eye and mouth geometry, hair colour and stripe texture) and
//! per-image nuisance parameters (position, lighting, smile, age). Every
//! pixel also receives a CelebAMask-HQ style class label, so the same
//! generator feeds embedder training, decoder fitting, attribute discovery
//! and the attack fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::ImageTensor;
use crate::masking::LabelMap;

pub const DEFAULT_SIZE: usize = 64;

const BACKGROUND: u8 = 0;
const SKIN: u8 = 1;
const L_BROW: u8 = 2;
const R_BROW: u8 = 3;
const L_EYE: u8 = 4;
const R_EYE: u8 = 5;
const NOSE: u8 = 10;
const U_LIP: u8 = 12;
const L_LIP: u8 = 13;
const NECK: u8 = 14;
const HAIR: u8 = 17;

/// Parameters fixed for one synthetic person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub skin: [f64; 3],
    pub face_rx: f64,
    pub face_ry: f64,
    pub eye_gap: f64,
    pub eye_y: f64,
    pub eye_r: f64,
    pub iris: [f64; 3],
    pub brow_tilt: f64,
    pub nose_len: f64,
    pub mouth_y: f64,
    pub mouth_w: f64,
    pub lip: [f64; 3],
    pub hair: [f64; 3],
    pub hair_volume: f64,
    pub hairline: f64,
    pub stripe_period: f64,
    pub stripe_angle: f64,
    pub stripe_amp: f64,
}

/// Per-image variation that should not change who the person is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    pub dx: f64,
    pub dy: f64,
    pub brightness: f64,
    pub smile: f64,
    pub age: f64,
    pub phase: f64,
    pub background: [f64; 3],
}

fn color<R: Rng>(rng: &mut R, base: [f64; 3], spread: f64) -> [f64; 3] {
    base.map(|b| (b + rng.random_range(-spread..=spread)).clamp(0.02, 0.98))
}

impl IdentityParams {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        let tone = rng.random_range(0.35..0.85);
        Self {
            skin: color(rng, [tone + 0.08, tone - 0.02, tone - 0.12], 0.05),
            face_rx: rng.random_range(15.5..20.5),
            face_ry: rng.random_range(19.0..24.0),
            eye_gap: rng.random_range(6.5..10.5),
            eye_y: rng.random_range(-6.0..-2.0),
            eye_r: rng.random_range(1.8..3.4),
            iris: color(rng, [0.3, 0.3, 0.3], 0.25),
            brow_tilt: rng.random_range(-0.35..0.35),
            nose_len: rng.random_range(4.0..9.0),
            mouth_y: rng.random_range(8.0..12.5),
            mouth_w: rng.random_range(4.5..9.0),
            lip: color(rng, [0.7, 0.3, 0.35], 0.15),
            hair: color(rng, [0.35, 0.27, 0.22], 0.22),
            hair_volume: rng.random_range(3.0..7.0),
            hairline: rng.random_range(6.0..12.0),
            stripe_period: rng.random_range(2.5..4.5),
            stripe_angle: rng.random_range(0.0..std::f64::consts::PI),
            stripe_amp: rng.random_range(0.12..0.3),
        }
    }
}

impl Nuisance {
    pub fn neutral() -> Self {
        Self {
            dx: 0.0,
            dy: 0.0,
            brightness: 0.0,
            smile: 0.0,
            age: 0.0,
            phase: 0.0,
            background: [0.6, 0.6, 0.62],
        }
    }

    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        Self {
            dx: rng.random_range(-1.5..1.5),
            dy: rng.random_range(-1.5..1.5),
            brightness: rng.random_range(-0.05..0.05),
            smile: rng.random_range(0.0..1.0),
            age: rng.random_range(0.0..1.0),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            background: color(rng, [0.5, 0.5, 0.55], 0.3),
        }
    }
}

/// Coverage of a shape edge at signed distance `sd` (negative inside).
fn coverage(sd: f64) -> f64 {
    (0.5 - sd).clamp(0.0, 1.0)
}

/// Approximate signed distance to an axis-aligned ellipse, in pixels.
fn ellipse_sd(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    let r = (((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2)).sqrt();
    (r - 1.0) * rx.min(ry)
}

struct Canvas {
    size: usize,
    rgb: Vec<f64>,
    labels: Vec<u8>,
}

impl Canvas {
    /// Blends `paint` into pixel `i` with weight `a`; the label switches
    /// once the new layer covers at least half the pixel.
    fn blend(&mut self, i: usize, a: f64, paint: [f64; 3], label: u8) {
        if a <= 0.0 {
            return;
        }
        for c in 0..3 {
            let v = &mut self.rgb[i * 3 + c];
            *v = *v * (1.0 - a) + paint[c] * a;
        }
        if a >= 0.5 {
            self.labels[i] = label;
        }
    }

    fn layer(&mut self, mut f: impl FnMut(f64, f64) -> Option<(f64, [f64; 3], u8)>) {
        let s = self.size;
        for y in 0..s {
            for x in 0..s {
                if let Some((a, paint, label)) = f(x as f64 + 0.5, y as f64 + 0.5) {
                    self.blend(y * s + x, a, paint, label);
                }
            }
        }
    }
}

/// Renders one face at `size x size` with its label map.
pub fn render_face(id: &IdentityParams, nu: &Nuisance, size: usize) -> Result<(ImageTensor, LabelMap)> {
    let k = size as f64 / DEFAULT_SIZE as f64;
    let cx = 32.0 * k + nu.dx * k;
    let cy = 34.0 * k + nu.dy * k;
    let (rx, ry) = (id.face_rx * k, id.face_ry * k);
    let lit = |c: [f64; 3]| c.map(|v| (v + nu.brightness).clamp(0.0, 1.0));
    let mut cv = Canvas {
        size,
        rgb: Vec::with_capacity(size * size * 3),
        labels: vec![BACKGROUND; size * size],
    };
    for y in 0..size {
        let shade = 0.08 * (y as f64 / size as f64 - 0.5);
        for _ in 0..size {
            cv.rgb.extend(lit(nu.background).map(|v| (v + shade).clamp(0.0, 1.0)));
        }
    }

    let (sa, ca) = id.stripe_angle.sin_cos();
    let hair_at = |x: f64, y: f64| {
        let t = (x * ca + y * sa) / (id.stripe_period * k);
        let s = (std::f64::consts::TAU * t + nu.phase).sin();
        lit(id.hair.map(|v| (v * (1.0 + id.stripe_amp * s)).clamp(0.0, 1.0)))
    };

    // Neck.
    let neck = lit(id.skin.map(|v| v * 0.85));
    cv.layer(|x, y| {
        let sd = ((x - cx).abs() - rx * 0.45).max(cy + ry * 0.6 - y);
        Some((coverage(sd), neck, NECK))
    });
    // Hair behind the head.
    let hv = id.hair_volume * k;
    cv.layer(|x, y| {
        let sd = ellipse_sd(x, y, cx, cy - hv * 0.8, rx + hv, ry + hv * 0.6);
        let below = y - (cy + ry * 0.35);
        Some((coverage(sd.max(below)), hair_at(x, y), HAIR))
    });
    // Face with soft radial shading and age darkening.
    cv.layer(|x, y| {
        let sd = ellipse_sd(x, y, cx, cy, rx, ry);
        let r2 = ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2);
        let dim = 1.0 - 0.12 * r2 - 0.1 * nu.age;
        let mut paint = lit(id.skin.map(|v| v * dim));
        let fy = y - (cy - ry * 0.45);
        if nu.age > 0.0 && fy.abs() < 4.0 * k {
            let line = (std::f64::consts::TAU * fy / (2.0 * k)).cos().max(0.0);
            paint = paint.map(|v| (v - 0.08 * nu.age * line).clamp(0.0, 1.0));
        }
        Some((coverage(sd), paint, SKIN))
    });
    // Fringe: hair over the top of the face down to the hairline.
    let line_y = cy - ry + id.hairline * k;
    cv.layer(|x, y| {
        let inside = ellipse_sd(x, y, cx, cy, rx, ry);
        let bang = line_y + 1.5 * k * ((x - cx) / (3.0 * k)).sin();
        Some((coverage(inside.max(y - bang)), hair_at(x, y), HAIR))
    });
    // Brows, eyes and irises.
    let eye_y = cy + id.eye_y * k;
    let gap = id.eye_gap * k;
    let er = id.eye_r * k;
    let brow = lit(id.hair.map(|v| v * 0.6));
    for (side, brow_label, eye_label) in [(-1.0, L_BROW, L_EYE), (1.0, R_BROW, R_EYE)] {
        let ex = cx + side * gap;
        cv.layer(|x, y| {
            let by = eye_y - er - 2.5 * k + side * id.brow_tilt * (x - ex);
            let sd = ((x - ex).abs() - er * 1.3).max((y - by).abs() - 0.8 * k);
            Some((coverage(sd), brow, brow_label))
        });
        cv.layer(|x, y| {
            let sd = ellipse_sd(x, y, ex, eye_y, er * 1.4, er * 0.8);
            Some((coverage(sd), lit([0.93, 0.93, 0.9]), eye_label))
        });
        cv.layer(|x, y| {
            let sd = ellipse_sd(x, y, ex, eye_y, er * 0.6, er * 0.6);
            Some((coverage(sd), lit(id.iris), eye_label))
        });
    }
    // Nose: a narrow darker wedge.
    let nose = lit(id.skin.map(|v| v * 0.8));
    let nose_top = eye_y + 1.0 * k;
    let nose_len = id.nose_len * k;
    cv.layer(|x, y| {
        let t = ((y - nose_top) / nose_len).clamp(0.0, 1.0);
        let half = 0.6 * k + 1.6 * k * t;
        let sd = ((x - cx).abs() - half).max(nose_top - y).max(y - nose_top - nose_len);
        Some((coverage(sd), nose, NOSE))
    });
    // Lips, curved upward by the smile.
    let my = cy + id.mouth_y * k;
    let mw = id.mouth_w * k;
    let lip = lit(id.lip);
    cv.layer(|x, y| {
        let u = (x - cx) / mw;
        let curve = my - nu.smile * 2.5 * k * u * u;
        let thick = (1.0 - u * u).max(0.0) * 1.6 * k;
        let sd = ((x - cx).abs() - mw).max((y - curve).abs() - thick);
        let label = if y < curve { U_LIP } else { L_LIP };
        Some((coverage(sd), lip, label))
    });

    let img = ImageTensor::from_clamped(size, size, 3, cv.rgb)?;
    let labels = LabelMap::new(size, size, cv.labels)?;
    Ok((img, labels))
}

/// Deterministic RNG for `(seed, stream, index)`.
pub fn stream_rng(seed: u64, stream: &str, index: u64) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes().chain(index.to_le_bytes()).chain(seed.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// A population of synthetic people drawn from one named stream.
#[derive(Debug, Clone)]
pub struct Population {
    pub ids: Vec<IdentityParams>,
    seed: u64,
    stream: String,
}

impl Population {
    pub fn new(seed: u64, stream: &str, n: usize) -> Self {
        let ids = (0..n)
            .map(|i| IdentityParams::sample(&mut stream_rng(seed, stream, i as u64)))
            .collect();
        Self {
            ids,
            seed,
            stream: stream.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Nuisance for image `k` of identity `i`.
    pub fn nuisance(&self, i: usize, k: usize) -> Nuisance {
        let mut rng = stream_rng(self.seed, &format!("{}/nuisance/{i}", self.stream), k as u64);
        Nuisance::sample(&mut rng)
    }

    pub fn face(&self, i: usize, k: usize, size: usize) -> Result<(ImageTensor, LabelMap)> {
        render_face(&self.ids[i], &self.nuisance(i, k), size)
    }

    /// `per_id` labelled images for every identity, identity-major.
    pub fn labelled(&self, per_id: usize, size: usize) -> Result<Vec<(ImageTensor, usize)>> {
        let mut out = Vec::with_capacity(self.len() * per_id);
        for i in 0..self.len() {
            for k in 0..per_id {
                out.push((self.face(i, k, size)?.0, i));
            }
        }
        Ok(out)
    }
}
