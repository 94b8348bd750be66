//! Minimal channels-last convolution stack with a hand-written backward pass.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// `h x w x c` activations, channels-last.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    /// Zero-padded "same" convolution; weights laid out `[out][ky][kx][in]`.
    Conv {
        k: usize,
        in_c: usize,
        out_c: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Tanh,
    /// Non-overlapping average pooling; spatial dims must divide evenly.
    AvgPool { factor: usize },
}

impl Layer {
    pub fn conv_random<R: Rng>(rng: &mut R, k: usize, in_c: usize, out_c: usize, gain: f64) -> Self {
        let std = gain / ((k * k * in_c) as f64).sqrt();
        let weights = (0..out_c * k * k * in_c)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let bias = (0..out_c)
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Layer::Conv {
            k,
            in_c,
            out_c,
            weights,
            bias,
        }
    }

    pub fn output_shape(&self, (h, w, c): (usize, usize, usize)) -> Option<(usize, usize, usize)> {
        match self {
            Layer::Conv { in_c, out_c, .. } => (*in_c == c).then_some((h, w, *out_c)),
            Layer::Tanh => Some((h, w, c)),
            Layer::AvgPool { factor } => {
                (h % factor == 0 && w % factor == 0).then_some((h / factor, w / factor, c))
            }
        }
    }

    pub fn forward(&self, x: &Tensor3) -> Tensor3 {
        match self {
            Layer::Conv {
                k,
                in_c,
                out_c,
                weights,
                bias,
            } => {
                let r = (*k / 2) as isize;
                let mut y = Tensor3::zeros(x.h, x.w, *out_c);
                for oy in 0..x.h {
                    for ox in 0..x.w {
                        let out = &mut y.data[(oy * x.w + ox) * out_c..][..*out_c];
                        out.copy_from_slice(bias);
                        for ky in 0..*k {
                            let iy = oy as isize + ky as isize - r;
                            if iy < 0 || iy >= x.h as isize {
                                continue;
                            }
                            for kx in 0..*k {
                                let ix = ox as isize + kx as isize - r;
                                if ix < 0 || ix >= x.w as isize {
                                    continue;
                                }
                                let input = &x.data[(iy as usize * x.w + ix as usize) * in_c..][..*in_c];
                                for (o, acc) in out.iter_mut().enumerate() {
                                    let wrow = &weights[((o * k + ky) * k + kx) * in_c..][..*in_c];
                                    *acc += wrow.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                                }
                            }
                        }
                    }
                }
                y
            }
            Layer::Tanh => Tensor3 {
                data: x.data.iter().map(|v| v.tanh()).collect(),
                ..*x
            },
            Layer::AvgPool { factor } => {
                let f = *factor;
                let (h, w) = (x.h / f, x.w / f);
                let mut y = Tensor3::zeros(h, w, x.c);
                let scale = 1.0 / (f * f) as f64;
                for iy in 0..x.h {
                    for ix in 0..x.w {
                        let src = &x.data[(iy * x.w + ix) * x.c..][..x.c];
                        let dst = &mut y.data[((iy / f) * w + ix / f) * x.c..][..x.c];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += scale * s;
                        }
                    }
                }
                y
            }
        }
    }

    /// Gradient with respect to this layer's input, given the forward input
    /// `x`, its output `y`, and the gradient `gy` at the output.
    pub fn backward(&self, x: &Tensor3, y: &Tensor3, gy: &Tensor3) -> Tensor3 {
        match self {
            Layer::Conv {
                k,
                in_c,
                out_c,
                weights,
                ..
            } => {
                let r = (*k / 2) as isize;
                let mut gx = Tensor3::zeros(x.h, x.w, x.c);
                for oy in 0..x.h {
                    for ox in 0..x.w {
                        let g = &gy.data[(oy * x.w + ox) * out_c..][..*out_c];
                        for ky in 0..*k {
                            let iy = oy as isize + ky as isize - r;
                            if iy < 0 || iy >= x.h as isize {
                                continue;
                            }
                            for kx in 0..*k {
                                let ix = ox as isize + kx as isize - r;
                                if ix < 0 || ix >= x.w as isize {
                                    continue;
                                }
                                let dst = &mut gx.data[(iy as usize * x.w + ix as usize) * in_c..][..*in_c];
                                for (o, go) in g.iter().enumerate() {
                                    let wrow = &weights[((o * k + ky) * k + kx) * in_c..][..*in_c];
                                    for (d, wv) in dst.iter_mut().zip(wrow) {
                                        *d += go * wv;
                                    }
                                }
                            }
                        }
                    }
                }
                gx
            }
            Layer::Tanh => Tensor3 {
                data: y
                    .data
                    .iter()
                    .zip(&gy.data)
                    .map(|(t, g)| g * (1.0 - t * t))
                    .collect(),
                ..*x
            },
            Layer::AvgPool { factor } => {
                let f = *factor;
                let scale = 1.0 / (f * f) as f64;
                let mut gx = Tensor3::zeros(x.h, x.w, x.c);
                for iy in 0..x.h {
                    for ix in 0..x.w {
                        let src = &gy.data[((iy / f) * y.w + ix / f) * x.c..][..x.c];
                        let dst = &mut gx.data[(iy * x.w + ix) * x.c..][..x.c];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d = scale * s;
                        }
                    }
                }
                gx
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvStack {
    pub layers: Vec<Layer>,
}

impl ConvStack {
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Option<(usize, usize, usize)> {
        self.layers
            .iter()
            .try_fold(input, |shape, layer| layer.output_shape(shape))
    }

    /// All activations, input first.
    pub fn forward_trace(&self, x: Tensor3) -> Vec<Tensor3> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for layer in &self.layers {
            let next = layer.forward(acts.last().expect("non-empty"));
            acts.push(next);
        }
        acts
    }

    pub fn forward(&self, x: Tensor3) -> Tensor3 {
        self.layers.iter().fold(x, |acc, layer| layer.forward(&acc))
    }

    /// Input gradient from a trace produced by [`forward_trace`](Self::forward_trace).
    pub fn backward(&self, acts: &[Tensor3], g_out: Tensor3) -> Tensor3 {
        let mut g = g_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            g = layer.backward(&acts[i], &acts[i + 1], &g);
        }
        g
    }
}
