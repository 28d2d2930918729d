//! Optimized inference for the multiscale CNN.
//!
//! Activations are channel-major planes. Convolutions accumulate one output
//! plane per task by sweeping each kernel tap across contiguous rows, which
//! keeps the inner loop a vectorizable `dst += w * src`. Batch-norm is folded
//! into a per-channel scale and shift at construction.

use crate::dsp::Matrix;
use crate::par::Execution;

use super::arch::{Architecture, LayerShape};
use super::features::FeatureMatrix;
use super::weights::ModelWeights;
use super::{MindfulnessScore, ModelError, MINDFUL_CLASS};

/// Channel-major activation volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor3 {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Shape in height x width x channels order.
    pub fn hwc(&self) -> Vec<usize> {
        vec![self.height, self.width, self.channels]
    }
}

struct ConvLayer {
    k: usize,
    cin: usize,
    cout: usize,
    /// `[cout][cin][k][k]`.
    kernel: Vec<f32>,
    bias: Vec<f32>,
    scale: Vec<f32>,
    shift: Vec<f32>,
}

impl ConvLayer {
    fn from_weights(w: &ModelWeights, layer: &str, k: usize, cin: usize, cout: usize) -> Self {
        let hwio = w.data(&format!("{layer}.conv.kernel"));
        let mut kernel = vec![0.0; k * k * cin * cout];
        for ky in 0..k {
            for kx in 0..k {
                for ic in 0..cin {
                    for oc in 0..cout {
                        kernel[((oc * cin + ic) * k + ky) * k + kx] = hwio[((ky * k + kx) * cin + ic) * cout + oc];
                    }
                }
            }
        }
        let p = |name: &str| w.data(&format!("{layer}.bn.{name}"));
        let (gamma, beta, mean, var) = (p("gamma"), p("beta"), p("mean"), p("variance"));
        let mut scale = Vec::with_capacity(cout);
        let mut shift = Vec::with_capacity(cout);
        for c in 0..cout {
            let s = gamma[c] as f64 / (var[c] as f64 + w.batch_norm_epsilon).sqrt();
            scale.push(s as f32);
            shift.push((beta[c] as f64 - mean[c] as f64 * s) as f32);
        }
        ConvLayer {
            k,
            cin,
            cout,
            kernel,
            bias: w.data(&format!("{layer}.conv.bias")).to_vec(),
            scale,
            shift,
        }
    }

    /// Same-padded convolution of `input` into `plane` for output channel
    /// `oc`, bias included, before batch-norm.
    fn accumulate(&self, input: &Tensor3, oc: usize, plane: &mut [f32]) {
        let (h, w) = (input.height, input.width);
        let pad = (self.k / 2) as isize;
        plane.fill(self.bias[oc]);
        for ic in 0..self.cin {
            let src = input.plane(ic);
            let taps = &self.kernel[(oc * self.cin + ic) * self.k * self.k..][..self.k * self.k];
            for ky in 0..self.k {
                let dy = ky as isize - pad;
                let y0 = (-dy).max(0) as usize;
                let y1 = (h as isize - dy).min(h as isize).max(0) as usize;
                for kx in 0..self.k {
                    let wv = taps[ky * self.k + kx];
                    let dx = kx as isize - pad;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                    if x0 >= x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx0 = (x0 as isize + dx) as usize;
                        let dst = &mut plane[y * w + x0..y * w + x1];
                        let s = &src[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                        for (d, &v) in dst.iter_mut().zip(s) {
                            *d += wv * v;
                        }
                    }
                }
            }
        }
    }

    fn activate(&self, oc: usize, plane: &mut [f32]) {
        let (s, b) = (self.scale[oc], self.shift[oc]);
        for v in plane {
            *v = (*v * s + b).max(0.0);
        }
    }
}

fn max_pool(input: &Tensor3, size: usize, stride: usize, exec: Execution) -> Tensor3 {
    let oh = (input.height - size) / stride + 1;
    let ow = (input.width - size) / stride + 1;
    let mut out = Tensor3::zeros(input.channels, oh, ow);
    exec.for_each_chunk_mut(&mut out.data, oh * ow, |c, plane| {
        let src = input.plane(c);
        for y in 0..oh {
            for x in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for ky in 0..size {
                    let row = &src[(y * stride + ky) * input.width + x * stride..][..size];
                    m = row.iter().fold(m, |a, &b| a.max(b));
                }
                plane[y * ow + x] = m;
            }
        }
    });
    out
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    pub fn mindful_probability(&self) -> f64 {
        self.probabilities[MINDFUL_CLASS]
    }
}

/// Inference-ready network. Cheap to share: all state is read-only.
pub struct Network {
    arch: Architecture,
    stem: ConvLayer,
    branches: Vec<ConvLayer>,
    /// `[in][out]`, input index in height-width-channel order.
    dense_kernel: Vec<f32>,
    dense_bias: Vec<f32>,
    output_kernel: Vec<f32>,
    output_bias: Vec<f32>,
}

impl Network {
    pub fn new(weights: &ModelWeights) -> Self {
        let a = weights.architecture.clone();
        let stem = ConvLayer::from_weights(weights, "stem", a.stem_kernel, 1, a.stem_channels);
        let branches = a
            .branch_kernels
            .iter()
            .map(|&k| ConvLayer::from_weights(weights, &Architecture::branch_name(k), k, a.stem_channels, a.branch_channels))
            .collect();
        Network {
            stem,
            branches,
            dense_kernel: weights.data("dense.kernel").to_vec(),
            dense_bias: weights.data("dense.bias").to_vec(),
            output_kernel: weights.data("output.kernel").to_vec(),
            output_bias: weights.data("output.bias").to_vec(),
            arch: a,
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    fn input_tensor(&self, input: &Matrix) -> Result<Tensor3, ModelError> {
        let expected = (self.arch.input_height, self.arch.input_width);
        if input.shape() != expected {
            return Err(ModelError::FeatureShape {
                expected,
                found: input.shape(),
            });
        }
        Ok(Tensor3 {
            channels: 1,
            height: expected.0,
            width: expected.1,
            data: input.as_slice().iter().map(|&v| v as f32).collect(),
        })
    }

    /// Stem convolution output before batch-norm and activation.
    pub fn stem_preactivation(&self, input: &Matrix, exec: Execution) -> Result<Tensor3, ModelError> {
        let x = self.input_tensor(input)?;
        let mut out = Tensor3::zeros(self.stem.cout, x.height, x.width);
        exec.for_each_chunk_mut(&mut out.data, x.height * x.width, |oc, plane| self.stem.accumulate(&x, oc, plane));
        Ok(out)
    }

    fn run(&self, input: &Matrix, exec: Execution, trace: &mut Vec<LayerShape>) -> Result<Prediction, ModelError> {
        let x = self.input_tensor(input)?;
        trace.push(LayerShape { layer: "input", dims: x.hwc() });
        let (h, w) = (x.height, x.width);

        let mut stem = Tensor3::zeros(self.stem.cout, h, w);
        exec.for_each_chunk_mut(&mut stem.data, h * w, |oc, plane| {
            self.stem.accumulate(&x, oc, plane);
            self.stem.activate(oc, plane);
        });
        trace.push(LayerShape { layer: "stem", dims: stem.hwc() });

        let pooled = max_pool(&stem, self.arch.pool_size, self.arch.pool_stride, exec);
        trace.push(LayerShape { layer: "pool1", dims: pooled.hwc() });

        let (ph, pw) = (pooled.height, pooled.width);
        let per_branch = self.arch.branch_channels;
        let mut concat = Tensor3::zeros(self.arch.concat_channels(), ph, pw);
        exec.for_each_chunk_mut(&mut concat.data, ph * pw, |c, plane| {
            let branch = &self.branches[c / per_branch];
            let oc = c % per_branch;
            branch.accumulate(&pooled, oc, plane);
            branch.activate(oc, plane);
        });
        trace.push(LayerShape { layer: "concat", dims: concat.hwc() });

        let p2 = max_pool(&concat, self.arch.pool_size, self.arch.pool_stride, exec);
        trace.push(LayerShape { layer: "pool2", dims: p2.hwc() });

        // Flatten in height-width-channel order; dropout is the identity here.
        let (fh, fw, fc) = (p2.height, p2.width, p2.channels);
        let mut flat = vec![0.0f32; fh * fw * fc];
        for c in 0..fc {
            for (i, &v) in p2.plane(c).iter().enumerate() {
                flat[i * fc + c] = v;
            }
        }
        trace.push(LayerShape { layer: "flatten", dims: vec![flat.len()] });

        let units = self.arch.dense_units;
        let mut hidden: Vec<f64> = self.dense_bias.iter().map(|&b| b as f64).collect();
        for (i, &xi) in flat.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let xi = xi as f64;
            let row = &self.dense_kernel[i * units..(i + 1) * units];
            for (acc, &wv) in hidden.iter_mut().zip(row) {
                *acc += xi * wv as f64;
            }
        }
        hidden.iter_mut().for_each(|v| *v = v.max(0.0));
        trace.push(LayerShape { layer: "dense", dims: vec![units] });

        let classes = self.arch.classes;
        let mut logits: Vec<f64> = self.output_bias.iter().map(|&b| b as f64).collect();
        for (u, &hv) in hidden.iter().enumerate() {
            for (l, &wv) in logits.iter_mut().zip(&self.output_kernel[u * classes..(u + 1) * classes]) {
                *l += hv * wv as f64;
            }
        }
        trace.push(LayerShape { layer: "output", dims: vec![classes] });

        let probabilities = softmax(&logits);
        Ok(Prediction { logits, probabilities })
    }

    pub fn predict(&self, input: &Matrix, exec: Execution) -> Result<Prediction, ModelError> {
        self.run(input, exec, &mut Vec::new())
    }

    /// Prediction plus the activation shape after every layer.
    pub fn predict_traced(&self, input: &Matrix, exec: Execution) -> Result<(Prediction, Vec<LayerShape>), ModelError> {
        let mut trace = Vec::new();
        let p = self.run(input, exec, &mut trace)?;
        Ok((p, trace))
    }

    pub fn forward(&self, features: &FeatureMatrix, exec: Execution) -> Result<MindfulnessScore, ModelError> {
        let p = self.predict(&features.values, exec)?;
        Ok(MindfulnessScore::from_probability(p.mindful_probability(), features.window_start))
    }
}
