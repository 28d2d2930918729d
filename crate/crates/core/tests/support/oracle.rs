//! Independent reference implementations. Written for clarity, not speed, and
//! sharing no code with the library paths they check.

use mbci_core::model::ModelWeights;

/// Height-width-channel activation volume in f64.
pub struct Volume {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub v: Vec<f64>,
}

impl Volume {
    fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.v[(y * self.w + x) * self.c + c]
    }
}

fn tensor<'a>(w: &'a ModelWeights, name: &str) -> Vec<f64> {
    w.tensor(name).unwrap().data.iter().map(|&v| v as f64).collect()
}

/// Direct same-padded convolution, kernel `[k][k][cin][cout]`, followed by
/// textbook inference batch-norm and ReLU.
pub fn conv_bn_relu(input: &Volume, w: &ModelWeights, layer: &str, k: usize, cout: usize, activate: bool) -> Volume {
    let kernel = tensor(w, &format!("{layer}.conv.kernel"));
    let bias = tensor(w, &format!("{layer}.conv.bias"));
    let gamma = tensor(w, &format!("{layer}.bn.gamma"));
    let beta = tensor(w, &format!("{layer}.bn.beta"));
    let mean = tensor(w, &format!("{layer}.bn.mean"));
    let var = tensor(w, &format!("{layer}.bn.variance"));
    let eps = w.batch_norm_epsilon;
    let pad = (k / 2) as isize;
    let mut out = vec![0.0; input.h * input.w * cout];
    for oc in 0..cout {
        for y in 0..input.h {
            for x in 0..input.w {
                let mut acc = bias[oc];
                for ky in 0..k {
                    for kx in 0..k {
                        for ic in 0..input.c {
                            let sy = y as isize + ky as isize - pad;
                            let sx = x as isize + kx as isize - pad;
                            if sy < 0 || sx < 0 || sy >= input.h as isize || sx >= input.w as isize {
                                continue;
                            }
                            acc += kernel[((ky * k + kx) * input.c + ic) * cout + oc] * input.at(sy as usize, sx as usize, ic);
                        }
                    }
                }
                let v = if activate {
                    let bn = (acc - mean[oc]) / (var[oc] + eps).sqrt() * gamma[oc] + beta[oc];
                    bn.max(0.0)
                } else {
                    acc
                };
                out[(y * input.w + x) * cout + oc] = v;
            }
        }
    }
    Volume { h: input.h, w: input.w, c: cout, v: out }
}

pub fn max_pool(input: &Volume) -> Volume {
    let oh = (input.h - 3) / 2 + 1;
    let ow = (input.w - 3) / 2 + 1;
    let mut v = vec![0.0; oh * ow * input.c];
    for y in 0..oh {
        for x in 0..ow {
            for c in 0..input.c {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..3 {
                    for dx in 0..3 {
                        m = m.max(input.at(2 * y + dy, 2 * x + dx, c));
                    }
                }
                v[(y * ow + x) * input.c + c] = m;
            }
        }
    }
    Volume { h: oh, w: ow, c: input.c, v }
}

pub struct OracleOutput {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `(h, w, c)` after stem, pool, concat, pool; then flat, dense, output.
    pub shapes: Vec<Vec<usize>>,
}

/// Naive forward pass of the multiscale network from raw weights.
pub fn cnn_forward(w: &ModelWeights, input: &[f64], h: usize, width: usize) -> OracleOutput {
    let a = &w.architecture;
    let x = Volume { h, w: width, c: 1, v: input.to_vec() };
    let mut shapes = vec![vec![h, width, 1]];
    let stem = conv_bn_relu(&x, w, "stem", a.stem_kernel, a.stem_channels, true);
    shapes.push(vec![stem.h, stem.w, stem.c]);
    let p1 = max_pool(&stem);
    shapes.push(vec![p1.h, p1.w, p1.c]);
    let branches: Vec<Volume> = a
        .branch_kernels
        .iter()
        .map(|&k| conv_bn_relu(&p1, w, &format!("branch{k}"), k, a.branch_channels, true))
        .collect();
    let cc: usize = branches.iter().map(|b| b.c).sum();
    let mut cat = vec![0.0; p1.h * p1.w * cc];
    for y in 0..p1.h {
        for xx in 0..p1.w {
            let mut off = 0;
            for b in &branches {
                for c in 0..b.c {
                    cat[(y * p1.w + xx) * cc + off + c] = b.at(y, xx, c);
                }
                off += b.c;
            }
        }
    }
    let cat = Volume { h: p1.h, w: p1.w, c: cc, v: cat };
    shapes.push(vec![cat.h, cat.w, cat.c]);
    let p2 = max_pool(&cat);
    shapes.push(vec![p2.h, p2.w, p2.c]);
    let flat = p2.v;
    shapes.push(vec![flat.len()]);

    let dk = tensor(w, "dense.kernel");
    let db = tensor(w, "dense.bias");
    let units = db.len();
    let hidden: Vec<f64> = (0..units)
        .map(|j| (db[j] + (0..flat.len()).map(|i| flat[i] * dk[i * units + j]).sum::<f64>()).max(0.0))
        .collect();
    shapes.push(vec![units]);
    let ok = tensor(w, "output.kernel");
    let ob = tensor(w, "output.bias");
    let classes = ob.len();
    let logits: Vec<f64> = (0..classes)
        .map(|c| ob[c] + (0..units).map(|u| hidden[u] * ok[u * classes + c]).sum::<f64>())
        .collect();
    shapes.push(vec![classes]);
    let z: Vec<f64> = logits.iter().map(|l| l.exp()).collect();
    let s: f64 = z.iter().sum();
    OracleOutput {
        probabilities: z.iter().map(|v| v / s).collect(),
        logits,
        shapes,
    }
}
