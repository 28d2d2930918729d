use serde::{Deserialize, Serialize};

/// Hyper-parameters of the multiscale CNN. Stored in the weight manifest so a
/// container with different branch kernels loads without code changes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_height: usize,
    pub input_width: usize,
    pub stem_kernel: usize,
    pub stem_channels: usize,
    pub branch_kernels: Vec<usize>,
    pub branch_channels: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub dense_units: usize,
    pub classes: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input_height: 35,
            input_width: 100,
            stem_kernel: 3,
            stem_channels: 32,
            branch_kernels: vec![1, 3, 5, 7],
            branch_channels: 32,
            pool_size: 3,
            pool_stride: 2,
            dense_units: 100,
            classes: 2,
        }
    }
}

/// Shape of a named tensor in the container.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorShape {
    pub name: String,
    pub dims: Vec<usize>,
}

/// Activation shape after a layer, `height x width x channels` (1-D layers
/// have height = width = 1 omitted in display).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub layer: &'static str,
    pub dims: Vec<usize>,
}

impl std::fmt::Display for LayerShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(ToString::to_string).collect();
        write!(f, "{} {}", self.layer, dims.join("x"))
    }
}

impl Architecture {
    pub fn pooled(&self, n: usize) -> usize {
        (n - self.pool_size) / self.pool_stride + 1
    }

    pub fn concat_channels(&self) -> usize {
        self.branch_kernels.len() * self.branch_channels
    }

    /// `(h, w)` after the first and second pooling stages.
    pub fn pooled_dims(&self) -> ((usize, usize), (usize, usize)) {
        let p1 = (self.pooled(self.input_height), self.pooled(self.input_width));
        let p2 = (self.pooled(p1.0), self.pooled(p1.1));
        (p1, p2)
    }

    pub fn flat_len(&self) -> usize {
        let (_, (h, w)) = self.pooled_dims();
        h * w * self.concat_channels()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.stem_kernel % 2 == 0 || self.branch_kernels.iter().any(|k| k % 2 == 0) {
            return Err("same-padding needs odd kernel sizes".into());
        }
        if self.branch_kernels.is_empty() || self.classes < 2 || self.dense_units == 0 {
            return Err("need at least one branch, one dense unit and two classes".into());
        }
        if self.pool_size == 0 || self.pool_stride == 0 {
            return Err("pooling size and stride must be positive".into());
        }
        let min_in = self.pool_size + self.pool_stride * (self.pool_size - 1);
        if self.input_height < min_in || self.input_width < min_in {
            return Err(format!("input must be at least {min_in} in each dimension"));
        }
        Ok(())
    }

    pub fn branch_name(k: usize) -> String {
        format!("branch{k}")
    }

    /// Layer names in forward order.
    pub fn layer_order(&self) -> Vec<String> {
        let mut v = vec!["stem".to_string()];
        v.extend(self.branch_kernels.iter().map(|&k| Self::branch_name(k)));
        v.push("dense".into());
        v.push("output".into());
        v
    }

    /// Every tensor the container must hold, in blob order. Convolution
    /// kernels are `[kh, kw, in, out]`, dense kernels `[in, out]`.
    pub fn tensor_shapes(&self) -> Vec<TensorShape> {
        let mut v = Vec::new();
        let mut conv_bn = |layer: &str, k: usize, cin: usize, cout: usize| {
            let t = |suffix: &str, dims: Vec<usize>| TensorShape {
                name: format!("{layer}.{suffix}"),
                dims,
            };
            v.push(t("conv.kernel", vec![k, k, cin, cout]));
            v.push(t("conv.bias", vec![cout]));
            for p in ["gamma", "beta", "mean", "variance"] {
                v.push(t(&format!("bn.{p}"), vec![cout]));
            }
        };
        conv_bn("stem", self.stem_kernel, 1, self.stem_channels);
        for &k in &self.branch_kernels {
            conv_bn(&Self::branch_name(k), k, self.stem_channels, self.branch_channels);
        }
        let flat = self.flat_len();
        v.push(TensorShape {
            name: "dense.kernel".into(),
            dims: vec![flat, self.dense_units],
        });
        v.push(TensorShape {
            name: "dense.bias".into(),
            dims: vec![self.dense_units],
        });
        v.push(TensorShape {
            name: "output.kernel".into(),
            dims: vec![self.dense_units, self.classes],
        });
        v.push(TensorShape {
            name: "output.bias".into(),
            dims: vec![self.classes],
        });
        v
    }

    /// Activation shapes through the network.
    pub fn shape_trace(&self) -> Vec<LayerShape> {
        let ((h1, w1), (h2, w2)) = self.pooled_dims();
        let (h, w) = (self.input_height, self.input_width);
        vec![
            LayerShape { layer: "input", dims: vec![h, w, 1] },
            LayerShape { layer: "stem", dims: vec![h, w, self.stem_channels] },
            LayerShape { layer: "pool1", dims: vec![h1, w1, self.stem_channels] },
            LayerShape { layer: "concat", dims: vec![h1, w1, self.concat_channels()] },
            LayerShape { layer: "pool2", dims: vec![h2, w2, self.concat_channels()] },
            LayerShape { layer: "flatten", dims: vec![self.flat_len()] },
            LayerShape { layer: "dense", dims: vec![self.dense_units] },
            LayerShape { layer: "output", dims: vec![self.classes] },
        ]
    }
}
