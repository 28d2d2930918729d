//! Hand-built weights for demos and closed-loop tests.
//!
//! These weights are not a trained model. They route the z-scored input
//! through one identity path and compare the upper pooled rows (roughly
//! 16-30 Hz) against the lowest ones (0-14 Hz). On the synthetic generator,
//! where beta rises and theta falls with latent mindfulness, the score rises
//! with the latent.

use super::arch::Architecture;
use super::weights::ModelWeights;

/// Logit slope per unit of contrast.
pub const CONTRAST_GAIN: f32 = 2.0;
/// Contrast that maps to a score of 50.
pub const CONTRAST_MIDPOINT: f32 = -3.3;
/// Second-pool rows compared by the dense layer.
pub const HIGH_ROW: usize = 2;
pub const LOW_ROW: usize = 0;
/// Dense bias large enough that neither contrast unit is ever clipped.
const DENSE_OFFSET: f32 = 50.0;

/// Fixture weights for the default architecture.
pub fn contrast_weights() -> ModelWeights {
    contrast_weights_with(CONTRAST_GAIN, CONTRAST_MIDPOINT)
}

pub fn contrast_weights_with(gain: f32, midpoint: f32) -> ModelWeights {
    let arch = Architecture::default();
    let mut w = ModelWeights::zeros(arch.clone()).expect("default architecture is valid");

    let k = arch.stem_kernel;
    let c = arch.stem_channels;
    let centre = k / 2;
    w.tensor_mut("stem.conv.kernel").unwrap()[(centre * k + centre) * c] = 1.0;

    let first = arch.branch_kernels[0];
    let bk = first / 2;
    let name = format!("{}.conv.kernel", Architecture::branch_name(first));
    w.tensor_mut(&name).unwrap()[((bk * first + bk) * c) * arch.branch_channels] = 1.0;

    let (_, (_, pw)) = arch.pooled_dims();
    let channels = arch.concat_channels();
    let units = arch.dense_units;
    let dense = w.tensor_mut("dense.kernel").unwrap();
    let share = 1.0 / pw as f32;
    for x in 0..pw {
        let hi = (HIGH_ROW * pw + x) * channels;
        let lo = (LOW_ROW * pw + x) * channels;
        dense[hi * units] = share;
        dense[lo * units] = -share;
        dense[hi * units + 1] = -share;
        dense[lo * units + 1] = share;
    }
    let bias = w.tensor_mut("dense.bias").unwrap();
    bias[0] = DENSE_OFFSET;
    bias[1] = DENSE_OFFSET;

    // logit(mindful) = gain * ((u0 - u1) / 2 - midpoint)
    let classes = arch.classes;
    let out = w.tensor_mut("output.kernel").unwrap();
    out[1] = gain / 2.0;
    out[classes + 1] = -gain / 2.0;
    w.tensor_mut("output.bias").unwrap()[1] = -gain * midpoint;
    w
}
