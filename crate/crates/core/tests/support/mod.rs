//! Shared helpers and independent oracles for integration tests.
#![allow(dead_code)]

pub mod oracle;
pub mod stats_oracle;

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(n: usize, sd: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            sd * z
        })
        .collect()
}

pub fn sine(n: usize, rate: f64, freq: f64, amplitude: f64) -> Vec<f64> {
    (0..n).map(|i| amplitude * (2.0 * PI * freq * i as f64 / rate).sin()).collect()
}

/// Least-squares amplitude of a sinusoid at a known frequency:
/// fits `a sin + b cos + c` and returns `sqrt(a^2 + b^2)`.
pub fn fit_amplitude(x: &[f64], rate: f64, freq: f64) -> f64 {
    let cols: Vec<[f64; 3]> = (0..x.len())
        .map(|i| {
            let w = 2.0 * PI * freq * i as f64 / rate;
            [w.sin(), w.cos(), 1.0]
        })
        .collect();
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for (c, &y) in cols.iter().zip(x) {
        for r in 0..3 {
            atb[r] += c[r] * y;
            for s in 0..3 {
                ata[(r, s)] += c[r] * c[s];
            }
        }
    }
    let sol = ata.lu().solve(&atb).expect("normal equations");
    (sol[0] * sol[0] + sol[1] * sol[1]).sqrt()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
