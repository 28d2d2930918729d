use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const PSEUDO_START: f64 = 50.0;
pub const PSEUDO_STEP_SD: f64 = 8.0;

/// Sham score source for the pseudofeedback condition: a Gaussian random
/// walk on `[0, 100]` reflected at the bounds. It never sees EEG.
#[derive(Clone, Debug)]
pub struct PseudoFeedback {
    rng: ChaCha8Rng,
    step: Normal<f64>,
    current: f64,
}

impl PseudoFeedback {
    pub fn new(seed: u64) -> Self {
        PseudoFeedback {
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: Normal::new(0.0, PSEUDO_STEP_SD).expect("positive sd"),
            current: PSEUDO_START,
        }
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn next_score(&mut self) -> f64 {
        let mut x = self.current + self.step.sample(&mut self.rng);
        // a step is far smaller than the range, but loop for safety
        while !(0.0..=100.0).contains(&x) {
            x = if x < 0.0 { -x } else { 200.0 - x };
        }
        self.current = x;
        x
    }
}

impl Iterator for PseudoFeedback {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_score())
    }
}
