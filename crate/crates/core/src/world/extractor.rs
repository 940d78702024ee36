use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Rate;
use crate::error::{Error, Result};
use crate::signal::SignalVector;

/// Noisy semantic extractor: independent per-bit false positives and false
/// negatives, followed by a confirmation filter that emits a bit only after
/// `window` consecutive positive raw readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorNoise {
    pub false_positive: Rate,
    pub false_negative: Rate,
    #[serde(default = "default_window")]
    pub window: u32,
}

fn default_window() -> u32 {
    3
}

impl ExtractorNoise {
    pub fn uniform(false_positive: f64, false_negative: f64, window: u32) -> Self {
        ExtractorNoise {
            false_positive: Rate::Uniform(false_positive),
            false_negative: Rate::Uniform(false_negative),
            window,
        }
    }

    pub fn validate(&self, signals: usize) -> Result<()> {
        self.false_positive.validate("noise.false_positive", signals)?;
        self.false_negative.validate("noise.false_negative", signals)?;
        if self.window == 0 {
            return Err(Error::config("noise.window", "must be at least 1"));
        }
        Ok(())
    }
}

/// Per-bit run lengths of consecutive positive raw readings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorState {
    runs: Vec<u32>,
    none_index: usize,
}

impl ExtractorState {
    /// `none_index` is `K`; that bit is derived (set iff no room bit is emitted).
    pub fn new(len: usize, none_index: usize) -> Self {
        ExtractorState {
            runs: vec![0; len],
            none_index,
        }
    }
}

/// One extractor reading of the true signal vector.
pub fn noisy_signal<R: Rng + ?Sized>(
    truth: SignalVector,
    noise: &ExtractorNoise,
    state: &mut ExtractorState,
    rng: &mut R,
) -> SignalVector {
    let mut out = SignalVector::zeros(truth.len());
    for i in 0..truth.len() {
        if i == state.none_index {
            continue;
        }
        let raw = if truth.get(i) {
            !rng.gen_bool(noise.false_negative.get(i))
        } else {
            rng.gen_bool(noise.false_positive.get(i))
        };
        state.runs[i] = if raw { state.runs[i].saturating_add(1) } else { 0 };
        if state.runs[i] >= noise.window {
            out.set(i, true);
        }
    }
    if !out.any_in(0..state.none_index) {
        out.set(state.none_index, true);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LEN: usize = 10; // K = 8, one object
    const NONE: usize = 8;

    #[test]
    fn noiseless_extractor_warms_up_then_tracks_truth() {
        let noise = ExtractorNoise::uniform(0.0, 0.0, 3);
        let mut st = ExtractorState::new(LEN, NONE);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let truth = SignalVector::from_indices(LEN, &[3, 9]);
        let only_none = SignalVector::from_indices(LEN, &[NONE]);
        assert_eq!(noisy_signal(truth, &noise, &mut st, &mut rng), only_none);
        assert_eq!(noisy_signal(truth, &noise, &mut st, &mut rng), only_none);
        for _ in 0..5 {
            assert_eq!(noisy_signal(truth, &noise, &mut st, &mut rng), truth);
        }
    }

    #[test]
    fn window_one_passes_raw_readings() {
        let noise = ExtractorNoise::uniform(0.0, 0.0, 1);
        let mut st = ExtractorState::new(LEN, NONE);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let truth = SignalVector::from_indices(LEN, &[2]);
        assert_eq!(noisy_signal(truth, &noise, &mut st, &mut rng), truth);
    }

    #[test]
    fn false_positive_half_with_window_three_fires_an_eighth_of_the_time() {
        let mut fp = vec![0.0; LEN];
        fp[5] = 0.5;
        let noise = ExtractorNoise {
            false_positive: Rate::PerSignal(fp),
            false_negative: Rate::Uniform(0.0),
            window: 3,
        };
        let mut st = ExtractorState::new(LEN, NONE);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let truth = SignalVector::from_indices(LEN, &[1]);
        let n = 200_000;
        let fired = (0..n)
            .filter(|_| noisy_signal(truth, &noise, &mut st, &mut rng).get(5))
            .count();
        let rate = fired as f64 / n as f64;
        assert!((rate - 0.125).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn certain_miss_never_emits() {
        let noise = ExtractorNoise::uniform(0.0, 1.0, 3);
        let mut st = ExtractorState::new(LEN, NONE);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = SignalVector::from_indices(LEN, &[4]);
        for _ in 0..100 {
            let s = noisy_signal(truth, &noise, &mut st, &mut rng);
            assert!(!s.get(4));
            assert!(s.get(NONE));
        }
    }

    #[test]
    fn validation() {
        assert!(ExtractorNoise::uniform(0.05, 0.1, 3).validate(LEN).is_ok());
        assert!(ExtractorNoise::uniform(0.05, 0.1, 0).validate(LEN).is_err());
        assert!(ExtractorNoise::uniform(-0.1, 0.1, 3).validate(LEN).is_err());
        let bad = ExtractorNoise {
            false_positive: Rate::PerSignal(vec![0.0; 3]),
            false_negative: Rate::Uniform(0.0),
            window: 3,
        };
        assert!(bad.validate(LEN).is_err());
    }
}
