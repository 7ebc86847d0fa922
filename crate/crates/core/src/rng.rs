//! Reproducible random substreams.
//!
//! A [`SeedSpec`] is a master seed plus an ordered list of integer labels
//! (cell, repetition, purpose, ...). The labels are folded into the master
//! seed with SplitMix64:
//!
//! ```text
//! h0     = splitmix64(master_seed)
//! h(k+1) = splitmix64(h(k) ^ splitmix64(label_k + 0x9E3779B97F4A7C15))
//! ```
//!
//! and the 256-bit ChaCha8 key is the four successive SplitMix64 outputs
//! seeded at the final `h`. ChaCha is counter based, so every substream is
//! independent of when, or on which thread, it is consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub labels: Vec<u64>,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        SeedSpec {
            master_seed,
            labels: Vec::new(),
        }
    }

    /// A substream one level down.
    pub fn child(&self, label: u64) -> Self {
        let mut labels = self.labels.clone();
        labels.push(label);
        SeedSpec {
            master_seed: self.master_seed,
            labels,
        }
    }

    pub fn children(&self, labels: &[u64]) -> Self {
        labels.iter().fold(self.clone(), |s, &l| s.child(l))
    }

    /// Folds the labels into one 64-bit state.
    pub fn mixed(&self) -> u64 {
        self.labels.iter().fold(splitmix64(self.master_seed), |h, &label| {
            splitmix64(h ^ splitmix64(label.wrapping_add(GOLDEN_GAMMA)))
        })
    }

    pub fn rng(&self) -> StreamRng {
        let mut state = self.mixed();
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN_GAMMA);
            chunk.copy_from_slice(&mix(state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Stable label for a string tag.
pub fn label(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn splitmix64(x: u64) -> u64 {
    mix(x.wrapping_add(GOLDEN_GAMMA))
}
