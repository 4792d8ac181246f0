//! Reproducible random streams.
//!
//! A path is a pure function of `(master_seed, stream_index)`. Each stream
//! splits into independent substreams (one per Gaussian source) by deriving
//! a distinct ChaCha key from the master seed and a substream tag with
//! SplitMix64, then selecting the ChaCha stream id `stream_index`:
//!
//! | substream        | tag          |
//! |------------------|--------------|
//! | Brownian part W  | `0x5751_0001` |
//! | fractional part  | `0x4248_0002` |
//!
//! Distinct keys make W and B^H independent for every replicate; the stream
//! id keeps replicates independent under a fixed key, so results do not
//! depend on which thread simulated which replicate.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Substream {
    Brownian,
    Fractional,
}

impl Substream {
    fn tag(self) -> u64 {
        match self {
            Substream::Brownian => 0x5751_0001,
            Substream::Fractional => 0x4248_0002,
        }
    }
}

impl RngSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Generator for one substream of this replicate.
    pub fn generator(&self, substream: Substream) -> ChaCha12Rng {
        let mut state = self.master_seed ^ substream.tag().wrapping_mul(0xA076_1D64_78BD_642F);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// One SplitMix64 step.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a derived experiment row, mixing the master seed with a label.
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    let mut state = master_seed ^ label.rotate_left(17);
    splitmix64(&mut state);
    splitmix64(&mut state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_differ_and_repeat() {
        let spec = RngSpec::new(7, 3);
        let a: u64 = spec.generator(Substream::Brownian).random();
        let b: u64 = spec.generator(Substream::Fractional).random();
        let a2: u64 = spec.generator(Substream::Brownian).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
        let other: u64 = RngSpec::new(7, 4).generator(Substream::Brownian).random();
        assert_ne!(a, other);
    }

    #[test]
    fn splitmix_reference_values() {
        // Published SplitMix64 outputs for seed 0.
        let mut s = 0u64;
        assert_eq!(splitmix64(&mut s), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(&mut s), 0x6E78_9E6A_A1B9_65F4);
    }
}
