//! Seed derivation. Every random consumer draws from its own stream so that
//! e.g. changing the selector does not perturb the split.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named random streams used by the experiment protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split,
    Balance,
    Selection,
    RandomBaseline,
    PlattFolds,
    MspsFolds,
    Synthetic,
}

impl Stream {
    fn label(self) -> &'static str {
        match self {
            Stream::Split => "split",
            Stream::Balance => "balance",
            Stream::Selection => "selection",
            Stream::RandomBaseline => "random-baseline",
            Stream::PlattFolds => "platt-folds",
            Stream::MspsFolds => "msps-folds",
            Stream::Synthetic => "synthetic",
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of `stream` from a base seed.
pub fn derive(seed: u64, stream: Stream) -> u64 {
    // FNV-1a over the label, then mixed with the seed.
    let tag = stream
        .label()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        });
    splitmix64(seed ^ splitmix64(tag))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: Stream) -> Rng {
    rng(derive(seed, stream))
}
