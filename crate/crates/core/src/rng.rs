//! Seed streams.
//!
//! Every random quantity in a run is drawn from a ChaCha8 generator keyed by
//! `(root seed, replica)` and positioned on a stream number that names its
//! purpose. ChaCha is counter based, so two streams never overlap and adding
//! draws to one purpose leaves every other purpose untouched.
//!
//! Stream numbers are `purpose_code << 32 | index`, where `index` is the user
//! for per-user purposes and 0 otherwise:
//!
//! | purpose       | code |
//! |---------------|------|
//! | environment   | 1    |
//! | arrivals      | 2    |
//! | packet sizes  | 3    |
//! | diffusion     | 4    |
//! | probe         | 5    |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Purpose {
    Environment,
    Arrivals,
    PacketSizes,
    Diffusion,
    Probe,
}

impl Purpose {
    pub fn code(self) -> u64 {
        match self {
            Purpose::Environment => 1,
            Purpose::Arrivals => 2,
            Purpose::PacketSizes => 3,
            Purpose::Diffusion => 4,
            Purpose::Probe => 5,
        }
    }
}

/// A root seed specialised to one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStreams {
    pub root: u64,
    pub replica: u64,
}

impl SeedStreams {
    pub fn new(root: u64) -> Self {
        Self { root, replica: 0 }
    }

    pub fn replica(self, replica: u64) -> Self {
        Self { replica, ..self }
    }

    /// Generator for `purpose`, sub-indexed by `index` (a user, usually).
    pub fn rng(&self, purpose: Purpose, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.root ^ splitmix64(self.replica)));
        rng.set_stream((purpose.code() << 32) | (index & 0xffff_ffff));
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
