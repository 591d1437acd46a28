//! Keyed random streams.
//!
//! Every stochastic routine draws from a stream identified by
//! `(seed, domain, index)`. The ChaCha key comes from `(seed, domain)` and
//! the ChaCha stream id is `index`, so stream `i` can be regenerated without
//! touching any other stream and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the purposes that share a user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    GeneratorGraph = 1,
    GeneratorWeights = 2,
    GeneratorRho = 3,
    GeneratorNu = 4,
    GeneratorRewards = 5,
    PinnedField = 16,
    LocalTime = 17,
    RayKnightLeft = 18,
    RayKnightRight = 19,
    Occupation = 20,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
