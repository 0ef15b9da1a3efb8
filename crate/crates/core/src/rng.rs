use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream ids carve one root seed into independent generators so that,
/// e.g., the noise realization does not depend on how many draws the
/// chain consumes.
pub const STREAM_CHAIN: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_PPP: u64 = 3;
pub const STREAM_VERIFICATION: u64 = 4;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
