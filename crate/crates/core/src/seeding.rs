//! Every random stream in a run is a ChaCha8 stream of the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const AGENT_INIT: u64 = 1;
pub const BATCH_SAMPLING: u64 = 2;
pub const TARGET_SMOOTHING: u64 = 3;
pub const EVALUATION: u64 = 4;

pub fn env_stream(instance: usize) -> u64 {
    1_000 + instance as u64
}

pub fn noise_stream(instance: usize) -> u64 {
    100_000 + instance as u64
}

pub fn rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
