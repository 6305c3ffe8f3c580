//! Seeded random streams.
//!
//! Every random quantity is drawn from ChaCha20 seeded with
//! `ChaCha20Rng::seed_from_u64(seed)` and then moved to a fixed stream id, so
//! each consumer gets an independent sequence and adding draws to one stream
//! never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream ids. Values are part of the reproducibility contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Kernel = 1,
    Objective = 2,
    Constraint = 3,
    InitialDist = 4,
    Hazards = 5,
    Policy = 6,
    Garbage = 7,
}

pub fn stream(seed: u64, id: Stream) -> ChaCha20Rng {
    stream_raw(seed, id as u64)
}

/// Stream for hazards resampled at `iteration` (ids from `0x100` up).
pub fn hazard_stream(seed: u64, iteration: usize) -> ChaCha20Rng {
    stream_raw(seed, 0x100 + iteration as u64)
}

/// Stream for the `call`-th sampled robust evaluation (ids from `2^32` up).
pub fn evaluator_stream(seed: u64, call: u64) -> ChaCha20Rng {
    stream_raw(seed, (1 << 32) + call)
}

fn stream_raw(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
