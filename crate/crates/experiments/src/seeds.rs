//! Per-simulation random streams.
//!
//! Simulation `s` gets its own seed derived from the master seed, and every
//! source of randomness inside it reads a fixed stream of that seed. Methods
//! take their stream by family only, so variants of one method (bounds,
//! depths, budgets) within a simulation share random numbers.

use pmse_core::seeding::stream_rng;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Population = 0,
    Perturb = 1,
    Theta = 2,
    Synthetic = 3,
    Mechanism = 10,
    NoisyBppd = 11,
    SmoothHist = 12,
    NondpBppd = 13,
}

pub fn sim_seed(master: u64, sim: usize) -> u64 {
    stream_rng(master, sim as u64).next_u64()
}

pub fn sim_rng(master: u64, sim: usize, stream: Stream) -> ChaCha8Rng {
    stream_rng(sim_seed(master, sim), stream as u64)
}
