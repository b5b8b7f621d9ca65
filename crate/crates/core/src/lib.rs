//! Attested BFS spanning tree construction over a shared-register network.
//!
//! The crate is `no_std` with `alloc`. It contains the graph substrate, the
//! signature and attestation primitives, the per-node protocol step, the
//! adversary behaviours, a lock-step simulator and the closed-form
//! containment analysis that the simulator is checked against.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adversary;
pub mod analysis;
pub mod attestation;
pub mod crypto;
mod error;
pub mod graph;
pub mod protocol;
pub mod sim;

pub use error::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Random generator used throughout; seeded runs are reproducible.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Deterministic 64-bit mixer used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
