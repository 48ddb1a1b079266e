//! Beam alignment for millimeter-wave MIMO links under smart jamming.
//!
//! The crate simulates the beacon phase of an OFDM downlink in which a base
//! station probes pseudo-random angular beams while a jammer tries to spoil
//! the user's power measurements. Two estimators recover the dominant
//! beamspace direction from those measurements: a jammer-unaware
//! non-negative least-squares fit and a randomized-probing variant that
//! projects out the public probing symbols and cancels the jammer.

pub mod bounds;
pub mod channel;
pub mod codebook;
pub mod config;
pub mod error;
pub mod harness;
pub mod nnls;
pub mod ofdm_oracle;
pub mod pipeline;
pub mod projection;
pub mod rng;
pub mod signal;
pub mod snapshot;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};

/// Index of the largest entry, the lowest index winning ties.
///
/// Returns 0 for an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
