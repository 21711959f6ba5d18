//! Support library for the `hermite-dpp` binary: artifact plumbing and the
//! comparison point sets, kept out of `main.rs` so they stay testable.

pub mod artifacts;
pub mod comparison;
