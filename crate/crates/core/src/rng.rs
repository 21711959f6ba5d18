//! Deterministic random-stream derivation.
//!
//! Every stochastic routine takes an explicit generator; nothing reads global
//! state. Reproducibility across serial and parallel execution comes from a
//! single derivation rule: a root seed plus a list of integer tags (command,
//! repetition, stage, ...) is hashed into the seed of an independent ChaCha
//! stream. Repetition `i` always receives `substream(root, &[tag, i])`, no
//! matter which worker thread runs it or in which order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the SplitMix64 output permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a root seed and a tag path into a single stream seed.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut z = splitmix64(root);
    for &t in tags {
        z = splitmix64(z ^ t);
    }
    z
}

/// Independent generator for the given tag path.
pub fn substream(root: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tags))
}

/// Run `reps` closures on derived substreams, collecting results in
/// repetition order. Parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn run_reps<T, F>(root: u64, tag: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    use rayon::prelude::*;
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(root, &[tag, i as u64]);
            f(i, &mut rng)
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_reps<T, F>(root: u64, tag: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    run_reps_seq(root, tag, reps, f)
}

/// Sequential twin of [`run_reps`]; used as the benchmark baseline and as the
/// fallback when the `parallel` feature is off. Produces identical output.
pub fn run_reps_seq<T, F>(root: u64, tag: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    (0..reps)
        .map(|i| {
            let mut rng = substream(root, &[tag, i as u64]);
            f(i, &mut rng)
        })
        .collect()
}
