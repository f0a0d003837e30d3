//! Deterministic derivation of per-purpose RNG seeds from one base seed.
//!
//! Every randomized stage (scene sampling, noise, initialization, pool
//! draws, ...) gets its own stream index so stages stay statistically
//! independent while remaining reproducible from a single configured seed.

/// SplitMix64 finalizer; full-period bijective mixing of a 64-bit word.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed for stream `stream` derived from `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}
