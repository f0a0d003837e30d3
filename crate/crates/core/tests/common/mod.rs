//! Shared fixtures and exact enumeration oracles for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use radiotomo_core::geometry::Grid;
use radiotomo_core::synthesis::PottsParams;

/// Exact probability of every label configuration of a tiny Potts field.
///
/// Configuration `code` assigns site `i` the digit `(code / K^i) % K`
/// (site 0 is the least significant digit).
pub fn enumerate_potts(grid: &Grid, params: &PottsParams) -> Vec<f64> {
    let n = grid.n_points();
    let k = params.n_classes;
    let edges = grid.edges();
    let total = k
        .checked_pow(n as u32)
        .expect("enumeration only works for tiny grids");
    let mut probs = Vec::with_capacity(total);
    let mut z = vec![0usize; n];
    for code in 0..total {
        decode_labels(code, k, &mut z);
        let same = edges.iter().filter(|&&(a, b)| z[a] == z[b]).count();
        probs.push((params.beta * same as f64).exp());
    }
    let norm: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= norm;
    }
    probs
}

/// Writes the label configuration encoded by `code` into `z`.
pub fn decode_labels(code: usize, k: usize, z: &mut [usize]) {
    let mut c = code;
    for digit in z.iter_mut() {
        *digit = c % k;
        c /= k;
    }
}

/// Encodes a label configuration as a mixed-radix index.
pub fn encode_labels(z: &[usize], k: usize) -> usize {
    z.iter().rev().fold(0, |acc, &d| acc * k + d)
}

/// Total variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Draws one index from a probability table by inverse transform.
pub fn sample_index(probs: &[f64], rng: &mut ChaCha20Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
