//! Shared inputs for the criterion benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttsl_core::tt::{Kernel, TTTensor};

/// Random tensor train with the given mode sizes and uniform interior rank.
pub fn random_tt(sizes: &[usize], rank: usize, seed: u64) -> TTTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = sizes.len();
    let kernels = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let left = if k == 0 { 1 } else { rank };
            let right = if k + 1 == d { 1 } else { rank };
            Kernel::from_fn(left, n, right, |_, _, _| rng.gen_range(-1.0..1.0))
        })
        .collect();
    TTTensor::new(kernels).expect("consistent ranks")
}

/// Sum of a rank-`rank` train and a small rank-`rank` perturbation: rounding
/// at a threshold above the perturbation halves the ranks.
pub fn redundant_tt(sizes: &[usize], rank: usize, noise: f64, seed: u64) -> TTTensor {
    let a = random_tt(sizes, rank, seed);
    let b = random_tt(sizes, rank, seed + 1).scaled(noise);
    a.add(&b).expect("same sizes")
}
