//! Shared inputs for the benchmarks.

use prognosis::learners::DesignMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// AR(1) series of length `n`.
pub fn series(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x = 0.8 * x + rng.random::<f64>() - 0.5;
            80.0 + 10.0 * x
        })
        .collect()
}

/// Gaussian-ish features with the label driven by the first column.
pub fn classification(n_rows: usize, n_cols: usize, seed: u64) -> (DesignMatrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..n_cols)
        .map(|_| (0..n_rows).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let y = (0..n_rows)
        .map(|i| u8::from(cols[0][i] + 0.5 * (rng.random::<f64>() - 0.5) > 0.0))
        .collect();
    let names = (0..n_cols).map(|j| format!("x{j}")).collect();
    (DesignMatrix::new(names, cols).expect("finite"), y)
}
