#![allow(dead_code)]

use conseq_core::classifiers::FeatureMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `n` points around each centre with standard deviation `sd`; labels are
/// `1..=centres.len()`.
pub fn blobs(centres: &[[f64; 2]], n: usize, sd: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        for (k, c) in centres.iter().enumerate() {
            if x.len() < n && i * centres.len() + k < n {
                x.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
                y.push(k as u32 + 1);
            }
        }
    }
    (x, y)
}

pub fn dense(rows: Vec<Vec<f64>>) -> FeatureMatrix {
    FeatureMatrix::dense(rows).unwrap()
}

pub fn accuracy(pred: &[u32], truth: &[u32]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

pub fn xor() -> (FeatureMatrix, Vec<u32>) {
    (
        dense(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]),
        vec![0, 1, 1, 0],
    )
}
