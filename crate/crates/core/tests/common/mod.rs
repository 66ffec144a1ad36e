#![allow(dead_code)]

use l1cert::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::from_row_major(rows, cols, data).unwrap()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn unit_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v = gaussian_vec(rng, n);
    let norm = l1cert::linalg::norm2(&v);
    v.into_iter().map(|t| t / norm).collect()
}

/// Random orthogonal n×n matrix.
pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let g = gaussian(rng, n, n);
    let q = g.as_na().clone().qr().q();
    DenseMatrix::from_rows(&(0..n).map(|i| q.row(i).iter().copied().collect()).collect::<Vec<_>>()).unwrap()
}

pub fn rows(r: &[&[f64]]) -> DenseMatrix {
    DenseMatrix::from_rows(&r.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// x with `k` nonzero Gaussian entries at random positions.
pub fn sparse_vec(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut x = vec![0.0; n];
    for &i in &idx[..k.min(n)] {
        let v: f64 = StandardNormal.sample(rng);
        x[i] = v.signum() * (0.5 + v.abs());
    }
    x
}
