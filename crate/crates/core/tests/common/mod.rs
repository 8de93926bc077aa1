#![allow(dead_code)]

pub mod galerkin;

use hyperpower::LinearOperator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Columns of `op` applied to unit vectors, returned row-major as nested rows.
pub fn dense_of(op: &dyn LinearOperator) -> Vec<Vec<f64>> {
    let (r, c) = (op.nrows(), op.ncols());
    let mut out = vec![vec![0.0; c]; r];
    let mut e = vec![0.0; c];
    let mut y = vec![0.0; r];
    for j in 0..c {
        e[j] = 1.0;
        op.apply_into(&e, &mut y);
        e[j] = 0.0;
        for i in 0..r {
            out[i][j] = y[i];
        }
    }
    out
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(u, v)| (u - v).abs())
        })
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
