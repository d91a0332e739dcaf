#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relflex_core::{AttentionBatch, PointCloud, RngSeed};

pub fn rng(seed: u64) -> ChaCha8Rng {
    RngSeed(seed).rng()
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || lo + (hi - lo) * rng.random::<f64>())
}

pub fn cloud(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> PointCloud {
    PointCloud::new(uniform(rng, len, dim, 0.0, 1.0)).unwrap()
}

pub fn vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

pub fn cvector(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

pub fn batch(rng: &mut ChaCha8Rng, len: usize, dqk: usize, dv: usize) -> AttentionBatch {
    AttentionBatch::new(
        uniform(rng, len, dqk, -1.0, 1.0),
        uniform(rng, len, dqk, -1.0, 1.0),
        uniform(rng, len, dv, -1.0, 1.0),
    )
    .unwrap()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn rel_err_c(got: &[Complex64], want: &[Complex64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn rel_err_m(got: &Array2<f64>, want: &Array2<f64>) -> f64 {
    rel_err(got.as_slice().unwrap(), want.as_slice().unwrap())
}

pub fn matvec(m: &Array2<f64>, u: &[f64]) -> Vec<f64> {
    m.dot(&ndarray::ArrayView1::from(u)).to_vec()
}
