mod common;

use common::*;
use ndarray::{Array2, Axis};
use relflex_core::encodings::{cauchy_mask_spec, string_mask_spec};
use relflex_core::*;

#[test]
fn softmax_rows_sum_to_one() {
    let mut r = rng(1);
    let b = batch(&mut r, 8, 4, 3);
    let scale = 0.5; // 1 / sqrt(4)
    let logits = b.q.dot(&b.k.t()) * scale;
    let a = logits.mapv(f64::exp);
    let rows = &a / &a.sum_axis(Axis(1)).insert_axis(Axis(1));
    for s in rows.sum_axis(Axis(1)) {
        assert!((s - 1.0).abs() <= 1e-12);
    }
    let want = rows.dot(&b.v);
    let got = dense_softmax_attention(&b).unwrap().embeddings;
    assert!(rel_err_m(&got, &want) <= 1e-12);
}

#[test]
fn all_ones_mask_is_neutral() {
    let mut r = rng(2);
    let b = batch(&mut r, 12, 4, 3);
    let ones = Array2::ones((12, 12));
    let plain = dense_softmax_attention(&b).unwrap();
    let masked = dense_masked_attention(&b, ones.view(), AttentionKernel::Softmax).unwrap();
    assert!(rel_err_m(&masked.embeddings, &plain.embeddings) <= 1e-12);

    let phi = FeatureMap::relu();
    let perf = performer_attention(&b, &phi).unwrap();
    let lowrank = dense_masked_attention(&b, ones.view(), AttentionKernel::LowRank(&phi)).unwrap();
    assert!(rel_err_m(&perf.embeddings, &lowrank.embeddings) <= 1e-12);
}

#[test]
fn identity_mask_with_lowrank_kernel() {
    let mut r = rng(3);
    let mut b = batch(&mut r, 10, 4, 2);
    b.q.mapv_inplace(f64::abs);
    b.k.mapv_inplace(f64::abs);
    let eye = Array2::eye(10);
    let out = dense_masked_attention(&b, eye.view(), AttentionKernel::LowRank(&FeatureMap::relu())).unwrap();
    assert!(rel_err_m(&out.embeddings, &b.v) <= 1e-12);
}

fn masked_instance(seed: u64, len: usize, dim: usize, m: usize, dv: usize) -> (AttentionBatch, PointCloud, MaskSpec, FeatureMap) {
    let mut r = rng(seed);
    let b = batch(&mut r, len, m, dv);
    let c = cloud(&mut r, len, dim);
    let spec = cauchy_mask_spec(dim, 16, 1.0, RngSeed(seed + 1)).unwrap();
    (b, c, spec, FeatureMap::relu())
}

#[test]
fn lowrank_masked_matches_dense_reference() {
    let (b, c, spec, phi) = masked_instance(4, 16, 3, 8, 4);
    let mask = dense_quadrature_mask(&c, &spec).unwrap();
    let dense = dense_masked_attention(&b, mask.view(), AttentionKernel::LowRank(&phi)).unwrap();
    let direct = masked_lowrank_attention(&b, &phi, &c, &spec, MaskBackend::FastMultDirect, false).unwrap();
    assert!(rel_err_m(&direct.embeddings, &dense.embeddings) <= 1e-10);
    assert_eq!(direct.clamped_rows, dense.clamped_rows);
}

#[test]
fn backends_agree() {
    let (b, c, spec, phi) = masked_instance(5, 32, 3, 8, 4);
    let mask = dense_quadrature_mask(&c, &spec).unwrap();
    let reference = dense_masked_attention(&b, mask.view(), AttentionKernel::LowRank(&phi)).unwrap();
    let oracle = masked_lowrank_attention(&b, &phi, &c, &spec, MaskBackend::DenseOracle, false).unwrap();
    let direct = masked_lowrank_attention(&b, &phi, &c, &spec, MaskBackend::FastMultDirect, false).unwrap();
    let acc = NufftAccuracy::new(1e-6).unwrap().forced();
    let gridded = masked_lowrank_attention(&b, &phi, &c, &spec, MaskBackend::FastMultGridded(acc), false).unwrap();
    assert!(rel_err_m(&oracle.embeddings, &reference.embeddings) <= 1e-10);
    assert!(rel_err_m(&direct.embeddings, &oracle.embeddings) <= 1e-10);
    assert!(rel_err_m(&gridded.embeddings, &oracle.embeddings) <= 1e-5);
}

#[test]
fn parallel_columns_are_bit_identical() {
    let (b, c, spec, phi) = masked_instance(6, 64, 2, 6, 5);
    let seq = masked_lowrank_attention(&b, &phi, &c, &spec, MaskBackend::FastMultDirect, false).unwrap();
    let par = masked_lowrank_attention(&b, &phi, &c, &spec, MaskBackend::FastMultDirect, true).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn neutral_mask_reduces_to_performer() {
    // A single zero frequency, pair-symmetrized with coefficients summing to one.
    let (b, c, _, phi) = masked_instance(7, 24, 3, 6, 3);
    let spec = string_mask_spec(Array2::zeros((1, 3)).view()).unwrap();
    assert!((spec.diagonal() - 1.0).abs() < 1e-15);
    let perf = performer_attention(&b, &phi).unwrap();
    for backend in [MaskBackend::DenseOracle, MaskBackend::FastMultDirect] {
        let out = masked_lowrank_attention(&b, &phi, &c, &spec, backend, false).unwrap();
        assert!(rel_err_m(&out.embeddings, &perf.embeddings) <= 1e-12);
    }
}

#[test]
fn permutation_permutes_rows() {
    let (b, c, spec, phi) = masked_instance(8, 30, 3, 4, 3);
    let perm: Vec<usize> = (0..30).map(|i| (i * 7) % 30).collect();
    let base = masked_lowrank_attention(&b, &phi, &c, &spec, MaskBackend::FastMultDirect, false).unwrap();
    let moved = masked_lowrank_attention(&b.permuted(&perm), &phi, &c.permuted(&perm), &spec, MaskBackend::FastMultDirect, false).unwrap();
    let want = base.embeddings.select(Axis(0), &perm);
    assert!(rel_err_m(&moved.embeddings, &want) <= 1e-12);

    let dense_base = dense_softmax_attention(&b).unwrap();
    let dense_moved = dense_softmax_attention(&b.permuted(&perm)).unwrap();
    assert!(rel_err_m(&dense_moved.embeddings, &dense_base.embeddings.select(Axis(0), &perm)) <= 1e-15);
}

#[test]
fn dense_rows_normalize_when_unclamped() {
    let (b, c, _, phi) = masked_instance(9, 20, 3, 4, 2);
    // A positive-definite-in-value mask: RoPE-like small frequencies keep all entries > 0.
    let spec = string_mask_spec(ndarray::array![[0.1, 0.2, 0.0]].view()).unwrap();
    let mask = dense_quadrature_mask(&c, &spec).unwrap();
    assert!(mask.iter().all(|&m| m > 0.0));
    let mut fb = b.clone();
    fb.v = Array2::ones((20, 1));
    let out = dense_masked_attention(&fb, mask.view(), AttentionKernel::LowRank(&phi)).unwrap();
    assert_eq!(out.clamped_rows, 0);
    // With V = 1 the output is exactly the row sum of the normalized matrix.
    for v in out.embeddings.iter() {
        assert!((v - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn positive_random_features_estimate_softmax_kernel() {
    let x = [0.5, 0.5, 0.0, 0.0];
    let y = [1.0, 0.0, -0.3, 0.0];
    let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    assert!((xy - 0.5).abs() < 1e-15);
    let xm = Array2::from_shape_vec((1, 4), x.to_vec()).unwrap();
    let ym = Array2::from_shape_vec((1, 4), y.to_vec()).unwrap();
    let estimates: Vec<f64> = (0..50)
        .map(|s| {
            let phi = FeatureMap::positive_random(4096, 4, RngSeed(1000 + s)).unwrap();
            phi.apply(xm.view()).unwrap().row(0).dot(&phi.apply(ym.view()).unwrap().row(0))
        })
        .collect();
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!((mean - 0.5f64.exp()).abs() <= 3.0 * se, "{mean} +- {se}");
}

#[test]
fn performer_error_shrinks_with_features() {
    let mut r = rng(10);
    let (len, d) = (64, 8);
    let b = batch(&mut r, len, d, 4);
    let exact = dense_softmax_attention(&b).unwrap().embeddings;
    // Positive random features estimate exp(q . k); fold the 1/sqrt(d) into q and k.
    let s = (d as f64).powf(-0.25);
    let scaled = AttentionBatch::new(&b.q * s, &b.k * s, b.v.clone()).unwrap();
    let mse = |m: usize| -> f64 {
        (0..10)
            .map(|seed| {
                let phi = FeatureMap::positive_random(m, d, RngSeed(500 + seed)).unwrap();
                let out = performer_attention(&scaled, &phi).unwrap().embeddings;
                (&out - &exact).mapv(|v| v * v).mean().unwrap()
            })
            .sum::<f64>()
            / 10.0
    };
    let errs: Vec<f64> = [16, 64, 256].into_iter().map(mse).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}
