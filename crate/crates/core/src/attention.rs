//! Dense attention oracles, factored low-rank attention, and masked low-rank attention
//! driven by any mask-vector product.

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};

use crate::batch::{validate_batch, AttentionBatch};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fastmult::{dense_quadrature_mask, Backend, FastMultPlan, MaskSpec};
use crate::feature_map::FeatureMap;
use crate::nudft::NufftAccuracy;

/// Floor applied to every row normalizer. Quadrature masks can be negative, so a row sum
/// may be zero or below; such rows are clamped and counted.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// `L x d_v` new embeddings, one row per token.
    pub embeddings: Array2<f64>,
    /// Row normalizers after clamping.
    pub denominators: Vec<f64>,
    /// Number of rows whose normalizer was raised to [`DENOMINATOR_FLOOR`].
    pub clamped_rows: usize,
}

impl AttentionOutput {
    fn from_parts(numerators: Array2<f64>, raw_denominators: Vec<f64>) -> Self {
        let mut embeddings = numerators;
        let mut clamped_rows = 0;
        let denominators: Vec<f64> = raw_denominators
            .into_iter()
            .map(|d| {
                if d < DENOMINATOR_FLOOR || d.is_nan() {
                    clamped_rows += 1;
                    DENOMINATOR_FLOOR
                } else {
                    d
                }
            })
            .collect();
        for (mut row, d) in embeddings.rows_mut().into_iter().zip(&denominators) {
            row /= *d;
        }
        Self { embeddings, denominators, clamped_rows }
    }

    /// `X + output`, the residual update a caller applies after attention.
    pub fn residual_update(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.dim() != self.embeddings.dim() {
            return Err(Error::DimensionMismatch(format!(
                "residual input is {:?}, attention output is {:?}",
                x.dim(),
                self.embeddings.dim()
            )));
        }
        Ok(x + &self.embeddings)
    }
}

/// Kernel used to build the unmasked scores of the dense oracle.
#[derive(Debug, Clone, Copy)]
pub enum AttentionKernel<'a> {
    /// `exp(q . k / sqrt(d_qk))`.
    Softmax,
    /// `phi(q) . phi(k)`.
    LowRank(&'a FeatureMap),
}

/// Which mask-vector product drives [`masked_lowrank_attention`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskBackend {
    /// Materialize the quadrature mask and multiply densely.
    DenseOracle,
    FastMultDirect,
    FastMultGridded(NufftAccuracy),
}

fn softmax_scores(batch: &AttentionBatch) -> Array2<f64> {
    let scale = (batch.qk_dim() as f64).sqrt().recip();
    let mut scores = batch.q.dot(&batch.k.t());
    for mut row in scores.rows_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v * scale));
        row.mapv_inplace(|v| (v * scale - max).exp());
    }
    scores
}

fn lowrank_features(batch: &AttentionBatch, phi: &FeatureMap) -> Result<(Array2<f64>, Array2<f64>)> {
    Ok((phi.apply(batch.q.view())?, phi.apply(batch.k.view())?))
}

/// Row-normalized `exp(Q K^T / sqrt(d_qk)) V`, with each row shifted by its maximum
/// logit before exponentiation.
pub fn dense_softmax_attention(batch: &AttentionBatch) -> Result<AttentionOutput> {
    batch.validate()?;
    let scores = softmax_scores(batch);
    let den = scores.sum_axis(Axis(1)).to_vec();
    Ok(AttentionOutput::from_parts(scores.dot(&batch.v), den))
}

/// `(A o M)` row-normalized and applied to `V`, with `A` from `kernel`.
pub fn dense_masked_attention(
    batch: &AttentionBatch,
    mask: ArrayView2<'_, f64>,
    kernel: AttentionKernel<'_>,
) -> Result<AttentionOutput> {
    batch.validate()?;
    let len = batch.len();
    if mask.dim() != (len, len) {
        return Err(Error::DimensionMismatch(format!(
            "mask is {:?}, expected ({len}, {len})",
            mask.dim()
        )));
    }
    let mut scores = match kernel {
        AttentionKernel::Softmax => softmax_scores(batch),
        AttentionKernel::LowRank(phi) => {
            let (fq, fk) = lowrank_features(batch, phi)?;
            fq.dot(&fk.t())
        }
    };
    scores *= &mask;
    let den = scores.sum_axis(Axis(1)).to_vec();
    Ok(AttentionOutput::from_parts(scores.dot(&batch.v), den))
}

/// Low-rank attention in factored order: `phi(Q) (phi(K)^T V)` over
/// `phi(Q) (phi(K)^T 1)`, never forming an `L x L` matrix.
pub fn performer_attention(batch: &AttentionBatch, phi: &FeatureMap) -> Result<AttentionOutput> {
    batch.validate()?;
    let (fq, fk) = lowrank_features(batch, phi)?;
    let kv = fk.t().dot(&batch.v);
    let ksum = fk.sum_axis(Axis(0));
    let den = fq.dot(&ksum).to_vec();
    Ok(AttentionOutput::from_parts(fq.dot(&kv), den))
}

/// Masked low-rank attention through `m * d_v + m` mask-vector products.
///
/// Column `a * d_v + c` of the first block holds `phi(k_i)_a * v_ic` (row-major
/// flattening of the `m x d_v` outer product); the trailing `m` columns hold `phi(k_i)`.
/// Each column is multiplied by the mask, and token `i` reads its numerator from the
/// masked outer products contracted with `phi(q_i)`.
pub fn masked_lowrank_attention(
    batch: &AttentionBatch,
    phi: &FeatureMap,
    cloud: &PointCloud,
    spec: &MaskSpec,
    backend: MaskBackend,
    parallel: bool,
) -> Result<AttentionOutput> {
    validate_batch(batch, cloud)?;
    let (fq, fk) = lowrank_features(batch, phi)?;
    let (len, m, dv) = (batch.len(), fk.ncols(), batch.value_dim());
    let ncols = m * dv + m;
    let fill = |start: usize, mut tile: ArrayViewMut2<'_, f64>| {
        for (k, mut row) in tile.rows_mut().into_iter().enumerate() {
            let (ki, vi) = (fk.row(start + k), batch.v.row(start + k));
            for a in 0..m {
                for c in 0..dv {
                    row[a * dv + c] = ki[a] * vi[c];
                }
                row[m * dv + a] = ki[a];
            }
        }
    };
    // Token i reads its numerator from the first block and its normalizer from the tail.
    let contract = |start: usize, masked: ArrayView2<'_, f64>| {
        let mut num = Array2::zeros((masked.nrows(), dv));
        let mut den = Vec::with_capacity(masked.nrows());
        for (k, (row, mut out)) in masked.rows().into_iter().zip(num.rows_mut()).enumerate() {
            let q = fq.row(start + k);
            let mut d = 0.0;
            for a in 0..m {
                for c in 0..dv {
                    out[c] += q[a] * row[a * dv + c];
                }
                d += q[a] * row[m * dv + a];
            }
            den.push(d);
        }
        (num, den)
    };

    let parts = match backend {
        MaskBackend::DenseOracle => {
            let mut stacked = Array2::zeros((len, ncols));
            fill(0, stacked.view_mut());
            vec![contract(0, dense_quadrature_mask(cloud, spec)?.dot(&stacked).view())]
        }
        MaskBackend::FastMultDirect => {
            FastMultPlan::new(cloud, spec, Backend::Direct)?.apply_streamed(ncols, parallel, fill, contract)?
        }
        MaskBackend::FastMultGridded(acc) => {
            FastMultPlan::new(cloud, spec, Backend::Gridded(acc))?.apply_streamed(ncols, parallel, fill, contract)?
        }
    };
    let nums: Vec<ArrayView2<'_, f64>> = parts.iter().map(|(n, _)| n.view()).collect();
    let num = ndarray::concatenate(Axis(0), &nums).expect("tiles share a width");
    let den = parts.iter().flat_map(|(_, d)| d.iter().copied()).collect();
    Ok(AttentionOutput::from_parts(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn batch() -> AttentionBatch {
        AttentionBatch::new(
            array![[0.5, -1.0], [1.5, 0.25], [-0.5, 2.0]],
            array![[1.0, 0.0], [0.2, 0.7], [-1.0, 0.4]],
            array![[1.0, 2.0, 0.0], [-1.0, 0.5, 3.0], [4.0, -2.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn zero_queries_and_keys_average_values() {
        let mut b = batch();
        b.q.fill(0.0);
        b.k.fill(0.0);
        let out = dense_softmax_attention(&b).unwrap();
        let mean = b.v.mean_axis(Axis(0)).unwrap();
        for row in out.embeddings.rows() {
            for (x, y) in row.iter().zip(&mean) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_token_returns_its_value() {
        let b = AttentionBatch::new(array![[0.3, 0.1]], array![[2.0, -1.0]], array![[7.0, -3.0]]).unwrap();
        assert_eq!(dense_softmax_attention(&b).unwrap().embeddings, array![[7.0, -3.0]]);
        let out = performer_attention(&b, &FeatureMap::relu()).unwrap();
        assert!((&out.embeddings - &array![[7.0, -3.0]]).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn identity_mask_returns_own_values() {
        let b = batch();
        let eye = Array2::eye(3);
        let out = dense_masked_attention(&b, eye.view(), AttentionKernel::Softmax).unwrap();
        assert!((&out.embeddings - &b.v).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn negative_rows_are_clamped() {
        let b = batch();
        let mask = Array2::from_elem((3, 3), -1.0);
        let out = dense_masked_attention(&b, mask.view(), AttentionKernel::Softmax).unwrap();
        assert_eq!(out.clamped_rows, 3);
        assert!(out.denominators.iter().all(|&d| d == DENOMINATOR_FLOOR));
    }

    #[test]
    fn wrong_mask_shape_is_rejected() {
        let mask = Array2::ones((2, 3));
        assert!(dense_masked_attention(&batch(), mask.view(), AttentionKernel::Softmax).is_err());
    }

    #[test]
    fn residual_update_adds() {
        let out = dense_softmax_attention(&batch()).unwrap();
        let x = Array2::ones((3, 3));
        assert_eq!(out.residual_update(&x).unwrap(), &x + &out.embeddings);
        assert!(out.residual_update(&Array2::ones((3, 2))).is_err());
    }
}
