use ndarray::Array2;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Query, key and value rows for `L` tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBatch {
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
}

impl AttentionBatch {
    pub fn new(q: Array2<f64>, k: Array2<f64>, v: Array2<f64>) -> Result<Self> {
        let batch = Self { q, k, v };
        batch.validate()?;
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.nrows() == 0
    }

    pub fn qk_dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn value_dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.q.nrows();
        if len == 0 {
            return Err(Error::InvalidParameter("attention batch needs at least one token".into()));
        }
        for (what, m) in [("keys", &self.k), ("values", &self.v)] {
            if m.nrows() != len {
                return Err(Error::LengthMismatch { what, expected: len, got: m.nrows() });
            }
        }
        if self.k.ncols() != self.q.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "queries have width {}, keys have width {}",
                self.q.ncols(),
                self.k.ncols()
            )));
        }
        if [&self.q, &self.k, &self.v].iter().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("attention batch"));
        }
        Ok(())
    }

    /// Reorders tokens so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        use ndarray::Axis;
        Self {
            q: self.q.select(Axis(0), perm),
            k: self.k.select(Axis(0), perm),
            v: self.v.select(Axis(0), perm),
        }
    }
}

/// Checks that `batch` is well formed and that it has one row per point of `cloud`.
pub fn validate_batch(batch: &AttentionBatch, cloud: &PointCloud) -> Result<()> {
    batch.validate()?;
    if batch.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            what: "attention batch",
            expected: cloud.len(),
            got: batch.len(),
        });
    }
    Ok(())
}
