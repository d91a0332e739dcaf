//! Nonnegative feature maps for low-rank attention.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Relu,
    /// `exp(Wx - |x|^2 / 2) / sqrt(m)`, an unbiased estimator of `exp(x . y)`.
    PositiveRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    kind: FeatureKind,
    proj: Option<Array2<f64>>,
}

impl FeatureMap {
    /// Raw constructor; a positive-random map without a projection fails at application time.
    pub fn new(kind: FeatureKind, proj: Option<Array2<f64>>) -> Self {
        Self { kind, proj }
    }

    pub fn relu() -> Self {
        Self { kind: FeatureKind::Relu, proj: None }
    }

    /// Draws an `m x input_dim` projection with standard normal entries.
    pub fn positive_random(m: usize, input_dim: usize, seed: RngSeed) -> Result<Self> {
        if m == 0 || input_dim == 0 {
            return Err(Error::InvalidParameter("feature map dimensions must be positive".into()));
        }
        let mut rng = seed.rng();
        let proj = Array2::from_shape_simple_fn((m, input_dim), || rng.sample(StandardNormal));
        Ok(Self { kind: FeatureKind::PositiveRandom, proj: Some(proj) })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn projection(&self) -> Option<&Array2<f64>> {
        self.proj.as_ref()
    }

    /// Output width for inputs of width `input_dim`.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match (self.kind, &self.proj) {
            (FeatureKind::PositiveRandom, Some(p)) => p.nrows(),
            _ => input_dim,
        }
    }

    /// Applies the map to every row of `x`.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self.kind {
            FeatureKind::Relu => Ok(x.mapv(|v| v.max(0.0))),
            FeatureKind::PositiveRandom => {
                let proj = self.proj.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("positive random feature map has no projection".into())
                })?;
                if proj.ncols() != x.ncols() {
                    return Err(Error::DimensionMismatch(format!(
                        "projection expects width {}, input has width {}",
                        proj.ncols(),
                        x.ncols()
                    )));
                }
                let scale = (proj.nrows() as f64).sqrt().recip();
                let mut out = x.dot(&proj.t());
                for (mut row, xr) in out.rows_mut().into_iter().zip(x.rows()) {
                    let half_sq = 0.5 * xr.dot(&xr);
                    row.mapv_inplace(|wx| scale * (wx - half_sq).exp());
                }
                Ok(out)
            }
        }
    }
}

/// Free-function form of [`FeatureMap::apply`].
pub fn apply_feature_map(phi: &FeatureMap, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    phi.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn relu_is_identity_on_nonnegative_input() {
        let x = array![[0.0, 1.5], [2.0, 0.25]];
        assert_eq!(apply_feature_map(&FeatureMap::relu(), x.view()).unwrap(), x);
    }

    #[test]
    fn relu_of_negated_positive_input_is_zero() {
        let x = array![[0.5, 1.5], [2.0, 0.25]];
        let out = apply_feature_map(&FeatureMap::relu(), (-&x).view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_projection_is_an_error() {
        let phi = FeatureMap::new(FeatureKind::PositiveRandom, None);
        assert!(phi.apply(array![[1.0]].view()).is_err());
    }

    #[test]
    fn positive_random_is_positive_and_seeded() {
        let a = FeatureMap::positive_random(32, 3, RngSeed(9)).unwrap();
        let b = FeatureMap::positive_random(32, 3, RngSeed(9)).unwrap();
        assert_eq!(a, b);
        let out = a.apply(array![[1.0, -2.0, 0.5], [0.0, 0.0, 0.0]].view()).unwrap();
        assert_eq!(out.dim(), (2, 32));
        assert!(out.iter().all(|&v| v > 0.0));
        assert!(a.apply(array![[1.0, 2.0]].view()).is_err());
    }
}
