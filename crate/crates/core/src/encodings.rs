//! Quadrature constructions for specific masks and the axis-split rotary embedding.
//!
//! * [`sample_cauchy_quadrature`]: Monte Carlo frequencies from the density
//!   `exp(-lambda |xi|)`, weighted so the induced mask estimates the ideal one.
//! * [`rope_quadrature`]: two frequencies `+/- theta / 2 pi` giving `cos(theta (z_i - z_j))`.
//! * [`string_quadrature`]: fixed frequency vectors giving `(1/m) sum_k cos(w_k . (r_i - r_j))`.

use std::f64::consts::{PI, TAU};

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Exp, StandardNormal};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fastmult::MaskSpec;
use crate::quadrature::{ModulationFunction, QuadratureSet};
use crate::rng::RngSeed;

/// `Z_d = integral exp(-lambda |xi|) d xi` over `R^d`, the zero-displacement value of the
/// ideal mask.
pub fn spectral_normalizer(dim: usize, lambda: f64) -> Result<f64> {
    match dim {
        1 => Ok(2.0 / lambda),
        2 => Ok(TAU / (lambda * lambda)),
        3 => Ok(8.0 * PI / (lambda * lambda * lambda)),
        d => Err(Error::InvalidParameter(format!("unsupported dimension {d}"))),
    }
}

/// Draws `size / 2` frequencies from `p(xi) ~ exp(-lambda |xi|)` and pairs each with its
/// negation. Coefficients are `a_s = Z_d / (size * F_f(xi_s))`, so `a_s F_f(xi_s) = Z_d / size`.
pub fn sample_cauchy_quadrature(dim: usize, size: usize, lambda: f64, seed: RngSeed) -> Result<QuadratureSet> {
    if size == 0 || size % 2 != 0 {
        return Err(Error::InvalidParameter(format!("quadrature size must be even and positive, got {size}")));
    }
    let modulation = ModulationFunction::exp_norm(lambda)?;
    let z = spectral_normalizer(dim, lambda)?;
    let exp = Exp::new(lambda).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = seed.rng();
    let half = size / 2;
    let mut freqs = Array2::zeros((half, dim));
    let mut coeffs = Vec::with_capacity(half);
    for mut row in freqs.rows_mut() {
        // Radius ~ Gamma(dim, lambda) as a sum of exponentials; direction uniform.
        let radius: f64 = (0..dim).map(|_| rng.sample(exp)).sum();
        if dim == 1 {
            row[0] = if rng.random::<bool>() { radius } else { -radius };
        } else {
            let dir: Vec<f64> = loop {
                let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 1e-12 {
                    break g.into_iter().map(|v| v / n).collect();
                }
            };
            for (x, d) in row.iter_mut().zip(dir) {
                *x = radius * d;
            }
        }
        coeffs.push(z / (size as f64 * modulation.eval(row.iter())));
    }
    QuadratureSet::symmetrized(&freqs, &coeffs)
}

/// [`sample_cauchy_quadrature`] paired with its `exp(-lambda |xi|)` modulation.
pub fn cauchy_mask_spec(dim: usize, size: usize, lambda: f64, seed: RngSeed) -> Result<MaskSpec> {
    Ok(MaskSpec::new(
        sample_cauchy_quadrature(dim, size, lambda, seed)?,
        ModulationFunction::exp_norm(lambda)?,
    ))
}

/// Frequencies `+/- theta / 2 pi` with weight 1/2 each; with unit modulation the mask is
/// exactly `cos(theta (z_i - z_j))`.
pub fn rope_quadrature(theta: f64) -> Result<QuadratureSet> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
    }
    QuadratureSet::symmetrized(&Array2::from_elem((1, 1), theta / TAU), &[0.5])
}

pub fn rope_mask_spec(theta: f64) -> Result<MaskSpec> {
    Ok(MaskSpec::new(rope_quadrature(theta)?, ModulationFunction::constant_one()))
}

/// Angular frequency vectors `w_k` (rows) turned into `+/- w_k / 2 pi` pairs with weight
/// `1 / 2m` each; with unit modulation the mask is `(1/m) sum_k cos(w_k . (r_i - r_j))`.
pub fn string_quadrature(omegas: ArrayView2<'_, f64>) -> Result<QuadratureSet> {
    let m = omegas.nrows();
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one frequency vector".into()));
    }
    if omegas.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("frequency vectors"));
    }
    let half = omegas.mapv(|w| w / TAU);
    QuadratureSet::symmetrized(&half, &vec![0.5 / m as f64; m])
}

pub fn string_mask_spec(omegas: ArrayView2<'_, f64>) -> Result<MaskSpec> {
    Ok(MaskSpec::new(string_quadrature(omegas)?, ModulationFunction::constant_one()))
}

/// Rotation frequencies for rotary embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct RopeConfig {
    /// Explicit per-pair frequencies; empty means "use the geometric schedule".
    pub thetas: Vec<f64>,
    pub base: f64,
}

impl Default for RopeConfig {
    fn default() -> Self {
        Self { thetas: Vec::new(), base: 10_000.0 }
    }
}

impl RopeConfig {
    pub fn with_base(base: f64) -> Result<Self> {
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::InvalidParameter(format!("rope base must be positive, got {base}")));
        }
        Ok(Self { thetas: Vec::new(), base })
    }

    pub fn with_thetas(thetas: Vec<f64>) -> Result<Self> {
        if thetas.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter("rope frequencies must be positive".into()));
        }
        Ok(Self { thetas, base: 10_000.0 })
    }

    /// `base^(-2j / block)` for `j < block / 2`, or the explicit list.
    pub fn thetas_for_block(&self, block: usize) -> Result<Vec<f64>> {
        let pairs = block / 2;
        if self.thetas.is_empty() {
            return Ok((0..pairs).map(|j| self.base.powf(-2.0 * j as f64 / block as f64)).collect());
        }
        if self.thetas.len() != pairs {
            return Err(Error::InvalidParameter(format!(
                "{} explicit frequencies for a block of {pairs} pairs",
                self.thetas.len()
            )));
        }
        Ok(self.thetas.clone())
    }
}

/// Splits each row of `x` into three contiguous blocks of `d_head / 3` features, one per
/// axis, and rotates consecutive feature pairs in block `a` by `theta_j * r_a`.
pub fn apply_point_rope(x: ArrayView2<'_, f64>, cloud: &PointCloud, config: &RopeConfig) -> Result<Array2<f64>> {
    if cloud.dim() != 3 {
        return Err(Error::DimensionMismatch(format!("point rope needs 3D points, got {}", cloud.dim())));
    }
    if x.nrows() != cloud.len() {
        return Err(Error::LengthMismatch { what: "features", expected: cloud.len(), got: x.nrows() });
    }
    let d_head = x.ncols();
    if d_head == 0 || d_head % 6 != 0 {
        return Err(Error::InvalidParameter(format!("head dimension {d_head} is not divisible by 6")));
    }
    let block = d_head / 3;
    let thetas = config.thetas_for_block(block)?;
    let mut out = x.to_owned();
    for (mut row, pos) in out.rows_mut().into_iter().zip(cloud.coords().rows()) {
        for axis in 0..3 {
            let c = pos[axis];
            for (j, theta) in thetas.iter().enumerate() {
                let (i0, i1) = (axis * block + 2 * j, axis * block + 2 * j + 1);
                let (s, co) = (theta * c).sin_cos();
                let (a, b) = (row[i0], row[i1]);
                row[i0] = a * co - b * s;
                row[i1] = a * s + b * co;
            }
        }
    }
    Ok(out)
}
