//! Nonuniform discrete Fourier transforms between arbitrary point and frequency sets.
//!
//! Every transform here is an exponential sum
//! `out_k = sum_j w_j * exp(sign * 2 pi i * t_k . x_j)` between `sources` `x_j` and
//! `targets` `t_k`. The forward transform maps point values to frequency samples with a
//! negative sign; the adjoint maps frequency coefficients back onto points with a
//! positive sign. Both come as an exact `O(L * S)` direct sum and as a gridded fast path.

mod gridded;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub use gridded::{GridShape, Type3Plan};

pub type ComplexVector = Vec<Complex64>;

/// Sign of the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Positive => 1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Positive => Sign::Negative,
        }
    }
}

/// Below this many frequencies the fast entry points evaluate directly, since the
/// direct sum is already linear in `L`.
pub const DIRECT_FALLBACK_MAX_FREQS: usize = 64;

/// Default cap on fine-grid cells (complex values).
pub const DEFAULT_MAX_GRID_CELLS: usize = 1 << 26;

/// Accuracy and resource knobs for the gridded transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NufftAccuracy {
    epsilon: f64,
    oversampling: f64,
    force_gridded: bool,
    max_grid_cells: usize,
}

impl NufftAccuracy {
    pub fn new(epsilon: f64) -> Result<Self> {
        Self::with_oversampling(epsilon, 2.0)
    }

    pub fn with_oversampling(epsilon: f64, oversampling: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.1) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 0.1], got {epsilon}"
            )));
        }
        if !(oversampling >= 2.0 && oversampling.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "oversampling must be at least 2, got {oversampling}"
            )));
        }
        Ok(Self { epsilon, oversampling, force_gridded: false, max_grid_cells: DEFAULT_MAX_GRID_CELLS })
    }

    /// Always take the gridded path, even for few frequencies.
    pub fn forced(mut self) -> Self {
        self.force_gridded = true;
        self
    }

    pub fn with_max_grid_cells(mut self, cells: usize) -> Self {
        self.max_grid_cells = cells;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn oversampling(&self) -> f64 {
        self.oversampling
    }

    pub fn force_gridded(&self) -> bool {
        self.force_gridded
    }

    pub fn max_grid_cells(&self) -> usize {
        self.max_grid_cells
    }

    /// Whether a transform over `num_freqs` frequencies should use the grid.
    pub fn use_grid(&self, num_freqs: usize) -> bool {
        num_freqs > 1 && (self.force_gridded || num_freqs > DIRECT_FALLBACK_MAX_FREQS)
    }
}

impl Default for NufftAccuracy {
    fn default() -> Self {
        Self::new(1e-6).expect("valid default")
    }
}

fn check_dims(what: &str, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: sources have dimension {}, targets have dimension {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(())
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { what, expected, got });
    }
    Ok(())
}

/// Direct evaluation of `out_k = sum_j w_j exp(sign 2 pi i t_k . x_j)`.
pub fn type3_direct(
    sources: ArrayView2<'_, f64>,
    weights: &[Complex64],
    targets: ArrayView2<'_, f64>,
    sign: Sign,
) -> Result<ComplexVector> {
    check_dims("type-3 transform", sources, targets)?;
    check_len("source weights", sources.nrows(), weights.len())?;
    let two_pi = sign.value() * std::f64::consts::TAU;
    let out = targets
        .rows()
        .into_iter()
        .map(|t| {
            sources
                .rows()
                .into_iter()
                .zip(weights)
                .fold(Complex64::new(0.0, 0.0), |acc, (x, w)| {
                    let (s, c) = (two_pi * t.dot(&x)).sin_cos();
                    acc + w * Complex64::new(c, s)
                })
        })
        .collect();
    Ok(out)
}

/// Gridded evaluation of the same sum; falls back to [`type3_direct`] for few sources or
/// targets unless the accuracy requests a forced grid.
pub fn type3_fast(
    sources: ArrayView2<'_, f64>,
    weights: &[Complex64],
    targets: ArrayView2<'_, f64>,
    sign: Sign,
    acc: &NufftAccuracy,
    num_freqs: usize,
) -> Result<ComplexVector> {
    if !acc.use_grid(num_freqs) {
        return type3_direct(sources, weights, targets, sign);
    }
    check_len("source weights", sources.nrows(), weights.len())?;
    let plan = Type3Plan::new(sources, targets, sign, acc)?;
    Ok(plan.execute(weights))
}

fn real_to_complex(u: &[f64]) -> Vec<Complex64> {
    u.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// `F_P(xi_s) = sum_l u_l exp(-2 pi i xi_s . r_l)` by direct summation.
pub fn nudft_forward_direct(cloud: &PointCloud, u: &[f64], freqs: &Array2<f64>) -> Result<ComplexVector> {
    check_len("point values", cloud.len(), u.len())?;
    type3_direct(cloud.coords().view(), &real_to_complex(u), freqs.view(), Sign::Negative)
}

/// `w_i = sum_s b_s exp(+2 pi i xi_s . r_i)` by direct summation.
pub fn nudft_adjoint_direct(cloud: &PointCloud, b: &[Complex64], freqs: &Array2<f64>) -> Result<ComplexVector> {
    type3_direct(freqs.view(), b, cloud.coords().view(), Sign::Positive)
}

/// Gridded forward transform, accurate to roughly `acc.epsilon()` in relative L2 norm.
pub fn nudft_forward_fast(
    cloud: &PointCloud,
    u: &[f64],
    freqs: &Array2<f64>,
    acc: &NufftAccuracy,
) -> Result<ComplexVector> {
    check_len("point values", cloud.len(), u.len())?;
    type3_fast(cloud.coords().view(), &real_to_complex(u), freqs.view(), Sign::Negative, acc, freqs.nrows())
}

/// Gridded adjoint transform, the mirror of [`nudft_forward_fast`].
pub fn nudft_adjoint_fast(
    cloud: &PointCloud,
    b: &[Complex64],
    freqs: &Array2<f64>,
    acc: &NufftAccuracy,
) -> Result<ComplexVector> {
    type3_fast(freqs.view(), b, cloud.coords().view(), Sign::Positive, acc, freqs.nrows())
}
