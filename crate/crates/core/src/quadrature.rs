//! Frequency samples, quadrature coefficients, and the Fourier-domain modulation.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// `S` frequency samples with their quadrature coefficients.
///
/// When `symmetric` is set, rows come in `(xi, -xi)` pairs (rows `2k` and `2k + 1`)
/// carrying equal coefficients, which makes every induced mask real.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSet {
    freqs: Array2<f64>,
    coeffs: Vec<f64>,
    symmetric: bool,
}

impl QuadratureSet {
    pub fn new(freqs: Array2<f64>, coeffs: Vec<f64>, symmetric: bool) -> Result<Self> {
        let (size, dim) = freqs.dim();
        if size == 0 {
            return Err(Error::InvalidParameter("quadrature needs at least one sample".into()));
        }
        if coeffs.len() != size {
            return Err(Error::LengthMismatch {
                what: "quadrature coefficients",
                expected: size,
                got: coeffs.len(),
            });
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("quadrature frequencies need a dimension".into()));
        }
        if freqs.iter().chain(&coeffs).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadrature set"));
        }
        if symmetric {
            if size % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "symmetric quadrature needs an even size, got {size}"
                )));
            }
            for k in 0..size / 2 {
                let (a, b) = (freqs.row(2 * k), freqs.row(2 * k + 1));
                let mirrored = a.iter().zip(b.iter()).all(|(x, y)| *x == -*y);
                if !mirrored || coeffs[2 * k] != coeffs[2 * k + 1] {
                    return Err(Error::InvalidParameter(format!(
                        "rows {} and {} are not a +/- pair with equal coefficients",
                        2 * k,
                        2 * k + 1
                    )));
                }
            }
        }
        Ok(Self { freqs, coeffs, symmetric })
    }

    /// Interleaves `(xi, -xi)` for every row of `half`, each pair sharing its coefficient.
    pub fn symmetrized(half: &Array2<f64>, half_coeffs: &[f64]) -> Result<Self> {
        let (n, dim) = half.dim();
        if half_coeffs.len() != n {
            return Err(Error::LengthMismatch {
                what: "quadrature coefficients",
                expected: n,
                got: half_coeffs.len(),
            });
        }
        let mut freqs = Array2::zeros((2 * n, dim));
        let mut coeffs = Vec::with_capacity(2 * n);
        for (k, (row, &c)) in half.rows().into_iter().zip(half_coeffs).enumerate() {
            freqs.row_mut(2 * k).assign(&row);
            freqs.row_mut(2 * k + 1).assign(&row.mapv(|v| -v));
            coeffs.extend([c, c]);
        }
        Self::new(freqs, coeffs, true)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.freqs.ncols()
    }

    pub fn freqs(&self) -> &Array2<f64> {
        &self.freqs
    }

    pub fn freq(&self, s: usize) -> ArrayView1<'_, f64> {
        self.freqs.row(s)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulationKind {
    /// `exp(-lambda * |xi|)`
    ExpNorm,
    /// `1` everywhere.
    ConstantOne,
}

/// Fourier-domain mask `F_f(xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationFunction {
    kind: ModulationKind,
    lambda: f64,
}

impl ModulationFunction {
    pub fn exp_norm(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { kind: ModulationKind::ExpNorm, lambda })
    }

    pub fn constant_one() -> Self {
        Self { kind: ModulationKind::ConstantOne, lambda: 1.0 }
    }

    pub fn kind(&self) -> ModulationKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval<'a>(&self, xi: impl IntoIterator<Item = &'a f64>) -> f64 {
        match self.kind {
            ModulationKind::ConstantOne => 1.0,
            ModulationKind::ExpNorm => {
                let norm = xi.into_iter().map(|v| v * v).sum::<f64>().sqrt();
                (-self.lambda * norm).exp()
            }
        }
    }
}
