//! RPE mask-vector products.
//!
//! The mask is `M_ij = sum_s a_s F_f(xi_s) exp(2 pi i xi_s . (r_i - r_j))`, which under a
//! pair-symmetric quadrature is the real matrix
//! `sum_s a_s F_f(xi_s) cos(2 pi xi_s . (r_i - r_j))`. [`fastmult`] applies it without
//! forming it: forward transform of the point signal to the sampled frequencies, pointwise
//! modulation, adjoint transform back onto the points.

use std::f64::consts::{PI, TAU};

use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::nudft::{type3_direct, NufftAccuracy, Sign, Type3Plan};
use crate::quadrature::{ModulationFunction, QuadratureSet};

/// Quadrature plus modulation: everything that defines a mask for a given cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    pub quad: QuadratureSet,
    pub modulation: ModulationFunction,
}

impl MaskSpec {
    pub fn new(quad: QuadratureSet, modulation: ModulationFunction) -> Self {
        Self { quad, modulation }
    }

    /// `a_s * F_f(xi_s)` for every sample.
    pub fn spectral_weights(&self) -> Vec<f64> {
        self.quad
            .coeffs()
            .iter()
            .zip(self.quad.freqs().rows())
            .map(|(a, xi)| a * self.modulation.eval(xi.iter()))
            .collect()
    }

    /// The common diagonal value `M_ii = sum_s a_s F_f(xi_s)`.
    pub fn diagonal(&self) -> f64 {
        self.spectral_weights().iter().sum()
    }

    /// Mask value for one displacement `r_i - r_j`.
    pub fn value_at(&self, displacement: &[f64]) -> f64 {
        self.spectral_weights()
            .iter()
            .zip(self.quad.freqs().rows())
            .map(|(c, xi)| {
                let dot: f64 = xi.iter().zip(displacement).map(|(x, z)| x * z).sum();
                c * (TAU * dot).cos()
            })
            .sum()
    }

    fn check(&self, cloud: &PointCloud) -> Result<()> {
        if !self.quad.is_symmetric() {
            return Err(Error::ComplexMask);
        }
        if self.quad.dim() != cloud.dim() {
            return Err(Error::DimensionMismatch(format!(
                "quadrature has dimension {}, cloud has dimension {}",
                self.quad.dim(),
                cloud.dim()
            )));
        }
        Ok(())
    }
}

/// Warmup blend `M_hat = 1 + alpha (M - 1)` between the all-ones mask and `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendSchedule {
    alpha: f64,
}

impl BlendSchedule {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Exact `O(L * S)` exponential sums.
    Direct,
    /// Gridded transforms at the given accuracy.
    Gridded(NufftAccuracy),
}

impl Backend {
    /// Tolerance on the relative imaginary residue of a product.
    pub fn residue_tolerance(&self) -> f64 {
        match self {
            Backend::Direct => 1e-10,
            Backend::Gridded(acc) => (10.0 * acc.epsilon()).max(1e-10),
        }
    }
}

/// Phase tables are cached when `S * L` stays below this many entries.
const PHASE_CACHE_MAX: usize = 1 << 24;

/// Rows per tile in the cached path, small enough that a tile of a few hundred columns
/// stays in cache. Tiles are fixed, so serial and parallel runs give bit-identical results.
const ROW_TILE: usize = 256;

enum Engine {
    /// `[cos; sin]` of `2 pi xi_s . r_l`, `2S x L`, applied as real matrix products.
    Cached(Array2<f64>),
    Direct,
    Gridded { forward: Box<Type3Plan>, adjoint: Box<Type3Plan> },
}

/// A mask-vector product bound to one cloud, one mask and one backend, reusable across
/// many input vectors.
pub struct FastMultPlan {
    points: Array2<f64>,
    freqs: Array2<f64>,
    spectral: Vec<f64>,
    engine: Engine,
    tolerance: f64,
}

impl FastMultPlan {
    pub fn new(cloud: &PointCloud, spec: &MaskSpec, backend: Backend) -> Result<Self> {
        spec.check(cloud)?;
        let points = cloud.coords().clone();
        let freqs = spec.quad.freqs().clone();
        let (len, size) = (points.nrows(), freqs.nrows());
        let engine = match backend {
            Backend::Gridded(acc) if acc.use_grid(size) => Engine::Gridded {
                forward: Box::new(Type3Plan::new(points.view(), freqs.view(), Sign::Negative, &acc)?),
                adjoint: Box::new(Type3Plan::new(freqs.view(), points.view(), Sign::Positive, &acc)?),
            },
            _ if len.saturating_mul(size) <= PHASE_CACHE_MAX => {
                let phase = freqs.dot(&points.t()) * TAU;
                let table = ndarray::concatenate(Axis(0), &[phase.mapv(f64::cos).view(), phase.mapv(f64::sin).view()])
                    .expect("matching shapes");
                Engine::Cached(table)
            }
            _ => Engine::Direct,
        };
        Ok(Self {
            points,
            freqs,
            spectral: spec.spectral_weights(),
            engine,
            tolerance: backend.residue_tolerance(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn quadrature_size(&self) -> usize {
        self.freqs.nrows()
    }

    /// `w = M u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let len = self.len();
        if u.len() != len {
            return Err(Error::LengthMismatch { what: "input vector", expected: len, got: u.len() });
        }
        match &self.engine {
            Engine::Cached(_) => {
                let col = ArrayView2::from_shape((len, 1), u).expect("length checked");
                Ok(self.apply_columns(col, false)?.into_iter().collect())
            }
            _ => self.apply_transform(u),
        }
    }

    /// Applies `M` to an `L x ncols` block that is never materialized whole.
    ///
    /// `produce(start, tile)` fills rows `start..start + tile.nrows()` of the input;
    /// `consume(start, tile)` receives the same rows of the output and its results are
    /// returned in row order. On the cached engine each tile is produced and consumed
    /// once, so memory stays at a few tiles; other engines assemble the full block.
    pub fn apply_streamed<R, P, C>(&self, ncols: usize, parallel: bool, produce: P, consume: C) -> Result<Vec<R>>
    where
        R: Send,
        P: Fn(usize, ArrayViewMut2<'_, f64>) + Sync,
        C: Fn(usize, ArrayView2<'_, f64>) -> R + Sync,
    {
        let len = self.len();
        let starts: Vec<usize> = (0..len).step_by(ROW_TILE).collect();
        let Engine::Cached(table) = &self.engine else {
            let mut input = Array2::zeros((len, ncols));
            produce(0, input.view_mut());
            let out = self.apply_columns(input.view(), parallel)?;
            return Ok(starts
                .iter()
                .map(|&st| consume(st, out.slice(s![st..(st + ROW_TILE).min(len), ..])))
                .collect());
        };
        let size = self.quadrature_size();
        let tile_of = |st: usize| table.slice(s![.., st..(st + ROW_TILE).min(len)]);

        // Step 1: P U holds Re F on top and -Im F below, accumulated tile by tile.
        let partial = |&st: &usize| {
            let p = tile_of(st);
            let mut input = Array2::zeros((p.ncols(), ncols));
            produce(st, input.view_mut());
            p.dot(&input)
        };
        let partials: Vec<Array2<f64>> =
            if parallel { starts.par_iter().map(partial).collect() } else { starts.iter().map(partial).collect() };
        let mut f = Array2::zeros((2 * size, ncols));
        for part in &partials {
            f += part;
        }

        // Step 2: b = a F_f F. Stack [Re b; -Im b] for the real part of step 3 and
        // [Im b; Re b] for the imaginary part.
        let mut re_rhs = Array2::zeros((2 * size, ncols));
        let mut im_rhs = Array2::zeros((2 * size, ncols));
        let mut bound = vec![0.0; ncols];
        for (s, &w) in self.spectral.iter().enumerate() {
            for j in 0..ncols {
                let (br, bi) = (w * f[[s, j]], -w * f[[size + s, j]]);
                re_rhs[[s, j]] = br;
                re_rhs[[size + s, j]] = -bi;
                im_rhs[[s, j]] = bi;
                im_rhs[[size + s, j]] = br;
                bound[j] += br.hypot(bi);
            }
        }

        // Step 3: w = (C + i S)^T b per tile; only the imaginary norms are kept.
        let finish = |&st: &usize| {
            let p = tile_of(st);
            let im = p.t().dot(&im_rhs);
            let mut residue = vec![0.0; ncols];
            for row in im.rows() {
                for (r, v) in residue.iter_mut().zip(row) {
                    *r += v * v;
                }
            }
            (consume(st, p.t().dot(&re_rhs).view()), residue)
        };
        let tiles: Vec<(R, Vec<f64>)> =
            if parallel { starts.par_iter().map(finish).collect() } else { starts.iter().map(finish).collect() };
        let mut residue = vec![0.0; ncols];
        for (_, part) in &tiles {
            for (r, v) in residue.iter_mut().zip(part) {
                *r += v;
            }
        }
        let sqrt_len = (len as f64).sqrt();
        for (r, b) in residue.iter().zip(&bound) {
            self.check_residue(r.sqrt(), b * sqrt_len)?;
        }
        Ok(tiles.into_iter().map(|(r, _)| r).collect())
    }

    fn check_residue(&self, residue: f64, bound: f64) -> Result<()> {
        if bound > 0.0 && residue > self.tolerance * bound {
            return Err(Error::ImaginaryResidue { residue: residue / bound, tolerance: self.tolerance });
        }
        Ok(())
    }

    /// One vector through the direct or gridded transforms.
    fn apply_transform(&self, u: &[f64]) -> Result<Vec<f64>> {
        let uc: Vec<Complex64> = u.iter().map(|&v| v.into()).collect();
        // Step 1: F_P(xi_s) = sum_l u_l exp(-2 pi i xi_s . r_l).
        let spectrum = match &self.engine {
            Engine::Gridded { forward, .. } => forward.execute(&uc),
            _ => type3_direct(self.points.view(), &uc, self.freqs.view(), Sign::Negative)?,
        };
        // Step 2: b_s = a_s F_f(xi_s) F_P(xi_s).
        let b: Vec<Complex64> = spectrum.iter().zip(&self.spectral).map(|(f, c)| f * c).collect();
        // Step 3: w_i = sum_s b_s exp(2 pi i xi_s . r_i).
        let w = match &self.engine {
            Engine::Gridded { adjoint, .. } => adjoint.execute(&b),
            _ => type3_direct(self.freqs.view(), &b, self.points.view(), Sign::Positive)?,
        };
        let bound = b.iter().map(|v| v.norm()).sum::<f64>() * (self.len() as f64).sqrt();
        self.check_residue(w.iter().map(|v| v.im * v.im).sum::<f64>().sqrt(), bound)?;
        Ok(w.into_iter().map(|v| v.re).collect())
    }

    /// `M` applied to every column of `cols` (`L x n`). With `parallel` the columns are
    /// distributed over the rayon pool; results do not depend on scheduling.
    pub fn apply_columns(&self, cols: ArrayView2<'_, f64>, parallel: bool) -> Result<Array2<f64>> {
        let len = self.len();
        if cols.nrows() != len {
            return Err(Error::LengthMismatch { what: "column block", expected: len, got: cols.nrows() });
        }
        if let Engine::Cached(_) = &self.engine {
            let tiles = self.apply_streamed(
                cols.ncols(),
                parallel,
                |st, mut tile| {
                    let rows = tile.nrows();
                    tile.assign(&cols.slice(s![st..st + rows, ..]));
                },
                |_, tile| tile.to_owned(),
            )?;
            let views: Vec<ArrayView2<'_, f64>> = tiles.iter().map(|t| t.view()).collect();
            return Ok(ndarray::concatenate(Axis(0), &views).expect("tiles share a width"));
        }
        let mut out = Array2::zeros((len, cols.ncols()));
        let inputs: Vec<Vec<f64>> = cols.columns().into_iter().map(|c| c.to_vec()).collect();
        let outputs: Vec<Vec<f64>> = if parallel {
            inputs.par_iter().map(|c| self.apply_transform(c)).collect::<Result<_>>()?
        } else {
            inputs.iter().map(|c| self.apply_transform(c)).collect::<Result<_>>()?
        };
        for (mut col, w) in out.columns_mut().into_iter().zip(outputs) {
            col.assign(&ndarray::ArrayView1::from(&w));
        }
        Ok(out)
    }

    /// `(1 - alpha) (sum_l u_l) 1 + alpha M u`.
    pub fn apply_blended(&self, u: &[f64], sched: BlendSchedule) -> Result<Vec<f64>> {
        let alpha = sched.alpha();
        let total: f64 = u.iter().sum();
        let mut w = self.apply(u)?;
        for wi in &mut w {
            *wi = (1.0 - alpha) * total + alpha * *wi;
        }
        Ok(w)
    }
}

/// Applies the mask defined by `spec` on `cloud` to `u`.
pub fn fastmult(cloud: &PointCloud, u: &[f64], spec: &MaskSpec, backend: Backend) -> Result<Vec<f64>> {
    FastMultPlan::new(cloud, spec, backend)?.apply(u)
}

/// Warmup-blended product; `alpha = 0` is the all-ones mask, `alpha = 1` the full mask.
pub fn blended_fastmult(
    cloud: &PointCloud,
    u: &[f64],
    spec: &MaskSpec,
    sched: BlendSchedule,
    backend: Backend,
) -> Result<Vec<f64>> {
    FastMultPlan::new(cloud, spec, backend)?.apply_blended(u, sched)
}

/// Materializes the `L x L` mask that [`fastmult`] applies. Oracle use only.
pub fn dense_quadrature_mask(cloud: &PointCloud, spec: &MaskSpec) -> Result<Array2<f64>> {
    spec.check(cloud)?;
    let len = cloud.len();
    let weights = spec.spectral_weights();
    let freqs = spec.quad.freqs();
    // Projections p_si = xi_s . r_i; each entry is sum_s c_s cos(2 pi (p_si - p_sj)).
    let proj = cloud.coords().dot(&freqs.t());
    let mut mask = Array2::zeros((len, len));
    for i in 0..len {
        for j in i..len {
            let v: f64 = weights
                .iter()
                .enumerate()
                .map(|(s, c)| c * (TAU * (proj[[i, s]] - proj[[j, s]])).cos())
                .sum();
            mask[[i, j]] = v;
            mask[[j, i]] = v;
        }
    }
    Ok(mask)
}

/// Closed form of `f(z) = integral exp(-lambda |xi|) exp(2 pi i xi . z) d xi` over `R^d`.
pub fn ideal_mask_value(displacement: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let r2: f64 = displacement.iter().map(|v| v * v).sum();
    let denom = lambda * lambda + 4.0 * PI * PI * r2;
    match displacement.len() {
        1 => Ok(2.0 * lambda / denom),
        3 => Ok(8.0 * PI * lambda / (denom * denom)),
        d => Err(Error::NoClosedForm(d)),
    }
}

/// Dense mask built from [`ideal_mask_value`] on every displacement. Oracle use only.
pub fn dense_ideal_mask(cloud: &PointCloud, lambda: f64) -> Result<Array2<f64>> {
    let len = cloud.len();
    let mut mask = Array2::zeros((len, len));
    let mut diff = vec![0.0; cloud.dim()];
    for i in 0..len {
        for j in i..len {
            for (k, d) in diff.iter_mut().enumerate() {
                *d = cloud.coords()[[i, k]] - cloud.coords()[[j, k]];
            }
            let v = ideal_mask_value(&diff, lambda)?;
            mask[[i, j]] = v;
            mask[[j, i]] = v;
        }
    }
    Ok(mask)
}
