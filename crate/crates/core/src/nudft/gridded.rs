//! Type-3 gridding with truncated Gaussians.
//!
//! Both point sets are centred per axis and measured in fine-grid units, so sources sit
//! at `u_j` and targets at angular frequencies `nu_k` with `|nu_k| <= pi / R`. Sources are
//! spread with `g(u) = exp(-u^2 / 4a)` onto integer cells, the grid is pre-divided by the
//! transform of the interpolation Gaussian, one uniform FFT of length `R * M` per axis
//! produces the sum on a fine frequency grid, a second Gaussian interpolates to each
//! `nu_k`, and the result is divided by `g_hat(nu_k)`. Per-axis factors multiply, so a
//! `d`-dimensional transform is the tensor product of 1D stencils.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use ndarray::ArrayView2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{NufftAccuracy, Sign};
use crate::error::{Error, Result};

const AXES: usize = 3;

/// Fine-grid geometry chosen for one transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    /// FFT length per axis; unused axes have length 1.
    pub dims: [usize; AXES],
    /// Gaussian half-width in cells.
    pub half_width: usize,
}

impl GridShape {
    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Kernel half-width for a target accuracy. A single gridding stage with oversampling
/// `R` and optimally tuned Gaussian has error about `exp(-c(R) w)`,
/// `c(R) = 2 pi (1 - 1/R) / (2 - 1/R)`; two such stages are chained.
pub(crate) fn half_width(epsilon: f64, oversampling: f64) -> usize {
    let r = oversampling;
    let rate = TAU * (1.0 - 1.0 / r) / (2.0 - 1.0 / r);
    (((1.0 / epsilon).ln() + 2.0) / rate).ceil().max(2.0) as usize
}

/// Gaussian shape parameter `a` balancing truncation and aliasing for half-width `w`.
pub(crate) fn gaussian_shape(w: usize, oversampling: f64) -> f64 {
    w as f64 / (TAU * (2.0 - 1.0 / oversampling))
}

/// Smallest integer `>= n` with no prime factors beyond 5.
pub(crate) fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn bounds(col: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

/// One axis of a stencil table: `width` consecutive cells per row.
#[derive(Debug, Clone)]
struct Stencil {
    width: usize,
    idx: Vec<usize>,
    weight: Vec<f64>,
}

impl Stencil {
    fn trivial(rows: usize) -> Self {
        Self { width: 1, idx: vec![0; rows], weight: vec![1.0; rows] }
    }

    fn gaussian(positions: impl Iterator<Item = f64>, w: usize, shape: f64, n: usize) -> Self {
        let width = 2 * w + 2;
        let mut idx = Vec::new();
        let mut weight = Vec::new();
        let inv = 1.0 / (4.0 * shape);
        let n = n as i64;
        for pos in positions {
            let start = pos.floor() as i64 - w as i64;
            for p in 0..width as i64 {
                let m = start + p;
                let d = m as f64 - pos;
                idx.push(m.rem_euclid(n) as usize);
                weight.push((-d * d * inv).exp());
            }
        }
        Self { width, idx, weight }
    }

    fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let s = r * self.width;
        (&self.idx[s..s + self.width], &self.weight[s..s + self.width])
    }
}

/// Precomputed geometry for repeated type-3 transforms between fixed point sets.
///
/// Computes `out_k = sum_j w_j exp(sign 2 pi i t_k . x_j)` for any weights `w`.
#[derive(Clone)]
pub struct Type3Plan {
    shape: GridShape,
    num_sources: usize,
    num_targets: usize,
    src: [Stencil; AXES],
    tgt: [Stencil; AXES],
    src_phase: Vec<Complex64>,
    tgt_factor: Vec<Complex64>,
    correction: [Vec<f64>; AXES],
    ffts: [Arc<dyn Fft<f64>>; AXES],
}

impl std::fmt::Debug for Type3Plan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Type3Plan")
            .field("shape", &self.shape)
            .field("num_sources", &self.num_sources)
            .field("num_targets", &self.num_targets)
            .finish_non_exhaustive()
    }
}

impl Type3Plan {
    pub fn new(
        sources: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        sign: Sign,
        acc: &NufftAccuracy,
    ) -> Result<Self> {
        let dim = sources.ncols();
        if targets.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "sources have dimension {dim}, targets have dimension {}",
                targets.ncols()
            )));
        }
        if dim == 0 || dim > AXES {
            return Err(Error::InvalidParameter(format!("unsupported dimension {dim}")));
        }
        if sources.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transform coordinates"));
        }
        let r = acc.oversampling();
        let w = half_width(acc.epsilon(), r);
        let shape_param = gaussian_shape(w, r);
        // A positive exponent is the negative one evaluated at negated targets.
        let tsign = -sign.value();

        let mut dims = [1usize; AXES];
        let mut src: [Stencil; AXES] = std::array::from_fn(|_| Stencil::trivial(sources.nrows()));
        let mut tgt: [Stencil; AXES] = std::array::from_fn(|_| Stencil::trivial(targets.nrows()));
        let mut correction: [Vec<f64>; AXES] = std::array::from_fn(|_| vec![1.0]);
        let mut src_center = [0.0; AXES];
        let mut tgt_center = [0.0; AXES];
        let mut nu_scale = [0.0; AXES];
        let norm = (4.0 * PI * shape_param).sqrt().recip();

        for a in 0..dim {
            let (cx, half_x) = bounds(sources.column(a).iter().copied());
            let (ct, half_t) = bounds(targets.column(a).iter().map(|t| tsign * t));
            let mut h = 1.0 / (2.0 * r * half_t);
            if !(h.is_finite() && half_t > 0.0) {
                h = half_x.max(1.0);
            }
            let span = half_x / h;
            if !(span < 1e12) {
                return Err(Error::GridTooLarge { cells: usize::MAX, cap: acc.max_grid_cells() });
            }
            let m = 2 * (span.ceil() as usize + w + 2);
            dims[a] = next_smooth((r * m as f64).ceil() as usize);
            src_center[a] = cx;
            tgt_center[a] = ct;
            nu_scale[a] = TAU * h;
        }
        let cells = dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
        if cells > acc.max_grid_cells() {
            return Err(Error::GridTooLarge { cells, cap: acc.max_grid_cells() });
        }

        for a in 0..dim {
            let n = dims[a];
            let h = nu_scale[a] / TAU;
            let dnu = TAU / n as f64;
            src[a] = Stencil::gaussian(
                sources.column(a).iter().map(|x| (x - src_center[a]) / h),
                w,
                shape_param,
                n,
            );
            tgt[a] = Stencil::gaussian(
                targets.column(a).iter().map(|t| nu_scale[a] * (tsign * t - tgt_center[a]) / dnu),
                w,
                shape_param,
                n,
            );
            correction[a] = (0..n)
                .map(|i| {
                    let m = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
                    norm * (shape_param * dnu * dnu * m * m).exp()
                })
                .collect();
        }

        let src_phase = sources
            .rows()
            .into_iter()
            .map(|x| {
                let dot: f64 = (0..dim).map(|a| tgt_center[a] * (x[a] - src_center[a])).sum();
                Complex64::from_polar(1.0, -TAU * dot)
            })
            .collect();
        let tgt_factor = targets
            .rows()
            .into_iter()
            .map(|t| {
                let mut phase = 0.0;
                let mut deconv = 1.0;
                for a in 0..dim {
                    let te = tsign * t[a];
                    phase += te * src_center[a];
                    let nu = nu_scale[a] * (te - tgt_center[a]);
                    deconv *= norm * (shape_param * nu * nu).exp();
                }
                Complex64::from_polar(deconv, -TAU * phase)
            })
            .collect();

        let mut planner = FftPlanner::new();
        let ffts = std::array::from_fn(|a| planner.plan_fft_forward(dims[a]));
        Ok(Self {
            shape: GridShape { dims, half_width: w },
            num_sources: sources.nrows(),
            num_targets: targets.nrows(),
            src,
            tgt,
            src_phase,
            tgt_factor,
            correction,
            ffts,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    /// Runs the transform for one weight vector.
    ///
    /// # Panics
    /// If `weights.len()` differs from the number of sources the plan was built for.
    pub fn execute(&self, weights: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(weights.len(), self.num_sources, "weight count must match the plan");
        let mut grid = vec![Complex64::new(0.0, 0.0); self.shape.cells()];
        self.spread(weights, &mut grid);
        self.correct(&mut grid);
        self.fft(&mut grid);
        self.interpolate(&grid)
    }

    fn spread(&self, weights: &[Complex64], grid: &mut [Complex64]) {
        let [_, n1, n2] = self.shape.dims;
        for (j, (&wj, &phase)) in weights.iter().zip(&self.src_phase).enumerate() {
            let c = wj * phase;
            let (i0s, w0s) = self.src[0].row(j);
            let (i1s, w1s) = self.src[1].row(j);
            let (i2s, w2s) = self.src[2].row(j);
            for (&i0, &w0) in i0s.iter().zip(w0s) {
                let c0 = c * w0;
                for (&i1, &w1) in i1s.iter().zip(w1s) {
                    let c1 = c0 * w1;
                    let line = &mut grid[(i0 * n1 + i1) * n2..][..n2];
                    for (&i2, &w2) in i2s.iter().zip(w2s) {
                        line[i2] += c1 * w2;
                    }
                }
            }
        }
    }

    fn correct(&self, grid: &mut [Complex64]) {
        let [_, n1, n2] = self.shape.dims;
        for (i0, &c0) in self.correction[0].iter().enumerate() {
            for (i1, &c1) in self.correction[1].iter().enumerate() {
                let c01 = c0 * c1;
                let line = &mut grid[(i0 * n1 + i1) * n2..][..n2];
                for (v, &c2) in line.iter_mut().zip(&self.correction[2]) {
                    *v *= c01 * c2;
                }
            }
        }
    }

    fn fft(&self, grid: &mut [Complex64]) {
        let dims = self.shape.dims;
        for a in 0..AXES {
            let n = dims[a];
            if n == 1 {
                continue;
            }
            let fft = &self.ffts[a];
            let stride: usize = dims[a + 1..].iter().product();
            if stride == 1 {
                fft.process(grid);
                continue;
            }
            let outer: usize = dims[..a].iter().product();
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for o in 0..outer {
                for i in 0..stride {
                    let base = o * n * stride + i;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = grid[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        grid[base + k * stride] = *v;
                    }
                }
            }
        }
    }

    fn interpolate(&self, grid: &[Complex64]) -> Vec<Complex64> {
        let [_, n1, n2] = self.shape.dims;
        (0..self.num_targets)
            .map(|k| {
                let (i0s, w0s) = self.tgt[0].row(k);
                let (i1s, w1s) = self.tgt[1].row(k);
                let (i2s, w2s) = self.tgt[2].row(k);
                let mut acc = Complex64::new(0.0, 0.0);
                for (&i0, &w0) in i0s.iter().zip(w0s) {
                    for (&i1, &w1) in i1s.iter().zip(w1s) {
                        let line = &grid[(i0 * n1 + i1) * n2..][..n2];
                        let mut inner = Complex64::new(0.0, 0.0);
                        for (&i2, &w2) in i2s.iter().zip(w2s) {
                            inner += line[i2] * w2;
                        }
                        acc += inner * (w0 * w1);
                    }
                }
                acc * self.tgt_factor[k]
            })
            .collect()
    }
}
