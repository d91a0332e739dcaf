//! Timing and accuracy studies behind the benchmark commands.

use std::f64::consts::TAU;
use std::time::Instant;

use ndarray::ArrayView1;
use rand::Rng;
use rand_distr::StandardNormal;
use relflex_core::encodings::cauchy_mask_spec;
use relflex_core::{
    dense_ideal_mask, dense_quadrature_mask, dense_softmax_attention, fastmult, ideal_mask_value,
    masked_lowrank_attention, performer_attention, Backend, MaskSpec, RngSeed,
};

use crate::config::RunConfig;
use crate::data::{random_batch, random_vector, study_cloud};
use crate::error::CliResult;
use crate::stats::{linear_fit, mean, quantile, spearman, std_dev, LinearFit};

pub const OOM_CAPPED: &str = "OOM-capped";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
}

/// One warmup call, then `repeats` timed calls.
pub fn time_repeats(repeats: usize, mut f: impl FnMut() -> CliResult<()>) -> CliResult<Timing> {
    f()?;
    let mut ms = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        f()?;
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(Timing { median_ms: quantile(&ms, 0.5), p10_ms: quantile(&ms, 0.1), p90_ms: quantile(&ms, 0.9) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: &'static str,
    pub len: usize,
    /// `None` when the method was skipped at this length.
    pub timing: Option<Timing>,
}

impl TimingRow {
    pub fn status(&self) -> &'static str {
        if self.timing.is_some() {
            "ok"
        } else {
            OOM_CAPPED
        }
    }

    pub fn fields(&self) -> Vec<String> {
        let (m, p10, p90) = match self.timing {
            Some(t) => (format!("{:.6}", t.median_ms), format!("{:.6}", t.p10_ms), format!("{:.6}", t.p90_ms)),
            None => (String::new(), String::new(), String::new()),
        };
        vec![self.method.to_string(), self.len.to_string(), m, p10, p90, self.status().to_string()]
    }
}

pub const TIMING_HEADER: [&str; 6] = ["method", "L", "median_ms", "p10_ms", "p90_ms", "status"];

/// Tracks a dense series against the memory cap. Once one length is capped every larger
/// one is dropped, so the series ends with a single capped row.
struct DenseSeries {
    cap_bytes: u64,
    stopped: bool,
}

impl DenseSeries {
    /// `Some(true)` to run, `Some(false)` to emit the capped row, `None` to skip.
    fn admit(&mut self, len: usize) -> Option<bool> {
        if self.stopped {
            return None;
        }
        let bytes = (len as u64).saturating_mul(len as u64).saturating_mul(8);
        if bytes > self.cap_bytes {
            self.stopped = true;
            return Some(false);
        }
        Some(true)
    }
}

fn timed_or_capped(
    rows: &mut Vec<TimingRow>,
    series: &mut DenseSeries,
    method: &'static str,
    len: usize,
    repeats: usize,
    f: impl FnMut() -> CliResult<()>,
) -> CliResult<()> {
    match series.admit(len) {
        Some(true) => rows.push(TimingRow { method, len, timing: Some(time_repeats(repeats, f)?) }),
        Some(false) => rows.push(TimingRow { method, len, timing: None }),
        None => {}
    }
    Ok(())
}

/// Dense softmax, factored low-rank and masked low-rank attention over `cfg.lengths`.
pub fn bench_scaling(cfg: &RunConfig) -> CliResult<Vec<TimingRow>> {
    cfg.validate_timing()?;
    let seed = RngSeed(cfg.seeds[0]);
    let phi = cfg.feature_map(seed.derive(1))?;
    let backend = cfg.mask_backend()?;
    let parallel = cfg.threads > 1;
    let mut dense = DenseSeries { cap_bytes: cfg.memory_cap_bytes, stopped: false };
    let mut rows = Vec::new();
    for &len in &cfg.lengths {
        let batch = random_batch(len, cfg.qk_dim, cfg.value_dim, seed.derive(2))?;
        let cloud = study_cloud(cfg, len, seed.derive(3))?;
        let spec = cauchy_mask_spec(cloud.dim(), cfg.quadrature_size, cfg.lambda, seed.derive(4))?;
        timed_or_capped(&mut rows, &mut dense, "dense-softmax", len, cfg.repeats, || {
            dense_softmax_attention(&batch)?;
            Ok(())
        })?;
        let t = time_repeats(cfg.repeats, || {
            performer_attention(&batch, &phi)?;
            Ok(())
        })?;
        rows.push(TimingRow { method: "performer", len, timing: Some(t) });
        let t = time_repeats(cfg.repeats, || {
            masked_lowrank_attention(&batch, &phi, &cloud, &spec, backend, parallel)?;
            Ok(())
        })?;
        rows.push(TimingRow { method: "relflexformer", len, timing: Some(t) });
    }
    Ok(rows)
}

/// Mask-vector products: dense mask construction plus matvec against both fast backends.
pub fn bench_fastmult(cfg: &RunConfig) -> CliResult<Vec<TimingRow>> {
    cfg.validate_timing()?;
    let seed = RngSeed(cfg.seeds[0]);
    let gridded = Backend::Gridded(cfg.accuracy()?.forced());
    let mut naive = DenseSeries { cap_bytes: cfg.memory_cap_bytes, stopped: false };
    let mut rows = Vec::new();
    for &len in &cfg.lengths {
        let cloud = study_cloud(cfg, len, seed.derive(3))?;
        let spec = cauchy_mask_spec(cloud.dim(), cfg.quadrature_size, cfg.lambda, seed.derive(4))?;
        let u = random_vector(len, seed.derive(5));
        timed_or_capped(&mut rows, &mut naive, "naive", len, cfg.repeats, || {
            let mask = dense_quadrature_mask(&cloud, &spec)?;
            std::hint::black_box(mask.dot(&ArrayView1::from(&u[..])));
            Ok(())
        })?;
        for (method, backend) in [("fastmult-direct", Backend::Direct), ("fastmult-gridded", gridded)] {
            let t = time_repeats(cfg.repeats, || {
                fastmult(&cloud, &u, &spec, backend)?;
                Ok(())
            })?;
            rows.push(TimingRow { method, len, timing: Some(t) });
        }
    }
    Ok(rows)
}

/// Median-time ratios between consecutive measured lengths of one method.
pub fn doubling_ratios(rows: &[TimingRow], method: &str) -> Vec<f64> {
    let medians: Vec<f64> =
        rows.iter().filter(|r| r.method == method).filter_map(|r| r.timing.map(|t| t.median_ms)).collect();
    medians.windows(2).map(|w| w[1] / w[0]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub size: usize,
    pub seed: u64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStudy {
    pub rows: Vec<ErrorRow>,
    /// Fit of `ln(mean error over seeds)` against `ln S`.
    pub fit: LinearFit,
}

impl ErrorStudy {
    pub fn mean_error(&self, size: usize) -> f64 {
        let errs: Vec<f64> = self.rows.iter().filter(|r| r.size == size).map(|r| r.rel_error).collect();
        mean(&errs)
    }
}

/// Relative error of the sampled mask against the closed-form mask, on one fixed cloud
/// and input vector, for every quadrature size and seed.
pub fn error_vs_s(cfg: &RunConfig) -> CliResult<ErrorStudy> {
    let sizes = &cfg.quadrature_sizes;
    if sizes.len() < 5 || sizes.iter().max().unwrap() / sizes.iter().min().unwrap() < 4 {
        return Err(crate::error::CliError::Config(
            "error-vs-s needs at least 5 quadrature sizes spanning 2 octaves".into(),
        ));
    }
    let len = cfg.lengths[0];
    let base = RngSeed(cfg.seeds[0]);
    let cloud = study_cloud(cfg, len, base.derive(3))?;
    let u = random_vector(len, base.derive(5));
    let ideal = dense_ideal_mask(&cloud, cfg.lambda)?;
    let want = ideal.dot(&ArrayView1::from(&u[..]));
    let norm = want.dot(&want).sqrt();
    let backend = cfg.fastmult_backend()?;
    let mut rows = Vec::new();
    for &size in sizes {
        for &seed in &cfg.seeds {
            let spec = cauchy_mask_spec(cloud.dim(), size, cfg.lambda, RngSeed(seed).derive(size as u64))?;
            let got = fastmult(&cloud, &u, &spec, backend)?;
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm;
            rows.push(ErrorRow { size, seed, rel_error: err });
        }
    }
    let mut study = ErrorStudy { rows, fit: LinearFit { slope: 0.0, intercept: 0.0, slope_stderr: 0.0 } };
    let x: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
    let y: Vec<f64> = sizes.iter().map(|&s| study.mean_error(s).ln()).collect();
    study.fit = linear_fit(&x, &y);
    Ok(study)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRow {
    pub distance: f64,
    pub mask_mean: f64,
    pub mask_std: f64,
    pub ideal: f64,
    pub rbf: f64,
    pub laplace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelShape {
    pub rows: Vec<ShapeRow>,
    pub spearman: f64,
    /// Seeds the mean at each distance was taken over.
    pub samples: usize,
}

/// Mask value at distance `t` averaged over pair orientation, for one quadrature draw.
///
/// For `d = 1` the orientations are `+/- t` and for `d = 3` the sphere average of
/// `cos(2 pi xi . z)` is `sin(x) / x` with `x = 2 pi |xi| t`, so both are exact. In 2D
/// the average is a Bessel function; there the `directions` sample it instead.
fn orientation_average(spec: &MaskSpec, weights: &[f64], t: f64, directions: &[Vec<f64>]) -> f64 {
    match spec.quad.dim() {
        1 => spec.value_at(&[t]),
        3 => spec
            .quad
            .freqs()
            .rows()
            .into_iter()
            .zip(weights)
            .map(|(xi, w)| {
                let x = TAU * xi.dot(&xi).sqrt() * t;
                w * if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x }
            })
            .sum(),
        _ => {
            let total: f64 = directions
                .iter()
                .map(|d| spec.value_at(&d.iter().map(|v| v * t).collect::<Vec<_>>()))
                .sum();
            total / directions.len() as f64
        }
    }
}

fn random_directions(count: usize, dim: usize, seed: RngSeed) -> Vec<Vec<f64>> {
    let mut rng = seed.rng();
    (0..count)
        .map(|_| loop {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-12 {
                break g.into_iter().map(|v| v / n).collect();
            }
        })
        .collect()
}

/// Sampled mask value against distance: for each seed, a fresh quadrature set is drawn
/// and the mask is averaged over pair orientations at each distance. Mean and spread are
/// taken over seeds.
pub fn kernel_shape(cfg: &RunConfig) -> CliResult<KernelShape> {
    let dim = cfg.dim;
    let distances: Vec<f64> =
        (0..cfg.distances).map(|k| cfg.max_distance * k as f64 / (cfg.distances - 1) as f64).collect();
    let mut per_seed = vec![Vec::with_capacity(cfg.seeds.len()); distances.len()];
    for &seed in &cfg.seeds {
        let seed = RngSeed(seed);
        let spec = cauchy_mask_spec(dim, cfg.quadrature_size, cfg.lambda, seed.derive(6))?;
        let weights = spec.spectral_weights();
        let directions = if dim == 2 { random_directions(cfg.pairs, dim, seed.derive(7)) } else { Vec::new() };
        for (k, &t) in distances.iter().enumerate() {
            per_seed[k].push(orientation_average(&spec, &weights, t, &directions));
        }
    }
    let mut rows = Vec::with_capacity(distances.len());
    for (k, &t) in distances.iter().enumerate() {
        let mut z = vec![0.0; dim];
        z[0] = t;
        let ideal = match ideal_mask_value(&z, cfg.lambda) {
            Ok(v) => v,
            Err(relflex_core::Error::NoClosedForm(_)) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        rows.push(ShapeRow {
            distance: t,
            mask_mean: mean(&per_seed[k]),
            mask_std: std_dev(&per_seed[k]),
            ideal,
            rbf: (-t * t / (2.0 * cfg.sigma * cfg.sigma)).exp(),
            laplace: (-t / cfg.sigma).exp(),
        });
    }
    let means: Vec<f64> = rows.iter().map(|r| r.mask_mean).collect();
    Ok(KernelShape { spearman: spearman(&distances, &means), rows, samples: cfg.seeds.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig { lengths: vec![8, 16], quadrature_size: 8, repeats: 3, seeds: vec![1], ..Default::default() }
    }

    #[test]
    fn dense_series_caps_once() {
        let mut s = DenseSeries { cap_bytes: 16 * 16 * 8, stopped: false };
        assert_eq!(s.admit(16), Some(true));
        assert_eq!(s.admit(17), Some(false));
        assert_eq!(s.admit(32), None);
    }

    #[test]
    fn scaling_rows_and_cap() {
        let cfg = RunConfig { memory_cap_bytes: 8 * 8 * 8, ..small() };
        let rows = bench_scaling(&cfg).unwrap();
        let dense: Vec<_> = rows.iter().filter(|r| r.method == "dense-softmax").collect();
        assert_eq!(dense.len(), 2);
        assert_eq!(dense[1].status(), OOM_CAPPED);
        assert_eq!(rows.iter().filter(|r| r.method == "relflexformer").count(), 2);
    }

    #[test]
    fn fastmult_bench_at_length_one() {
        let cfg = RunConfig { lengths: vec![1], ..small() };
        let rows = bench_fastmult(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.timing.unwrap().median_ms > 0.0));
    }

    #[test]
    fn error_study_rejects_dim_two() {
        let cfg = RunConfig { dim: 2, lengths: vec![8], ..small() };
        assert!(error_vs_s(&cfg).is_err());
    }

    #[test]
    fn error_rows_vary_with_seed() {
        let cfg = RunConfig { lengths: vec![16], seeds: vec![1, 2], quadrature_sizes: vec![8, 16, 32, 64, 128], ..small() };
        let study = error_vs_s(&cfg).unwrap();
        assert_eq!(study.rows.len(), 10);
        assert_ne!(study.rows[0].rel_error, study.rows[1].rel_error);
    }

    #[test]
    fn orientation_average_matches_sampled_directions() {
        let spec = cauchy_mask_spec(3, 16, 1.0, RngSeed(3)).unwrap();
        let weights = spec.spectral_weights();
        let dirs = random_directions(200_000, 3, RngSeed(4));
        let exact = orientation_average(&spec, &weights, 0.4, &[]);
        let sampled: f64 = dirs.iter().map(|d| spec.value_at(&[0.4 * d[0], 0.4 * d[1], 0.4 * d[2]])).sum::<f64>()
            / dirs.len() as f64;
        assert!((exact - sampled).abs() < 0.02 * spec.diagonal(), "{exact} vs {sampled}");
    }

    #[test]
    fn shape_runs_in_two_dimensions() {
        let cfg = RunConfig { dim: 2, quadrature_size: 16, distances: 3, pairs: 4, seeds: vec![1], ..small() };
        let shape = kernel_shape(&cfg).unwrap();
        assert!(shape.rows[1].ideal.is_nan());
        assert!(shape.rows.iter().all(|r| r.mask_mean.is_finite()));
    }

    #[test]
    fn shape_peak_is_normalizer() {
        let cfg = RunConfig { quadrature_size: 64, distances: 4, pairs: 4, seeds: vec![1, 2, 3], ..small() };
        let shape = kernel_shape(&cfg).unwrap();
        let z = 8.0 * std::f64::consts::PI;
        assert!((shape.rows[0].mask_mean - z).abs() < 1e-12 * z);
        assert!(shape.rows[0].mask_std < 1e-12 * z);
        assert!((shape.rows[0].ideal - z).abs() < 1e-12 * z);
    }
}
