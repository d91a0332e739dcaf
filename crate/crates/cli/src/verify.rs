//! Oracle-equivalence and invariant checks, run from `relflex verify` and `rope-check`.

use ndarray::{Array2, ArrayView1, Axis};
use num_complex::Complex64;
use rand::Rng;
use relflex_core::encodings::{cauchy_mask_spec, rope_mask_spec, string_mask_spec};
use relflex_core::nudft::{nudft_adjoint_direct, nudft_adjoint_fast, nudft_forward_direct, nudft_forward_fast};
use relflex_core::{
    blended_fastmult, dense_masked_attention, dense_quadrature_mask, fastmult, masked_lowrank_attention,
    performer_attention, AttentionKernel, Backend, BlendSchedule, FeatureMap, MaskBackend, MaskSpec,
    PointCloud, RngSeed,
};

use crate::config::RunConfig;
use crate::data::{random_batch, random_vector, synthetic_cloud};
use crate::error::CliResult;

pub const VERIFY_LENGTHS: [usize; 5] = [1, 2, 17, 64, 256];

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    /// Negates the fastmult output before comparison. Exists to prove the harness can fail.
    pub inject_fault: bool,
    pub lengths: Vec<usize>,
    /// Random instances per length.
    pub instances: usize,
}

impl VerifyOptions {
    pub fn standard() -> Self {
        Self { inject_fault: false, lengths: VERIFY_LENGTHS.to_vec(), instances: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    /// Largest observed error, in the check's own measure.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

struct Check {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    worst: f64,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, cases: 0, worst: 0.0 }
    }

    fn record(&mut self, err: f64) {
        self.cases += 1;
        // NaN must fail, so it wins over any finite error.
        self.worst = if err.is_nan() || self.worst.is_nan() { f64::NAN } else { self.worst.max(err) };
    }

    fn finish(self) -> CheckResult {
        let worst = if self.worst.is_nan() { f64::INFINITY } else { self.worst };
        CheckResult { name: self.name, cases: self.cases, worst, tolerance: self.tolerance }
    }
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn rel_err_c(got: &[Complex64], want: &[Complex64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn rel_err_m(got: &Array2<f64>, want: &Array2<f64>) -> f64 {
    rel_err(&got.iter().copied().collect::<Vec<_>>(), &want.iter().copied().collect::<Vec<_>>())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(m: &Array2<f64>, u: &[f64]) -> Vec<f64> {
    m.dot(&ArrayView1::from(u)).to_vec()
}

/// One random problem: cloud, two input vectors and a sampled mask.
struct Instance {
    cloud: PointCloud,
    u: Vec<f64>,
    v: Vec<f64>,
    spec: MaskSpec,
}

fn instance(cfg: &RunConfig, len: usize, seed: RngSeed) -> CliResult<Instance> {
    Ok(Instance {
        cloud: synthetic_cloud(cfg.cloud, len, cfg.dim, seed.derive(1))?,
        u: random_vector(len, seed.derive(2)),
        v: random_vector(len, seed.derive(3)),
        spec: cauchy_mask_spec(cfg.dim, cfg.quadrature_size, cfg.lambda, seed.derive(4))?,
    })
}

/// Runs every check; callers decide what to do with failures.
pub fn run_verify(cfg: &RunConfig, opts: &VerifyOptions) -> CliResult<Vec<CheckResult>> {
    let eps = cfg.epsilon;
    let grid_tol = (10.0 * eps).max(1e-10);
    let acc = cfg.accuracy()?.forced();
    let gridded = Backend::Gridded(acc);

    let mut oracle = Check::new("fastmult vs dense oracle", 1e-10);
    let mut oracle_grid = Check::new("fastmult gridded vs dense oracle", grid_tol);
    let mut nufft = Check::new("nufft fast vs direct", grid_tol);
    let mut adjoint = Check::new("nufft adjointness", 1e-12);
    let mut linear = Check::new("fastmult linearity", 1e-12);
    let mut symmetric = Check::new("mask symmetry", 1e-10);
    let mut translate = Check::new("translation invariance", 1e-10);
    let mut permute = Check::new("permutation equivariance", 1e-12);
    let mut blend = Check::new("warmup blend endpoints", 1e-12);
    let mut attn = Check::new("masked attention vs dense reference", 1e-10);
    let mut attn_grid = Check::new("masked attention gridded vs dense", grid_tol);
    let mut neutral = Check::new("neutral mask reduces to performer", 1e-12);

    let phi = FeatureMap::relu();
    let neutral_spec = string_mask_spec(Array2::zeros((1, cfg.dim)).view())?;

    for &len in &opts.lengths {
        for k in 0..opts.instances {
            let seed = RngSeed(cfg.seeds[k % cfg.seeds.len()]).derive(((len as u64) << 16) + k as u64);
            let inst = instance(cfg, len, seed)?;
            let (cloud, u, v, spec) = (&inst.cloud, &inst.u, &inst.v, &inst.spec);
            let mask = dense_quadrature_mask(cloud, spec)?;
            let want = matvec(&mask, u);

            let mut got = fastmult(cloud, u, spec, Backend::Direct)?;
            if opts.inject_fault {
                got.iter_mut().for_each(|x| *x = -*x);
            }
            oracle.record(rel_err(&got, &want));
            oracle_grid.record(rel_err(&fastmult(cloud, u, spec, gridded)?, &want));

            let freqs = spec.quad.freqs();
            let fwd = nudft_forward_direct(cloud, u, freqs)?;
            nufft.record(rel_err_c(&nudft_forward_fast(cloud, u, freqs, &acc)?, &fwd));
            let b: Vec<Complex64> = {
                let mut rng = seed.derive(5).rng();
                (0..freqs.nrows()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
            };
            let adj = nudft_adjoint_direct(cloud, &b, freqs)?;
            nufft.record(rel_err_c(&nudft_adjoint_fast(cloud, &b, freqs, &acc)?, &adj));
            let lhs: Complex64 = fwd.iter().zip(&b).map(|(f, c)| f * c.conj()).sum();
            let rhs: Complex64 = u.iter().zip(&adj).map(|(x, a)| *x * a.conj()).sum();
            let scale = fwd.iter().map(|f| f.norm()).sum::<f64>() * b.iter().map(|c| c.norm()).sum::<f64>();
            adjoint.record((lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE));

            let (alpha, beta) = (0.7, -1.3);
            let combo: Vec<f64> = u.iter().zip(v).map(|(a, b)| alpha * a + beta * b).collect();
            let fv = fastmult(cloud, v, spec, Backend::Direct)?;
            let fu = fastmult(cloud, u, spec, Backend::Direct)?;
            let lin_want: Vec<f64> = fu.iter().zip(&fv).map(|(a, b)| alpha * a + beta * b).collect();
            linear.record(rel_err(&fastmult(cloud, &combo, spec, Backend::Direct)?, &lin_want));

            let (uv, vu) = (dot(u, &fv), dot(v, &fu));
            let bound = (dot(u, u) * dot(&fv, &fv)).sqrt().max(f64::MIN_POSITIVE);
            symmetric.record((uv - vu).abs() / bound);

            let shift: Vec<f64> = (0..cfg.dim).map(|a| 3.7 - 1.9 * a as f64).collect();
            translate.record(rel_err(&fastmult(&cloud.translated(&shift)?, u, spec, Backend::Direct)?, &fu));

            let perm: Vec<usize> = (0..len).rev().collect();
            let pu: Vec<f64> = perm.iter().map(|&i| u[i]).collect();
            let moved = fastmult(&cloud.permuted(&perm), &pu, spec, Backend::Direct)?;
            let expect: Vec<f64> = perm.iter().map(|&i| fu[i]).collect();
            permute.record(rel_err(&moved, &expect));

            let zero = blended_fastmult(cloud, u, spec, BlendSchedule::new(0.0)?, Backend::Direct)?;
            let total: f64 = u.iter().sum();
            blend.record(rel_err(&zero, &vec![total; len]));
            let one = blended_fastmult(cloud, u, spec, BlendSchedule::new(1.0)?, Backend::Direct)?;
            blend.record(rel_err(&one, &fu));

            let batch = random_batch(len, 4, 3, seed.derive(6))?;
            let reference = dense_masked_attention(&batch, mask.view(), AttentionKernel::LowRank(&phi))?;
            let direct = masked_lowrank_attention(&batch, &phi, cloud, spec, MaskBackend::FastMultDirect, false)?;
            attn.record(rel_err_m(&direct.embeddings, &reference.embeddings));
            let grid = masked_lowrank_attention(&batch, &phi, cloud, spec, MaskBackend::FastMultGridded(acc), false)?;
            attn_grid.record(rel_err_m(&grid.embeddings, &reference.embeddings));
            let perf = performer_attention(&batch, &phi)?;
            let reduced = masked_lowrank_attention(&batch, &phi, cloud, &neutral_spec, MaskBackend::FastMultDirect, false)?;
            neutral.record(rel_err_m(&reduced.embeddings, &perf.embeddings));
        }
    }

    let mut out: Vec<CheckResult> = [
        oracle, oracle_grid, nufft, adjoint, linear, symmetric, translate, permute, blend, attn, attn_grid, neutral,
    ]
    .into_iter()
    .map(Check::finish)
    .collect();
    out.extend(run_rope_checks(cfg, 20)?);
    Ok(out)
}

/// RoPE and STRING exactness on `instances` random problems each.
pub fn run_rope_checks(cfg: &RunConfig, instances: usize) -> CliResult<Vec<CheckResult>> {
    let mut rope = Check::new("rope exactness", 1e-12);
    let mut string = Check::new("string exactness", 1e-12);
    for k in 0..instances {
        let seed = RngSeed(cfg.seeds[k % cfg.seeds.len()]).derive(0x5eed + k as u64);
        let mut rng = seed.rng();
        let len = rng.random_range(1..=128);
        let theta = rng.random_range(0.05..3.0);
        let coords = Array2::from_shape_simple_fn((len, 1), || rng.random_range(-50.0..50.0));
        let cloud = PointCloud::new(coords)?;
        let u = random_vector(len, seed.derive(1));
        let z = cloud.coords().column(0);
        let cos_mask = Array2::from_shape_fn((len, len), |(i, j)| (theta * (z[i] - z[j])).cos());
        let got = fastmult(&cloud, &u, &rope_mask_spec(theta)?, Backend::Direct)?;
        rope.record(rel_err(&got, &matvec(&cos_mask, &u)));

        let (m, dim) = (rng.random_range(1..=16), cfg.dim);
        let omegas = Array2::from_shape_simple_fn((m, dim), || rng.random_range(-4.0..4.0));
        let pts = synthetic_cloud(cfg.cloud, len.min(64), dim, seed.derive(2))?;
        let mask = dense_quadrature_mask(&pts, &string_mask_spec(omegas.view())?)?;
        let n = pts.len();
        let want = Array2::from_shape_fn((n, n), |(i, j)| {
            let d = &pts.point(i) - &pts.point(j);
            omegas.axis_iter(Axis(0)).map(|w| w.dot(&d).cos()).sum::<f64>() / m as f64
        });
        string.record(rel_err_m(&mask, &want));
    }
    Ok(vec![rope.finish(), string.finish()])
}

/// Fixed-width pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let mut s = format!("{:<40} {:>6} {:>12} {:>12}  result\n", "check", "cases", "worst", "tolerance");
    for r in results {
        s += &format!(
            "{:<40} {:>6} {:>12.3e} {:>12.3e}  {}\n",
            r.name,
            r.cases,
            r.worst,
            r.tolerance,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    s
}
