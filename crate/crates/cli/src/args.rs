//! Command-line surface. Every flag overrides the matching field of the JSON config.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_run_config, BackendChoice, CloudChoice, FeatureMapChoice, RunConfig};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "relflex", version, about = "Verification suites and benchmark studies for relflex masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Oracle-equivalence and invariant suite; exits 1 if any check fails.
    Verify {
        /// Negate the fastmult output inside the suite (harness self-test).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Dense softmax vs performer vs masked low-rank attention timings.
    BenchScaling,
    /// Dense mask construction plus matvec vs fastmult timings.
    BenchFastmult,
    /// Quadrature error against the closed-form mask as S grows.
    ErrorVsS,
    /// Sampled mask value against distance, with RBF and Laplace references.
    KernelShape,
    /// RoPE and STRING exactness checks.
    RopeCheck,
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, conflicts_with = "lengths")]
    pub length: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub quadrature_size: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub quadrature_sizes: Option<Vec<usize>>,
    #[arg(long, global = true, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Comma-separated seeds; `a..b` expands to the half-open range.
    #[arg(long, global = true, value_parser = parse_seed_list)]
    pub seeds: Option<SeedList>,
    #[arg(long, global = true, value_enum)]
    pub feature_map: Option<FeatureMapChoice>,
    #[arg(long, global = true)]
    pub features: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendChoice>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub repeats: Option<usize>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub normalize: bool,
    #[arg(long, global = true, value_enum)]
    pub cloud: Option<CloudChoice>,
    /// Point file (one point per line) used instead of a synthetic cloud.
    #[arg(long, global = true)]
    pub points: Option<PathBuf>,
    /// Dense-matrix memory cap for the benchmarks, in MiB.
    #[arg(long, global = true)]
    pub memory_cap_mib: Option<u64>,
    #[arg(long, global = true)]
    pub distances: Option<usize>,
    #[arg(long, global = true)]
    pub pairs: Option<usize>,
    #[arg(long, global = true)]
    pub max_distance: Option<f64>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedList(pub Vec<u64>);

fn parse_seed_list(text: &str) -> Result<SeedList, String> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        match item.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.parse().map_err(|e| format!("{item}: {e}"))?;
                let b: u64 = b.parse().map_err(|e| format!("{item}: {e}"))?;
                if a >= b {
                    return Err(format!("empty seed range {item}"));
                }
                out.extend(a..b);
            }
            None => out.push(item.parse().map_err(|e| format!("{item}: {e}"))?),
        }
    }
    Ok(SeedList(out))
}

impl CommonArgs {
    /// Config file (or defaults) with flags applied on top, validated.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_run_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(l) = self.length {
            cfg.lengths = vec![l];
        }
        if let Some(l) = &self.lengths {
            cfg.lengths = l.clone();
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.0.clone();
        }
        if let Some(s) = &self.quadrature_sizes {
            cfg.quadrature_sizes = s.clone();
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v.into();
                }
            )*};
        }
        set!(dim, lambda, quadrature_size, feature_map, features, backend, epsilon, repeats, threads, cloud);
        set!(distances, pairs, max_distance, sigma);
        if self.points.is_some() {
            cfg.points = self.points.clone();
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if let Some(mib) = self.memory_cap_mib {
            cfg.memory_cap_bytes = mib << 20;
        }
        cfg.normalize |= self.normalize;
        cfg.validate()?;
        Ok(cfg)
    }
}
