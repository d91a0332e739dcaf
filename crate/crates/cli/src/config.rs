//! Run configuration: a JSON file, then command-line flags on top.

use std::path::PathBuf;

use relflex_core::{Backend, FeatureMap, MaskBackend, NufftAccuracy, RngSeed};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMapChoice {
    Relu,
    PositiveRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    Direct,
    Gridded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CloudChoice {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lengths: Vec<usize>,
    pub dim: usize,
    pub lambda: f64,
    pub quadrature_size: usize,
    /// Sizes swept by `error-vs-s`.
    pub quadrature_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub feature_map: FeatureMapChoice,
    /// Random features for `positive-random`; ReLU keeps the query/key width.
    pub features: usize,
    pub qk_dim: usize,
    pub value_dim: usize,
    pub backend: BackendChoice,
    pub epsilon: f64,
    pub repeats: usize,
    pub threads: usize,
    pub normalize: bool,
    /// Largest dense `L x L` matrix (bytes) the benchmarks will build.
    pub memory_cap_bytes: u64,
    pub cloud: CloudChoice,
    /// Optional point file replacing the synthetic cloud.
    pub points: Option<PathBuf>,
    /// Distance grid for `kernel-shape`: `distances` values evenly spaced on
    /// `[0, max_distance]`. Values are averaged over pair orientation, exactly in 1D and
    /// 3D and over `pairs` random directions in 2D.
    pub distances: usize,
    pub max_distance: f64,
    pub pairs: usize,
    /// Width of the RBF and Laplace reference kernels.
    pub sigma: f64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1024, 2048, 4096],
            dim: 3,
            lambda: 1.0,
            quadrature_size: 64,
            quadrature_sizes: vec![8, 16, 32, 64, 128, 256, 512, 1024],
            seeds: (0..20).collect(),
            feature_map: FeatureMapChoice::Relu,
            features: 16,
            qk_dim: 16,
            value_dim: 16,
            backend: BackendChoice::Direct,
            epsilon: 1e-6,
            repeats: 5,
            threads: 1,
            normalize: false,
            memory_cap_bytes: 2 << 30,
            cloud: CloudChoice::Uniform,
            points: None,
            distances: 31,
            max_distance: 3.0,
            pairs: 64,
            sigma: 1.0,
            output: None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(invalid("lengths must be a nonempty list of positive values"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds must be nonempty"));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(invalid(format!("dim must be 1, 2 or 3, got {}", self.dim)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        for &s in std::iter::once(&self.quadrature_size).chain(&self.quadrature_sizes) {
            if s == 0 || s % 2 != 0 {
                return Err(invalid(format!("quadrature sizes must be even and positive, got {s}")));
            }
        }
        if self.quadrature_sizes.is_empty() {
            return Err(invalid("quadrature_sizes must be nonempty"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.1) {
            return Err(invalid(format!("epsilon must be in (0, 0.1], got {}", self.epsilon)));
        }
        if self.features == 0 || self.qk_dim == 0 || self.value_dim == 0 {
            return Err(invalid("feature, query/key and value widths must be positive"));
        }
        if self.repeats == 0 || self.threads == 0 {
            return Err(invalid("repeats and threads must be positive"));
        }
        if self.distances < 2 || self.pairs == 0 {
            return Err(invalid("kernel-shape needs at least two distances and one pair"));
        }
        if !(self.max_distance > 0.0 && self.max_distance.is_finite()) {
            return Err(invalid("max_distance must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be positive"));
        }
        Ok(())
    }

    /// Timing studies need enough repeats for the quantiles to mean something.
    pub fn validate_timing(&self) -> CliResult<()> {
        if self.repeats < 3 {
            return Err(invalid(format!("timing studies need repeats >= 3, got {}", self.repeats)));
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("lengths must be strictly ascending"));
        }
        Ok(())
    }

    pub fn accuracy(&self) -> CliResult<NufftAccuracy> {
        Ok(NufftAccuracy::new(self.epsilon)?)
    }

    pub fn fastmult_backend(&self) -> CliResult<Backend> {
        Ok(match self.backend {
            BackendChoice::Direct => Backend::Direct,
            BackendChoice::Gridded => Backend::Gridded(self.accuracy()?),
        })
    }

    pub fn mask_backend(&self) -> CliResult<MaskBackend> {
        Ok(match self.backend {
            BackendChoice::Direct => MaskBackend::FastMultDirect,
            BackendChoice::Gridded => MaskBackend::FastMultGridded(self.accuracy()?),
        })
    }

    pub fn feature_map(&self, seed: RngSeed) -> CliResult<FeatureMap> {
        Ok(match self.feature_map {
            FeatureMapChoice::Relu => FeatureMap::relu(),
            FeatureMapChoice::PositiveRandom => FeatureMap::positive_random(self.features, self.qk_dim, seed)?,
        })
    }

    /// Single-line JSON, used for the `#` metadata line of every CSV.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Parses and validates a JSON config. Missing fields take their defaults.
/// Parses and validates a complete config.
pub fn parse_run_config(text: &str) -> CliResult<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file without validating it, so command-line flags can still
/// repair a field before the merged result is checked.
pub fn load_run_config(path: &std::path::Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = parse_run_config(r#"{"dim": 1, "backend": "gridded", "seeds": [7]}"#).unwrap();
        assert_eq!(cfg.dim, 1);
        assert_eq!(cfg.backend, BackendChoice::Gridded);
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.lambda, 1.0);
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig { points: Some("a.txt".into()), ..Default::default() };
        assert_eq!(parse_run_config(&cfg.to_json_line()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            r#"{"lengths": []}"#,
            r#"{"seeds": []}"#,
            r#"{"dim": 4}"#,
            r#"{"quadrature_size": 7}"#,
            r#"{"epsilon": 0.5}"#,
            r#"{"unknown": 1}"#,
            r#"{"lambda": -1}"#,
            "[1, 2]",
        ] {
            assert!(parse_run_config(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn timing_needs_three_repeats() {
        let cfg = RunConfig { repeats: 2, ..Default::default() };
        assert!(cfg.validate_timing().is_err());
        let cfg = RunConfig { lengths: vec![4, 2], ..Default::default() };
        assert!(cfg.validate_timing().is_err());
    }
}
