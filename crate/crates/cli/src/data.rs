use std::path::Path;

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use relflex_core::{normalize_coords, parse_point_cloud, AttentionBatch, PointCloud, RngSeed};

use crate::config::{CloudChoice, RunConfig};
use crate::error::{CliError, CliResult};

/// Reads a whitespace point file; `normalize` centres and rescales it.
pub fn load_point_cloud(path: &Path, normalize: bool) -> CliResult<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cloud = parse_point_cloud(&text)?;
    Ok(if normalize { normalize_coords(&cloud)? } else { cloud })
}

pub fn synthetic_cloud(kind: CloudChoice, len: usize, dim: usize, seed: RngSeed) -> CliResult<PointCloud> {
    let mut rng = seed.rng();
    let coords = match kind {
        CloudChoice::Uniform => Array2::from_shape_simple_fn((len, dim), || rng.random::<f64>()),
        CloudChoice::Gaussian => Array2::from_shape_simple_fn((len, dim), || rng.sample(StandardNormal)),
    };
    Ok(PointCloud::new(coords)?)
}

/// The cloud a study runs on at length `len`: the first `len` rows of the configured
/// point file, or a synthetic cloud.
pub fn study_cloud(cfg: &RunConfig, len: usize, seed: RngSeed) -> CliResult<PointCloud> {
    let Some(path) = &cfg.points else {
        let cloud = synthetic_cloud(cfg.cloud, len, cfg.dim, seed)?;
        return Ok(if cfg.normalize && len > 1 { normalize_coords(&cloud)? } else { cloud });
    };
    let cloud = load_point_cloud(path, false)?;
    if cloud.dim() != cfg.dim {
        return Err(CliError::Config(format!("{} has dimension {}, config says {}", path.display(), cloud.dim(), cfg.dim)));
    }
    if cloud.len() < len {
        return Err(CliError::Config(format!("{} has {} points, need {len}", path.display(), cloud.len())));
    }
    let cloud = PointCloud::new(cloud.coords().slice(s![..len, ..]).to_owned())?;
    Ok(if cfg.normalize { normalize_coords(&cloud)? } else { cloud })
}

pub fn random_vector(len: usize, seed: RngSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Entries uniform in `[-1, 1)`.
pub fn random_batch(len: usize, qk_dim: usize, value_dim: usize, seed: RngSeed) -> CliResult<AttentionBatch> {
    let mut rng = seed.rng();
    let mut draw = |cols| Array2::from_shape_simple_fn((len, cols), || rng.random_range(-1.0..1.0));
    let (q, k, v) = (draw(qk_dim), draw(qk_dim), draw(value_dim));
    Ok(AttentionBatch::new(q, k, v)?)
}
