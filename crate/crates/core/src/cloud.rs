//! Token positions and the whitespace point-cloud text format.

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// `L` token positions in `R^d`, `d` in `{1, 2, 3}`, stored one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Array2<f64>,
}

impl PointCloud {
    pub const MAX_DIM: usize = 3;

    pub fn new(coords: Array2<f64>) -> Result<Self> {
        let (len, dim) = coords.dim();
        if len == 0 {
            return Err(Error::InvalidParameter("point cloud must hold at least one point".into()));
        }
        if !(1..=Self::MAX_DIM).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "point dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(Self { coords })
    }

    /// Builds a cloud from row slices; all rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        let coords = Array2::from_shape_vec((rows.len(), dim), data)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &Array2<f64> {
        &self.coords
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.coords.row(i)
    }

    pub fn into_coords(self) -> Array2<f64> {
        self.coords
    }

    /// Rigidly shifts every point by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "shift has {} components, cloud has dimension {}",
                shift.len(),
                self.dim()
            )));
        }
        let mut coords = self.coords.clone();
        for mut row in coords.rows_mut() {
            for (c, t) in row.iter_mut().zip(shift) {
                *c += t;
            }
        }
        Self::new(coords)
    }

    /// Reorders points so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { coords: self.coords.select(Axis(0), perm) }
    }
}

/// Centres each axis at zero and applies a single scale so that the variance over all
/// `L * d` centred entries is one. A single scale keeps Euclidean distances isotropic.
pub fn normalize_coords(cloud: &PointCloud) -> Result<PointCloud> {
    let mut coords = cloud.coords.clone();
    let len = coords.nrows() as f64;
    for mut col in coords.columns_mut() {
        let mean = col.sum() / len;
        col.mapv_inplace(|v| v - mean);
    }
    let var = coords.iter().map(|v| v * v).sum::<f64>() / coords.len() as f64;
    if !(var > 0.0) || cloud.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let scale = var.sqrt().recip();
    coords.mapv_inplace(|v| v * scale);
    PointCloud::new(coords)
}

/// Parses the whitespace text format: one point per line, `d` inferred from the first
/// data line, blank lines and lines starting with `#` skipped.
pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let mut dim = None;
    let mut data = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let start = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("not a number: {tok:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: line_no, msg: format!("non-finite value {tok:?}") });
            }
            data.push(v);
        }
        let width = data.len() - start;
        match dim {
            None => {
                if !(1..=PointCloud::MAX_DIM).contains(&width) {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected 1 to 3 columns, found {width}"),
                    });
                }
                dim = Some(width);
            }
            Some(d) if d != width => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("ragged row: expected {d} columns, found {width}"),
                });
            }
            Some(_) => {}
        }
    }
    let Some(dim) = dim else {
        return Err(Error::Parse { line: 0, msg: "no points in input".into() });
    };
    let coords = Array2::from_shape_vec((data.len() / dim, dim), data)
        .expect("row widths checked above");
    PointCloud::new(coords)
}
