//! Landmark configurations, the pre-shape sphere and the zero-padding
//! embedding between pre-shape spheres of different ambient dimension.
//!
//! Configurations are stored with one row per coordinate axis and one column
//! per landmark, so an `m`-dimensional object with `k` landmarks is an
//! `m x k` matrix. Centering multiplies from the right by the `k x (k-1)`
//! sub-Helmert matrix, giving an `m x (k-1)` matrix; scaling that to unit
//! Frobenius norm gives a point on the pre-shape sphere.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const DEGENERATE_NORM: f64 = 1e-12;

/// Group acting on pre-shapes from the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// `SO(m)`: Kendall's shape space.
    Rotations,
    /// `O(m)`: Kendall's reflection shape space.
    RotationsAndReflections,
}

/// Which quotient all operations act in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeSpace {
    pub m: usize,
    pub k: usize,
    pub group: Group,
}

impl ShapeSpace {
    pub fn new(m: usize, k: usize, group: Group) -> Result<Self> {
        if m == 0 || k <= m {
            return Err(ShapeError::InvalidDimension(format!(
                "shape space needs k > m >= 1, got m = {m}, k = {k}"
            )));
        }
        Ok(Self { m, k, group })
    }

    pub fn kendall(m: usize, k: usize) -> Result<Self> {
        Self::new(m, k, Group::Rotations)
    }

    pub fn reflection(m: usize, k: usize) -> Result<Self> {
        Self::new(m, k, Group::RotationsAndReflections)
    }

    /// The same `(m, k)` with a different acting group.
    pub fn with_group(self, group: Group) -> Self {
        Self { group, ..self }
    }
}

/// Raw `m x k` landmark matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    entries: DMatrix<f64>,
}

impl Configuration {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (m, k) = entries.shape();
        if m == 0 || k <= m {
            return Err(ShapeError::InvalidDimension(format!(
                "configuration needs k > m >= 1 landmarks, got {m} x {k}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(ShapeError::InvalidArgument(
                "configuration contains non-finite coordinates".into(),
            ));
        }
        Ok(Self { entries })
    }

    /// Builds a configuration from rows given as coordinate axes.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let m = rows.len();
        let k = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != k) {
            return Err(ShapeError::InvalidDimension(
                "ragged configuration rows".into(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(m, k, &flat))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn k(&self) -> usize {
        self.entries.ncols()
    }
}

/// A centered, unit-norm `m x (k-1)` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixRows", try_from = "MatrixRows")]
pub struct PreShape {
    entries: DMatrix<f64>,
}

/// Row-wise serialized form of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRows {
    pub rows: Vec<Vec<f64>>,
}

impl MatrixRows {
    pub fn from_matrix(a: &DMatrix<f64>) -> Self {
        Self {
            rows: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let m = self.rows.len();
        let cols = self.rows.first().map_or(0, Vec::len);
        if self.rows.iter().any(|r| r.len() != cols) {
            return Err(ShapeError::InvalidDimension("ragged matrix rows".into()));
        }
        let flat: Vec<f64> = self.rows.iter().flatten().copied().collect();
        Ok(DMatrix::from_row_slice(m, cols, &flat))
    }
}

impl From<PreShape> for MatrixRows {
    fn from(x: PreShape) -> Self {
        MatrixRows::from_matrix(&x.entries)
    }
}

impl TryFrom<MatrixRows> for PreShape {
    type Error = ShapeError;

    fn try_from(rows: MatrixRows) -> Result<Self> {
        let a = rows.to_matrix()?;
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(ShapeError::InvalidDimension("empty pre-shape".into()));
        }
        PreShape::normalized(a)
    }
}

impl PreShape {
    /// Scales a centered `m x (k-1)` matrix to unit norm.
    pub fn normalized(entries: DMatrix<f64>) -> Result<Self> {
        let norm = entries.norm();
        if !norm.is_finite() || norm < DEGENERATE_NORM {
            return Err(ShapeError::DegenerateConfiguration { norm });
        }
        Ok(Self {
            entries: entries / norm,
        })
    }

    /// Wraps a matrix that is already of unit norm. A final renormalisation
    /// absorbs round-off.
    pub(crate) fn from_unit(entries: DMatrix<f64>) -> Self {
        let norm = entries.norm();
        debug_assert!((norm - 1.0).abs() < 1e-6, "expected unit norm, got {norm}");
        Self {
            entries: entries / norm,
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let m = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        if m == 0 || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(ShapeError::InvalidDimension("ragged pre-shape rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::normalized(DMatrix::from_row_slice(m, cols, &flat))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of landmarks of the underlying configuration.
    pub fn k(&self) -> usize {
        self.entries.ncols() + 1
    }

    pub fn dot(&self, other: &PreShape) -> f64 {
        self.entries.dot(&other.entries)
    }

    /// Entries flattened row by row (axis-major).
    pub fn to_row_major(&self) -> Vec<f64> {
        self.entries.transpose().iter().copied().collect()
    }

    pub fn same_dims(&self, other: &PreShape) -> bool {
        self.entries.shape() == other.entries.shape()
    }
}

/// Regular (manifold part) or singular stratum membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularity {
    Regular,
    Singular,
}

/// The `k x (k-1)` sub-Helmert matrix. Column `j` (1-based) holds `j`
/// copies of `(j(j+1))^(-1/2)`, then `-j (j(j+1))^(-1/2)`, then zeros.
pub fn sub_helmert(k: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(k, k.saturating_sub(1));
    for j in 1..k {
        let a = 1.0 / ((j * (j + 1)) as f64).sqrt();
        for i in 0..j {
            h[(i, j - 1)] = a;
        }
        h[(j, j - 1)] = -(j as f64) * a;
    }
    h
}

/// Removes translation: `c * H` with the sub-Helmert matrix `H`.
pub fn helmertize(c: &Configuration) -> DMatrix<f64> {
    c.entries() * sub_helmert(c.k())
}

pub fn to_preshape(c: &Configuration) -> Result<PreShape> {
    PreShape::normalized(helmertize(c))
}

/// Appends `target_m - m` zero rows.
pub fn embed(x: &PreShape, target_m: usize) -> Result<PreShape> {
    let m = x.m();
    if target_m < m || target_m >= x.k() {
        return Err(ShapeError::InvalidDimension(format!(
            "cannot embed m = {m} into target m = {target_m} with k = {}",
            x.k()
        )));
    }
    let mut padded = DMatrix::zeros(target_m, x.entries().ncols());
    padded.rows_mut(0, m).copy_from(x.entries());
    Ok(PreShape { entries: padded })
}

/// Number of singular values above `tol * sigma_max`.
pub fn rank_of(x: &PreShape, tol: f64) -> usize {
    matrix_rank(x.entries(), tol)
}

pub(crate) fn matrix_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let sv = a.singular_values();
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

pub fn regularity(x: &PreShape, space: &ShapeSpace) -> Regularity {
    regularity_with_tol(x, space, DEFAULT_RANK_TOL)
}

pub fn regularity_with_tol(x: &PreShape, space: &ShapeSpace, tol: f64) -> Regularity {
    let rank = rank_of(x, tol);
    let regular = match space.group {
        Group::Rotations => rank + 1 >= space.m,
        Group::RotationsAndReflections => rank == space.m,
    };
    if regular {
        Regularity::Regular
    } else {
        Regularity::Singular
    }
}
