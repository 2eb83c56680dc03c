//! Tangent-space coordinates at a base shape and the two-sample Hotelling
//! T² test on them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::geometry::{align, sphere_log};
use crate::linalg::sorted_symmetric_eigen;
use crate::means::{schoenberg_embed, Sample};
use crate::preshape::{PreShape, ShapeSpace};
use crate::stats::f_survival;

const PCA_RELATIVE_CUTOFF: f64 = 1e-10;
const ORTHOGONALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordKind {
    /// `exp_p^{-1}(x)`, norm equal to the geodesic distance.
    IntrinsicCoords,
    /// `x - <x, p> p`, the orthogonal projection onto the tangent space.
    ResidualCoords,
    /// Upper triangle of `x^T x - p^T p`, off-diagonals scaled by `sqrt 2` so
    /// that Euclidean and Frobenius norms agree.
    SchoenbergCoords,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentSample {
    pub coordinates: Vec<Vec<f64>>,
    pub base: PreShape,
    pub kind: CoordKind,
    /// Dimension of the shape space at a regular point,
    /// `m(k-1) - 1 - m(m-1)/2`.
    pub reduced_dimension: usize,
}

impl TangentSample {
    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    /// Length of each coordinate vector.
    pub fn raw_dimension(&self) -> usize {
        self.coordinates.first().map_or(0, Vec::len)
    }
}

fn shape_dimension(space: &ShapeSpace) -> usize {
    let (m, k) = (space.m, space.k);
    (m * (k - 1)).saturating_sub(1 + m * (m - 1) / 2)
}

/// Positions every observation optimally to `base` and maps it to the tangent
/// space there. Coordinates are flattened row-major.
pub fn tangent_coordinates(
    sample: &Sample,
    base: &PreShape,
    kind: CoordKind,
    space: &ShapeSpace,
) -> Result<TangentSample> {
    if base.m() != space.m || base.k() != space.k {
        return Err(ShapeError::InvalidDimension(format!(
            "base is {}x{} but the space has m = {}, k = {}",
            base.m(),
            base.k(),
            space.m,
            space.k
        )));
    }
    if kind == CoordKind::SchoenbergCoords {
        return schoenberg_coordinates(sample, base, space);
    }
    let mut coordinates = Vec::with_capacity(sample.len());
    for x in sample.points() {
        if !x.same_dims(base) {
            return Err(ShapeError::InvalidDimension(format!(
                "observation is {}x{} but base is {}x{}",
                x.m(),
                x.k(),
                base.m(),
                base.k()
            )));
        }
        let aligned = align(x, base, space.group);
        let coord = match kind {
            CoordKind::IntrinsicCoords => sphere_log(base, &aligned)?.entries,
            CoordKind::ResidualCoords => {
                let c = aligned.dot(base);
                aligned.entries() - base.entries() * c
            }
            CoordKind::SchoenbergCoords => unreachable!(),
        };
        debug_assert!(coord.dot(base.entries()).abs() < ORTHOGONALITY_TOL);
        coordinates.push(row_major(&coord));
    }
    Ok(TangentSample {
        coordinates,
        base: base.clone(),
        kind,
        reduced_dimension: shape_dimension(space),
    })
}

fn schoenberg_coordinates(
    sample: &Sample,
    base: &PreShape,
    space: &ShapeSpace,
) -> Result<TangentSample> {
    let base_gram = schoenberg_embed(base);
    let coordinates = sample
        .points()
        .iter()
        .map(|x| {
            let diff = schoenberg_embed(x).gram() - base_gram.gram();
            upper_triangle(&diff)
        })
        .collect();
    Ok(TangentSample {
        coordinates,
        base: base.clone(),
        kind: CoordKind::SchoenbergCoords,
        reduced_dimension: shape_dimension(space),
    })
}

fn row_major(a: &DMatrix<f64>) -> Vec<f64> {
    a.transpose().as_slice().to_vec()
}

fn upper_triangle(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.push(a[(i, i)]);
        for j in i + 1..n {
            out.push(std::f64::consts::SQRT_2 * a[(i, j)]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// Hotelling's T².
    pub statistic: f64,
    pub f_statistic: f64,
    pub dof: (usize, usize),
    pub p_value: f64,
    pub reject: bool,
    pub level: f64,
    /// Requested cap on principal components.
    pub max_components: usize,
    /// Components actually retained.
    pub retained_components: usize,
}

/// Default principal-component cap for samples of sizes `n1` and `n2`.
pub fn default_max_components(n1: usize, n2: usize) -> usize {
    (n1 + n2).saturating_sub(3).max(1)
}

/// Two-sample Hotelling T² test after reduction to the leading principal
/// components of the pooled within-sample covariance.
pub fn hotelling_two_sample(
    a: &TangentSample,
    b: &TangentSample,
    level: f64,
    max_components: usize,
) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(ShapeError::EmptySample);
    }
    if a.kind != b.kind {
        return Err(ShapeError::InvalidArgument(
            "samples use different coordinate kinds".into(),
        ));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(ShapeError::InvalidArgument(format!(
            "level {level} outside [0, 1]"
        )));
    }
    let dim = a.raw_dimension();
    if a.coordinates
        .iter()
        .chain(&b.coordinates)
        .any(|v| v.len() != dim)
    {
        return Err(ShapeError::InvalidDimension(
            "coordinate vectors differ in length".into(),
        ));
    }
    hotelling_on_vectors(&a.coordinates, &b.coordinates, level, max_components)
}

/// The test on raw coordinate vectors.
pub fn hotelling_on_vectors(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    level: f64,
    max_components: usize,
) -> Result<TestReport> {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return Err(ShapeError::EmptySample);
    }
    let dim = a[0].len();
    let mean_a = column_mean(a, dim);
    let mean_b = column_mean(b, dim);
    let delta = &mean_a - &mean_b;

    let mut scatter = DMatrix::zeros(dim, dim);
    for (rows, mean) in [(a, &mean_a), (b, &mean_b)] {
        for row in rows {
            let c = DVector::from_column_slice(row) - mean;
            scatter.ger(1.0, &c, &c, 1.0);
        }
    }
    let pooled_dof = (n1 + n2).saturating_sub(2);
    if pooled_dof == 0 {
        return Err(ShapeError::DegenerateCovariance);
    }
    let cov = scatter / pooled_dof as f64;
    // Principal axes of the stacked sample centred at the grand mean.
    let grand = (&mean_a * n1 as f64 + &mean_b * n2 as f64) / (n1 + n2) as f64;
    let mut total = DMatrix::zeros(dim, dim);
    for row in a.iter().chain(b) {
        let c = DVector::from_column_slice(row) - &grand;
        total.ger(1.0, &c, &c, 1.0);
    }
    let (values, vectors) = sorted_symmetric_eigen(&(total / (n1 + n2 - 1) as f64));
    let top = values.first().copied().unwrap_or(0.0);
    let supported = if top > 0.0 {
        values
            .iter()
            .take_while(|&&v| v > PCA_RELATIVE_CUTOFF * top)
            .count()
    } else {
        0
    };
    let d = max_components.min(pooled_dof).min(supported);
    if d == 0 {
        return Err(ShapeError::DegenerateCovariance);
    }

    let scale = (n1 * n2) as f64 / (n1 + n2) as f64;
    let basis = vectors.columns(0, d);
    let reduced_cov = basis.transpose() * &cov * basis;
    let reduced_delta = basis.transpose() * &delta;
    let quad = match reduced_cov.cholesky() {
        Some(ch) => reduced_delta.dot(&ch.solve(&reduced_delta)),
        None => return Err(ShapeError::DegenerateCovariance),
    };
    let t2 = scale * quad;
    let dof2 = n1 + n2 - d - 1;
    let f = t2 * dof2 as f64 / (d as f64 * pooled_dof as f64);
    let p = f_survival(f, d as f64, dof2 as f64);
    Ok(TestReport {
        statistic: t2,
        f_statistic: f,
        dof: (d, dof2),
        p_value: p,
        reject: p < level,
        level,
        max_components,
        retained_components: d,
    })
}

fn column_mean(rows: &[Vec<f64>], dim: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(dim);
    for row in rows {
        acc += DVector::from_column_slice(row);
    }
    acc / rows.len() as f64
}
