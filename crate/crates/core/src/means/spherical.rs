//! Intrinsic, extrinsic and residual means on the unit sphere of
//! `M(m, k-1)`, with pre-shapes viewed as plain unit vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{MeanEstimate, MeanOptions, MeanType, Sample};
use crate::error::{Result, ShapeError};
use crate::geometry::{sphere_exp_raw, sphere_log};
use crate::linalg::sorted_symmetric_eigen;
use crate::preshape::{Group, PreShape, ShapeSpace};

const UNDEFINED_NORM: f64 = 1e-12;
const EIGEN_TIE: f64 = 1e-10;

/// Shape-space descriptor used only to classify the rank of spherical means.
fn ambient_space(x: &PreShape) -> ShapeSpace {
    ShapeSpace {
        m: x.m(),
        k: x.k(),
        group: Group::Rotations,
    }
}

/// Weighted Euclidean average, normalised to the sphere.
pub fn spherical_extrinsic_mean(sample: &Sample) -> Result<PreShape> {
    let avg = weighted_average(sample);
    let norm = avg.norm();
    if norm < UNDEFINED_NORM {
        return Err(ShapeError::UndefinedMean { norm });
    }
    Ok(PreShape::from_unit(avg / norm))
}

pub(crate) fn weighted_average(sample: &Sample) -> DMatrix<f64> {
    let first = &sample.points()[0];
    let mut acc = DMatrix::zeros(first.m(), first.k() - 1);
    for (x, w) in sample.iter() {
        acc += x.entries() * w;
    }
    acc
}

/// The antipodal pair of top eigenvectors of `sum_i w_i vec(x_i) vec(x_i)^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMean {
    pub pair: [PreShape; 2],
    /// Largest eigenvalue of the second-moment matrix.
    pub eigenvalue: f64,
    /// Gap to the second eigenvalue.
    pub gap: f64,
    /// Set when the gap is below `1e-10`; the mean is then not unique.
    pub non_unique: bool,
}

impl ResidualMean {
    /// The member of the pair closer to `reference`.
    pub fn closer_to(&self, reference: &PreShape) -> &PreShape {
        if self.pair[0].dot(reference) >= self.pair[1].dot(reference) {
            &self.pair[0]
        } else {
            &self.pair[1]
        }
    }
}

pub fn spherical_residual_mean(sample: &Sample) -> Result<ResidualMean> {
    let first = &sample.points()[0];
    let (m, cols) = (first.m(), first.k() - 1);
    let (values, vectors) = top_eigen(sample.iter().map(|(x, w)| (x.entries(), w)), m * cols);
    let top = DMatrix::from_column_slice(m, cols, vectors.column(0).as_slice());
    let plus = PreShape::normalized(top)?;
    let minus = PreShape::from_unit(-plus.entries());
    let gap = if values.len() > 1 {
        values[0] - values[1]
    } else {
        f64::INFINITY
    };
    Ok(ResidualMean {
        pair: [plus, minus],
        eigenvalue: values[0],
        gap,
        non_unique: gap < EIGEN_TIE,
    })
}

/// Eigen-decomposition of the weighted second-moment matrix of flattened
/// (column-major) matrices.
pub(crate) fn top_eigen<'a>(
    points: impl Iterator<Item = (&'a DMatrix<f64>, f64)>,
    dim: usize,
) -> (Vec<f64>, DMatrix<f64>) {
    let mut moment = DMatrix::zeros(dim, dim);
    for (x, w) in points {
        let v = DVector::from_column_slice(x.as_slice());
        moment.ger(w, &v, &v, 1.0);
    }
    sorted_symmetric_eigen(&moment)
}

/// Karcher iteration `p <- exp_p(sum_i w_i log_p(x_i))`.
///
/// Stops once the update norm `||sum_i w_i log_p(x_i)||` drops below `tol`.
pub fn spherical_intrinsic_mean(
    sample: &Sample,
    opts: &MeanOptions,
    init: Option<&PreShape>,
) -> Result<MeanEstimate> {
    let mut p = init.unwrap_or(&sample.points()[0]).clone();
    let mut update = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let step = weighted_log_sum(&p, sample)?;
        update = step.norm();
        p = sphere_exp_raw(&p, &step);
        if update < opts.tol {
            let objective = sample
                .iter()
                .map(|(x, w)| {
                    let a = sphere_log(&p, x)
                        .map(|v| v.norm())
                        .unwrap_or(std::f64::consts::PI);
                    w * a * a
                })
                .sum();
            let space = ambient_space(&p);
            let mut est = MeanEstimate::new(p, MeanType::Intrinsic, &space, opts.rank_tol);
            est.iterations = iter;
            est.final_update_norm = update;
            est.objective = objective;
            return Ok(est);
        }
    }
    Err(ShapeError::NoConvergence {
        iterations: opts.max_iter,
        last_update: update,
    })
}

pub(crate) fn weighted_log_sum(p: &PreShape, sample: &Sample) -> Result<DMatrix<f64>> {
    let mut acc = DMatrix::zeros(p.m(), p.k() - 1);
    for (x, w) in sample.iter() {
        acc += sphere_log(p, x)?.entries * w;
    }
    Ok(acc)
}
