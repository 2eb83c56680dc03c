//! Schoenberg embedding `[x] -> x^T x` of reflection shape space into the
//! convex set of trace-one positive semidefinite matrices, its projections
//! back onto fixed-rank strata, and the resulting extrinsic means.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{MeanEstimate, MeanType, MeanWarning, Sample};
use crate::error::{Result, ShapeError};
use crate::linalg::sorted_symmetric_eigen;
use crate::preshape::{matrix_rank, Group, PreShape, ShapeSpace, DEFAULT_RANK_TOL};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const EIGEN_TIE: f64 = 1e-10;

/// A symmetric, positive semidefinite `(k-1) x (k-1)` matrix of unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SchoenbergPoint {
    gram: DMatrix<f64>,
}

impl SchoenbergPoint {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        if !gram.is_square() {
            return Err(ShapeError::InvalidDimension(
                "gram matrix must be square".into(),
            ));
        }
        let asym = (&gram - gram.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(ShapeError::InvalidArgument(format!(
                "gram matrix not symmetric (max deviation {asym:e})"
            )));
        }
        let trace = gram.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(ShapeError::InvalidArgument(format!(
                "gram trace {trace} is not 1"
            )));
        }
        let (values, _) = sorted_symmetric_eigen(&gram);
        if let Some(&min) = values.last() {
            if min < -PSD_TOL {
                return Err(ShapeError::InvalidArgument(format!(
                    "gram matrix not positive semidefinite (eigenvalue {min:e})"
                )));
            }
        }
        Ok(Self { gram })
    }

    /// Builds the point with eigenvectors `u` (columns) and eigenvalues
    /// `values`.
    pub fn from_eigen(u: &DMatrix<f64>, values: &[f64]) -> Result<Self> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(values));
        let gram = u * d * u.transpose();
        Self::new((&gram + gram.transpose()) * 0.5)
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_symmetric_eigen(&self.gram).0
    }

    pub fn rank(&self, tol: f64) -> usize {
        matrix_rank(&self.gram, tol)
    }
}

/// Orthogonal (closest point) or central (rescaling) projection onto a
/// fixed-rank stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Orthogonal,
    Central,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub point: SchoenbergPoint,
    /// Eigenvalues of the input, descending.
    pub input_eigenvalues: Vec<f64>,
    /// Eigenvalues of the projection in the same eigenbasis.
    pub eigenvalues: Vec<f64>,
    /// `lambda_r == lambda_{r+1}` within `1e-10`: the projection depends on
    /// the choice of eigenbasis.
    pub non_unique: bool,
}

pub fn schoenberg_embed(x: &PreShape) -> SchoenbergPoint {
    let g = x.entries().transpose() * x.entries();
    SchoenbergPoint {
        gram: (&g + g.transpose()) * 0.5,
    }
}

/// Derivative `x^T w + w^T x` of the embedding along a horizontal `w`.
pub fn schoenberg_derivative(x: &PreShape, w: &DMatrix<f64>) -> DMatrix<f64> {
    let a = x.entries().transpose() * w;
    &a + a.transpose()
}

fn check_rank(r: usize, dim: usize) -> Result<()> {
    if r == 0 || r > dim {
        return Err(ShapeError::InvalidDimension(format!(
            "target rank {r} outside 1..={dim}"
        )));
    }
    Ok(())
}

fn leading(a: &SchoenbergPoint, r: usize) -> Result<(Vec<f64>, DMatrix<f64>, bool)> {
    check_rank(r, a.dim())?;
    let (values, vectors) = sorted_symmetric_eigen(a.gram());
    if values[r - 1] <= 0.0 {
        return Err(ShapeError::NotInDomain {
            index: r - 1,
            value: values[r - 1],
        });
    }
    let non_unique = values
        .get(r)
        .is_some_and(|next| values[r - 1] - next < EIGEN_TIE);
    Ok((values, vectors, non_unique))
}

/// Closest point of rank `r`: `mu_i = lambda_i + 1/r - mean(lambda_1..r)`.
pub fn project_orthogonal(a: &SchoenbergPoint, r: usize) -> Result<Projected> {
    let (values, vectors, non_unique) = leading(a, r)?;
    let mean = values[..r].iter().sum::<f64>() / r as f64;
    let shift = 1.0 / r as f64 - mean;
    let mut mu = vec![0.0; values.len()];
    for i in 0..r {
        mu[i] = values[i] + shift;
        if mu[i] <= 0.0 {
            return Err(ShapeError::NotInDomain {
                index: i,
                value: mu[i],
            });
        }
    }
    Ok(Projected {
        point: SchoenbergPoint::from_eigen(&vectors, &mu)?,
        input_eigenvalues: values,
        eigenvalues: mu,
        non_unique,
    })
}

/// Rescales the leading `r` eigenvalues to sum one: `nu_i = lambda_i / (r mean)`.
pub fn project_central(a: &SchoenbergPoint, r: usize) -> Result<Projected> {
    let (values, vectors, non_unique) = leading(a, r)?;
    let total: f64 = values[..r].iter().sum();
    let mut nu = vec![0.0; values.len()];
    for i in 0..r {
        nu[i] = values[i] / total;
    }
    Ok(Projected {
        point: SchoenbergPoint::from_eigen(&vectors, &nu)?,
        input_eigenvalues: values,
        eigenvalues: nu,
        non_unique,
    })
}

/// Pre-shape with `m` rows whose gram matrix is `a`: the first `r` rows of
/// `sqrt(lambda) u^T`, padded with zero rows.
pub fn schoenberg_inverse(a: &SchoenbergPoint, r: usize, m: usize) -> Result<PreShape> {
    let found = a.rank(DEFAULT_RANK_TOL);
    if found != r {
        return Err(ShapeError::RankMismatch { expected: r, found });
    }
    if r > m {
        return Err(ShapeError::RankMismatch {
            expected: m,
            found: r,
        });
    }
    let (values, vectors) = sorted_symmetric_eigen(a.gram());
    let mut x = DMatrix::zeros(m, a.dim());
    for i in 0..r {
        let scale = values[i].max(0.0).sqrt();
        x.row_mut(i)
            .copy_from(&(vectors.column(i).transpose() * scale));
    }
    PreShape::normalized(x)
}

/// Extrinsic Schoenberg mean of rank `r`: project the averaged gram matrix
/// onto the rank-`r` stratum and map back to a pre-shape.
pub fn schoenberg_mean(
    sample: &Sample,
    space: &ShapeSpace,
    r: usize,
    projection: Projection,
) -> Result<MeanEstimate> {
    if space.group != Group::RotationsAndReflections {
        return Err(ShapeError::InvalidArgument(
            "Schoenberg means live in reflection shape space".into(),
        ));
    }
    if r == 0 || r > space.m {
        return Err(ShapeError::InvalidDimension(format!(
            "rank {r} must lie in 1..={}",
            space.m
        )));
    }
    let dim = space.k - 1;
    let mut avg = DMatrix::zeros(dim, dim);
    for (x, w) in sample.iter() {
        avg += schoenberg_embed(x).gram * w;
    }
    let ambient = SchoenbergPoint {
        gram: (&avg + avg.transpose()) * 0.5,
    };
    let ambient_rank = ambient.rank(DEFAULT_RANK_TOL);
    let projected = match projection {
        Projection::Orthogonal => project_orthogonal(&ambient, r)?,
        Projection::Central => project_central(&ambient, r)?,
    };
    let representative = schoenberg_inverse(&projected.point, r, space.m)?;
    let target = projected.point.gram();
    let objective = sample
        .iter()
        .map(|(x, w)| w * (schoenberg_embed(x).gram - target).norm_squared())
        .sum();
    let mean_type = match projection {
        Projection::Orthogonal => MeanType::SchoenbergOrthogonal,
        Projection::Central => MeanType::SchoenbergCentral,
    };
    let mut est = MeanEstimate::new(representative, mean_type, space, DEFAULT_RANK_TOL);
    est.objective = objective;
    est.ambient_rank = Some(ambient_rank);
    if projected.non_unique {
        let r_idx = r - 1;
        est.warnings.push(MeanWarning::EigenvalueTie {
            gap: projected.input_eigenvalues[r_idx] - projected.input_eigenvalues[r_idx + 1],
        });
    }
    Ok(est)
}
