//! Fréchet means on the pre-shape sphere and on Kendall's shape spaces.
//!
//! All estimators work on weighted empirical samples; a plain sample is the
//! special case of equal weights.

mod quotient;
mod schoenberg;
mod spherical;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::geometry::intrinsic_distance;
use crate::preshape::{
    rank_of, regularity_with_tol, PreShape, Regularity, ShapeSpace, DEFAULT_RANK_TOL,
};

pub use quotient::{
    frechet_objective, full_procrustes_mean, intrinsic_mean, stationarity_residual, ziezold_mean,
};
pub use schoenberg::{
    project_central, project_orthogonal, schoenberg_derivative, schoenberg_embed,
    schoenberg_inverse, schoenberg_mean, Projected, Projection, SchoenbergPoint,
};
pub use spherical::{
    spherical_extrinsic_mean, spherical_intrinsic_mean, spherical_residual_mean, ResidualMean,
};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A weighted empirical sample of pre-shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    points: Vec<PreShape>,
    weights: Vec<f64>,
}

impl Sample {
    pub fn uniform(points: Vec<PreShape>) -> Result<Self> {
        let n = points.len();
        Self::weighted(points, vec![1.0 / n.max(1) as f64; n])
    }

    /// Weights must be nonnegative and sum to one within `1e-9`.
    pub fn weighted(points: Vec<PreShape>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(ShapeError::EmptySample);
        }
        if weights.len() != points.len() {
            return Err(ShapeError::InvalidWeights(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ShapeError::InvalidWeights(
                "weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(ShapeError::InvalidWeights(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let first = &points[0];
        if points.iter().any(|p| !p.same_dims(first)) {
            return Err(ShapeError::InvalidDimension(
                "sample points have differing dimensions".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &[PreShape] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PreShape, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Applies `f` to every point, keeping the weights.
    pub fn map_points(&self, f: impl FnMut(&PreShape) -> PreShape) -> Self {
        Self {
            points: self.points.iter().map(f).collect(),
            weights: self.weights.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanType {
    Intrinsic,
    Ziezold,
    FullProcrustes,
    Residual,
    Extrinsic,
    SchoenbergOrthogonal,
    SchoenbergCentral,
}

/// Iteration controls shared by the iterative estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Number of starting points; restarts cycle through the sample.
    pub restarts: usize,
    pub rank_tol: f64,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
            restarts: 1,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Non-fatal diagnostics attached to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanWarning {
    /// Another candidate with (nearly) the same objective was found.
    NonUnique {
        alternative: PreShape,
        objective_gap: f64,
        shape_distance: f64,
    },
    /// Leading eigenvalues too close to decide the eigenvector.
    EigenvalueTie { gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub representative: PreShape,
    pub mean_type: MeanType,
    pub iterations: usize,
    pub final_update_norm: f64,
    pub converged: bool,
    /// Weighted empirical Fréchet objective `sum_i w_i rho(x_i, mu)^2`.
    pub objective: f64,
    pub rank: usize,
    pub regularity: Regularity,
    /// Rank of the averaged gram matrix before projection (Schoenberg only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ambient_rank: Option<usize>,
    #[serde(default)]
    pub warnings: Vec<MeanWarning>,
}

impl MeanEstimate {
    pub(crate) fn new(
        representative: PreShape,
        mean_type: MeanType,
        space: &ShapeSpace,
        rank_tol: f64,
    ) -> Self {
        let rank = rank_of(&representative, rank_tol);
        let regularity = regularity_with_tol(&representative, space, rank_tol);
        Self {
            representative,
            mean_type,
            iterations: 0,
            final_update_norm: 0.0,
            converged: true,
            objective: 0.0,
            rank,
            regularity,
            ambient_rank: None,
            warnings: Vec::new(),
        }
    }

    pub fn is_non_unique(&self) -> bool {
        !self.warnings.is_empty()
    }

    /// Shape distance to another estimate's representative.
    pub fn distance_to(&self, other: &PreShape, space: &ShapeSpace) -> f64 {
        intrinsic_distance(&self.representative, other, space)
    }
}
