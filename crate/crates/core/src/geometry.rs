//! Optimal positioning, shape distances and the sphere's exponential and
//! logarithm maps.
//!
//! Pre-shapes are treated as vectors of the Euclidean space `M(m, k-1)` with
//! the Frobenius inner product `<x, y> = tr(x y^T)`. The group acts from the
//! left, and `g` is in optimal position when `tr(g x p^T)` is maximal, which
//! simultaneously minimises the chordal and the geodesic distance.

use nalgebra::DMatrix;

use crate::error::{Result, ShapeError};
use crate::preshape::{Group, PreShape, ShapeSpace};

/// Below this angle the `alpha / sin(alpha)` and `sin(t) / t` factors switch
/// to their Taylor series.
const SERIES_CUTOFF: f64 = 1e-6;
/// Inner products below `-1 + CUT_LOCUS_EPS` are treated as antipodal.
const CUT_LOCUS_EPS: f64 = 1e-12;
/// Eigenvalue-sum threshold for solving the vertical projection.
const STRATUM_EPS: f64 = 1e-12;

/// Group element putting one pre-shape in optimal position to another.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rotation: DMatrix<f64>,
    /// `tr(g x p^T)` at the optimum, clamped to `[-1, 1]`.
    pub inner_product: f64,
}

impl Alignment {
    pub fn apply(&self, x: &PreShape) -> PreShape {
        PreShape::from_unit(&self.rotation * x.entries())
    }
}

/// A tangent vector to the pre-shape sphere at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub entries: DMatrix<f64>,
    pub base: PreShape,
}

impl TangentVector {
    pub fn zero(base: &PreShape) -> Self {
        Self {
            entries: DMatrix::zeros(base.m(), base.k() - 1),
            base: base.clone(),
        }
    }

    /// Projects an arbitrary matrix onto the tangent space at `base`.
    pub fn project(base: &PreShape, v: DMatrix<f64>) -> Self {
        let along = v.dot(base.entries());
        Self {
            entries: v - base.entries() * along,
            base: base.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            entries: &self.entries * t,
            base: self.base.clone(),
        }
    }
}

/// Finds `g` maximising `tr(g x p^T)`, so that `g x` best matches `p`.
///
/// With `x p^T = U S V^T`, `g = V U^T`; over `SO(m)` a negative determinant
/// is repaired by flipping the direction of the smallest singular value.
pub fn optimal_position(x: &PreShape, p: &PreShape, group: Group) -> Alignment {
    debug_assert!(x.same_dims(p));
    let cross = x.entries() * p.entries().transpose();
    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v = svd.v_t.expect("svd computed with v_t").transpose();
    let s = svd.singular_values;

    let mut rotation = &v * u.transpose();
    let mut inner: f64 = s.iter().sum();
    if group == Group::Rotations && rotation.determinant() < 0.0 {
        let min_idx = s.imin();
        let mut flip = DMatrix::identity(s.len(), s.len());
        flip[(min_idx, min_idx)] = -1.0;
        rotation = &v * flip * u.transpose();
        inner -= 2.0 * s[min_idx];
    }
    Alignment {
        rotation,
        inner_product: inner.clamp(-1.0, 1.0),
    }
}

/// `g x` in optimal position to `p`.
pub fn align(x: &PreShape, p: &PreShape, group: Group) -> PreShape {
    optimal_position(x, p, group).apply(x)
}

/// Chord length `min_g ||g x - y||`, computed from the aligned difference so
/// that small distances keep full relative precision.
fn aligned_chord(x: &PreShape, y: &PreShape, group: Group) -> f64 {
    let gx = align(x, y, group);
    (gx.entries() - y.entries()).norm().min(2.0)
}

/// Geodesic distance of the quotient, `arccos` of the optimal inner product.
pub fn intrinsic_distance(x: &PreShape, y: &PreShape, space: &ShapeSpace) -> f64 {
    2.0 * (aligned_chord(x, y, space.group) / 2.0).asin()
}

/// Ziezold distance `min_g ||g x - y|| = sqrt(2 - 2 <gx, y>)`.
pub fn ziezold_distance(x: &PreShape, y: &PreShape, space: &ShapeSpace) -> f64 {
    aligned_chord(x, y, space.group)
}

/// Full Procrustes distance `sqrt(1 - <gx, y>^2)`.
pub fn procrustes_distance(x: &PreShape, y: &PreShape, space: &ShapeSpace) -> f64 {
    intrinsic_distance(x, y, space).sin()
}

/// Riemannian logarithm of the sphere at `p`.
pub fn sphere_log(p: &PreShape, x: &PreShape) -> Result<TangentVector> {
    let c = x.dot(p);
    if c < -1.0 + CUT_LOCUS_EPS {
        return Err(ShapeError::CutLocus { inner: c });
    }
    let residual = x.entries() - p.entries() * c;
    let s = residual.norm();
    let alpha = s.atan2(c);
    let factor = if alpha < SERIES_CUTOFF {
        1.0 + alpha * alpha / 6.0
    } else {
        alpha / s
    };
    Ok(TangentVector {
        entries: residual * factor,
        base: p.clone(),
    })
}

/// Riemannian exponential of the sphere at `p`.
pub fn sphere_exp(p: &PreShape, v: &TangentVector) -> PreShape {
    sphere_exp_raw(p, &v.entries)
}

pub(crate) fn sphere_exp_raw(p: &PreShape, v: &DMatrix<f64>) -> PreShape {
    let n = v.norm();
    let sinc = if n < SERIES_CUTOFF {
        1.0 - n * n / 6.0
    } else {
        n.sin() / n
    };
    PreShape::from_unit(p.entries() * n.cos() + v * sinc)
}

/// Removes the vertical component `A x` (`A` skew-symmetric) of a tangent
/// vector, leaving the horizontal part with `w x^T` symmetric.
///
/// `A` solves `A S + S A = v x^T - x v^T` with `S = x x^T`, which decouples
/// in the eigenbasis of `S`.
pub fn project_horizontal(v: &TangentVector, _group: Group) -> Result<TangentVector> {
    let x = v.base.entries();
    let m = x.nrows();
    let s = x * x.transpose();
    let rhs = &v.entries * x.transpose() - x * v.entries.transpose();
    let eig = s.symmetric_eigen();
    let q = &eig.eigenvectors;
    let lambda = &eig.eigenvalues;
    let rhs_eig = q.transpose() * rhs * q;
    let mut a_eig = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let denom = lambda[i] + lambda[j];
            if denom < STRATUM_EPS {
                return Err(ShapeError::SingularStratum);
            }
            a_eig[(i, j)] = rhs_eig[(i, j)] / denom;
        }
    }
    let a = q * a_eig * q.transpose();
    Ok(TangentVector {
        entries: &v.entries - a * x,
        base: v.base.clone(),
    })
}

/// Point at parameter `t` on the horizontal geodesic from `x` to the
/// representative of `[y]` in optimal position to `x`.
pub fn geodesic_point(x: &PreShape, y: &PreShape, t: f64, space: &ShapeSpace) -> Result<PreShape> {
    let gy = align(y, x, space.group);
    let v = sphere_log(x, &gy)?;
    Ok(sphere_exp_raw(x, &(v.entries * t)))
}
