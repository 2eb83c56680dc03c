//! Intrinsic, Ziezold and full Procrustes means on `S_m^k / G`.
//!
//! Every estimator alternates between optimally positioning the sample to the
//! current iterate and one update of the corresponding spherical mean of the
//! positioned lift. Convergence is measured by the shape distance between
//! successive iterates.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::spherical::{top_eigen, weighted_average, weighted_log_sum};
use super::{MeanEstimate, MeanOptions, MeanType, MeanWarning, Sample};
use crate::error::{Result, ShapeError};
use crate::geometry::{
    align, intrinsic_distance, procrustes_distance, sphere_exp_raw, ziezold_distance,
};
use crate::preshape::{PreShape, ShapeSpace};

const UNDEFINED_NORM: f64 = 1e-12;
const EIGEN_TIE: f64 = 1e-10;

/// Intrinsic (geodesic) Fréchet mean.
pub fn intrinsic_mean(
    sample: &Sample,
    space: &ShapeSpace,
    opts: &MeanOptions,
) -> Result<MeanEstimate> {
    with_restarts(sample, space, opts, MeanType::Intrinsic)
}

/// Fréchet mean for the Ziezold (minimal chordal) distance.
pub fn ziezold_mean(
    sample: &Sample,
    space: &ShapeSpace,
    opts: &MeanOptions,
) -> Result<MeanEstimate> {
    with_restarts(sample, space, opts, MeanType::Ziezold)
}

/// Full Procrustes mean (generalised Procrustes analysis).
pub fn full_procrustes_mean(
    sample: &Sample,
    space: &ShapeSpace,
    opts: &MeanOptions,
) -> Result<MeanEstimate> {
    with_restarts(sample, space, opts, MeanType::FullProcrustes)
}

/// Weighted empirical objective `sum_i w_i rho(x_i, p)^2` for the distance
/// belonging to `mean_type`.
pub fn frechet_objective(
    p: &PreShape,
    sample: &Sample,
    space: &ShapeSpace,
    mean_type: MeanType,
) -> f64 {
    let rho: fn(&PreShape, &PreShape, &ShapeSpace) -> f64 = match mean_type {
        MeanType::Ziezold => ziezold_distance,
        MeanType::FullProcrustes => procrustes_distance,
        _ => intrinsic_distance,
    };
    sample
        .iter()
        .map(|(x, w)| {
            let d = rho(x, p, space);
            w * d * d
        })
        .sum()
}

/// Norm of the first-order condition at `p` with the sample positioned to
/// `p`: `||sum_i w_i log_p(g_i x_i)||` for intrinsic means and the distance
/// between `p` and the updated iterate for Ziezold and Procrustes means.
pub fn stationarity_residual(
    p: &PreShape,
    sample: &Sample,
    space: &ShapeSpace,
    mean_type: MeanType,
) -> Result<f64> {
    let aligned = sample.map_points(|x| align(x, p, space.group));
    match mean_type {
        MeanType::Intrinsic => Ok(weighted_log_sum(p, &aligned)?.norm()),
        MeanType::Ziezold | MeanType::FullProcrustes => {
            let (next, _) = update(p, &aligned, mean_type)?;
            Ok((next.entries() - p.entries()).norm())
        }
        other => Err(ShapeError::InvalidArgument(format!(
            "no stationarity condition for {other:?}"
        ))),
    }
}

/// One update of the spherical mean of the positioned lift. The second
/// value is the leading eigengap for Procrustes updates.
fn update(p: &PreShape, aligned: &Sample, mean_type: MeanType) -> Result<(PreShape, Option<f64>)> {
    match mean_type {
        MeanType::Intrinsic => {
            let step = weighted_log_sum(p, aligned)?;
            Ok((sphere_exp_raw(p, &step), None))
        }
        MeanType::Ziezold => {
            let avg = weighted_average(aligned);
            let norm = avg.norm();
            if norm < UNDEFINED_NORM {
                return Err(ShapeError::UndefinedMean { norm });
            }
            Ok((PreShape::from_unit(avg / norm), None))
        }
        MeanType::FullProcrustes => {
            let (m, cols) = (p.m(), p.k() - 1);
            let (values, vectors) =
                top_eigen(aligned.iter().map(|(x, w)| (x.entries(), w)), m * cols);
            let mut top = DMatrix::from_column_slice(m, cols, vectors.column(0).as_slice());
            if top.dot(p.entries()) < 0.0 {
                top = -top;
            }
            let gap = values.get(1).map_or(f64::INFINITY, |v| values[0] - v);
            Ok((PreShape::normalized(top)?, Some(gap)))
        }
        other => Err(ShapeError::InvalidArgument(format!(
            "{other:?} is not an iterative quotient mean"
        ))),
    }
}

fn run_from(
    sample: &Sample,
    space: &ShapeSpace,
    opts: &MeanOptions,
    mean_type: MeanType,
    init: &PreShape,
) -> Result<MeanEstimate> {
    let mut p = init.clone();
    let mut last = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let aligned = sample.map_points(|x| align(x, &p, space.group));
        let (next, gap) = update(&p, &aligned, mean_type)?;
        last = intrinsic_distance(&p, &next, space);
        p = next;
        if last < opts.tol {
            let objective = frechet_objective(&p, sample, space, mean_type);
            let mut est = MeanEstimate::new(p, mean_type, space, opts.rank_tol);
            est.iterations = iter;
            est.final_update_norm = last;
            est.objective = objective;
            if let Some(gap) = gap.filter(|g| *g < EIGEN_TIE) {
                est.warnings.push(MeanWarning::EigenvalueTie { gap });
            }
            return Ok(est);
        }
    }
    Err(ShapeError::NoConvergence {
        iterations: opts.max_iter,
        last_update: last,
    })
}

/// Runs from `opts.restarts` starting points (the sample points in turn) and
/// keeps the lowest objective; ties go to the lowest restart index.
fn with_restarts(
    sample: &Sample,
    space: &ShapeSpace,
    opts: &MeanOptions,
    mean_type: MeanType,
) -> Result<MeanEstimate> {
    let first = &sample.points()[0];
    if first.m() != space.m || first.k() != space.k {
        return Err(ShapeError::InvalidDimension(format!(
            "sample is {} x {} but the shape space has m = {}, k = {}",
            first.m(),
            first.k(),
            space.m,
            space.k
        )));
    }
    let restarts = opts.restarts.max(1);
    if restarts == 1 {
        return run_from(sample, space, opts, mean_type, first);
    }
    let runs: Vec<Result<MeanEstimate>> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let init = &sample.points()[i % sample.len()];
            run_from(sample, space, opts, mean_type, init)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, run) in runs.iter().enumerate() {
        if let Ok(est) = run {
            let better = match best {
                None => true,
                Some(b) => est.objective < runs[b].as_ref().map_or(f64::INFINITY, |e| e.objective),
            };
            if better {
                best = Some(i);
            }
        }
    }
    let Some(best) = best else {
        return runs.into_iter().next().expect("at least one restart");
    };
    let mut chosen = runs[best].clone().expect("best run converged");
    let threshold = 10.0 * opts.tol;
    for (i, run) in runs.iter().enumerate() {
        let Ok(other) = run else { continue };
        if i == best {
            continue;
        }
        let shape_distance =
            intrinsic_distance(&other.representative, &chosen.representative, space);
        let objective_gap = (other.objective - chosen.objective).abs();
        if shape_distance > threshold && objective_gap < threshold {
            chosen.warnings.push(MeanWarning::NonUnique {
                alternative: other.representative.clone(),
                objective_gap,
                shape_distance,
            });
            break;
        }
    }
    Ok(chosen)
}
