//! Statistics on Kendall's shape spaces: pre-shapes, optimal positioning,
//! intrinsic, Ziezold, full Procrustes and Schoenberg means, tangent-space
//! coordinates, two-sample Hotelling tests and the simulation studies built
//! on them.

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
mod linalg;
pub mod means;
pub mod preshape;
pub mod stats;
pub mod tangent;

pub use error::{Result, ShapeError};
pub use geometry::{
    align, geodesic_point, intrinsic_distance, optimal_position, procrustes_distance,
    project_horizontal, sphere_exp, sphere_log, ziezold_distance, Alignment, TangentVector,
};
pub use means::{MeanEstimate, MeanOptions, MeanType, Sample};
pub use preshape::{
    embed, helmertize, rank_of, regularity, to_preshape, Configuration, Group, PreShape,
    Regularity, ShapeSpace,
};
pub use tangent::{
    hotelling_two_sample, tangent_coordinates, CoordKind, TangentSample, TestReport,
};
