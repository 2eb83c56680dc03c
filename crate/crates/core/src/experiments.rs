//! Simulation studies and worked demonstrations: the 1:3 ratio check, the
//! blindness demonstration, the Procrustes counterexample, the rank law of
//! averaged gram matrices and the cube/pyramid classification study.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapeError};
use crate::geometry::{align, geodesic_point, intrinsic_distance, sphere_exp_raw};
use crate::means::{
    full_procrustes_mean, intrinsic_mean, schoenberg_embed, schoenberg_mean,
    spherical_extrinsic_mean, spherical_intrinsic_mean, spherical_residual_mean, ziezold_mean,
    MeanEstimate, MeanOptions, MeanType, Projection, Sample,
};
use crate::preshape::{
    matrix_rank, to_preshape, Configuration, PreShape, Regularity, ShapeSpace, DEFAULT_RANK_TOL,
};
use crate::tangent::{
    default_max_components, hotelling_two_sample, tangent_coordinates, CoordKind,
};

/// Environment variable capping the number of worker threads (0 = automatic).
pub const THREADS_ENV: &str = "SHAPESTAT_THREADS";

// ---------------------------------------------------------------------------
// Random numbers

/// Deterministic stream for replicate `index` under `master_seed`.
pub fn replicate_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Standard normal variate by the Marsaglia polar method.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    sd: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    // Filled row by row so the draw order follows the printed layout.
    let mut a = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            a[(i, j)] = sd * standard_normal(rng);
        }
    }
    a
}

// ---------------------------------------------------------------------------
// Cube / pyramid

/// The 3x8 chopped-pyramid configuration of height `epsilon`; `epsilon = 1`
/// is the unit cube.
pub fn cube_pyramid_config(epsilon: f64) -> Configuration {
    let (p, q, e) = ((1.0 + epsilon) / 2.0, (1.0 - epsilon) / 2.0, epsilon);
    Configuration::from_rows(&[
        &[0.0, 1.0, p, q, 0.0, 1.0, p, q],
        &[0.0, 0.0, q, q, 1.0, 1.0, p, p],
        &[0.0, 0.0, e, e, 0.0, 0.0, e, e],
    ])
    .expect("fixed 3x8 configuration")
}

/// Adds independent `N(0, sigma2)` noise to every coordinate.
pub fn perturb<R: Rng + ?Sized>(
    c: &Configuration,
    sigma2: f64,
    rng: &mut R,
) -> Result<Configuration> {
    if !(sigma2 >= 0.0) {
        return Err(ShapeError::InvalidArgument(format!(
            "variance {sigma2} must be non-negative"
        )));
    }
    let noise = gaussian_matrix(c.m(), c.k(), sigma2.sqrt(), rng);
    Configuration::new(c.entries() + noise)
}

// ---------------------------------------------------------------------------
// Ratio check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    /// Intrinsic to Ziezold mean.
    pub d_iz: f64,
    /// Procrustes to Ziezold mean.
    pub d_pz: f64,
    /// Procrustes to intrinsic mean.
    pub d_pi: f64,
    /// `(1 - ||mean of the lift positioned to the Ziezold mean||)^2`.
    pub concentration: f64,
    pub ratio: f64,
    /// Distance from the Ziezold mean to the point a quarter of the way from
    /// the intrinsic to the Procrustes mean.
    pub cross: f64,
    pub intrinsic: PreShape,
    pub ziezold: PreShape,
    pub procrustes: PreShape,
}

pub fn ratio_check(sample: &Sample, space: &ShapeSpace, opts: &MeanOptions) -> Result<RatioReport> {
    let mi = intrinsic_mean(sample, space, opts)?.representative;
    let mz = ziezold_mean(sample, space, opts)?.representative;
    let mp = full_procrustes_mean(sample, space, opts)?.representative;
    let d_iz = intrinsic_distance(&mi, &mz, space);
    let d_pz = intrinsic_distance(&mp, &mz, space);
    let d_pi = intrinsic_distance(&mp, &mi, space);
    let floor = 10.0 * opts.tol;
    if let Some(&d) = [d_iz, d_pz, d_pi].iter().find(|&&d| d < floor) {
        return Err(ShapeError::MeansCoincide { distance: d });
    }
    let mut lift = DMatrix::zeros(space.m, space.k - 1);
    for (x, w) in sample.iter() {
        lift += align(x, &mz, space.group).entries() * w;
    }
    let concentration = (1.0 - lift.norm()).powi(2);
    let quarter = geodesic_point(&align(&mi, &mp, space.group), &mp, 0.25, space)?;
    let cross = intrinsic_distance(&mz, &quarter, space);
    Ok(RatioReport {
        d_iz,
        d_pz,
        d_pi,
        concentration,
        ratio: d_iz / d_pi,
        cross,
        intrinsic: mi,
        ziezold: mz,
        procrustes: mp,
    })
}

/// Pre-shape of the regular tetrahedron in `Σ_3^4`.
pub fn tetrahedron() -> PreShape {
    let c = Configuration::from_rows(&[
        &[1.0, 1.0, -1.0, -1.0],
        &[1.0, -1.0, 1.0, -1.0],
        &[1.0, -1.0, -1.0, 1.0],
    ])
    .expect("fixed configuration");
    to_preshape(&c).expect("non-degenerate")
}

/// `n` points `exp_base(v)` with `v` the tangent projection of an entrywise
/// `N(0, delta^2)` matrix.
pub fn concentrated_sample<R: Rng + ?Sized>(
    base: &PreShape,
    delta: f64,
    n: usize,
    rng: &mut R,
) -> Result<Sample> {
    let points = (0..n)
        .map(|_| {
            let raw = gaussian_matrix(base.m(), base.k() - 1, delta, rng);
            let v = &raw - base.entries() * raw.dot(base.entries());
            sphere_exp_raw(base, &v)
        })
        .collect();
    Sample::uniform(points)
}

// ---------------------------------------------------------------------------
// Procrustes counterexample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSummary {
    pub mean_type: MeanType,
    pub rank: usize,
    pub regularity: Regularity,
    /// Shape distance to the mode `p1`.
    pub distance_to_mode: f64,
    pub estimate: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub p1: PreShape,
    pub p2: PreShape,
    pub weights: [f64; 2],
    pub means: Vec<MeanSummary>,
}

impl CounterexampleReport {
    pub fn mean(&self, t: MeanType) -> Option<&MeanSummary> {
        self.means.iter().find(|s| s.mean_type == t)
    }
}

/// Configurations whose pre-shapes are the mode `p1` (weight 2/3) and the
/// far point `p2` (weight 1/3) in `Σ_3^4`.
pub fn counterexample_configs() -> (Configuration, Configuration) {
    let r = 0.5f64.sqrt();
    let q1 = Configuration::from_rows(&[
        &[1.0, -1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 0.0],
    ])
    .expect("fixed configuration");
    let q2 = Configuration::from_rows(&[
        &[1.0, 1.0, -2.0, 0.0],
        &[r, r, r, -3.0 * r],
        &[0.0, 0.0, 0.0, 0.0],
    ])
    .expect("fixed configuration");
    (q1, q2)
}

pub fn procrustes_counterexample(opts: &MeanOptions) -> Result<CounterexampleReport> {
    let (q1, q2) = counterexample_configs();
    let (p1, p2) = (to_preshape(&q1)?, to_preshape(&q2)?);
    let weights = [2.0 / 3.0, 1.0 / 3.0];
    let sample = Sample::weighted(vec![p1.clone(), p2.clone()], weights.to_vec())?;
    let kendall = ShapeSpace::kendall(3, 4)?;
    let reflection = ShapeSpace::reflection(3, 4)?;
    let estimates = vec![
        (intrinsic_mean(&sample, &kendall, opts)?, kendall),
        (ziezold_mean(&sample, &kendall, opts)?, kendall),
        (full_procrustes_mean(&sample, &kendall, opts)?, kendall),
        (
            schoenberg_mean(&sample, &reflection, 3, Projection::Orthogonal)?,
            reflection,
        ),
        (
            schoenberg_mean(&sample, &reflection, 3, Projection::Central)?,
            reflection,
        ),
    ];
    let means = estimates
        .into_iter()
        .map(|(est, space)| MeanSummary {
            mean_type: est.mean_type,
            rank: est.rank,
            regularity: est.regularity,
            distance_to_mode: intrinsic_distance(&est.representative, &p1, &space),
            estimate: est,
        })
        .collect();
    Ok(CounterexampleReport {
        p1,
        p2,
        weights,
        means,
    })
}

// ---------------------------------------------------------------------------
// Blindness demonstration

/// Planar pre-shapes `x = diag(cos φ, sin φ)` and the horizontal directions
/// `w1 = diag(sin φ, -cos φ)`, `w2 = [[0, cos φ], [sin φ, 0]]` at `x`.
pub fn blindness_generators(phi: f64) -> (PreShape, DMatrix<f64>, DMatrix<f64>) {
    let (c, s) = (phi.cos(), phi.sin());
    let x = PreShape::from_rows(&[&[c, 0.0], &[0.0, s]]).expect("unit norm");
    let w1 = DMatrix::from_row_slice(2, 2, &[s, 0.0, 0.0, -c]);
    let w2 = DMatrix::from_row_slice(2, 2, &[0.0, c, s, 0.0]);
    (x, w1, w2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindnessReport {
    pub phi: f64,
    pub beta: f64,
    pub q1: PreShape,
    pub q2: PreShape,
    pub q: PreShape,
    pub intrinsic_pair: PreShape,
    pub intrinsic_triple: PreShape,
    pub schoenberg_pair: PreShape,
    pub schoenberg_triple: PreShape,
    /// Shape distance between the intrinsic means with and without `q`.
    pub intrinsic_movement: f64,
    /// Reflection-shape distance between the Schoenberg means with and
    /// without `q`.
    pub schoenberg_movement: f64,
    pub ratio: f64,
}

pub fn blindness_demo(phi: f64, beta: f64, opts: &MeanOptions) -> Result<BlindnessReport> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    if !(phi > 0.0 && phi < half_pi && beta > 0.0 && beta < half_pi) {
        return Err(ShapeError::InvalidArgument(format!(
            "phi = {phi} and beta = {beta} must lie in (0, pi/2)"
        )));
    }
    let (x, w1, w2) = blindness_generators(phi);
    let (cb, sb) = (beta.cos(), beta.sin());
    let q1 = PreShape::normalized(x.entries() * cb - &w2 * sb)?;
    let q2 = PreShape::normalized(x.entries() * cb + &w2 * sb)?;
    let q = PreShape::normalized(x.entries() * cb + &w1 * sb)?;
    let kendall = ShapeSpace::kendall(2, 3)?;
    let reflection = ShapeSpace::reflection(2, 3)?;
    let pair = Sample::uniform(vec![q1.clone(), q2.clone()])?;
    let triple = Sample::uniform(vec![q1.clone(), q2.clone(), q.clone()])?;
    let intrinsic_pair = intrinsic_mean(&pair, &kendall, opts)?.representative;
    let intrinsic_triple = intrinsic_mean(&triple, &kendall, opts)?.representative;
    let schoenberg_pair =
        schoenberg_mean(&pair, &reflection, 2, Projection::Orthogonal)?.representative;
    let schoenberg_triple =
        schoenberg_mean(&triple, &reflection, 2, Projection::Orthogonal)?.representative;
    let intrinsic_movement = intrinsic_distance(&intrinsic_pair, &intrinsic_triple, &kendall);
    let schoenberg_movement = intrinsic_distance(&schoenberg_pair, &schoenberg_triple, &reflection);
    Ok(BlindnessReport {
        phi,
        beta,
        q1,
        q2,
        q,
        intrinsic_pair,
        intrinsic_triple,
        schoenberg_pair,
        schoenberg_triple,
        intrinsic_movement,
        schoenberg_movement,
        ratio: intrinsic_movement / schoenberg_movement,
    })
}

// ---------------------------------------------------------------------------
// Circle means

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleMeansReport {
    pub gamma: f64,
    /// Angles of the means of the points at angle 0 (weight 2/3) and
    /// `gamma` (weight 1/3).
    pub intrinsic: f64,
    pub extrinsic: f64,
    pub residual: [f64; 2],
    pub intrinsic_closed_form: f64,
    pub extrinsic_closed_form: f64,
    pub residual_closed_form: f64,
}

pub fn circle_means(gamma: f64, opts: &MeanOptions) -> Result<CircleMeansReport> {
    let point = |t: f64| PreShape::from_rows(&[&[t.cos(), t.sin()]]);
    let angle = |x: &PreShape| x.entries()[(0, 1)].atan2(x.entries()[(0, 0)]);
    let sample = Sample::weighted(vec![point(0.0)?, point(gamma)?], vec![2.0 / 3.0, 1.0 / 3.0])?;
    let intrinsic = angle(&spherical_intrinsic_mean(&sample, opts, None)?.representative);
    let extrinsic = angle(&spherical_extrinsic_mean(&sample)?);
    let res = spherical_residual_mean(&sample)?;
    Ok(CircleMeansReport {
        gamma,
        intrinsic,
        extrinsic,
        residual: [angle(&res.pair[0]), angle(&res.pair[1])],
        intrinsic_closed_form: gamma / 3.0,
        extrinsic_closed_form: gamma.sin().atan2(2.0 + gamma.cos()),
        residual_closed_form: 0.5 * (2.0 * gamma).sin().atan2(2.0 + (2.0 * gamma).cos()),
    })
}

// ---------------------------------------------------------------------------
// Rank law

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankLawEntry {
    pub n: usize,
    pub rank: usize,
    pub expected: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankLawReport {
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub entries: Vec<RankLawEntry>,
}

impl RankLawReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }
}

/// Rank of the averaged gram matrix of `n` random pre-shapes against
/// `min(n m, k - 1)`.
pub fn rank_law_check(m: usize, k: usize, n_values: &[usize], seed: u64) -> Result<RankLawReport> {
    let _ = ShapeSpace::kendall(m, k)?;
    let entries = n_values
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            if n == 0 {
                return Err(ShapeError::EmptySample);
            }
            let mut rng = replicate_rng(seed, idx as u64);
            let mut avg = DMatrix::zeros(k - 1, k - 1);
            for _ in 0..n {
                let x = PreShape::normalized(gaussian_matrix(m, k - 1, 1.0, &mut rng))?;
                avg += schoenberg_embed(&x).gram() / n as f64;
            }
            let rank = matrix_rank(&avg, DEFAULT_RANK_TOL);
            let expected = (n * m).min(k - 1);
            Ok(RankLawEntry {
                n,
                rank,
                expected,
                holds: rank == expected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankLawReport {
        m,
        k,
        seed,
        entries,
    })
}

// ---------------------------------------------------------------------------
// Classification study

/// Mean estimator paired with tangent coordinates for the two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    IntrinsicIntrinsic,
    IntrinsicResidual,
    ZiezoldResidual,
    /// Schoenberg mean, residual coordinates in reflection shape space.
    Schoenberg,
    /// Schoenberg mean, gram-difference coordinates in the ambient space.
    SchoenbergGram,
}

impl TestMethod {
    pub const ALL: [TestMethod; 4] = [
        TestMethod::IntrinsicIntrinsic,
        TestMethod::IntrinsicResidual,
        TestMethod::ZiezoldResidual,
        TestMethod::Schoenberg,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TestMethod::IntrinsicIntrinsic => "intrinsic mean, intrinsic coordinates",
            TestMethod::IntrinsicResidual => "intrinsic mean, residual coordinates",
            TestMethod::ZiezoldResidual => "Ziezold mean, residual coordinates",
            TestMethod::Schoenberg => "Schoenberg mean, residual coordinates",
            TestMethod::SchoenbergGram => "Schoenberg mean, gram-difference coordinates",
        }
    }

    /// Serialized name, as used in JSON reports.
    pub fn key(self) -> &'static str {
        match self {
            TestMethod::IntrinsicIntrinsic => "intrinsic_intrinsic",
            TestMethod::IntrinsicResidual => "intrinsic_residual",
            TestMethod::ZiezoldResidual => "ziezold_residual",
            TestMethod::Schoenberg => "schoenberg",
            TestMethod::SchoenbergGram => "schoenberg_gram",
        }
    }
}

/// Principal components retained by default in the classification study
/// (capped at `2n - 3`). Power is sensitive to this choice; 12 of the 17
/// shape dimensions of `Σ_3^8` works well for nearly flat pyramids.
pub const STUDY_MAX_COMPONENTS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Pyramid height; the cube group always uses height 1.
    pub epsilon: f64,
    pub sigma2: f64,
    pub n_per_group: usize,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub mean_types: Vec<TestMethod>,
    /// Principal-component cap; `None` uses [`STUDY_MAX_COMPONENTS`].
    #[serde(default)]
    pub max_components: Option<usize>,
    /// Worker threads; `None` or 0 defers to the environment or automatic.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub mean_options: MeanOptionsConfig,
}

/// Serializable subset of [`MeanOptions`] used by the study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanOptionsConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MeanOptionsConfig {
    fn default() -> Self {
        let d = MeanOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            sigma2: 0.2,
            n_per_group: 10,
            replicates: 1000,
            level: 0.05,
            seed: 20_240_607,
            mean_types: TestMethod::ALL.to_vec(),
            max_components: None,
            threads: None,
            mean_options: MeanOptionsConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(ShapeError::InvalidArgument(format!(
                "level {} outside (0, 1)",
                self.level
            )));
        }
        if self.replicates == 0 {
            return Err(ShapeError::InvalidArgument(
                "replicates must be at least 1".into(),
            ));
        }
        if self.n_per_group < 2 {
            return Err(ShapeError::InvalidArgument(
                "need at least 2 observations per group".into(),
            ));
        }
        if !(self.epsilon >= 0.0) || !(self.sigma2 > 0.0) {
            return Err(ShapeError::InvalidArgument(
                "epsilon must be >= 0 and sigma2 > 0".into(),
            ));
        }
        if self.mean_types.is_empty() {
            return Err(ShapeError::InvalidArgument("no methods selected".into()));
        }
        Ok(())
    }

    pub fn effective_max_components(&self) -> usize {
        let cap = default_max_components(self.n_per_group, self.n_per_group);
        self.max_components.unwrap_or(STUDY_MAX_COMPONENTS.min(cap))
    }

    fn mean_opts(&self) -> MeanOptions {
        MeanOptions {
            tol: self.mean_options.tol,
            max_iter: self.mean_options.max_iter,
            ..MeanOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: TestMethod,
    pub label: String,
    pub rejections: usize,
    /// Replicates in which the method produced a test decision.
    pub completed: usize,
    pub failures: usize,
    pub percent: f64,
    /// Monte Carlo standard error of `percent`.
    pub standard_error: f64,
    /// Summed wall time of this method's estimator and test calls. Not
    /// serialized so that reports of identical runs are byte-identical.
    #[serde(skip)]
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SimulationConfig,
    pub seed: u64,
    pub max_components: usize,
    pub methods: Vec<MethodResult>,
    #[serde(skip)]
    pub total_runtime_ms: f64,
    pub failed_replicates: usize,
    pub schoenberg_coordinates: String,
    /// Per-replicate decisions, one row per replicate and one entry per
    /// method (`None` if that method failed).
    #[serde(skip)]
    pub decisions: Vec<Vec<Option<bool>>>,
}

impl ExperimentReport {
    pub fn method(&self, m: TestMethod) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn percent(&self, m: TestMethod) -> Option<f64> {
        self.method(m).map(|r| r.percent)
    }

    /// Wall-clock timings keyed by method, plus the total.
    pub fn timings(&self) -> BTreeMap<String, f64> {
        let mut t: BTreeMap<String, f64> = self
            .methods
            .iter()
            .map(|r| (format!("{:?}", r.method), r.runtime_ms))
            .collect();
        t.insert("total".into(), self.total_runtime_ms);
        t
    }

    /// Per-replicate outcomes as CSV: `replicate` then one column per
    /// method holding `1` (reject), `0` (accept) or `NA` (failed).
    pub fn replicates_csv(&self) -> String {
        let mut out = String::from("replicate");
        for m in &self.methods {
            out.push(',');
            out.push_str(m.method.key());
        }
        out.push('\n');
        for (i, row) in self.decisions.iter().enumerate() {
            out.push_str(&i.to_string());
            for d in row {
                out.push_str(match d {
                    Some(true) => ",1",
                    Some(false) => ",0",
                    None => ",NA",
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Outcome of one method in one replicate.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    reject: Option<bool>,
    elapsed_ms: f64,
}

/// Resolves the worker count: explicit value, then the environment, then
/// automatic (0).
pub fn resolve_threads(explicit: Option<usize>) -> usize {
    match explicit {
        Some(n) if n > 0 => n,
        _ => std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(0),
    }
}

/// Draws the two groups of one replicate: noisy cubes then noisy pyramids.
pub fn draw_groups<R: Rng + ?Sized>(
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<(Vec<PreShape>, Vec<PreShape>)> {
    let cube = cube_pyramid_config(1.0);
    let pyramid = cube_pyramid_config(cfg.epsilon);
    let mut draw = |c: &Configuration| -> Result<Vec<PreShape>> {
        (0..cfg.n_per_group)
            .map(|_| to_preshape(&perturb(c, cfg.sigma2, rng)?))
            .collect()
    };
    let a = draw(&cube)?;
    let b = draw(&pyramid)?;
    Ok((a, b))
}

fn run_replicate(cfg: &SimulationConfig, index: u64) -> Result<Vec<Outcome>> {
    let mut rng = replicate_rng(cfg.seed, index);
    let (a, b) = draw_groups(cfg, &mut rng)?;
    let kendall = ShapeSpace::kendall(3, 8)?;
    let reflection = ShapeSpace::reflection(3, 8)?;
    let opts = cfg.mean_opts();
    let max_components = cfg.effective_max_components();
    let pooled = Sample::uniform(a.iter().chain(&b).cloned().collect())?;
    let (sa, sb) = (Sample::uniform(a)?, Sample::uniform(b)?);

    let needs_intrinsic = cfg.mean_types.iter().any(|m| {
        matches!(
            m,
            TestMethod::IntrinsicIntrinsic | TestMethod::IntrinsicResidual
        )
    });
    let mut intrinsic: Option<(Result<MeanEstimate>, f64)> = None;
    if needs_intrinsic {
        let t = Instant::now();
        let est = intrinsic_mean(&pooled, &kendall, &opts);
        intrinsic = Some((est, ms(t)));
    }

    let mut outcomes = Vec::with_capacity(cfg.mean_types.len());
    for &method in &cfg.mean_types {
        let t = Instant::now();
        let (mut elapsed, result) =
            match method {
                TestMethod::IntrinsicIntrinsic | TestMethod::IntrinsicResidual => {
                    let (est, mean_ms) = intrinsic.as_ref().expect("computed above");
                    let kind = if method == TestMethod::IntrinsicIntrinsic {
                        CoordKind::IntrinsicCoords
                    } else {
                        CoordKind::ResidualCoords
                    };
                    let r = est
                        .clone()
                        .and_then(|e| check_regular(e, &kendall))
                        .and_then(|e| {
                            test_at(
                                &sa,
                                &sb,
                                &e.representative,
                                kind,
                                &kendall,
                                cfg.level,
                                max_components,
                            )
                        });
                    (*mean_ms, r)
                }
                TestMethod::ZiezoldResidual => {
                    let r = ziezold_mean(&pooled, &kendall, &opts)
                        .and_then(|e| check_regular(e, &kendall))
                        .and_then(|e| {
                            test_at(
                                &sa,
                                &sb,
                                &e.representative,
                                CoordKind::ResidualCoords,
                                &kendall,
                                cfg.level,
                                max_components,
                            )
                        });
                    (0.0, r)
                }
                TestMethod::Schoenberg => {
                    let r = schoenberg_mean(&pooled, &reflection, 3, Projection::Orthogonal)
                        .and_then(|e| {
                            test_at(
                                &sa,
                                &sb,
                                &e.representative,
                                CoordKind::ResidualCoords,
                                &reflection,
                                cfg.level,
                                max_components,
                            )
                        });
                    (0.0, r)
                }
                TestMethod::SchoenbergGram => {
                    let r = schoenberg_mean(&pooled, &reflection, 3, Projection::Orthogonal)
                        .and_then(|e| {
                            test_at(
                                &sa,
                                &sb,
                                &e.representative,
                                CoordKind::SchoenbergCoords,
                                &reflection,
                                cfg.level,
                                max_components,
                            )
                        });
                    (0.0, r)
                }
            };
        elapsed += ms(t);
        let reject = match result {
            Ok(r) => Some(r),
            Err(e @ ShapeError::RegularityViolation(_)) => return Err(e),
            Err(_) => None,
        };
        outcomes.push(Outcome {
            reject,
            elapsed_ms: elapsed,
        });
    }
    Ok(outcomes)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn check_regular(e: MeanEstimate, space: &ShapeSpace) -> Result<MeanEstimate> {
    if e.regularity != Regularity::Regular {
        return Err(ShapeError::RegularityViolation(format!(
            "{:?} mean has rank {} in a space of dimension m = {}",
            e.mean_type, e.rank, space.m
        )));
    }
    Ok(e)
}

fn test_at(
    a: &Sample,
    b: &Sample,
    base: &PreShape,
    kind: CoordKind,
    space: &ShapeSpace,
    level: f64,
    max_components: usize,
) -> Result<bool> {
    let ta = tangent_coordinates(a, base, kind, space)?;
    let tb = tangent_coordinates(b, base, kind, space)?;
    Ok(hotelling_two_sample(&ta, &tb, level, max_components)?.reject)
}

/// Cube-versus-pyramid discrimination study. Replicates run in parallel on
/// independent random streams, so results do not depend on the worker
/// count.
pub fn classification_study(cfg: &SimulationConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_threads(cfg.threads))
        .build()
        .map_err(|e| ShapeError::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<Vec<Outcome>>> = pool.install(|| {
        (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|i| run_replicate(cfg, i))
            .collect()
    });

    let n_methods = cfg.mean_types.len();
    let mut rejections = vec![0usize; n_methods];
    let mut completed = vec![0usize; n_methods];
    let mut runtime = vec![0.0f64; n_methods];
    let mut failed_replicates = 0;
    let mut decisions = Vec::with_capacity(cfg.replicates);
    for result in results {
        let outcomes = result?;
        decisions.push(outcomes.iter().map(|o| o.reject).collect());
        let mut failed = false;
        for (j, o) in outcomes.iter().enumerate() {
            runtime[j] += o.elapsed_ms;
            match o.reject {
                Some(r) => {
                    completed[j] += 1;
                    rejections[j] += r as usize;
                }
                None => failed = true,
            }
        }
        failed_replicates += failed as usize;
    }
    if failed_replicates * 100 > cfg.replicates {
        return Err(ShapeError::InvalidArgument(format!(
            "{failed_replicates} of {} replicates failed (more than 1%)",
            cfg.replicates
        )));
    }

    let methods = cfg
        .mean_types
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let n = completed[j].max(1) as f64;
            let p = rejections[j] as f64 / n;
            MethodResult {
                method,
                label: method.label().to_string(),
                rejections: rejections[j],
                completed: completed[j],
                failures: cfg.replicates - completed[j],
                percent: 100.0 * p,
                standard_error: 100.0 * (p * (1.0 - p) / n).sqrt(),
                runtime_ms: runtime[j],
            }
        })
        .collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        seed: cfg.seed,
        max_components: cfg.effective_max_components(),
        methods,
        total_runtime_ms: ms(start),
        failed_replicates,
        schoenberg_coordinates: "schoenberg: residual tangent coordinates at the pooled Schoenberg mean \
                                 in reflection shape space; schoenberg_gram: upper triangle of the gram \
                                 difference, off-diagonal entries scaled by sqrt(2)"
            .into(),
        decisions,
    })
}
