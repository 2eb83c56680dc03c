//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use shapestat::experiments::{
    blindness_generators, classification_study, concentrated_sample, procrustes_counterexample,
    rank_law_check, ratio_check, replicate_rng, standard_normal, tetrahedron, SimulationConfig,
    TestMethod,
};
use shapestat::means::{
    frechet_objective, full_procrustes_mean, intrinsic_mean, project_central, project_orthogonal,
    schoenberg_derivative, schoenberg_embed, spherical_extrinsic_mean, spherical_intrinsic_mean,
    spherical_residual_mean, stationarity_residual, ziezold_mean, MeanOptions, MeanType,
    SchoenbergPoint,
};
use shapestat::tangent::hotelling_on_vectors;
use shapestat::{
    align, embed, intrinsic_distance, procrustes_distance, ziezold_distance, Group, PreShape,
    Regularity, Sample, ShapeSpace,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn circle(t: f64) -> PreShape {
    PreShape::from_rows(&[&[t.cos(), t.sin()]]).unwrap()
}

fn angle(x: &PreShape) -> f64 {
    x.entries()[(0, 1)].atan2(x.entries()[(0, 0)])
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let s = Sample::weighted(
        vec![circle(0.0), circle(FRAC_PI_2)],
        vec![2.0 / 3.0, 1.0 / 3.0],
    )
    .unwrap();
    let intr = angle(
        &spherical_intrinsic_mean(&s, &MeanOptions::default(), None)
            .unwrap()
            .representative,
    );
    let extr = angle(&spherical_extrinsic_mean(&s).unwrap());
    let res = spherical_residual_mean(&s).unwrap();
    let res_err = res
        .pair
        .iter()
        .map(|p| angle(p).abs().min(wrap(angle(p) - PI).abs()))
        .fold(0.0, f64::max);
    let e1 = (intr - PI / 6.0).abs();
    let e2 = (extr - 0.5f64.atan()).abs();
    let secs = start.elapsed().as_secs_f64();
    check(
        e1 < 1e-8 && e2 < 1e-8 && res_err < 1e-8 && secs < 1.0,
        format!("intrinsic err {e1:.1e}, extrinsic err {e2:.1e}, residual err {res_err:.1e}, {secs:.3}s"),
    )
}

fn criterion_2() -> Outcome {
    let a = 0.8f64.sqrt();
    let b = 0.2f64.sqrt();
    let x = PreShape::from_rows(&[&[a, 0.0, 0.0], &[0.0, b, 0.0]]).unwrap();
    let y = PreShape::from_rows(&[&[a, 0.0, 0.0], &[0.0, -b, 0.0]]).unwrap();
    let z = PreShape::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]).unwrap();
    let opts = MeanOptions::default();
    let planar = ShapeSpace::kendall(2, 4).unwrap();
    let s = Sample::uniform(vec![x.clone(), y.clone()]).unwrap();
    let d_planar: Vec<f64> = [
        intrinsic_mean(&s, &planar, &opts).unwrap(),
        ziezold_mean(&s, &planar, &opts).unwrap(),
    ]
    .iter()
    .map(|e| intrinsic_distance(&e.representative, &z, &planar))
    .collect();
    let space = ShapeSpace::kendall(3, 4).unwrap();
    let s3 = s.map_points(|p| embed(p, 3).unwrap());
    let z3 = embed(&z, 3).unwrap();
    let spatial = [
        intrinsic_mean(&s3, &space, &opts).unwrap(),
        ziezold_mean(&s3, &space, &opts).unwrap(),
    ];
    let d_spatial: Vec<f64> = spatial
        .iter()
        .map(|e| intrinsic_distance(&e.representative, &z3, &space))
        .collect();
    let regular = spatial.iter().all(|e| e.regularity == Regularity::Regular);
    check(
        d_planar.iter().all(|&d| d < 1e-8) && d_spatial.iter().all(|&d| d > 0.01) && regular,
        format!("planar distances to z {d_planar:?}; spatial distances to z' {d_spatial:.4?}; regular {regular}"),
    )
}

fn criterion_3() -> Outcome {
    let r = procrustes_counterexample(&MeanOptions {
        tol: 1e-12,
        ..MeanOptions::default()
    })
    .unwrap();
    let p = r.mean(MeanType::FullProcrustes).unwrap();
    let i = r.mean(MeanType::Intrinsic).unwrap();
    let z = r.mean(MeanType::Ziezold).unwrap();
    check(
        p.rank == 1
            && p.regularity == Regularity::Singular
            && p.distance_to_mode < 1e-6
            && i.regularity == Regularity::Regular
            && z.regularity == Regularity::Regular,
        format!(
            "Procrustes rank {} {:?} at {:.1e} from p1; intrinsic {:?}, Ziezold {:?}",
            p.rank, p.regularity, p.distance_to_mode, i.regularity, z.regularity
        ),
    )
}

/// Brute-force grid over rank-2 points of the probability simplex in R^3:
/// the Euclidean-closest point and the point of smallest angle to `lambda`.
fn simplex_oracles(lambda: &[f64; 3], step: f64) -> ([f64; 3], [f64; 3]) {
    let mut best_dist = (f64::INFINITY, [0.0; 3]);
    let mut best_angle = (f64::NEG_INFINITY, [0.0; 3]);
    let steps = (1.0 / step).round() as usize;
    for zero in 0..3 {
        for i in 0..=steps {
            let t = i as f64 * step;
            let mut mu = [0.0; 3];
            let others: Vec<usize> = (0..3).filter(|&j| j != zero).collect();
            mu[others[0]] = t;
            mu[others[1]] = 1.0 - t;
            let d: f64 = (0..3).map(|j| (lambda[j] - mu[j]).powi(2)).sum();
            let norm = mu.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cos = (0..3).map(|j| lambda[j] * mu[j]).sum::<f64>() / norm;
            if d < best_dist.0 {
                best_dist = (d, mu);
            }
            if cos > best_angle.0 {
                best_angle = (cos, mu);
            }
        }
    }
    (best_dist.1, best_angle.1)
}

fn criterion_4() -> Outcome {
    let lambda = [0.5, 0.3, 0.2];
    // A non-diagonal matrix with these eigenvalues.
    let q = DMatrix::from_fn(3, 3, |i, j| ((3 * i + j) as f64 + 0.5).cos())
        .qr()
        .q();
    let g = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&lambda)) * q.transpose();
    let a = SchoenbergPoint::new((&g + g.transpose()) * 0.5).unwrap();
    let orth = project_orthogonal(&a, 2).unwrap();
    let cent = project_central(&a, 2).unwrap();
    let eig = |p: &SchoenbergPoint| {
        let mut v = p.eigenvalues();
        v.sort_by(|x, y| y.total_cmp(x));
        v
    };
    let (eo, ec) = (eig(&orth.point), eig(&cent.point));
    let formula_o = [0.6, 0.4, 0.0];
    let formula_c = [0.625, 0.375, 0.0];
    let err = |e: &[f64], f: &[f64]| {
        e.iter()
            .zip(f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (oracle_o, oracle_c) = simplex_oracles(&lambda, 1e-4);
    let (fo, fc) = (err(&eo, &formula_o), err(&ec, &formula_c));
    let (go, gc) = (err(&eo, &oracle_o), err(&ec, &oracle_c));
    check(
        fo < 1e-12 && fc < 1e-12 && go <= 1e-3 && gc <= 1e-3,
        format!("orthogonal {eo:.6?} (formula err {fo:.1e}, grid err {go:.1e}); central {ec:.6?} (formula err {fc:.1e}, grid err {gc:.1e})"),
    )
}

fn criterion_5() -> Outcome {
    let mut failures = 0;
    for seed in 0..50 {
        let r = rank_law_check(3, 8, &[1, 2, 3, 100], seed).unwrap();
        let ranks: Vec<usize> = r.entries.iter().map(|e| e.rank).collect();
        if ranks != [3, 6, 7, 7] {
            failures += 1;
        }
    }
    check(
        failures == 0,
        format!("{failures} of 50 seeds deviate from ranks [3, 6, 7, 7]"),
    )
}

fn criterion_6() -> Outcome {
    let space = ShapeSpace::kendall(3, 4).unwrap();
    let opts = MeanOptions {
        tol: 1e-14,
        max_iter: 10_000,
        ..MeanOptions::default()
    };
    let mut reports = Vec::new();
    for &delta in &[0.2, 0.1, 0.05] {
        let mut rng = replicate_rng(42, 0);
        let s = concentrated_sample(&tetrahedron(), delta, 100, &mut rng).unwrap();
        reports.push(ratio_check(&s, &space, &opts).unwrap());
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    let dev: Vec<f64> = ratios.iter().map(|r| (r - 0.25).abs()).collect();
    let monotone = dev[0] > dev[1] && dev[1] > dev[2];
    let last = &reports[2];
    let cross_ok = last.cross < 0.1 * last.d_pi;
    check(
        (0.20..=0.30).contains(&ratios[0]) && (0.23..=0.27).contains(&ratios[2]) && monotone && cross_ok,
        format!(
            "ratios {ratios:.4?} at delta 0.2/0.1/0.05; monotone {monotone}; cross {:.2e} vs 0.1 d_pi {:.2e}",
            last.cross,
            0.1 * last.d_pi
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let run = |epsilon: f64| {
        classification_study(&SimulationConfig {
            epsilon,
            sigma2: 0.2,
            n_per_group: 10,
            replicates: 1000,
            level: 0.05,
            seed: 7,
            ..SimulationConfig::default()
        })
        .unwrap()
    };
    let flat = run(0.0);
    let high = run(0.3);
    let secs = start.elapsed().as_secs_f64();
    let pct = |r: &shapestat::experiments::ExperimentReport| -> Vec<f64> {
        TestMethod::ALL
            .iter()
            .map(|&m| r.percent(m).unwrap())
            .collect()
    };
    let (p0, p3) = (pct(&flat), pct(&high));
    let target0 = [70.0, 74.0, 74.0, 64.0];
    let within0 = p0.iter().zip(target0).all(|(p, t)| (p - t).abs() <= 6.0);
    let ordering = p0[1] >= p0[0] && p0[2] - p0[3] >= 4.0;
    let within3 = p3.iter().all(|&p| p >= 41.0 - 6.0 && p <= 42.0 + 6.0);
    check(
        within0 && ordering && within3 && secs < 600.0,
        format!(
            "eps 0: {p0:.1?} (target {target0:?}, ordering {ordering}); eps 0.3: {p3:.1?} (target 41-42); {secs:.1}s"
        ),
    )
}

fn criterion_8() -> Outcome {
    let phi: f64 = 0.3;
    let (x, w1, w2) = blindness_generators(phi);
    let n1 = schoenberg_derivative(&x, &w1).norm();
    let n2 = schoenberg_derivative(&x, &w2).norm();
    let e1 = (n1 - 2f64.sqrt() * 2.0 * phi.cos() * phi.sin()).abs();
    let e2 = (n2 - 2f64.sqrt()).abs();
    // The first-order remainder of the embedding along a geodesic is O(t^2).
    let slope = |w: &DMatrix<f64>| {
        let base = schoenberg_embed(&x);
        let deriv = schoenberg_derivative(&x, w);
        let err = |t: f64| {
            let p = PreShape::normalized(x.entries() * t.cos() + w * t.sin()).unwrap();
            (schoenberg_embed(&p).gram() - base.gram() - &deriv * t).norm()
        };
        let (t1, t2) = (1e-2, 1e-3);
        (err(t1).ln() - err(t2).ln()) / (t1.ln() - t2.ln())
    };
    let (s1, s2) = (slope(&w1), slope(&w2));
    check(
        e1 < 1e-12 && e2 < 1e-12 && (s1 - 2.0).abs() <= 0.1 && (s2 - 2.0).abs() <= 0.1,
        format!("norm errors {e1:.1e}, {e2:.1e}; remainder slopes {s1:.3}, {s2:.3}"),
    )
}

fn random_rotation(m: usize, rng: &mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| standard_normal(rng));
    let mut q = a.qr().q();
    if q.determinant() < 0.0 {
        let mut col = q.column_mut(0);
        col *= -1.0;
    }
    q
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut rng = replicate_rng(99, 0);
    let space = ShapeSpace::kendall(3, 5).unwrap();
    let opts = MeanOptions {
        tol: 1e-12,
        ..MeanOptions::default()
    };
    let base = PreShape::normalized(DMatrix::from_fn(3, 4, |i, j| {
        ((i * 4 + j) as f64 * 1.3).sin()
    }))
    .unwrap();
    let sample = concentrated_sample(&base, 0.15, 12, &mut rng).unwrap();

    // Equivariance: rotating individual observations leaves every mean shape
    // unchanged; rotating all by one g rotates the representative.
    let rotated = sample
        .map_points(|x| PreShape::normalized(random_rotation(3, &mut rng) * x.entries()).unwrap());
    let g = random_rotation(3, &mut rng);
    let globally = sample.map_points(|x| PreShape::normalized(&g * x.entries()).unwrap());
    let mut worst_equi: f64 = 0.0;
    type Estimator =
        fn(&Sample, &ShapeSpace, &MeanOptions) -> shapestat::Result<shapestat::MeanEstimate>;
    let estimators: [(MeanType, Estimator); 3] = [
        (MeanType::Intrinsic, intrinsic_mean),
        (MeanType::Ziezold, ziezold_mean),
        (MeanType::FullProcrustes, full_procrustes_mean),
    ];
    for (t, f) in estimators {
        let m0 = f(&sample, &space, &opts).unwrap().representative;
        let m1 = f(&rotated, &space, &opts).unwrap().representative;
        let m2 = f(&globally, &space, &opts).unwrap().representative;
        let gm0 = PreShape::normalized(&g * m0.entries()).unwrap();
        worst_equi = worst_equi
            .max(intrinsic_distance(&m0, &m1, &space))
            .max(intrinsic_distance(&gm0, &m2, &space));
        let stat = stationarity_residual(&m0, &sample, &space, t).unwrap();
        if stat >= 1e-9 {
            ok = false;
            notes.push(format!("{t:?} stationarity {stat:.1e}"));
        }
        let _ = frechet_objective(&m0, &sample, &space, t);
    }
    ok &= worst_equi < 1e-8;
    notes.push(format!("equivariance {worst_equi:.1e}"));

    // Distance identities.
    let mut worst_id: f64 = 0.0;
    for i in 0..sample.len() {
        for j in 0..i {
            let (x, y) = (&sample.points()[i], &sample.points()[j]);
            let d = intrinsic_distance(x, y, &space);
            worst_id = worst_id
                .max((procrustes_distance(x, y, &space) - d.sin()).abs())
                .max((ziezold_distance(x, y, &space) - 2.0 * (d / 2.0).sin()).abs());
        }
    }
    ok &= worst_id < 1e-12;
    notes.push(format!("distance identities {worst_id:.1e}"));

    // Residual means of data on a great subsphere stay on it.
    let sub: Vec<PreShape> = (0..8)
        .map(|_| {
            let v: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
            PreShape::normalized(DMatrix::from_row_slice(1, 5, &[v[0], v[1], v[2], 0.0, 0.0]))
                .unwrap()
        })
        .collect();
    let res = spherical_residual_mean(&Sample::uniform(sub).unwrap()).unwrap();
    let leak = res.pair[0].entries()[(0, 3)]
        .abs()
        .max(res.pair[0].entries()[(0, 4)].abs());
    ok &= leak < 1e-12;
    notes.push(format!("subsphere leak {leak:.1e}"));

    // Null calibration of the Hotelling test.
    let mut rejections = 0;
    let reps = 2000;
    for r in 0..reps {
        let mut rng = replicate_rng(2024, r);
        let mut draw = || -> Vec<Vec<f64>> {
            (0..10)
                .map(|_| (0..3).map(|_| standard_normal(&mut rng)).collect())
                .collect()
        };
        let (a, b) = (draw(), draw());
        rejections += hotelling_on_vectors(&a, &b, 0.05, 17).unwrap().reject as usize;
    }
    let rate = rejections as f64 / reps as f64;
    ok &= (0.03..=0.07).contains(&rate);
    notes.push(format!("null rejection rate {rate:.4}"));

    // Alignment sanity: positioned copy is at least as close.
    let (x, y) = (&sample.points()[0], &sample.points()[1]);
    ok &= align(x, y, Group::Rotations).dot(y) >= x.dot(y) - 1e-15;

    check(ok, notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("circle means", criterion_1),
        ("sharpness of the regularity condition", criterion_2),
        ("Procrustes non-stability", criterion_3),
        ("Schoenberg projections", criterion_4),
        ("rank law", criterion_5),
        ("1:3 property", criterion_6),
        ("classification study", criterion_7),
        ("Schoenberg derivative", criterion_8),
        ("invariant suites", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(p) => Err(format!(
                "panicked: {}",
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            )),
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
