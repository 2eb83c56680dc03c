use nalgebra::DMatrix;
use rand::Rng;
use shapestat::experiments::replicate_rng;
use shapestat::io::{load_dataset, DatasetFile, DatasetFormat, ReportEnvelope};
use shapestat::{Configuration, ShapeError};

fn random_dataset(n: usize, seed: u64) -> DatasetFile {
    let mut rng = replicate_rng(seed, 0);
    let configs: Vec<Configuration> = (0..n)
        .map(|_| {
            Configuration::new(DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1e3..1e3))).unwrap()
        })
        .collect();
    DatasetFile::from_configurations(&configs).unwrap()
}

#[test]
fn files_round_trip_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let ds = random_dataset(6, 3);
    for (name, body) in [("a.json", ds.to_json().unwrap()), ("a.csv", ds.to_csv())] {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        let back = load_dataset(&path, DatasetFormat::from_path(&path)).unwrap();
        assert_eq!(back.configurations, ds.configurations, "{name}");
        assert_eq!((back.m, back.k), (3, 5));
    }
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_dataset(&dir.path().join("absent.json"), DatasetFormat::Json).unwrap_err();
    assert!(matches!(err, ShapeError::Io(_)), "{err:?}");
}

#[test]
fn ragged_json_names_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"m":2,"k":3,"configurations":[[[0,1,0],[0,0,1]],[[0,1],[0,0]]]}"#,
    )
    .unwrap();
    match load_dataset(&path, DatasetFormat::Json) {
        Err(ShapeError::DimensionMismatch { index, .. }) => assert_eq!(index, 1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn envelopes_round_trip() {
    let env = ReportEnvelope::new(
        "mean",
        serde_json::json!({"tol": 1e-10}),
        vec![1.5, 0.1 + 0.2],
    )
    .with_timing("total", 3.0);
    let text = env.to_json().unwrap();
    let back: ReportEnvelope<Vec<f64>> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, env);
}
