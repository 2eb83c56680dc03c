use serde_json::Value;
use shapestat_cli::{run, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};
use std::path::Path;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("shapestat").chain(args.iter().copied());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = invoke(args);
    assert_eq!(code, EXIT_OK, "stderr: {err}");
    serde_json::from_str(&out).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

// Triangles as 2 x 3 blocks: x coordinates, then y coordinates.
const TRIANGLES: &str =
    "2,3\n0,1,0\n0,0,2\n\n0,1.1,0.1\n0,0.1,1.9\n\n0,0.9,-0.1\n0.1,0,2.1\n\n0,1,0.05\n0,0.05,2\n";
const FLATTER: &str =
    "2,3\n0,2,1\n0,0,0.5\n\n0,2.1,1\n0,0.1,0.4\n\n0,1.9,0.9\n0.1,0,0.6\n\n0,2,1.1\n0,0.05,0.5\n";

#[test]
fn counterexample_flags_the_singular_procrustes_mean() {
    let v = json(&["demo", "counterexample"]);
    let means = v["payload"]["means"].as_array().unwrap();
    let p = means
        .iter()
        .find(|m| m["mean_type"] == "full_procrustes")
        .unwrap();
    assert_eq!(p["regularity"], "Singular");
    let i = means
        .iter()
        .find(|m| m["mean_type"] == "intrinsic")
        .unwrap();
    assert_eq!(i["regularity"], "Regular");
}

#[test]
fn ziezold_mean_of_one_configuration_is_its_preshape() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "one.csv", "2,3\n0,1,0\n0,0,2\n");
    let v = json(&["mean", "--in", &path, "--type", "ziezold"]);
    let rows = &v["payload"]["representative"]["rows"];
    let got: Vec<f64> = rows
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
        .collect();

    let t = json(&["tangent", "--in", &path, "--kind", "residual"]);
    let base: Vec<f64> = t["payload"]["base"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
        .collect();
    assert_eq!(got.len(), 2 * 2);
    let norm: f64 = got.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
    // Rotating the configuration's pre-shape onto the mean must be exact.
    let inner: f64 = got.iter().zip(&base).map(|(a, b)| a * b).sum();
    assert!((inner - 1.0).abs() < 1e-12, "{got:?} vs {base:?}");
}

#[test]
fn simulation_payloads_are_reproducible() {
    let args = [
        "sim-classify",
        "--epsilon",
        "0",
        "--sigma2",
        "0.2",
        "--replicates",
        "1000",
        "--seed",
        "42",
    ];
    let (c1, a, _) = invoke(&args);
    let (c2, b, _) = invoke(&args);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    let pa: Value = serde_json::from_str(&a).unwrap();
    let pb: Value = serde_json::from_str(&b).unwrap();
    assert_eq!(
        serde_json::to_string(&pa["payload"]).unwrap(),
        serde_json::to_string(&pb["payload"]).unwrap()
    );
    assert!(pa["timings_ms"]["total"].as_f64().is_some());
    assert_eq!(pa["payload"]["methods"].as_array().unwrap().len(), 4);
}

#[test]
fn usage_errors_exit_with_two() {
    let (code, _, err) = invoke(&["mean", "--type", "nonsense", "--in", "x.json"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, err) = invoke(&["sim-classify", "--level", "1.5", "--replicates", "10"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn domain_errors_exit_with_one() {
    let (code, out, err) = invoke(&["mean", "--in", "/definitely/not/here.json"]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(out.is_empty());
    assert!(err.starts_with("error:"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "2,3\n0,1,0\n0,oops,2\n");
    let (code, _, err) = invoke(&["mean", "--in", &bad]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "tri.csv", TRIANGLES);
    let target = dir.path().join("report.json");
    let (code, out, _) = invoke(&[
        "dist",
        "--in",
        &data,
        "--metric",
        "procrustes",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    let d = v["payload"]["distances"].as_array().unwrap();
    assert_eq!(d.len(), 4);
    for (i, row) in d.iter().enumerate() {
        assert!(row[i].as_f64().unwrap() < 1e-7);
        for (j, x) in row.as_array().unwrap().iter().enumerate() {
            assert!((x.as_f64().unwrap() - d[j][i].as_f64().unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn two_sample_test_separates_distinct_triangles() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", TRIANGLES);
    let b = write(dir.path(), "b.csv", FLATTER);
    let v = json(&["test2", &a, &b, "--max-components", "2"]);
    assert_eq!(v["payload"]["reject"], true);
    assert!(v["payload"]["p_value"].as_f64().unwrap() < 0.05);
    let same = json(&["test2", &a, &a]);
    assert_eq!(same["payload"]["reject"], false);
}

#[test]
fn json_and_csv_inputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "tri.csv", TRIANGLES);
    let json_path = write(
        dir.path(),
        "tri.json",
        r#"{"m":2,"k":3,"configurations":[[[0,1,0],[0,0,2]],[[0,1.1,0.1],[0,0.1,1.9]],[[0,0.9,-0.1],[0.1,0,2.1]],[[0,1,0.05],[0,0.05,2]]]}"#,
    );
    let a = json(&["mean", "--in", &csv]);
    let b = json(&["mean", "--in", &json_path]);
    assert_eq!(a["payload"], b["payload"]);
}

#[test]
fn pretty_output_is_a_readable_table() {
    let (code, out, _) = invoke(&["demo", "circle-means", "--gamma", "1.0", "--pretty"]);
    assert_eq!(code, EXIT_OK);
    assert!(serde_json::from_str::<Value>(&out).is_err());
    assert!(out.contains("payload.intrinsic"), "{out}");
}

#[test]
fn rank_law_demo_holds() {
    let v = json(&[
        "demo",
        "rank-law",
        "--m",
        "3",
        "--k",
        "8",
        "--n",
        "1,2,3,100",
    ]);
    assert_eq!(v["payload"]["all_hold"], true);
}

#[test]
fn per_replicate_outcomes_can_be_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("reps.csv");
    let v = json(&[
        "sim-classify",
        "--replicates",
        "25",
        "--seed",
        "3",
        "--replicates-csv",
        csv.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "replicate,intrinsic_intrinsic,intrinsic_residual,ziezold_residual,schoenberg"
    );
    assert_eq!(lines.len(), 26);
    // Column sums reproduce the reported rejection counts.
    for (j, m) in v["payload"]["methods"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
    {
        let ones = lines[1..]
            .iter()
            .filter(|l| l.split(',').nth(j + 1) == Some("1"))
            .count();
        assert_eq!(ones as u64, m["rejections"].as_u64().unwrap());
    }
}
