//! End-to-end command-line flows: config plumbing, report schema, byte
//! stability, and the CSV contracts.

use qspring::cli::{parse_and_dispatch, parse_trajectory_csv};
use serde_json::Value;
use std::path::Path;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["qspring".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    parse_and_dispatch(&argv)
}

fn load_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).expect("report file");
    serde_json::from_str(&text).expect("report is JSON")
}

// ---------------------------------------------------------------------------
// Minimal JSON Schema walker covering the subset the shipped schema uses:
// type (string or list), required, properties, enum, additionalProperties.

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "integer" => v.as_i64().is_some() || v.as_u64().is_some(),
        _ => panic!("unsupported schema type {name}"),
    }
}

fn validate(schema: &Value, instance: &Value, path: &str) {
    if let Some(ty) = schema.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().map(|t| t.as_str().unwrap()).collect(),
            _ => panic!("bad type clause"),
        };
        assert!(
            names.iter().any(|n| type_matches(n, instance)),
            "{path}: expected one of {names:?}"
        );
        // per JSON Schema, object keywords only constrain object instances
        if !instance.is_object() {
            if let Some(allowed) = schema.get("enum") {
                assert!(
                    allowed.as_array().unwrap().contains(instance),
                    "{path}: {instance} not in enum"
                );
            }
            return;
        }
    }
    if let Some(allowed) = schema.get("enum") {
        assert!(
            allowed.as_array().unwrap().contains(instance),
            "{path}: {instance} not in enum"
        );
    }
    let obj = match instance.as_object() {
        Some(o) => o,
        None => return,
    };
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for key in required {
            let key = key.as_str().unwrap();
            assert!(obj.contains_key(key), "{path}: missing required key {key}");
        }
    }
    let props = schema.get("properties").and_then(Value::as_object);
    if let Some(props) = props {
        for (key, sub) in props {
            if let Some(child) = obj.get(key) {
                validate(sub, child, &format!("{path}.{key}"));
            }
        }
    }
    if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
        let props = props.expect("additionalProperties:false needs properties");
        for key in obj.keys() {
            assert!(props.contains_key(key), "{path}: unexpected key {key}");
        }
    }
}

fn validate_report(report: &Value) {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path).expect("schema file"))
            .expect("schema is JSON");
    validate(&schema, report, "$");
}

// ---------------------------------------------------------------------------

#[test]
fn check_smoke_produces_a_valid_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("check.json");
    assert_eq!(run(&["check", "--preset", "paper", "--out", out.to_str().unwrap()]), 0);
    let report = load_json(&out);
    validate_report(&report);
    assert_eq!(report["command"], "check");
    let conditions = report["result"]["conditions"].as_object().unwrap();
    for (name, entry) in conditions {
        if let Some(pass) = entry.get("pass") {
            assert_eq!(pass, &Value::Bool(true), "condition {name} failed");
        }
    }
    assert_eq!(
        report["config"]["cavity"]["finesse"].as_f64().unwrap(),
        2e5
    );
}

#[test]
fn derive_override_recomputes_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.json");
    let over = dir.path().join("over.json");
    assert_eq!(run(&["derive", "--out", base.to_str().unwrap()]), 0);
    assert_eq!(
        run(&[
            "derive",
            "--set",
            "membrane.reflectivity=0.9",
            "--out",
            over.to_str().unwrap()
        ]),
        0
    );
    let f1_base = load_json(&base)["result"]["placement"]["f1"].as_f64().unwrap();
    let f1_over = load_json(&over)["result"]["placement"]["f1"].as_f64().unwrap();
    assert!(f1_over > f1_base, "higher reflectivity must raise f1");
    let r = load_json(&over)["config"]["membrane"]["reflectivity"].as_f64().unwrap();
    assert_eq!(r, 0.9);
}

#[test]
fn reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        assert_eq!(run(&["check", "--out", path.to_str().unwrap()]), 0);
    }
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "identical runs must emit identical bytes"
    );
    let ta = dir.path().join("ta.json");
    let tb = dir.path().join("tb.json");
    for path in [&ta, &tb] {
        assert_eq!(
            run(&[
                "transfer",
                "--gamma-over-g",
                "0.2",
                "--gt-max",
                "1.0",
                "--samples",
                "51",
                "--out",
                path.to_str().unwrap()
            ]),
            0
        );
    }
    assert_eq!(std::fs::read(&ta).unwrap(), std::fs::read(&tb).unwrap());
}

#[test]
fn transfer_reproduces_the_loss_protocol_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("transfer.json");
    assert_eq!(
        run(&[
            "transfer",
            "--preset",
            "paper",
            "--squeeze-db",
            "9",
            "--nbar",
            "5",
            "--gamma-over-g",
            "0.1",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let report = load_json(&out);
    validate_report(&report);
    let result = &report["result"];
    let max_db = result["max_transferred_db"].as_f64().unwrap();
    assert!((max_db - 1.758).abs() < 0.02, "max {max_db}");
    let gt = result["gt_at_max"].as_f64().unwrap();
    assert!((gt - 1.5315).abs() < 0.02, "gt {gt}");
    assert_eq!(result["rotation_optimized"], Value::Bool(true));
}

#[test]
fn evolve_csv_round_trips_and_is_physical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("evolve.json");
    let csv = dir.path().join("evolve.csv");
    assert_eq!(
        run(&[
            "evolve",
            "--model",
            "effective",
            "--squeeze-db",
            "3",
            "--nbar",
            "1",
            "--t-max",
            "1e-5",
            "--samples",
            "21",
            "--out",
            out.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap()
        ]),
        0
    );
    let report = load_json(&out);
    validate_report(&report);
    assert!(report["result"]["min_uncertainty_eig"].as_f64().unwrap() > -1e-9);
    let (times, means, covs) =
        parse_trajectory_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(times.len(), 21);
    assert_eq!(means[0].len(), 4);
    for cov in &covs {
        assert_eq!(cov.nrows(), 4);
        let asym = (cov - cov.transpose()).abs().max();
        assert!(asym == 0.0, "parsed covariance must be symmetric");
    }
}

#[test]
fn fock_oracle_agrees_with_gaussian_engine_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let g_csv = dir.path().join("gauss.csv");
    let f_csv = dir.path().join("fock.csv");
    // short span: the preset membrane bath sits at n_bar ~ 4e4, so the
    // truncated ladder can only follow the heating for a few microseconds
    let common = [
        "--squeeze-db",
        "3",
        "--nbar",
        "0.5",
        "--t-max",
        "6e-6",
        "--samples",
        "9",
    ];
    let mut gauss_args = vec!["evolve", "--model", "effective"];
    gauss_args.extend_from_slice(&common);
    gauss_args.extend_from_slice(&["--csv", g_csv.to_str().unwrap()]);
    assert_eq!(run(&gauss_args), 0);
    let f_out = dir.path().join("fock.json");
    let mut fock_args = vec!["evolve", "--model", "fock-oracle", "--dims", "14,16"];
    fock_args.extend_from_slice(&common);
    fock_args.extend_from_slice(&["--csv", f_csv.to_str().unwrap()]);
    fock_args.extend_from_slice(&["--out", f_out.to_str().unwrap()]);
    assert_eq!(run(&fock_args), 0);
    let fock_report = load_json(&f_out);
    assert_eq!(fock_report["result"]["truncation_valid"], Value::Bool(true));

    let (gt, gm, gc) = parse_trajectory_csv(&std::fs::read_to_string(&g_csv).unwrap()).unwrap();
    let (ft, fm, fc) = parse_trajectory_csv(&std::fs::read_to_string(&f_csv).unwrap()).unwrap();
    assert_eq!(gt.len(), ft.len());
    for k in 0..gt.len() {
        assert!((gt[k] - ft[k]).abs() <= 1e-12 * gt[k].abs().max(1.0));
        let dm = (&gm[k] - &fm[k]).abs().max();
        let dc = (&gc[k] - &fc[k]).abs().max();
        assert!(dm < 1e-6, "mean mismatch {dm} at sample {k}");
        assert!(dc < 1e-3, "covariance mismatch {dc} at sample {k}");
    }
}

#[test]
fn wigner_csv_covers_four_panels() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("wigner.csv");
    assert_eq!(
        run(&[
            "wigner",
            "--grid",
            "21",
            "--half-width",
            "3",
            "--csv",
            csv.to_str().unwrap(),
            "--out",
            dir.path().join("wigner.json").to_str().unwrap()
        ]),
        0
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut labels = std::collections::BTreeSet::new();
    let mut rows = 0usize;
    for line in text.lines().skip(1) {
        labels.insert(line.split(',').next().unwrap().to_string());
        rows += 1;
    }
    assert_eq!(rows, 4 * 21 * 21);
    assert_eq!(labels.len(), 4);
    assert!(labels.contains("membrane_swapped"));
}

#[test]
fn sweep_emits_consistent_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let csv = dir.path().join("sweep.csv");
    assert_eq!(
        run(&[
            "sweep",
            "--gamma-max",
            "0.4",
            "--gamma-steps",
            "3",
            "--dbs",
            "6",
            "--samples",
            "51",
            "--out",
            out.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap()
        ]),
        0
    );
    let report = load_json(&out);
    validate_report(&report);
    let points = report["result"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    let vals: Vec<f64> = points
        .iter()
        .map(|p| p["max_transferred_db"].as_f64().unwrap())
        .collect();
    assert!(vals[0] >= vals[1] - 0.05 && vals[1] >= vals[2] - 0.05);
    let csv_rows = std::fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(csv_rows, 1 + 3);
}

#[test]
fn config_report_reproduces_the_run() {
    // the embedded config, written back to a params file, gives the same
    // derived coupling up to the 12-digit report rounding
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    assert_eq!(run(&["derive", "--out", first.to_str().unwrap()]), 0);
    let report = load_json(&first);
    let params_file = dir.path().join("params.json");
    std::fs::write(
        &params_file,
        serde_json::to_string(&report["config"]).unwrap(),
    )
    .unwrap();
    let second = dir.path().join("second.json");
    assert_eq!(
        run(&["derive", "--params", params_file.to_str().unwrap(), "--out", second.to_str().unwrap()]),
        0
    );
    let g1 = report["result"]["rates"]["g_rad_s"].as_f64().unwrap();
    let g2 = load_json(&second)["result"]["rates"]["g_rad_s"].as_f64().unwrap();
    assert!(((g1 - g2) / g1).abs() < 1e-9, "{g1} vs {g2}");
}
