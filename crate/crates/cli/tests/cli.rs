use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use symcurve::curve::load_curve;
use symcurve::normal::random_symplectic;

fn symcurve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symcurve")).args(args).env_remove("SYMCURVE_PRECISION").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const D21: &str = r#"{"rows":[{"length":2},{"length":1}]}"#;

#[test]
fn prolongation_of_three_rows_of_length_one_is_so3() {
    let out = symcurve(&["prolongation", "--diagram", r#"{"rows":[{"length":1,"multiplicity":3}]}"#]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["dim_u"], 3);
    assert_eq!(v["schema"], "symcurve/1");
    assert!(v["convention_audit"].is_object());
}

#[test]
fn flat_curve_normalizes_to_zero_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.json");
    let out = symcurve(&["flat", "--diagram", D21, "--out", path(&flat)]);
    assert_eq!(out.status.code(), Some(0));
    let out = symcurve(&["normalize", "--curve", path(&flat)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let maps = v["curvature_maps"].as_object().unwrap();
    assert!(!maps.is_empty());
    for m in maps.values() {
        for c in m["block"]["coefficients"].as_array().unwrap() {
            assert!(c.as_array().unwrap().iter().flat_map(|row| row.as_array().unwrap()).all(|x| x.as_str().unwrap().parse::<f64>().unwrap() == 0.0));
        }
    }
}

#[test]
fn equivalent_detects_a_symplectic_transform() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    assert_eq!(symcurve(&["random-curve", "--diagram", D21, "--seed", "3", "--out", path(&a)]).status.code(), Some(0));
    assert_eq!(symcurve(&["random-curve", "--diagram", D21, "--seed", "4", "--out", path(&c)]).status.code(), Some(0));
    let curve = load_curve(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let g = random_symplectic(3, &mut ChaCha8Rng::seed_from_u64(7));
    std::fs::write(&b, curve.transform(&g).unwrap().to_json().to_string()).unwrap();

    let out = symcurve(&["equivalent", path(&a), path(&b)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["verdict"], "equivalent");

    let out = symcurve(&["equivalent", path(&a), path(&c)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["verdict"], "inequivalent");
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    symcurve(&["random-curve", "--diagram", D21, "--seed", "5", "--out", path(&a)]);
    let first = symcurve(&["invariants", "--curve", path(&a), "--seed", "1"]);
    let second = symcurve(&["invariants", "--curve", path(&a), "--seed", "1"]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(symcurve(&["no-such-command"]).status.code(), Some(64));
    assert_eq!(symcurve(&["analyze", "--curve", "/nonexistent/curve.json"]).status.code(), Some(66));
    assert_eq!(symcurve(&["--precision-bits", "32", "flat", "--diagram", D21]).status.code(), Some(64));
    assert_eq!(symcurve(&["flat", "--diagram", "{\"rows\": 3}"]).status.code(), Some(1));
    assert_eq!(symcurve(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"m": 2, "frame_columns": [["1", "0"]]}"#).unwrap();
    let out = symcurve(&["analyze", "--curve", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frame columns"));
}

#[test]
fn small_audit_passes() {
    let out = symcurve(&["audit", "--max-boxes", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["passed"], true);
}

#[test]
fn frenet_reports_helix_curvatures() {
    let dir = tempfile::tempdir().unwrap();
    let helix = dir.path().join("helix.json");
    let comps = symcurve::frenet::helix(&3.into(), &4.into(), &5.into(), 8).unwrap().to_json();
    std::fs::write(&helix, comps.to_string()).unwrap();
    let out = symcurve(&["frenet", "--curve", path(&helix), "--no-reparametrize"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("curvatures"));
}
