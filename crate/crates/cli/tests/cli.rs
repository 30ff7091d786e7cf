use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trgeo_cli::{parse_scenario, CliError};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn out_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("trgeo-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn trgeo(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trgeo"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn results(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap()
}

#[test]
fn classify_scenario_reports_three_classes() {
    let out = out_dir("classify");
    let o = trgeo(&["curve", "classify"], &scenario("curve-classify"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = results(&out);
    let classes: Vec<&str> = r["result"]["classifications"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["class"].as_str().unwrap())
        .collect();
    assert_eq!(classes, ["geodesic_annulus", "ray_only", "no_ray"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tolerances"]["tol_scale"], 1.0);
    assert!(manifest["files"].as_array().unwrap().iter().any(|f| f == "classify.csv"));
}

#[test]
fn poincare_convexity_csv() {
    let out = out_dir("convexity");
    let o = trgeo(&["variation", "convexity"], &scenario("convexity-poincare"), &out);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("convexity.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,vol_j,d2,reference"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert!((r[1] - r[3]).abs() < 1e-8 * r[3]);
    }
    assert!(rows[1..19].iter().all(|r| r[2] > 0.0));
    assert!(!text.contains('\r'));
    assert_eq!(results(&out)["result"]["strict_margin_met"], true);
}

#[test]
fn length_profile_columns() {
    let out = out_dir("length");
    assert_eq!(trgeo(&["curve", "length"], &scenario("length-cubic"), &out).status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("length_profile.csv")).unwrap();
    assert!(text.starts_with("r,t,Lambda,d2\n"));
    // seventeen significant digits
    let first = text.lines().nth(1).unwrap();
    assert!(first.split(',').nth(2).unwrap().contains("e0"), "{first}");
    assert_eq!(first.split(',').nth(2).unwrap().split('e').next().unwrap().len(), 18);
}

#[test]
fn flow_writes_per_time_curves_and_containers() {
    let out = out_dir("flow");
    assert_eq!(trgeo(&["flow", "run"], &scenario("flow-annulus"), &out).status.code(), Some(0));
    for k in 0..=5 {
        assert!(out.join(format!("curve_t{k}.csv")).exists());
        let bytes = std::fs::read(out.join(format!("flow_t{k}.trgi"))).unwrap();
        trgeo::formats::decode_immersion(&bytes).unwrap();
    }
    assert_eq!(results(&out)["result"]["commutator_pass"], true);
}

#[test]
fn blow_up_is_a_numerical_failure() {
    let out = out_dir("blowup");
    let o = trgeo(&["run"], &scenario("flow-blowup"), &out);
    assert_eq!(o.status.code(), Some(3));
    let r = results(&out);
    assert_eq!(r["status"], "numerical_failure");
    assert_eq!(r["failure"]["kind"], "BlowUpDetected");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn variation_summary_csv() {
    let out = out_dir("second");
    assert_eq!(trgeo(&["variation", "second"], &scenario("variation-second-torus"), &out).status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(text.starts_with("case,analytic,fd,rel_err,order\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn malformed_scenarios_exit_with_two() {
    let dir = out_dir("bad");
    std::fs::create_dir_all(&dir).unwrap();
    for (i, body) in [
        "{ not json",
        r#"{"version": 2, "name": "x", "task": {"op": "jvol_compute"}}"#,
        r#"{"version": 1, "name": "x", "task": {"op": "teleport"}}"#,
        r#"{"version": 1, "name": "x", "task": {"op": "curve_classify", "curves": [], "colour": 1}}"#,
    ]
    .iter()
    .enumerate()
    {
        let path = dir.join(format!("bad{i}.json"));
        std::fs::write(&path, body).unwrap();
        let o = trgeo(&["run"], &path, &dir.join(format!("out{i}")));
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn subcommand_must_match_the_operation() {
    let out = out_dir("mismatch");
    let o = trgeo(&["jvol", "compute"], &scenario("curve-classify"), &out);
    assert_eq!(o.status.code(), Some(2));
    let o = trgeo(&["jvol", "explode"], &scenario("curve-classify"), &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_inputs_are_validation_failures() {
    let dir = out_dir("invalid");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("s.json");
    std::fs::write(
        &path,
        r#"{"version": 1, "name": "x", "task": {"op": "jvol_compute",
            "immersion": {"source": "formula", "chart": {"name": "flat", "n": 2}, "sizes": [12, 12],
                          "formula": {"kind": "product_torus", "r1": 1.0, "r2": 1.0}}}}"#,
    )
    .unwrap();
    let o = trgeo(&["run"], &path, &dir.join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(results(&dir.join("out"))["status"], "validation_failure");
}

#[test]
fn every_bundled_scenario_parses() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            let sc = parse_scenario(&std::fs::read_to_string(&p).unwrap()).unwrap();
            assert_eq!(sc.name, p.file_stem().unwrap().to_string_lossy());
        }
    }
}

#[test]
fn parse_errors_are_classified() {
    assert!(matches!(parse_scenario("[]"), Err(CliError::Parse(_))));
    assert!(matches!(
        parse_scenario(r#"{"version": 1, "name": "x", "task": {"op": "fly"}}"#),
        Err(CliError::UnknownOperation(_))
    ));
    assert!(matches!(parse_scenario(r#"{"name": "x"}"#), Err(CliError::Parse(_))));
}

#[test]
fn scenario_corpus_never_panics() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/scenario_json");
    for e in std::fs::read_dir(dir).unwrap() {
        let bytes = std::fs::read(e.unwrap().path()).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        for cut in [0, 1, text.len() / 3, text.len() / 2] {
            let _ = parse_scenario(&text[..text.len() - cut.min(text.len())]);
        }
        if let Ok(sc) = parse_scenario(&text) {
            parse_scenario(&serde_json::to_string(&sc).unwrap()).unwrap();
        }
    }
}
