use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gkiso::io::ComplexFile;

fn gkiso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkiso")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key} in {text}"))
        .parse()
        .unwrap()
}

fn build(dir: &Path, name: &str, n: usize, seed: u64) -> (PathBuf, Output) {
    let path = dir.join(name);
    let out = gkiso(&["build-cap", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", path.to_str().unwrap()]);
    (path, out)
}

fn fixture() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/perturbed_cap.json").to_string()
}

#[test]
fn build_cap_reports_a_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let (path, out) = build(dir.path(), "four.json", 4, 0);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(value(&text, "constraint_residual") < 1e-10);
    assert!(value(&text, "dimension") >= 3.0);
    assert!(path.exists());
}

#[test]
fn invalid_valence_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = build(dir.path(), "two.json", 2, 0);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: "));
}

#[test]
fn build_cap_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, oa) = build(dir.path(), "a.json", 5, 42);
    let (b, ob) = build(dir.path(), "b.json", 5, 42);
    assert!(oa.status.success() && ob.status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let (c, _) = build(dir.path(), "c.json", 5, 43);
    assert_ne!(std::fs::read(dir.path().join("a.json")).unwrap(), std::fs::read(c).unwrap());
}

#[test]
fn fresh_cap_checks_clean() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build(dir.path(), "cap.json", 5, 1);
    let report = dir.path().join("report.csv");
    let out = gkiso(&["check", path.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("result=pass"));
    let csv = std::fs::read_to_string(report).unwrap();
    assert!(csv.starts_with("check,edge,s,mismatch\n"));
}

#[test]
fn perturbed_fixture_names_the_offending_edge() {
    let out = gkiso(&["check", &fixture()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("result=fail"));
    let failing: Vec<&str> = text.lines().filter(|l| l.contains(": fail")).collect();
    assert!(!failing.is_empty());
    assert!(failing.iter().all(|l| l.starts_with("edge 0 ")), "{text}");
}

#[test]
fn order_zero_check_passes_on_g0_consistent_files() {
    let out = gkiso(&["check", &fixture(), "--k", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build(dir.path(), "cap.json", 3, 2);
    assert_eq!(gkiso(&["check", path.to_str().unwrap(), "--k", "0"]).status.code(), Some(0));
}

#[test]
fn projecting_the_constant_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build(dir.path(), "cap.json", 5, 3);
    let csv = dir.path().join("u.csv");
    let out = gkiso(&["solve", path.to_str().unwrap(), "project", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("x,y,u"));
    let worst = rows
        .map(|l| (l.rsplit(',').next().unwrap().parse::<f64>().unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn reaction_solve_recovers_the_stored_field() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build(dir.path(), "cap.json", 5, 4);
    let csv = dir.path().join("u.csv");
    let out = gkiso(&["solve", path.to_str().unwrap(), "reaction", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(value(&text, "coefficient_error") < 1e-6);
    assert!(value(&text, "solution_c1_mismatch") < 1e-7);
}

#[test]
fn missing_file_exits_with_a_message() {
    let out = gkiso(&["solve", "/nonexistent/cap.json", "project"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: ") && err.contains("/nonexistent/cap.json"), "{err}");
}

#[test]
fn bad_arguments_exit_with_usage_errors() {
    let out = gkiso(&["export", &fixture(), "volume"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: usage: "));
    let out = gkiso(&["export", &fixture(), "report", "--format", "obj"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn obj_at_resolution_two_has_four_vertices_per_patch() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build(dir.path(), "cap.json", 5, 5);
    let out = gkiso(&["export", path.to_str().unwrap(), "surface", "--format", "obj", "--resolution", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let verts: Vec<[f64; 3]> = text
        .lines()
        .filter(|l| l.starts_with("v "))
        .map(|l| {
            let v: Vec<f64> = l[2..].split_whitespace().map(|t| t.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect();
    let faces: Vec<Vec<usize>> = text
        .lines()
        .filter(|l| l.starts_with("f "))
        .map(|l| l[2..].split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect();
    assert_eq!(verts.len(), 20);
    assert_eq!(faces.len(), 5);
    for f in &faces {
        // counterclockwise quads have positive signed area in the plane
        let p: Vec<[f64; 3]> = f.iter().map(|&i| verts[i - 1]).collect();
        let area: f64 = (0..4).map(|i| p[i][0] * p[(i + 1) % 4][1] - p[(i + 1) % 4][0] * p[i][1]).sum();
        assert!(area > 0.0);
    }
}

#[test]
fn field_csv_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build(dir.path(), "cap.json", 6, 6);
    let csv = dir.path().join("f.csv");
    let out = gkiso(&["export", path.to_str().unwrap(), "field", "--resolution", "7", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next(), Some("patch,x,y,value"));
    assert_eq!(text.lines().count() - 1, 6 * 7 * 7);
}

#[test]
fn exported_surface_matches_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build(dir.path(), "cap.json", 5, 7);
    let out = gkiso(&["export", path.to_str().unwrap(), "surface", "--resolution", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let geometry = ComplexFile::read(&path).unwrap().to_complex().unwrap().geometry.unwrap();
    let text = stdout(&out);
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("patch,u,v,x,y"));
    let mut count = 0;
    for row in rows.step_by(7) {
        let f: Vec<&str> = row.split(',').collect();
        let patch: usize = f[0].parse().unwrap();
        let nums: Vec<f64> = f[1..].iter().map(|t| t.parse().unwrap()).collect();
        let x = geometry[patch].eval([nums[0], nums[1]]).unwrap();
        assert!((x[0] - nums[2]).abs() < 1e-12 && (x[1] - nums[3]).abs() < 1e-12);
        count += 1;
    }
    assert!(count > 10);
}

#[test]
fn report_export_lists_every_edge() {
    let out = gkiso(&["export", &fixture(), "report", "--samples", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("check,edge,s,mismatch"));
    assert_eq!(text.lines().filter(|l| l.starts_with("lemma,")).count(), 3 * 5);
}
