use std::path::{Path, PathBuf};
use std::process::Command;

use gkz::report::ReportFile;
use gkz::scenario_file::ScenarioFile;
use gkz_core::system::{build_system, parse_matrix_block, render_system};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["gkz"];
    full.extend_from_slice(args);
    let code = gkz::cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn system_prints_kernel_of_quadratic() {
    let (code, out, _) = run(&["system", path_str(&example("quadratic_root"))]);
    assert_eq!(code, 0);
    assert!(out.contains("kernel basis: (1, -2, 1)"), "{out}");
}

#[test]
fn system_of_airy_has_no_indicator_rows() {
    let (code, out, _) = run(&["system", path_str(&example("airy"))]);
    assert_eq!(code, 0);
    assert!(out.contains("indicator rows: none (exp factor)"), "{out}");
    assert!(out.contains("box: ∂(1,1)^3 − ∂(1,3)"), "{out}");
}

#[test]
fn duplicate_monomial_is_rejected_with_document_path() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("dup.json");
    std::fs::write(
        &file,
        r#"{"m": 1, "factors": [{"kind": "log", "support": [[0], [1], [1]], "coefficients": [-1, 1, 2]}],
            "twist": [1], "function": {"kind": "root", "base_root": 0.3}}"#,
    )
    .unwrap();
    let (code, _, err) = run(&["system", path_str(&file)]);
    assert_eq!(code, 2);
    assert!(err.contains("duplicate monomial in factor 1"), "{err}");
    assert!(err.contains("factors[0].support"), "{err}");
}

#[test]
fn missing_file_and_bad_flags_exit_2() {
    assert_eq!(run(&["system", "/nonexistent/x.json"]).0, 2);
    assert_eq!(run(&["verify", "--no-such-flag", "x.json"]).0, 2);
    assert_eq!(run(&[]).0, 2);
}

fn period_value(name: &str, extra: &[&str]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("p.json");
    let scenario = example(name);
    let mut args = vec!["period", path_str(&scenario), "--out", path_str(&out_file)];
    args.extend_from_slice(extra);
    let (code, out, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert!(out_file.exists());
    out.lines().find(|l| l.starts_with("value = ")).unwrap().to_string()
}

#[test]
fn period_of_residue_circle_is_pi_i() {
    assert!(period_value("residue_circle", &[]).starts_with("value = 0+3.14159265"));
}

#[test]
fn period_of_beta_is_one_sixth() {
    assert!(period_value("beta", &[]).starts_with("value = 0.16666666"));
}

#[test]
fn gl_quadratic_is_reciprocal_of_leading_coefficient() {
    assert!(period_value("gl_quadratic", &[]).starts_with("value = 0.14285714"));
    assert!(period_value("gl_quadratic", &["--point", "[1, 0.5, 4]"]).starts_with("value = 0.25"));
}

#[test]
fn period_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("p.json");
    let (code, _, _) = run(&["period", path_str(&example("gl_quadratic")), "--out", path_str(&out_file)]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out_file).unwrap();
    let report = ReportFile::parse(&text).unwrap();
    assert_eq!(report.to_json(), text);
    match report {
        ReportFile::Period(p) => {
            assert_eq!(p.schema_version, 1);
            assert_eq!(p.scenario.sha256.len(), 64);
            assert!((p.value[0] - 1.0 / 7.0).abs() < 1e-14);
        }
        ReportFile::Verify(_) => panic!("expected a period report"),
    }
}

#[test]
fn bad_point_is_an_input_error() {
    let (code, _, err) = run(&["period", path_str(&example("gl_quadratic")), "--point", "[1, 2]"]);
    assert_eq!(code, 2);
    assert!(err.contains("--point"), "{err}");
}

fn verify_to(name: &str, out_file: &Path, extra: &[&str]) -> (i32, String) {
    let scenario = example(name);
    let mut args = vec!["verify", path_str(&scenario), "--out", path_str(out_file)];
    args.extend_from_slice(extra);
    let (code, out, err) = run(&args);
    assert!(err.is_empty() || code == 2, "{err}");
    (code, out)
}

#[test]
fn quadratic_root_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.json");
    let (code, out) = verify_to("quadratic_root", &file, &[]);
    assert_eq!(code, 0, "{out}");
    let ReportFile::Verify(r) = ReportFile::parse(&std::fs::read_to_string(&file).unwrap()).unwrap() else {
        panic!("expected a verify report");
    };
    assert!(r.passed);
    assert!(r.max_relative.parse::<f64>().unwrap() < 1e-6);
    assert_eq!(r.points.len(), 3);
    assert!(r.notes.iter().any(|n| n.contains("eigenvalue 0 and exponent eigenvalue -1")));
}

#[test]
fn airy_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = verify_to("airy", &dir.path().join("r.json"), &[]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn verify_writes_report_beside_scenario_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("quad.json");
    std::fs::copy(example("quadratic_root"), &scenario).unwrap();
    let (code, _, _) = run(&["verify", path_str(&scenario), "--points", "1"]);
    assert_eq!(code, 0);
    assert!(dir.path().join("quad.report.json").exists());
}

#[test]
fn corrupted_eigenvalue_fails_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_gkz"))
        .args(["verify", path_str(&example("quadratic_root")), "--corrupt-eigenvalue", "--out"])
        .arg(dir.path().join("r.json"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stdout).contains("result: FAIL"));

    let ok = Command::new(env!("CARGO_BIN_EXE_gkz"))
        .args(["verify", path_str(&example("quadratic_root")), "--out"])
        .arg(dir.path().join("r2.json"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn corrupt_index_out_of_range_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = verify_to("quadratic_root", &dir.path().join("r.json"), &["--corrupt-eigenvalue", "9"]);
    assert_eq!(code, 2);
}

#[test]
fn verify_is_deterministic_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    verify_to("gl_cubic", &a, &["--jobs", "1"]);
    verify_to("gl_cubic", &b, &["--jobs", "3"]);
    let parse = |p: &Path| match ReportFile::parse(&std::fs::read_to_string(p).unwrap()).unwrap() {
        ReportFile::Verify(r) => r,
        ReportFile::Period(_) => panic!("expected a verify report"),
    };
    let (ra, rb) = (parse(&a), parse(&b));
    assert_eq!(serde_json::to_string(&ra.residuals).unwrap(), serde_json::to_string(&rb.residuals).unwrap());
    assert_eq!(ra.points, rb.points);
    assert_eq!(ra.max_relative, rb.max_relative);
}

#[test]
fn report_command_renders_and_keeps_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.json");
    let (code, _) = verify_to("gl_quadratic", &file, &["--corrupt-eigenvalue", "1"]);
    assert_eq!(code, 1);
    let (code, out, _) = run(&["report", path_str(&file)]);
    assert_eq!(code, 1);
    assert!(out.contains("result: FAIL"));
    assert!(out.contains("max relative residual"));
}

#[test]
fn normalized_scenario_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["gauss", "airy", "cubic_root_parametric", "pochhammer"] {
        let target = dir.path().join(format!("{name}.json"));
        let (code, first, _) =
            run(&["system", path_str(&example(name)), "--emit-normalized", "--out", path_str(&target)]);
        assert_eq!(code, 0);
        let normal = std::fs::read_to_string(&target).unwrap();
        let (code, second, _) = run(&["system", path_str(&target), "--emit-normalized"]);
        assert_eq!(code, 0);
        let system_text = |s: &str| s.lines().filter(|l| !l.starts_with("normalized")).collect::<Vec<_>>().join("\n");
        assert_eq!(system_text(&first), system_text(&second), "{name}");
        assert_eq!(std::fs::read_to_string(&target).unwrap(), normal, "{name}: normalizing is idempotent");
    }
}

#[test]
fn matrix_block_round_trips_through_text() {
    for name in ["gauss", "airy", "quadratic_root", "cubic_root_parametric", "gl_cubic"] {
        let (code, out, _) = run(&["system", path_str(&example(name))]);
        assert_eq!(code, 0);
        let file = ScenarioFile::load(&example(name)).unwrap();
        let model = file.validate().unwrap();
        let system = build_system(model.scenario(), 4);
        assert_eq!(out, render_system(&system));
        assert_eq!(parse_matrix_block(&out).unwrap(), system.matrix, "{name}");
    }
}
