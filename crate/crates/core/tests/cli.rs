use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use abf_core::problem::make_lasso;
use abf_core::solvers::{run, Method, RunConfig};

fn abf(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_abf"));
    cmd.args(args).env_remove("ABF_OUTPUT_DIR");
    if let Some(d) = env_dir {
        cmd.env("ABF_OUTPUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_spec(dir: &Path, body: &str) -> String {
    let p = dir.join("spec.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn verify_abf_quadratic_all_pass() {
    let o = abf(
        &["verify", "quadratic:dim=20,cond=100,seed=1", "abf", "--iters", "500"],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(!text.contains("FAIL"));
    for name in [
        "energy_monotone",
        "rate_bound",
        "eta_nonnegative",
        "prox_descent",
        "gradient_constant_on_solutions",
    ] {
        assert!(
            text.lines().any(|l| l.starts_with("PASS") && l.contains(name)),
            "{name}\n{text}"
        );
    }
}

#[test]
fn verify_abf_sc_on_convex_instance_is_config_error() {
    let o = abf(
        &[
            "verify",
            "lasso:rows=20,cols=40,reg=0.5,seed=7",
            "abf_sc",
            "--iters",
            "10",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("strong"), "{}", stderr(&o));
}

#[test]
fn verify_fista_lasso_subset() {
    let o = abf(
        &[
            "verify",
            "lasso:rows=20,cols=40,reg=0.5,seed=7",
            "fista",
            "--iters",
            "500",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("rate_bound"));
    assert!(!text.contains("energy_monotone"));
    assert!(!text.contains("eta_nonnegative"));
}

#[test]
fn unknown_method_and_bad_args_exit_2() {
    assert_eq!(
        abf(&["verify", "quadratic:dim=2,cond=1", "newton"], None).status.code(),
        Some(2)
    );
    assert_eq!(abf(&["compare", "quadratic:dim=2"], None).status.code(), Some(2));
    assert_eq!(abf(&["frobnicate"], None).status.code(), Some(2));
}

fn table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn compare_labels_output_as_observational() {
    let o = abf(&["compare", "quadratic:dim=10,cond=1,seed=3", "--iters", "20"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("observational"));
    let rows = table(&text);
    assert_eq!(rows.len(), 20);
    for row in &rows {
        let ratio: f64 = row[5].parse().unwrap();
        assert!(ratio.is_finite());
    }
    let last: f64 = rows.last().unwrap()[1].parse().unwrap();
    assert!(last.abs() <= 1e-14);
}

#[test]
fn compare_lasso_gaps_under_bounds() {
    let o = abf(
        &["compare", "lasso:rows=20,cols=40,reg=0.5,seed=7", "--iters", "1000"],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let rows = table(&stdout(&o));
    assert_eq!(rows.len(), 1000);
    for row in rows {
        let v: Vec<f64> = row.iter().map(|c| c.parse().unwrap()).collect();
        assert!(v[1] <= v[2] * (1.0 + 1e-10) + 1e-12, "abf row {row:?}");
        assert!(v[3] <= v[4] * (1.0 + 1e-10) + 1e-12, "fista row {row:?}");
    }
}

#[test]
fn compare_zero_iterations_is_header_only() {
    let o = abf(&["compare", "lasso:rows=5,cols=8,reg=0.5,seed=1", "--iters", "0"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("k,abf_gap,abf_bound,fista_gap,fista_bound,ratio"));
    assert!(table(&text).is_empty());
}

#[test]
fn compare_writes_csv_when_env_set() {
    let dir = tempfile::tempdir().unwrap();
    let o = abf(
        &["compare", "lasso:rows=5,cols=8,reg=0.5,seed=1", "--iters", "5"],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(0));
    let files: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(files.len(), 2, "{files:?}");
}

#[test]
fn run_empty_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"output_dir": "out", "runs": []}"#);
    let o = abf(&["run", &spec], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("out/summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v, serde_json::json!([]));
}

#[test]
fn run_lasso_spec_writes_clean_summary_and_matching_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{
  "output_dir": "out",
  "runs": [
    {"instance": "lasso:rows=20,cols=40,reg=0.5,seed=7", "method": "abf", "config": {"max_iterations": 300}},
    {"instance": {"kind": "lasso", "dimension": 40, "seed": 7, "parameters": {"rows": 20, "reg_weight": 0.5}},
     "method": "fista", "config": {"max_iterations": 300}}
  ]
}"#,
    );
    let o = abf(&["run", &spec], None);
    assert_eq!(o.status.code(), Some(0), "{}\n{}", stdout(&o), stderr(&o));
    let out = dir.path().join("out");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let entries = summary.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        assert_eq!(e["violations"], serde_json::json!([]));
        assert!(e["final_gap"].as_f64().unwrap() >= 0.0);
        assert!(e["bound_slack_min"].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(entries[0]["method"], "abf");

    let inst = make_lasso(20, 40, 0.5, 7).unwrap();
    let expected = run(&inst, &RunConfig::new(Method::Abf, 300)).unwrap().to_csv();
    let csv = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("000_abf"))
        .unwrap();
    assert_eq!(fs::read_to_string(csv).unwrap(), expected);
    assert!(fs::read_dir(&out)
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_str().unwrap().ends_with(".tmp")));
}

#[test]
fn run_step_above_inverse_lipschitz_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"runs": [{"instance": "lasso:rows=20,cols=40,reg=0.5,seed=7", "method": "abf", "config": {"step": 100.0}}]}"#,
    );
    let o = abf(&["run", &spec], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("runs[0].step"), "{}", stderr(&o));
}

#[test]
fn run_parse_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "{\n  \"runs\": [\n    {\"method\": }\n  ]\n}\n");
    let o = abf(&["run", &spec], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(":3:"), "{err}");
}

#[test]
fn run_missing_spec_file_exits_2() {
    let o = abf(&["run", "/nonexistent/spec.json"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_env_overrides_spec() {
    let dir = tempfile::tempdir().unwrap();
    let alt = dir.path().join("alt");
    let spec = write_spec(
        dir.path(),
        r#"{"output_dir": "out", "format": "json", "runs": [{"instance": "quadratic:dim=4,cond=10,seed=2", "method": "pg", "config": {"max_iterations": 5}}]}"#,
    );
    let o = abf(&["run", &spec], Some(&alt));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
    let names: Vec<String> = fs::read_dir(&alt)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(
        names.iter().any(|n| n.ends_with(".json") && n.starts_with("000_pg")),
        "{names:?}"
    );
    assert!(names.contains(&"summary.json".to_string()));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let body = r#"{"output_dir": "out", "runs": [
        {"instance": "quadratic:dim=20,cond=100,seed=1,l1=0.5", "method": "abf_sc", "config": {"max_iterations": 200}},
        {"instance": "quadratic:dim=20,cond=100,seed=1", "method": "fista_sc", "config": {"max_iterations": 50}},
        {"instance": "lasso:rows=20,cols=40,reg=0.5,seed=7", "method": "abf", "config": {"max_iterations": 300}}
    ]}"#;
    for d in [&a, &b] {
        let spec = write_spec(d.path(), body);
        let o = abf(&["run", &spec], None);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let list = |d: &Path| {
        let mut v: Vec<_> = fs::read_dir(d.join("out"))
            .map(|r| r.map(|e| e.unwrap().path()).collect())
            .unwrap_or_default();
        v.sort();
        v
    };
    let (la, lb) = (list(a.path()), list(b.path()));
    assert_eq!(la.len(), 4);
    assert_eq!(la.len(), lb.len());
    for (x, y) in la.iter().zip(&lb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}
