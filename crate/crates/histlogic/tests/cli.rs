use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_histlogic"));
    c.env_remove("HISTLOGIC_EPS");
    c
}

fn path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn builtin_two_device_prints_a_quarter() {
    let o = run(&[
        "builtin",
        "two-device",
        "--query",
        "prob (X+*Z+ @ t3) given (psi1 @ t1) in F1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("value: 0.25\n"), "{}", stdout(&o));
}

#[test]
fn builtin_defaults_check_every_family() {
    let o = run(&["builtin", "spin-measurement"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("verdict: Consistent").count(), 4);
}

#[test]
fn builtin_parameters() {
    let q = "prob (alpha @ t1) given (X+ @ t2) in F1 expect 1";
    assert_eq!(
        run(&[
            "builtin",
            "spin-measurement",
            "--param",
            "completion=mixing",
            "--query",
            q
        ])
        .status
        .code(),
        Some(0)
    );
    // Without conditioning on readiness the Gram-Schmidt completion loses
    // the record.
    let o = run(&[
        "builtin",
        "spin-measurement",
        "--param",
        "completion=gram-schmidt",
        "--query",
        q,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("value: 0.5\n"));
    let o = run(&[
        "builtin",
        "double-slit",
        "--param",
        "m=6",
        "--param",
        "phase_b=2.0943951023931953",
        "--query",
        "prob (Dstar3 @ t3) given (Psi1 @ t1) in F1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        run(&["builtin", "double-slit", "--param", "m=3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["builtin", "two-device", "--param", "colour=red"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["builtin", "nonexistent"]).status.code(), Some(2));
    assert_eq!(
        run(&["builtin", "two-device", "--query", "prob (X+Z+ @ t3) given"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn json_report_is_versioned() {
    let file = path("tests/corpus/spin_retrodiction.hl");
    let o = run(&["run", file.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["summary"]["ok"], v["summary"]["total"]);
    assert_eq!(v["queries"][1]["result"]["value"], 1.0);
    assert_eq!(v["queries"][0]["result"]["verdict"], "consistent");
}

#[test]
fn tolerance_from_environment_and_flags() {
    let file = path("tests/fixtures/failing_expectation.hl");
    let f = file.to_str().unwrap();
    // 1 vs an expected 0.5 passes only with a very loose tolerance.
    assert_eq!(run(&["run", f]).status.code(), Some(1));
    assert_eq!(
        bin()
            .args(["run", f])
            .env("HISTLOGIC_EPS", "0.6")
            .output()
            .unwrap()
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        bin()
            .args(["run", f, "--eps", "1e-9"])
            .env("HISTLOGIC_EPS", "0.6")
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        bin()
            .args(["run", f])
            .env("HISTLOGIC_EPS", "loose")
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["run", f, "--eps", "-1"]).status.code(), Some(2));
}

#[test]
fn consistency_bound_flag() {
    let file = path("tests/corpus/double_slit.hl");
    // With a huge bound the which-slit family counts as consistent, so its
    // `expect inconsistent` fails.
    let o = run(&["run", file.to_str().unwrap(), "--eps-consistency", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_and_parse_errors_exit_two() {
    let o = run(&[
        "run",
        path("tests/fixtures/syntax_error.hl").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains(":3:"), "{err}");
    let o = run(&[
        "check",
        path("tests/fixtures/undeclared.hl").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("undeclared"));
    assert_eq!(
        run(&["run", "/nonexistent/model.hl"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["run"]).status.code(), Some(2));
}

#[test]
fn check_does_not_evaluate() {
    let o = run(&[
        "check",
        path("tests/fixtures/failing_expectation.hl")
            .to_str()
            .unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ok (4 declarations, 1 queries)"));
}

#[test]
fn engine_errors_are_reported_per_query() {
    let dir = std::env::temp_dir().join(format!("histlogic-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("zero.hl");
    std::fs::write(
        &file,
        "space H dim 2 basis a b\r\nprojector p = ket a\r\ntimes t1\r\nfamily F = { (p @ t1) }\r\n\
         query prob (p @ t1) given ((p @ t1) & ~(p @ t1)) in F\r\nquery consistent F\r\n\
         query prob (p @ t1) given (ket ((a + b) / sqrt2) @ t1) in F expect error\r\n",
    )
    .unwrap();
    let o = run(&["run", file.to_str().unwrap()]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.contains("status: error"), "{out}");
    assert!(
        out.contains("summary: 3 queries, 2 ok, 0 failed, 1 error"),
        "{out}"
    );
    std::fs::remove_dir_all(dir).unwrap();
}
