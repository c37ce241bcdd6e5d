use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_minmax-mom"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> String {
    let r = run(args);
    assert_eq!(r.code, 0, "args {args:?}\nstderr: {}", r.stderr);
    r.stdout
}

/// Asserts a nonzero exit with exactly one `error: ` line on stderr and
/// returns that line.
fn fails(args: &[&str]) -> (i32, String) {
    let r = run(args);
    assert_ne!(r.code, 0, "args {args:?} should fail\nstdout: {}", r.stdout);
    let lines: Vec<&str> = r.stderr.lines().collect();
    assert_eq!(
        lines.len(),
        1,
        "expected a single error line, got {:?}",
        r.stderr
    );
    assert!(lines[0].starts_with("error: "), "{}", lines[0]);
    (r.code, lines[0].to_string())
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
seed = 11

[synthetic]
n = 64
d = 10
sparsity = 2
n_outliers = 2

[ensemble]
v_count = 3
k_min = 3
k_max = 3
lambdas = [1.0, 0.1]

[experiment]
outlier_grid = [0, 2]
repetitions = 3
"#;

#[test]
fn generate_writes_rows_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.conf", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("nested/b.csv");
    let out = ok(&["generate", "--config", s(&cfg), "--out", s(&a)]);
    assert!(
        out.contains("hard outliers 1, heavy-tail outliers 1"),
        "{out}"
    );
    ok(&["generate", "--config", s(&cfg), "--out", s(&b)]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 65);
    assert!(text.starts_with("y,x1,"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn seed_flag_overrides_config_and_is_required() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "a.conf", SMALL);
    let other = write(
        dir.path(),
        "b.conf",
        &SMALL.replace("seed = 11", "seed = 99"),
    );
    let unseeded = write(dir.path(), "c.conf", &SMALL.replace("seed = 11", ""));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["generate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&[
        "generate",
        "--config",
        s(&other),
        "--seed",
        "11",
        "--out",
        s(&b),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let (_, msg) = fails(&["generate", "--config", s(&unseeded), "--out", s(&b)]);
    assert!(msg.contains("seed"), "{msg}");
}

#[test]
fn odd_outliers_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "odd.conf",
        &SMALL.replace("n_outliers = 2", "n_outliers = 3"),
    );
    let (_, msg) = fails(&[
        "generate",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert!(msg.contains("odd.conf:8:"), "{msg}");
    assert!(msg.contains("n_outliers"), "{msg}");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn select_single_candidate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "one.conf",
        &format!("{SMALL}\n").replace("lambdas = [1.0, 0.1]", "lambdas = [0.1]\nblocks = [[3, 5]]"),
    );
    let data = dir.path().join("d.csv");
    ok(&["generate", "--config", s(&cfg), "--out", s(&data)]);
    let beta = dir.path().join("beta.csv");
    let out = ok(&["select", "--config", s(&cfg), s(&data), "--out", s(&beta)]);
    assert!(out.contains("candidates: 1\n"), "{out}");
    assert!(out.contains("block B[5]^(3) (level 3, index 5)"), "{out}");
    assert!(out.contains("minmax value: 0\n"), "{out}");
    assert!(out.contains("training block size: 8\n"), "{out}");
    let text = fs::read_to_string(&beta).unwrap();
    assert_eq!(text.lines().next(), Some("feature,beta"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn select_full_grid_with_comparator() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "grid.conf",
        r#"
seed = 5
[synthetic]
n = 1000
d = 40
sparsity = 5
n_outliers = 8
[ensemble]
v_count = 40
k_min = 3
k_max = 4
log_lambdas = [-1, -0.5, 0, 0.5, 1, 1.5, 2]
"#,
    );
    let data = dir.path().join("d.csv");
    ok(&["generate", "--config", s(&cfg), "--out", s(&data)]);
    let comp = dir.path().join("comp.csv");
    let b1 = dir.path().join("b1.csv");
    let b3 = dir.path().join("b3.csv");
    let out = ok(&[
        "--threads",
        "1",
        "select",
        "--config",
        s(&cfg),
        s(&data),
        "--out",
        s(&b1),
        "--comparator",
        s(&comp),
    ]);
    assert!(out.contains("candidates: 168\n"), "{out}");
    assert!(out.contains("risk evaluations: 10752\n"), "{out}");
    assert_eq!(
        fs::read_to_string(&comp).unwrap().lines().count(),
        168 * 168 + 1
    );
    ok(&[
        "--threads",
        "3",
        "select",
        "--config",
        s(&cfg),
        s(&data),
        "--out",
        s(&b3),
    ]);
    assert_eq!(fs::read(&b1).unwrap(), fs::read(&b3).unwrap());
}

#[test]
fn select_rejects_seven_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.conf", SMALL);
    let mut text = String::from("y,x1\n");
    for i in 0..7 {
        text.push_str(&format!("{i},{i}\n"));
    }
    let data = write(dir.path(), "seven.csv", &text);
    let (_, msg) = fails(&["select", "--config", s(&cfg), s(&data)]);
    assert!(msg.contains('8'), "{msg}");
}

#[test]
fn select_reports_config_data_mismatch() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.conf", SMALL);
    let deep = write(
        dir.path(),
        "deep.conf",
        &SMALL.replace("k_max = 3", "k_max = 7"),
    );
    let data = dir.path().join("d.csv");
    ok(&["generate", "--config", s(&cfg), "--out", s(&data)]);
    let (_, msg) = fails(&["select", "--config", s(&deep), s(&data)]);
    assert!(msg.contains("k_max"), "{msg}");
}

fn records_body(dir: &Path) -> String {
    fs::read_to_string(dir.join("records.csv")).unwrap()
}

#[test]
fn experiment_writes_and_resumes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.conf", SMALL);
    let out = dir.path().join("run");
    ok(&["experiment", "--config", s(&cfg), "--out", s(&out)]);
    let full = records_body(&out);
    let lines: Vec<&str> = full.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("outliers,rep,err_selected,err_oracle"));
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("outliers,metric,mean,ci95\n"));

    let again = ok(&["experiment", "--config", s(&cfg), "--out", s(&out)]);
    assert!(again.contains("(6 reused)"), "{again}");
    assert_eq!(records_body(&out), full);

    // An interrupted run leaves a prefix and possibly a torn last line.
    let torn = format!(
        "{}\n{}\n{}\n{}",
        lines[0],
        lines[1],
        lines[2],
        &lines[3][..10]
    );
    fs::write(out.join("records.csv"), torn).unwrap();
    let resumed = ok(&["experiment", "--config", s(&cfg), "--out", s(&out)]);
    assert!(resumed.contains("(2 reused)"), "{resumed}");
    let body = records_body(&out);
    assert_eq!(body, full);
    let mut keys: Vec<(&str, &str)> = body
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 6);
}

#[test]
fn single_repetition_flags_ci_as_nan() {
    let dir = TempDir::new().unwrap();
    let text = SMALL
        .replace("outlier_grid = [0, 2]", "outlier_grid = [0]")
        .replace("repetitions = 3", "repetitions = 1");
    let cfg = write(dir.path(), "one.conf", &text);
    let out = dir.path().join("run");
    ok(&["experiment", "--config", s(&cfg), "--out", s(&out)]);
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    for line in agg.lines().skip(1) {
        let ci: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(ci.is_nan(), "{line}");
    }
    let info = fs::read_to_string(out.join("run_info.txt")).unwrap();
    assert!(info.contains("nan when reps = 1"), "{info}");
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .to_string()
}

#[test]
fn bounds_example() {
    let out = ok(&[
        "bounds",
        "--chi",
        "1",
        "--sigma",
        "1",
        "--epsilon",
        "0.01",
        "--v",
        "8",
        "--n",
        "6400",
        "--m",
        "2",
    ]);
    let a: f64 = field(&out, "a").parse().unwrap();
    assert!((a - (0.4 + 0.02 * 2f64.sqrt())).abs() < 1e-12);
    assert_eq!(format!("{a:.4}"), "0.4283");
    assert_eq!(field(&out, "b").parse::<f64>().unwrap(), 8.0);
    assert_eq!(field(&out, "vacuous"), "no");

    let out = ok(&[
        "bounds",
        "--chi",
        "1",
        "--sigma",
        "1",
        "--epsilon",
        "0.01",
        "--v",
        "40",
        "--n",
        "1000",
        "--m",
        "168",
        "--sparsity",
        "20",
        "--dim",
        "2000",
        "--block-size",
        "125",
    ]);
    assert_eq!(field(&out, "effective_block_size"), "6");
    let rate: f64 = field(&out, "lasso_rate").parse().unwrap();
    let expect = 20.0 * (2000.0 * std::f64::consts::E / 20.0).ln() / 125.0;
    assert!((rate - expect).abs() < 1e-12);
}

#[test]
fn bounds_vacuous_flag() {
    let out = ok(&[
        "bounds",
        "--chi",
        "2",
        "--sigma",
        "1",
        "--epsilon",
        "0.5",
        "--v",
        "40",
        "--n",
        "1000",
        "--m",
        "10",
    ]);
    assert!(field(&out, "vacuous").starts_with("yes"), "{out}");
}

#[test]
fn bounds_missing_flag_is_usage_error() {
    let (code, msg) = fails(&[
        "bounds", "--chi", "1", "--sigma", "1", "--v", "8", "--n", "100", "--m", "3",
    ]);
    assert_eq!(code, 2);
    assert!(msg.starts_with("error: usage:"), "{msg}");
    assert!(msg.contains("--epsilon"), "{msg}");
}

#[test]
fn check_passes_and_validates_range() {
    let out = ok(&["check", "--n-min", "8", "--n-max", "20"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS N=")).count(), 13);
    assert!(!out.contains("FAIL"));
    fails(&["check", "--n-min", "7", "--n-max", "20"]);
}

#[test]
fn errors_are_single_line() {
    let dir = TempDir::new().unwrap();
    fails(&[
        "generate",
        "--config",
        s(&dir.path().join("missing.conf")),
        "--out",
        "x.csv",
    ]);
    let bad = write(
        dir.path(),
        "bad.conf",
        "seed = 1\n[ensemble]\nv_count = 3\nk_min = 3\nk_max = 3\nlambdas = [1.0\n",
    );
    let (_, msg) = fails(&["select", "--config", s(&bad), "nowhere.csv"]);
    assert!(msg.contains("bad.conf:6:"), "{msg}");
    fails(&["--threads", "0", "check"]);
    let (code, _) = fails(&["bogus"]);
    assert_eq!(code, 2);
}
