use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tandem-ics"))
}

fn iris() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/iris.csv")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in {out}"))
        .to_string()
}

#[test]
fn simulate_is_deterministic() {
    let a = run(&["simulate", "mix:3:70-30:delta10:n50", "--seed", "4"]);
    let b = run(&["simulate", "mix:3:70-30:delta10:n50", "--seed", "4"]);
    let c = run(&["simulate", "mix:3:70-30:delta10:n50", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let s = text(&a.stdout);
    assert_eq!(s.lines().next(), Some("x1,x2,x3,label"));
    assert_eq!(s.lines().count(), 51);
}

#[test]
fn pipeline_on_iris() {
    let dir = tempfile::tempdir().unwrap();
    let part = dir.path().join("part.csv");
    let iris = iris();
    let out = run(&[
        "run",
        iris.to_str().unwrap(),
        "--label",
        "species",
        "--reduction",
        "ics:tcov:2,cov/normal:0.05",
        "-k",
        "3",
        "-o",
        part.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let err = text(&out.stderr);
    assert_eq!(field(&err, "selected"), "1");
    let a: f64 = field(&err, "ari").parse().unwrap();
    assert!((0.85..=0.95).contains(&a), "{a}");

    let eval = run(&["evaluate", iris.to_str().unwrap(), "--label", "species", "--clusters", part.to_str().unwrap()]);
    assert!(eval.status.success());
    let again: f64 = field(&text(&eval.stdout), "ari").parse().unwrap();
    assert!((again - a).abs() < 1e-6);
}

#[test]
fn select_reports_one_based_indices() {
    let iris = iris();
    let out = run(&["select", iris.to_str().unwrap(), "--label", "species", "--pair", "tcov:2,cov", "--criterion", "normal:0.05"]);
    assert!(out.status.success());
    assert_eq!(field(&text(&out.stdout), "selected"), "1");
    let med = run(&["select", iris.to_str().unwrap(), "--label", "species", "--criterion", "med"]);
    assert_eq!(med.status.code(), Some(1), "med needs k");
}

#[test]
fn ics_and_pca_write_scores() {
    let iris = iris();
    let ics = run(&["ics", iris.to_str().unwrap(), "--label", "species", "--pair", "cov,cov4"]);
    assert!(ics.status.success());
    let s = text(&ics.stdout);
    assert_eq!(s.lines().next(), Some("IC1,IC2,IC3,IC4,label"));
    assert_eq!(s.lines().count(), 151);
    assert_eq!(field(&text(&ics.stderr), "eigenvalues").split(' ').count(), 4);

    let pca = run(&["pca", iris.to_str().unwrap(), "--label", "species", "--rule", "kminus1", "-k", "3"]);
    assert!(pca.status.success());
    assert_eq!(field(&text(&pca.stderr), "retained"), "1 2");
}

#[test]
fn cluster_writes_a_partition() {
    let iris = iris();
    let out = run(&["cluster", iris.to_str().unwrap(), "--label", "species", "--method", "pam", "-k", "3"]);
    assert!(out.status.success());
    let s = text(&out.stdout);
    assert_eq!(s.lines().next(), Some("row,cluster"));
    assert_eq!(s.lines().count(), 151);
}

#[test]
fn invalid_input_exits_with_one() {
    let iris = iris();
    let iris = iris.to_str().unwrap();
    for args in [
        vec!["run", iris, "--label", "species", "-k", "3", "--reduction", "tsne"],
        vec!["run", "/definitely/missing.csv", "-k", "3"],
        vec!["run", iris, "-k", "3"],
        vec!["cluster", iris, "--label", "species"],
        vec!["simulate", "mix:3:50-50"],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", text(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    assert!(run(&["--help"]).status.success());
}

#[test]
fn runtime_failure_exits_with_two() {
    let iris = iris();
    let out = run(&["run", iris.to_str().unwrap(), "--label", "species", "-k", "3", "--reduction", "ics:cov,cov4/normal:0.0000001"]);
    assert_eq!(out.status.code(), Some(2));
}

fn write_config(dir: &Path, methods: &str, replications: usize) -> PathBuf {
    let path = dir.join("grid.toml");
    std::fs::write(
        &path,
        format!(
            "settings = [\"mix:4:50-50:delta10:n120\"]\nmethods = [{methods}]\nclusterers = [\"kmeans\"]\nreplications = {replications}\nbase_seed = 9\n"
        ),
    )
    .unwrap();
    path
}

fn without_wall_time(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.rsplitn(3, ',').collect();
            f.remove(1);
            f.join(",")
        })
        .collect()
}

#[test]
fn experiment_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "\"ics:tcov:2,cov/med\"", 3);
    let records = dir.path().join("out.csv");
    let out = run(&["experiment", cfg.to_str().unwrap(), "-o", records.to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = std::fs::read_to_string(&records).unwrap();
    assert_eq!(body.lines().count(), 4);
    let summary = std::fs::read_to_string(dir.path().join("out.summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);

    let single = run(&["experiment", cfg.to_str().unwrap(), "--threads", "1"]);
    assert!(single.status.success());
    assert_eq!(without_wall_time(&body), without_wall_time(&text(&single.stdout)));

    let reseeded = run(&["experiment", cfg.to_str().unwrap(), "--seed", "10"]);
    assert_ne!(without_wall_time(&body), without_wall_time(&text(&reseeded.stdout)));
}

#[test]
fn experiment_with_every_cell_failing_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "\"ics:cov,cov4/normal:0.0000001\"", 2);
    let out = run(&["experiment", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let body = text(&out.stdout);
    assert_eq!(body.lines().count(), 3);
    assert!(body.lines().skip(1).all(|l| l.ends_with("empty-selection")));
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "settings = []\nmethods = [\"none\"]\nclusterers = [\"kmeans\"]\nreplications = 1\nbase_seed = 0\n").unwrap();
    assert_eq!(run(&["experiment", path.to_str().unwrap()]).status.code(), Some(1));
}
