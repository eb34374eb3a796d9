use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superchannel")).args(args).output().expect("binary runs")
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", out.to_str().unwrap()]);
    run(&full)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn catalog_lists_the_four_systems() {
    let o = run(&["catalog"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, ["moser", "reduced-moser", "product", "generic3"]);
    assert!(text.lines().all(|l| l.ends_with("[ok]")));
}

#[test]
fn sweep_on_reduced_moser_is_linear_in_inverse_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["sweep", "--system", "reduced-moser", "--epsilons", "1e-2,3e-3,1e-3", "--target-drift", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fit = json(&dir.path().join("fit.json"));
    let p = fit["p"].as_f64().unwrap();
    assert!((p - 1.0).abs() <= 1e-3, "p = {p}");
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("epsilon,delta,tau,"));
}

#[test]
fn one_step_normal_form_solves_the_homological_equation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["normal-form", "--system", "generic3", "--steps", "1", "--epsilon", "1e-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("normal_form.json"));
    assert!(r["residual_homological"].as_f64().unwrap() <= 1e-9);
    for key in ["K", "kappa", "gamma", "sup_f1", "phi_displacement", "lambda", "theta_star", "I_star"] {
        assert!(!r[key].is_null(), "missing {key}");
    }
    assert!(r["phi_displacement"].as_f64().unwrap() <= r["displacement_bound"].as_f64().unwrap());
}

#[test]
fn plots_need_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["plots", "--out", dir.path().to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("orbit.csv"), "{}", stderr(&o));
}

#[test]
fn drift_run_then_plots() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["drift", "--system", "reduced-moser", "--epsilon", "1e-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = json(&dir.path().join("drift.json"));
    let (drift, delta) = (rec["drift"].as_f64().unwrap(), rec["delta"].as_f64().unwrap());
    assert!((drift - delta).abs() <= 1e-6);
    let o = run(&["plots", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let script = fs::read_to_string(dir.path().join("orbit.gp")).unwrap();
    assert!(script.contains("'orbit.csv'") && script.contains("band"));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["bogus"][..],
        &["drift", "--system", "generic3"],
        &["drift", "--system", "generic3", "--epsilon", "-1"],
        &["drift", "--system", "generic3", "--epsilon", "1e-3", "--radius", "2"],
        &["normal-form", "--system", "generic3", "--epsilon", "1e-3", "--steps", "3"],
        &["sweep", "--system", "generic3", "--epsilons", "1e-2,2e-2,3e-2", "--target-drift", "0.1"],
        &["drift", "--system", "nope", "--epsilon", "1e-3"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = run(&["drift", "--system", "generic3", "--epsilon", "-1"]);
    assert!(stderr(&o).contains("--epsilon"));
}

#[test]
fn system_file_matches_catalog_entry() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(&dir.path().join("r"), &["reduce", "--system", "moser"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reduced = dir.path().join("r/reduced.json");
    let a = run_in(&dir.path().join("a"), &["drift", "--system-file", reduced.to_str().unwrap(), "--epsilon", "1e-3"]);
    let b = run_in(&dir.path().join("b"), &["drift", "--system", "reduced-moser", "--epsilon", "1e-3"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    let da = json(&dir.path().join("a/drift.json"));
    let db = json(&dir.path().join("b/drift.json"));
    assert!((da["drift"].as_f64().unwrap() - db["drift"].as_f64().unwrap()).abs() < 1e-12);
    let sidecar = json(&dir.path().join("r/reduction.json"));
    assert_eq!(sidecar["detM"].as_i64().unwrap().abs(), 1);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    // θ2(0) = 0.25 overshoots δ slightly and is flagged; a flagged run must
    // be just as reproducible
    let args = ["drift", "--system", "generic3", "--epsilon", "1e-2", "--theta2", "0.25"];
    let codes: Vec<_> = ["a", "b"].iter().map(|sub| run_in(&dir.path().join(sub), &args).status.code()).collect();
    assert_eq!(codes, [Some(1), Some(1)]);
    for name in ["orbit.csv", "drift.json", "run.json"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let other = run_in(&dir.path().join("c"), &["drift", "--system", "generic3", "--epsilon", "1e-2"]);
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(json(&dir.path().join("a/run.json"))["run_id"], json(&dir.path().join("c/run.json"))["run_id"]);
}
