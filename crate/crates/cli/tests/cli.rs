use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shiftlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftlab"))
        .args(args)
        .env_remove("SHIFTLAB_SEED")
        .output()
        .expect("spawn shiftlab")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Value of `column` in the first data row of a two-line CSV.
fn field(csv: &str, column: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == column).unwrap();
    row[i].to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn bounds_t1_example() {
    let out = stdout(&shiftlab(&["bounds", "t1", "--alpha", "0", "--E", "3", "--delta", "0.05"]));
    let rhs: f64 = field(&out, "rhs").parse().unwrap();
    assert!((rhs - (20f64.ln() / 6.0).sqrt()).abs() < 1e-12);
    assert!((rhs - 0.7066).abs() < 1e-4);
}

#[test]
fn bounds_t2_flags_infeasible() {
    let out = stdout(&shiftlab(&["bounds", "t2", "--beta", "1", "--m", "0.9", "--E", "3"]));
    assert_eq!(field(&out, "feasible"), "false");
}

#[test]
fn manifest_goes_to_stderr_without_out_dir() {
    let out = shiftlab(&["bounds", "t1", "--alpha", "0.5", "--E", "9"]);
    let err = String::from_utf8(out.stderr).unwrap();
    let mut lines = err.lines();
    assert_eq!(lines.next().unwrap(), "command,config_hash,seed,version,timestamp");
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[0], "bounds t1");
    assert_eq!(fields[1].len(), 64);
}

#[test]
fn gen_writes_layout_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d1");
    stdout(&shiftlab(&["gen", "--preset", "D1", "--scaling", "listing1", "--n", "50", "--d", "3", "--out", p(&out)]));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["env1.csv", "env2.csv", "env3.csv", "run_manifest.csv", "true_gamma.csv"]);
    let env1 = fs::read_to_string(out.join("env1.csv")).unwrap();
    assert_eq!(env1.lines().next().unwrap(), "0,1,2,3,4,5,6");
    assert_eq!(env1.lines().count(), 51);
    assert!(!env1.contains('\r'));
    let manifest = fs::read_to_string(out.join("run_manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    assert!(manifest.lines().nth(1).unwrap().starts_with("gen,"));
}

#[test]
fn gen_is_deterministic_and_honors_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    stdout(&shiftlab(&["gen", "--n", "40", "--d", "2", "--seed", "9", "--out", p(&a)]));
    stdout(&shiftlab(&["gen", "--n", "40", "--d", "2", "--seed", "9", "--out", p(&b)]));
    let env_out = Command::new(env!("CARGO_BIN_EXE_shiftlab"))
        .args(["gen", "--n", "40", "--d", "2", "--out", p(&c)])
        .env("SHIFTLAB_SEED", "9")
        .output()
        .unwrap();
    assert!(env_out.status.success());
    for f in ["env1.csv", "env2.csv", "env3.csv", "true_gamma.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap());
        assert_eq!(x, fs::read(c.join(f)).unwrap());
    }
    let hash = |d: &Path| {
        let m = fs::read_to_string(d.join("run_manifest.csv")).unwrap();
        m.lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string()
    };
    assert_eq!(hash(&a), hash(&b));
}

#[test]
fn fit_pipeline_orders_d1_d2() {
    let dir = tempfile::tempdir().unwrap();
    let mut spurious = Vec::new();
    for preset in ["D1", "D2"] {
        let data = dir.path().join(preset);
        stdout(&shiftlab(&["gen", "--preset", preset, "--scaling", "paper-text", "--d", "5", "--seed", "1", "--out", p(&data)]));
        let fit_dir = dir.path().join(format!("fit-{preset}"));
        stdout(&shiftlab(&["fit", "--data", p(&data), "--method", "normal-eq", "--out", p(&fit_dir)]));
        let report = fs::read_to_string(fit_dir.join("fit_report.csv")).unwrap();
        assert!(fit_dir.join("weights.csv").exists());
        spurious.push(field(&report, "spurious_mean_abs").parse::<f64>().unwrap());
    }
    assert!(spurious[1] < spurious[0], "{spurious:?}");
}

#[test]
fn shift_marginals_take_ordered_sup() {
    let out = stdout(&shiftlab(&["shift", "--preset", "D1", "--scaling", "listing1", "--d", "1"]));
    let last = out.lines().last().unwrap();
    let alpha: f64 = last.strip_prefix("alpha,").unwrap().parse().unwrap();
    assert!((alpha - (4.0 - 3f64.ln())).abs() < 1e-12);
    assert_eq!(out.lines().next().unwrap(), "env,1,2,3");
}

#[test]
fn shift_log_base_only_rescales_display() {
    let nat = stdout(&shiftlab(&["shift", "--kind", "massart", "--E", "3"]));
    let bits = stdout(&shiftlab(&["shift", "--kind", "massart", "--E", "3", "--log-base", "2"]));
    let alpha = |s: &str| -> f64 {
        s.lines().find_map(|l| l.strip_prefix("alpha,")).unwrap().parse().unwrap()
    };
    assert!((alpha(&bits) - alpha(&nat) / 2f64.ln()).abs() < 1e-12);
}

#[test]
fn massart_run_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    stdout(&shiftlab(&["massart", "--n", "500", "--trials", "5", "--seed", "3", "--out", p(&out)]));
    let trials = fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().next().unwrap(), "trial,lhs,rhs,violated");
    assert_eq!(trials.lines().count(), 6);
    assert!(out.join("summary.csv").exists());
    let sweep = stdout(&shiftlab(&["massart", "--n", "300", "--trials", "3", "--beta-grid", "0.25,0.5"]));
    assert_eq!(sweep.lines().count(), 3);
    let clean = stdout(&shiftlab(&["massart", "--mode", "clean", "--n", "300", "--trials", "3", "--tilt", "0.5"]));
    assert!(clean.lines().nth(1).unwrap().starts_with("clean,"));
}

#[test]
fn colored_reports_counterfactual_gap() {
    let out = stdout(&shiftlab(&["colored", "--n", "2000", "--steps", "300", "--seed", "4"]));
    let gap: f64 = field(&out, "cf_gap").parse().unwrap();
    assert!((0.0..=1.0).contains(&gap));
}

#[test]
fn sweep_then_hyptest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    stdout(&shiftlab(&[
        "sweep", "--n", "800", "--trials", "2", "--steps", "300", "--grid", "0.2,0.4", "--out", p(&out),
    ]));
    let csv = out.join("sweep.csv");
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "trial,e1,e2,dv,y_un,y_e1,cf_gap_un,cf_gap_e1");
    assert_eq!(text.lines().count(), 5);
    let table = stdout(&shiftlab(&["hyptest", "--csv", p(&csv), "--y-col", "y_un", "--x-cols", "e1,e2", "--no-intercept"]));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "name,coef,std_err,t,p,ci_low,ci_high");
    assert!(lines[1].starts_with("e1,") && lines[2].starts_with("e2,"));
    // A constant column next to an intercept is not identifiable.
    let collinear = shiftlab(&["hyptest", "--csv", p(&csv), "--y-col", "y_un", "--x-cols", "e1,e2"]);
    assert_eq!(collinear.status.code(), Some(3));
}

#[test]
fn config_values_apply_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "[bounds]\nalpha = 0.0\nE = 3\ndelta = 0.05\n").unwrap();
    let from_cfg = stdout(&shiftlab(&["--config", p(&cfg), "bounds", "t1"]));
    assert!((field(&from_cfg, "rhs").parse::<f64>().unwrap() - 0.7066).abs() < 1e-4);
    let overridden = stdout(&shiftlab(&["--config", p(&cfg), "bounds", "t1", "--E", "101"]));
    assert_eq!(field(&overridden, "min_E"), "3");
    assert_ne!(field(&overridden, "rhs"), field(&from_cfg, "rhs"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[bounds]\nunknown_key = 1\n").unwrap();
    assert_eq!(shiftlab(&["--config", p(&cfg), "bounds", "t1", "--alpha", "0", "--E", "3"]).status.code(), Some(2));
    assert_eq!(shiftlab(&["bounds", "t1", "--E", "3"]).status.code(), Some(2));
    assert_eq!(shiftlab(&["bounds", "t1", "--alpha", "0", "--E", "2"]).status.code(), Some(2));
    assert_eq!(shiftlab(&["fit", "--data", p(&dir.path().join("missing"))]).status.code(), Some(4));
    assert_eq!(shiftlab(&["--config", p(&dir.path().join("none.toml")), "bounds", "t1"]).status.code(), Some(4));
    assert_eq!(shiftlab(&["no-such-command"]).status.code(), Some(2));
}
