use std::fs;
use std::process::{Command, Output};

fn stochslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochslab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_alp_writes_tagged_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = ok(&stochslab(&["solve", "--set", "B", "--M", "20", "--model", "alp", "--out", out]));
    assert!(stdout.contains("B M=20 alp phi(0)=8.25"), "{stdout}");
    let csv = fs::read_to_string(dir.path().join("alp.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# model_tag=ALP eta="));
    assert_eq!(lines.next().unwrap(), "x,mean_scalar_flux,phi1,phi2");
    assert_eq!(lines.count(), 400);
    assert!(!csv.contains('\r'));
}

#[test]
fn diffusion_model_reports_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&stochslab(&["solve", "--set", "B", "--M", "20", "--model", "diff-lp", "--out", out]));
    let csv = fs::read_to_string(dir.path().join("diff-lp.csv")).unwrap();
    assert!(csv.contains("# beta=1.37"));
    assert!(csv.contains("\nx,scalar_flux\n"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(r#"{{"set": "F", "choice": 3, "model": "lp", "out": "{}"}}"#, out.display()),
    )
    .unwrap();
    ok(&stochslab(&["--config", cfg.to_str().unwrap(), "solve", "--model", "am"]));
    assert!(out.join("am.csv").exists());
    assert!(!out.join("lp.csv").exists());
}

#[test]
fn ensemble_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = ok(&stochslab(&[
        "ensemble", "--set", "F", "--choice", "3", "--ci", "0.01", "--max-n", "150", "--workers", "2", "--out", out,
    ]));
    assert!(stdout.contains("n_realizations=100 "), "{stdout}");
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("converged=true"));
    let csv = fs::read_to_string(dir.path().join("benchmark.csv")).unwrap();
    assert!(csv.starts_with("x,mean_flux,std_error,n\n"));
}

#[test]
fn table4_and_converge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = ok(&stochslab(&["table4", "--sets", "F", "--choice", "3", "--max-n", "150", "--out", out]));
    assert!(stdout.contains("F,0,0.2000,0.2000,0.2000,0.2000"), "{stdout}");
    let stdout = ok(&stochslab(&["converge", "--set", "B", "--M", "20,40", "--out", out]));
    assert_eq!(stdout.lines().count(), 3);
    assert!(dir.path().join("fig3_M40_diff_alp.csv").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = stochslab(&["solve", "--set", "G", "--M", "20", "--model", "lp", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown problem set"));
    let o = stochslab(&["solve", "--set", "D", "--M", "20", "--model", "lp", "--out", out]);
    assert!(!o.status.success());
    let o = stochslab(&["table2", "--sets", "D", "--no-benchmark", "--out", out]);
    assert!(!o.status.success());
}
