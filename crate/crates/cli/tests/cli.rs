use std::path::Path;
use std::process::{Command, Output};

fn magnomem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magnomem")).args(args).output().expect("spawn magnomem")
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn help_documents_columns_and_exit_codes() {
    let out = magnomem(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["t, N_a, N_m, N_b, fidelity", "x, p, W", "Exit codes", "scan-storage", "scan-damping"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn simulate_then_wigner() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = magnomem(&["simulate", "--scenario", "fig1b", "--out", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).is_empty(), "unexpected warnings");
    assert_eq!(header(&run.join("trajectory.csv")), "t,N_a,N_m,N_b,fidelity");
    let meta = std::fs::read_to_string(run.join("meta.json")).unwrap();
    assert!(meta.trim_start().starts_with('{') && meta.contains("\"scenario\""));

    let csv = dir.path().join("w.csv");
    let out = magnomem(&["wigner", "--state", run.join("rho_final.npy").to_str().unwrap(), "--out", csv.to_str().unwrap(), "--points", "21"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(header(&csv), "x,p,W");
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 21 * 21);
}

#[test]
fn pulses_and_eigen_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sub/pulses.csv");
    assert!(magnomem(&["pulses", "--scenario", "fig1b", "--out", p.to_str().unwrap()]).status.success());
    assert_eq!(header(&p), "t,Omega_p,delta_a,delta_m,delta_s");
    let e = dir.path().join("eigen.csv");
    assert!(magnomem(&["eigen", "--scenario", "fig1b", "--out", e.to_str().unwrap()]).status.success());
    assert_eq!(header(&e), "t,S0,S+,S-,lambda0,lambda1,lambda2");
}

#[test]
fn scan_damping_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = magnomem(&["--threads", "2", "scan-damping", "--scenario", "fig6", "--out", dir.path().to_str().unwrap(), "--kappa-m", "1e-4,1e-3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("damping.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "kappa_m,N_a_final");
    assert_eq!(text.lines().count(), 3);
    assert!(dir.path().join("run_001/trajectory.csv").exists());
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[params]\nomega_b_hz = -1\n").unwrap();
    for args in [
        vec!["simulate", "--scenario", "no-such-file", "--out", "x"],
        vec!["simulate", "--scenario", bad.to_str().unwrap(), "--out", "x"],
        vec!["scan-damping", "--scenario", "fig6", "--out", dir.path().to_str().unwrap(), "--kappa-m", "-1"],
        vec!["simulate"],
    ] {
        let out = magnomem(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn unknown_figure_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("fig");
    let out = magnomem(&["figure", "fig7", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
}

#[test]
fn solver_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = magnomem(&["simulate", "--scenario", "fig1b", "--tol", "1e-30", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
