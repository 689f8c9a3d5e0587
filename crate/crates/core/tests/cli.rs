use std::path::Path;
use std::process::{Command, Output};

fn afem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afem"))
        .args(args)
        .env("AFEM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn tempdir(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("afem-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn counterexample_is_reproducible() {
    let a = afem(&["counterexample"]);
    let b = afem(&["counterexample"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# afem-counterexample v1\nN,boundary_sum,grad_norm_sq,C,closed_form\n"));
}

#[test]
fn counterexample_rejects_bad_sizes() {
    assert_eq!(afem(&["counterexample", "--n", "5"]).status.code(), Some(2));
    assert_eq!(afem(&["counterexample", "--n", "5,11,20,41"]).status.code(), Some(2));
}

#[test]
fn theta_out_of_range_is_a_usage_error() {
    let out = afem(&["adapt", "--theta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));
}

#[test]
fn dof_cap_truncation_has_its_own_exit_code() {
    let dir = tempdir("cap");
    let out = afem(&[
        "adapt",
        "--domain",
        "lshape",
        "--g",
        "constant",
        "--dof-cap",
        "400",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    for f in ["trace.csv", "solution.csv", "estimator.csv", "summary.txt"] {
        assert!(Path::new(&dir).join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("# afem-trace v1"));
    assert_eq!(
        lines.next(),
        Some("iter,nelems,ndofs,eta2,eta_tilde2,osc2,vol2,nmarked,gamma,err_u2,err_p2,Lambda,alpha")
    );
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn converged_run_exits_zero() {
    let dir = tempdir("ok");
    let out = afem(&["adapt", "--eps", "0.2", "--solution", "smooth1", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("stop=converged"));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn mesh_file_input() {
    let dir = tempdir("mesh");
    std::fs::create_dir_all(&dir).unwrap();
    let mesh = dir.join("square.mesh");
    afem_stokes::mesh::builders::unit_square(3).unwrap().write(&mesh).unwrap();
    let out = afem(&[
        "adapt",
        "--mesh",
        mesh.to_str().unwrap(),
        "--eps",
        "0.2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn verify_passes_and_mutation_is_caught() {
    let ok = afem(&["verify", "--suite", "estimator", "--suite", "counterexample"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = afem(&["verify", "--suite", "estimator", "--mutate"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8(bad.stdout).unwrap();
    assert!(text.contains("estimator,estimator-reduction,FAIL"));
}
