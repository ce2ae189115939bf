use std::path::Path;
use std::process::{Command, Output};

fn gfdm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfdm"))
        .args(args)
        .current_dir(dir)
        .env_remove("GFDM_THREADS")
        .output()
        .expect("spawn gfdm")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn run_writes_snapshots_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let o = gfdm(&["run", "case_3_1", "--t-end", "5", "-q", "--out", out.to_str().unwrap()], d.path());
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(o.stdout.is_empty());
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("complete"), "{manifest}");
    assert!(out.join("snap_t000005.000.csv").exists());
    assert!(out.join("summary.json").exists());
}

#[test]
fn missing_config_exits_with_input_code() {
    let d = tempfile::tempdir().unwrap();
    let o = gfdm(&["run", "no_such_case.json"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).starts_with("error:"));
}

#[test]
fn bad_override_exits_with_input_code() {
    let d = tempfile::tempdir().unwrap();
    let o = gfdm(&["run", "case_3_1", "--rm-mult", "1.0", "--out", "x"], d.path());
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stderr));
}

#[test]
fn invalid_thread_count_exits_with_input_code() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gfdm"))
        .args(["cloud", "info", "case_3_1"])
        .env("GFDM_THREADS", "zero")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("GFDM_THREADS"));
}

#[test]
fn verify_rectangle_case_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = gfdm(&["verify", "case_3_1", "--out", "v"], d.path());
    assert!(o.status.success(), "{}{}", text(&o.stdout), text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.lines().count() >= 4 && !out.contains("FAIL"), "{out}");
    assert!(d.path().join("v/verify.json").exists());
}

#[test]
fn cloud_gen_and_info_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let o = gfdm(&["cloud", "gen", "case_3_1", "-q", "--out", "c"], d.path());
    assert!(o.status.success(), "{}", text(&o.stderr));
    let o = gfdm(&["cloud", "info", "c/cloud.txt", "--rm-mult", "1.6"], d.path());
    assert!(o.status.success(), "{}", text(&o.stderr));
    let info = text(&o.stdout);
    assert!(info.contains("interior 1121"), "{info}");
    assert!(info.contains("index set sizes"), "{info}");
}

#[test]
fn dump_matrix_writes_systems() {
    let d = tempfile::tempdir().unwrap();
    let o = gfdm(&["dump-matrix", "case_3_1", "--step", "2", "-q", "--out", "m"], d.path());
    assert!(o.status.success(), "{}", text(&o.stderr));
    for f in ["pressure_step2.mtx", "temperature_step2.mtx", "pressure_step2_rhs.txt", "stencils.txt"] {
        assert!(d.path().join("m").join(f).exists(), "{f}");
    }
    let o = gfdm(&["dump-matrix", "case_3_1", "--step", "0", "--out", "m"], d.path());
    assert_eq!(o.status.code(), Some(2));
}
