use std::fs;
use std::path::Path;
use std::process::Command;

use thermoqc_core::witness::sha256_hex;

fn run(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_thermoqc"))
        .args(args)
        .arg(format!("output_dir={}", dir.display()))
        .env_remove("THERMOQC_OUTPUT_DIR")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn manifest_checksums_match(dir: &Path) {
    let m = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    let mut seen = 0;
    for line in m.lines() {
        if let Some((name, sum)) = line.split_once(" sha256=") {
            assert_eq!(sha256_hex(&fs::read(dir.join(name)).unwrap()), sum, "{name}");
            seen += 1;
        }
    }
    assert!(seen >= 2);
}

#[test]
fn audit_quadratic_passes() {
    let d = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(d.path(), &["audit-model", "model=quadratic", "alpha=1", "K=5"]);
    assert_eq!(code, 0, "{stdout}");
    let report = fs::read_to_string(d.path().join("report.txt")).unwrap();
    assert!(report.contains("C1 relative entropy"));
    let csv = fs::read_to_string(d.path().join("data.csv")).unwrap();
    assert!(csv.starts_with("group,name,kind,estimate"));
    let manifest = fs::read_to_string(d.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("model.alpha=1"));
    assert!(manifest.contains("K=5"));
    manifest_checksums_match(d.path());
}

#[test]
fn qc_counterexample_leaves_replayable_witness() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, _) = run(d.path(), &["qc-check", "model=rank1defective", "beta=2", "n=32", "iters=10"]);
    assert_eq!(code, 2);
    let w = d.path().join("witness");
    assert!(w.join("witness.txt").exists());
    manifest_checksums_match(d.path());
    let r = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(r.path(), &["replay", &format!("witness={}", w.display())]);
    assert_eq!(code, 0);
    assert!(stdout.contains("verdict = confirmed"));
}

#[test]
fn tampered_witness_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), &["qc-check", "model=rank1defective", "beta=2", "n=32", "iters=10"]);
    let phi = d.path().join("witness/phi.bin");
    let mut bytes = fs::read(&phi).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&phi, bytes).unwrap();
    let r = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(r.path(), &["replay", &format!("witness={}", d.path().join("witness").display())]);
    assert_eq!(code, 1);
    assert!(stderr.contains("checksum"), "{stderr}");
}

#[test]
fn replay_rejects_other_format_version() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), &["symmetrize", "model=rank1defective", "beta=2"]);
    let m = d.path().join("witness/witness.txt");
    let text = fs::read_to_string(&m).unwrap().replace("format_version=1", "format_version=2");
    fs::write(&m, text).unwrap();
    let r = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(r.path(), &["replay", &format!("witness={}", m.display())]);
    assert_eq!(code, 1);
    assert!(stderr.contains("version"), "{stderr}");
}

#[test]
fn simulate_wave_reports_energy_drift() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, _) = run(d.path(), &["simulate", "model=quadratic", "wave", "A=0.1", "n=256", "t=1"]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(d.path().join("data.csv")).unwrap();
    assert!(csv.lines().next().unwrap().split(',').any(|c| c == "energy_drift"));
    assert!(d.path().join("plot.svg").exists());
}

#[test]
fn data_is_identical_across_thread_counts() {
    for args in [
        vec!["qc-check", "model=quadratic", "n=32", "iters=10"],
        vec!["simulate", "model=quadratic", "dim=2", "n=32", "t=0.2"],
        vec!["garding", "model=quadratic", "n=16", "budget=8", "holdout=20", "iters=4"],
        vec!["young", "model=quadratic", "generator=concentrator", "scales=0.00390625,0.001953125", "subgrid=8"],
    ] {
        let mut csvs = Vec::new();
        for t in ["1", "4"] {
            let d = tempfile::tempdir().unwrap();
            let mut a = args.clone();
            let th = format!("threads={t}");
            a.push(&th);
            let (code, _, stderr) = run(d.path(), &a);
            assert!(code == 0 || code == 2, "{stderr}");
            csvs.push(fs::read(d.path().join("data.csv")).unwrap());
        }
        assert_eq!(csvs[0], csvs[1], "{args:?}");
    }
}

#[test]
fn replay_verdict_is_identical_across_thread_counts() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), &["qc-check", "model=rank1defective", "beta=2", "n=32", "iters=10"]);
    let w = format!("witness={}", d.path().join("witness").display());
    let mut reports = Vec::new();
    for t in ["1", "3"] {
        let r = tempfile::tempdir().unwrap();
        let (code, _, _) = run(r.path(), &["replay", &w, &format!("threads={t}")]);
        assert_eq!(code, 0);
        reports.push(fs::read(r.path().join("data.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn unknown_keys_and_models_fail() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(d.path(), &["qc-check", "model=quadratic", "bogus=1"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("bogus"));
    let (code, _, stderr) = run(d.path(), &["qc-check", "model=nosuch"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("nosuch"));
}

#[test]
fn config_file_with_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, "# audit run\ncommand=audit-model\nmodel=quadratic\nK=3\nslack=0.05\n").unwrap();
    let out = d.path().join("out");
    let (code, _, stderr) = run(&out, &["--config", cfg.to_str().unwrap(), "--K=5"]);
    assert_eq!(code, 0, "{stderr}");
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("K=5\n"));
    assert!(manifest.contains("slack=0.05\n"));
}

#[test]
fn output_dir_defaults_to_environment() {
    let d = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_thermoqc"))
        .args(["symmetrize", "model=quadratic"])
        .env("THERMOQC_OUTPUT_DIR", d.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(d.path().join("manifest.txt").exists());
}

#[test]
fn wave_cone_negative_model_exits_with_witness() {
    let d = tempfile::tempdir().unwrap();
    let (code, _, _) = run(d.path(), &["symmetrize", "model=rank1defective", "beta=2"]);
    assert_eq!(code, 2);
    let v = thermoqc_core::witness::replay(&d.path().join("witness")).unwrap();
    assert!(v.confirmed);
}
