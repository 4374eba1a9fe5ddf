use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_active-ris");

fn config(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("exp.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_accepts_shipped_configs() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = Command::new(BIN)
            .arg("validate")
            .arg("--config")
            .arg(&path)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: "));
    }
}

#[test]
fn validate_reports_bad_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "preset = sumrate_vs_pbs\nM = 256\nL = 48\n");
    let out = Command::new(BIN)
        .arg("validate")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('L'));

    let cfg = config(dir.path(), "preset = sumrate_vs_pbs\ncolour = blue\n");
    let out = Command::new(BIN)
        .arg("validate")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn run_writes_outputs_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "preset = sumrate_vs_pbs\nsweep = 30 dBm\ntrials = 5\nN = 2\nK = 2\nM = 4\nL = 2\n\
         architectures = sub\nP_RIS_tot = 0.1\nmax_outer = 3\n",
    );
    let out_dir = dir.path().join("out");
    let out = Command::new(BIN)
        .args(["run", "--trials", "2", "--seed", "9", "--workers", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "aggregate.csv", "trace_0.csv", "trace_1.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(!out_dir.join("trace_2.csv").exists());
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(results.lines().skip(1).all(|l| l.starts_with("sumrate_vs_pbs,sub(2),")));

    let out = Command::new(BIN)
        .args(["run", "--trials", "1", "--preset", "power_vs_gamma", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(results.contains("total_power"));
}
