use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kr-advance"))
}

fn write_config(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("scenario.conf");
    fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

const BASE: &str = "H = 10\nL = 4\nq = 0.5\nlambda_v = 1\nlambda_m = 0.5\n";

#[test]
fn cutoff_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, BASE);
    let (code, out, _) = run(bin().args(["cutoff", "--config"]).arg(&cfg).args(["--p2", "10"]));
    assert_eq!(code, 0);
    assert!(out.contains("cutoff = 9.200000000"), "{out}");
}

#[test]
fn sweep_writes_byte_stable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, &format!("{BASE}p2_min = 0\np2_max = 12\nsteps = 25\n"));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let (code, _, err) = run(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(out));
        assert_eq!(code, 0, "{err}");
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.starts_with("p2,pe_bound,preferred_bound,cutoff,region,brute_force_cutoff,abs_gap\n"));
    assert!(text.contains("\n10.000000000,9.200000000,9.250000000,9.200000000,MidHigh,"));
}

#[test]
fn optimal_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, &format!("{BASE}regime = Both\n"));
    let (code, out, _) = run(bin().args(["optimal", "--config"]).arg(&cfg));
    assert_eq!(code, 0);
    assert!(out.contains("committed pricing: p1 = 9.200000000") && out.contains("commitment decision: Commit"));
    let (code, out, _) = run(bin().args(["report", "--config"]).arg(&cfg));
    assert_eq!(code, 0);
    assert!(out.contains("single-stage cutoff: 5.500000000"), "{out}");
}

#[test]
fn verify_exit_status_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, &format!("{BASE}draws = 2\n"));
    let failures = dir.path().join("fail.csv");
    let first = run(bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .args(["--seed", "11", "--failures"])
        .arg(&failures));
    let second = run(bin().args(["verify", "--config"]).arg(&cfg).args(["--seed", "11"]));
    assert_eq!(first.1, second.1);
    let csv = fs::read_to_string(&failures).unwrap();
    let failed = csv.lines().count() > 1;
    assert_eq!(first.0, if failed { 1 } else { 0 }, "{}", first.1);
    assert!(first.1.starts_with("verification: seed 11, 2 draws"));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(bin().args(["cutoff", "--p2", "3"]));
    assert_eq!(code, 2);
    let cfg = write_config(&dir, &BASE.replace("q = 0.5", "q = 1.2"));
    let (code, _, err) = run(bin().args(["report", "--config"]).arg(&cfg));
    assert_eq!(code, 2);
    assert!(err.contains("q ∉ (0,1)"), "{err}");
    let (code, _, err) = run(bin().args(["report", "--config"]).arg(dir.path().join("missing.conf")));
    assert_eq!(code, 2, "{err}");
    let cfg = write_config(&dir, BASE);
    let (code, _, err) = run(bin().args(["sweep", "--config"]).arg(&cfg).args(["--out", "x.csv"]));
    assert_eq!(code, 2);
    assert!(err.contains("no sweep range"), "{err}");
}
