use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn harmbal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmbal")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn run_config(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = harmbal(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

/// Header lines and records of a CSV written by the tool.
fn read_csv(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let text = std::fs::read_to_string(path).unwrap();
    let header: Vec<String> = text.lines().take_while(|l| l.starts_with('#')).map(String::from).collect();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let names = reader.headers().unwrap().clone();
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let mut all = vec![names];
    all.extend(records);
    (header, all)
}

fn column(records: &[csv::StringRecord], name: &str) -> usize {
    records[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn missing_config_is_a_config_error() {
    let o = harmbal(&["frf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_and_mismatched_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "kind = \"frf\"\nharmonics = [").unwrap();
    assert_eq!(harmbal(&["frf", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "kind = \"frf\"\nharmonics = 3\n[model]\nname = \"pendulum\"\n").unwrap();
    assert_eq!(harmbal(&["frf", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));

    let linear = configs().join("linear.toml");
    assert_eq!(harmbal(&["urabe", "--config", linear.to_str().unwrap()]).status.code(), Some(2));
    let absent = dir.path().join("absent.toml");
    assert_eq!(harmbal(&["frf", "--config", absent.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let o = harmbal(&["selftest"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().count() >= 5);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}

#[test]
fn linear_frf_matches_closed_form_and_is_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("linear.toml");
    run_config("frf", &config, dir.path(), &[]);
    let (header, records) = read_csv(&dir.path().join("branch.csv"));
    let digest: String = Sha256::digest(std::fs::read(&config).unwrap()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(header[1], format!("# config-sha256 {digest}"));

    let (k, c) = ([[2.0, -1.0], [-1.0, 3.0]], [[0.05, -0.01], [-0.01, 0.08]]);
    let (iw, ia, is) = (column(&records, "Omega"), column(&records, "amplitude"), column(&records, "stable"));
    assert!(records.len() > 20);
    for rec in &records[1..] {
        let w: f64 = rec[iw].parse().unwrap();
        let z = |i: usize, j: usize| {
            let inertia = if i == j { -w * w } else { 0.0 };
            Complex64::new(inertia + k[i][j], w * c[i][j])
        };
        // cos τ forcing of unit amplitude on the first DOF
        let x0 = z(1, 1) * 0.5 / (z(0, 0) * z(1, 1) - z(0, 1) * z(1, 0));
        let exact = 2.0 * x0.norm();
        let amp: f64 = rec[ia].parse().unwrap();
        // the amplitude is a maximum over 1024 samples
        assert!(amp <= exact * (1.0 + 1e-9) && amp >= exact * (1.0 - 1e-5), "Omega {w}: {amp} vs {exact}");
        assert_eq!(&rec[is], "true");
    }
}

#[test]
fn residual_criterion_never_needs_more_harmonics_than_delta() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("points.toml");
    std::fs::write(
        &config,
        r#"
kind = "urabe-point"
[model]
name = "duffing"
[urabe]
criteria = ["delta", "residual"]
points = [0.6, 1.0, 1.3]
h_sweep = [3]
[urabe.adaptive]
h_min = 1
h_max = 41
"#,
    )
    .unwrap();
    run_config("urabe", &config, dir.path(), &[]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("urabe_points.json")).unwrap()).unwrap();
    let records: Vec<&serde_json::Value> = json["points"].as_array().unwrap().iter().map(|p| &p["record"]).collect();
    assert_eq!(records.len(), 6);
    for omega in [0.6, 1.0, 1.3] {
        let h_of = |criterion: &str| {
            let r = records.iter().find(|r| r["criterion"] == criterion && r["Omega"].as_f64() == Some(omega)).unwrap();
            assert_eq!(r["conclusive"], true);
            r["H"].as_u64().unwrap()
        };
        assert!(h_of("residual") <= h_of("delta"), "Omega = {omega}");
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let config = configs().join("duffing_main.toml");
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    run_config("frf", &config, one.path(), &["--threads", "1"]);
    run_config("frf", &config, four.path(), &["--threads", "4"]);
    for name in ["branch.csv", "summary.json"] {
        let a = std::fs::read(one.path().join(name)).unwrap();
        let b = std::fs::read(four.path().join(name)).unwrap();
        assert!(a == b, "{name} differs between thread counts");
    }
}
