use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
n1 = 2
n2 = 2
m1 = 2
m2 = 2
q1 = 1
q2 = 2
p = 8
l = 2
j = 2
bits = [2, "inf"]
snr_db = [0.0, 10.0]
trials = 2
seed = 9
"#;

fn estimate() -> Command {
    Command::new(env!("CARGO_BIN_EXE_estimate"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_writes_identical_csv_twice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let status = estimate().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(0));
        outputs.push(std::fs::read_to_string(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let mut lines = outputs[0].lines();
    assert_eq!(lines.next().unwrap(), "snr_db,bits,trial,user,algo,nmse_db,iters,seconds,converged");
    // 2 SNR × 2 resolutions × 2 trials × (vamp + ls)
    assert_eq!(lines.count(), 16);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let cases = [
        ("unknown.toml", format!("{SMALL}\nbogus = 1\n")),
        ("syntax.toml", "n1 = [".to_string()),
        ("bits.toml", SMALL.replace("bits = [2, \"inf\"]", "bits = [0]")),
        ("short.toml", SMALL.replace("p = 8", "p = 2")),
        ("damping.toml", format!("{SMALL}\n[solver]\ndamping = 1.5\n")),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, &text);
        let status = estimate().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(2), "{name}");
    }
    let missing = estimate()
        .args(["trace", "--config", "/nonexistent/cfg.toml"])
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(2));
}

#[test]
fn trace_prints_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", &format!("{SMALL}\n[solver]\nmax_iters = 7\ntol = 0.0\n"));
    let out = estimate().args(["trace", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("iter,nu_x1,nu_x2"));
    assert_eq!(lines.count(), 7);
}

#[test]
fn selftest_passes() {
    let out = estimate().arg("selftest").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
