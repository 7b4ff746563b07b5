use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ini::Ini;
use tempfile::TempDir;

const CONSTANTS: &str = "p = 2\n[coefficients]\na = 2\nb = 1\nc = 2\nd = 1\nomega = 1\n";
const ZERO: &str = "p = 2\n[coefficients]\na = 1\nb = exp(0.5)\nc = 1\nd = exp(0.5)\nomega = 1\n";
const NEAR: &str = "p = 2\n[coefficients]\na = 1\nb = exp(0.5) * (1 + 1e-4)\nc = 2\nd = 1\nomega = 1\n";
const SLOW: &str = "p = 2\n[coefficients]\na = 2 + sin(log(log(t + exp(1))))\nb = 0.5\nc = 2\nd = 0.5\nomega = 1\n";

fn sio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sio")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    for (name, text, want) in [
        ("constants.ini", CONSTANTS, 0),
        ("zero.ini", ZERO, 1),
        ("near.ini", NEAR, 2),
        ("malformed.ini", &CONSTANTS.replace("a = 2", "a = 2 * (t"), 3),
        ("unknown.ini", &format!("{CONSTANTS}[numerics]\nwidth = 3\n"), 3),
        ("p.ini", &CONSTANTS.replace("p = 2", "p = 1"), 3),
    ] {
        let out = sio(&["check", "--config", s(&write(&dir, name, text))]);
        assert_eq!(code(&out), want, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(code(&sio(&["check", "--config", "/nonexistent/instance.ini"])), 3);
    assert_eq!(code(&sio(&["check"])), 3);
    assert_eq!(code(&sio(&["frobnicate"])), 3);
    assert_eq!(code(&sio(&["--help"])), 0);
    assert_eq!(code(&sio(&["--version"])), 0);
}

#[test]
fn verdict_reparses_and_replays() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "so.ini", SLOW);
    let verdict = dir.path().join("so.verdict");
    let out = sio(&["check", "--config", s(&cfg), "--out", s(&verdict)]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&verdict).unwrap();
    let ini = Ini::load_from_str_noescape(&text).unwrap();
    let v = ini.section(Some("verdict")).unwrap();
    assert_eq!(v.get("overall"), Some("fredholm"));
    assert_eq!(v.get("exit_code"), Some("0"));
    let c2 = ini.section(Some("condition_ii")).unwrap();
    let margin: f64 = c2.get("margin").unwrap().parse().unwrap();
    assert!(margin > 0.0);
    assert_eq!(c2.get("coverage"), Some("sampled"));
    let witness = c2.get("witness").unwrap();
    assert!(ini.section(Some(format!("fiber.{witness}"))).is_some());
    assert_eq!(ini.section(Some("config.coefficients")).unwrap().get("a"), Some("2 + sin(log(log(t + exp(1))))"));
    assert_eq!(ini.section(Some("config.numerics")).unwrap().get("N"), Some("400"));

    let again = dir.path().join("again.verdict");
    assert_eq!(code(&sio(&["check", "--config", s(&verdict), "--out", s(&again)])), 0);
    assert_eq!(std::fs::read(&again).unwrap(), text.as_bytes());
}

#[test]
fn symbol_dump_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "zero.ini", ZERO);
    let out = sio(&["symbol-dump", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("fiber_id,x,re,im,abs"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // one fiber per endpoint, 2 * 8 / (1/256) + 1 nodes each
    assert_eq!(rows.len(), 2 * 4097);
    let ids: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["0:0", "inf:0"]);
    for r in rows.iter().filter(|r| r[1].parse::<f64>().unwrap() == 0.0) {
        assert!(r[4].parse::<f64>().unwrap() < 1e-12);
    }

    let only = sio(&["symbol-dump", "--config", s(&cfg), "--endpoint", "inf", "--fiber", "0"]);
    assert_eq!(code(&only), 0);
    assert_eq!(String::from_utf8(only.stdout).unwrap().lines().count(), 1 + 4097);
    assert_eq!(code(&sio(&["symbol-dump", "--config", s(&cfg), "--endpoint", "inf", "--fiber", "1"])), 3);
    assert_eq!(code(&sio(&["symbol-dump", "--config", s(&cfg), "--out", "/nonexistent/dir/x.csv"])), 3);
}

#[test]
fn csv_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "so.ini", SLOW);
    for cmd in ["symbol-dump", "limitop-test"] {
        let runs: Vec<Vec<u8>> = (0..2)
            .map(|k| {
                let path = dir.path().join(format!("{cmd}.{k}.csv"));
                assert_eq!(code(&sio(&[cmd, "--config", s(&cfg), "--out", s(&path)])), 0);
                std::fs::read(path).unwrap()
            })
            .collect();
        assert!(runs[0].len() > 100);
        assert_eq!(runs[0], runs[1], "{cmd}");
    }
}

#[test]
fn limitop_trace_settles() {
    let dir = TempDir::new().unwrap();
    let out = sio(&["limitop-test", "--config", s(&write(&dir, "so.ini", SLOW))]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<(usize, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    let last = rows.iter().map(|r| r.0).max().unwrap();
    for &(n, d) in &rows {
        if 4 * n >= 3 * last {
            assert!(d < 1e-2, "n = {n}: {d}");
        }
    }
}

#[test]
fn verify_so_accepts_and_rejects() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("so.txt");
    let out = sio(&["verify-so", "--config", s(&write(&dir, "so.ini", SLOW)), "--out", s(&out_path)]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("so.txt.csv")).unwrap();
    assert!(csv.starts_with("function,endpoint,log_r,modulus\n"));
    assert!(csv.lines().any(|l| l.starts_with("a,inf,")));

    let fast = SLOW.replace("log(log(t + exp(1)))", "log(t)");
    let out = sio(&["verify-so", "--config", s(&write(&dir, "fast.ini", &fast)), "--endpoint", "inf"]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8(out.stdout).unwrap();
    let ini = Ini::load_from_str_noescape(&text).unwrap();
    assert_eq!(ini.section(Some("so.a.inf")).unwrap().get("accepted"), Some("false"));
    assert!(ini.section(Some("so.a.0")).is_none());
}

#[test]
fn invertibility_residuals_meet_the_budget() {
    let dir = TempDir::new().unwrap();
    let out = sio(&["invertibility", "--config", s(&write(&dir, "c.ini", CONSTANTS))]);
    assert_eq!(code(&out), 0);
    let ini = Ini::load_from_str_noescape(&String::from_utf8(out.stdout).unwrap()).unwrap();
    for name in ["operator.plus", "operator.minus"] {
        let sec = ini.section(Some(name)).unwrap();
        for k in 0..3 {
            let r: f64 = sec.get(format!("residual.{k}")).unwrap().parse().unwrap();
            assert!(r <= 2e-6, "{name}: {r}");
        }
    }
    assert_eq!(code(&sio(&["invertibility", "--config", s(&write(&dir, "z.ini", ZERO))])), 1);
}

#[test]
fn selftest_passes_and_catches_a_fault() {
    let out = sio(&["selftest"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let out = sio(&["selftest", "--fault-sp-scale", "1.001"]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL mellin.symbol-identity")));
}
