use std::path::Path;
use std::process::{Command, Output};

fn earlystop(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_earlystop"))
        .args(args)
        .current_dir(dir)
        .env_remove("EARLYSTOP_SEED")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(earlystop(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(earlystop(&["no-such-command"], dir.path()).status.code(), Some(1));
    let bad = earlystop(&["risk", "--n", "0"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(!bad.stderr.is_empty());
    // --x without --y
    assert_eq!(earlystop(&["stop", "--x", "x.csv"], dir.path()).status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = earlystop(&["selftest"], dir.path());
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS") && !stdout(&out).contains("FAIL"));
}

#[test]
fn trajectory_writes_every_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "trajectory",
        "--n",
        "20",
        "--p",
        "8",
        "--k-max",
        "50",
        "--m",
        "0.5",
        "--out",
        ".",
    ];
    let out = earlystop(&args, dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("trajectory_m0.5.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 1 + 8);
    assert_eq!(lines.count(), 51);
}

#[test]
fn equivalence_check_passes_on_wide_designs() {
    let dir = tempfile::tempdir().unwrap();
    let out = earlystop(
        &["equivalence-check", "--n", "15", "--p", "25", "--t", "30"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "seed = 5\nn = 20\np = 8\ntrials = 0\nk_max = 100\n",
    )
    .unwrap();
    let seed_of = |out_dir: &str, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_earlystop"));
        cmd.current_dir(dir.path())
            .args(["reproduce-fig1", "--config", "run.cfg", "--out", out_dir])
            .env_remove("EARLYSTOP_SEED");
        if let Some(v) = env {
            cmd.env("EARLYSTOP_SEED", v);
        }
        if let Some(v) = flag {
            cmd.args(["--seed", v]);
        }
        assert!(cmd.output().unwrap().status.success());
        let meta = std::fs::read_to_string(dir.path().join(out_dir).join("metadata.txt")).unwrap();
        meta.lines().find_map(|l| l.strip_prefix("seed=")).unwrap().to_string()
    };
    assert_eq!(seed_of("a", None, None), "5");
    assert_eq!(seed_of("b", Some("9"), None), "9");
    assert_eq!(seed_of("c", Some("9"), Some("11")), "11");
}

#[test]
fn stop_runs_on_csv_data() {
    let dir = tempfile::tempdir().unwrap();
    // y = x1 - x2 plus a small perturbation
    let mut x = String::new();
    let mut y = String::new();
    for i in 0..30 {
        let (a, b, c) = (
            (i as f64 * 0.7).sin(),
            (i as f64 * 1.3).cos(),
            (i as f64 * 0.4).sin() * 0.5,
        );
        x.push_str(&format!("{a},{b},{c}\n"));
        y.push_str(&format!("{}\n", a - b + 0.3 * ((i * 7 % 11) as f64 / 11.0 - 0.5)));
    }
    std::fs::write(dir.path().join("x.csv"), x).unwrap();
    std::fs::write(dir.path().join("y.csv"), y).unwrap();
    let args = [
        "stop", "--x", "x.csv", "--y", "y.csv", "--tau", "0.1", "--k-max", "300", "--out", ".",
    ];
    let out = earlystop(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("summary.csv").exists());
}
