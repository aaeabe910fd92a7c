use std::path::Path;
use std::process::{Command, Output};

fn orbitgrad(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbitgrad"))
        .args(args)
        .current_dir(dir)
        .env_remove("ORBITGRAD_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn train_sample_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = orbitgrad(
        &[
            "train",
            "--out",
            "run",
            "--variant",
            "orbdiff",
            "--iterations",
            "300",
            "--seed",
            "3",
        ],
        d,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["checkpoint.bin", "loss.csv", "config.resolved.toml"] {
        assert!(d.join("run").join(f).exists(), "missing {f}");
    }
    let loss = std::fs::read_to_string(d.join("run/loss.csv")).unwrap();
    assert!(loss.starts_with("iteration,loss\n"));
    assert!(loss.lines().count() >= 3);
    let resolved = std::fs::read_to_string(d.join("run/config.resolved.toml")).unwrap();
    assert!(resolved.contains("orbdiff") && resolved.contains("iterations = 300"));

    let o = orbitgrad(
        &[
            "sample",
            "--checkpoint",
            "run/checkpoint.bin",
            "--out",
            "s.csv",
            "--n",
            "20",
        ],
        d,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let samples = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(samples.lines().count(), 21);

    let o = orbitgrad(&["eval", "--samples", "s.csv", "--targets", "-1,1"], d);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(json["n_samples"], 20);
    assert!(json["rmsd"].as_f64().unwrap() >= 0.0 && json["w2"].as_f64().unwrap() >= 0.0);
}

#[test]
fn seed_variable_matches_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = orbitgrad(
        &["train", "--out", "a", "--iterations", "50", "--seed", "9"],
        d,
    );
    assert_eq!(a.status.code(), Some(0));
    let b = Command::new(env!("CARGO_BIN_EXE_orbitgrad"))
        .args(["train", "--out", "b", "--iterations", "50"])
        .current_dir(d)
        .env("ORBITGRAD_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(b.status.code(), Some(0));
    let c = orbitgrad(
        &["train", "--out", "c", "--iterations", "50", "--seed", "10"],
        d,
    );
    let read = |n: &str| std::fs::read(d.join(n).join("checkpoint.bin")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(c.status.code(), Some(0));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn variance_and_equivariance_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        orbitgrad(&["train", "--out", "run", "--iterations", "20"], d)
            .status
            .code(),
        Some(0)
    );
    let o = orbitgrad(
        &[
            "variance",
            "--timesteps",
            "100,900",
            "--repeats",
            "8",
            "--out",
            "v.csv",
        ],
        d,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = std::fs::read_to_string(d.join("v.csv")).unwrap();
    let mut lines = v.lines();
    assert_eq!(
        lines.next(),
        Some("variant,t,K,grad_norm_var,mean_component_var")
    );
    assert_eq!(lines.count(), 6);

    let o = orbitgrad(
        &[
            "equivariance",
            "--checkpoint",
            "run/checkpoint.bin",
            "--probes",
            "16",
            "--out",
            "e.csv",
        ],
        d,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let e = std::fs::read_to_string(d.join("e.csv")).unwrap();
    assert!(e.starts_with("t,error\n"));
    // the default model is reflection-equivariant by construction
    for row in e.lines().skip(1) {
        let err: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(err < 1e-12, "{row}");
    }
}

#[test]
fn oracle_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = orbitgrad(&["oracle", "--suite", "all"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains(" 0 failed"));
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[train]\nbogus = 1\n").unwrap();
    assert_eq!(
        orbitgrad(&["train", "--config", "bad.toml", "--out", "x"], d)
            .status
            .code(),
        Some(2)
    );
    std::fs::write(d.join("zero.toml"), "[train]\nbatch_size = 0\n").unwrap();
    assert_eq!(
        orbitgrad(&["train", "--config", "zero.toml", "--out", "x"], d)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        orbitgrad(&["train", "--out", "x", "--variant", "nope"], d)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        orbitgrad(&["oracle", "--suite", "nope"], d).status.code(),
        Some(2)
    );
    assert_eq!(orbitgrad(&["frobnicate"], d).status.code(), Some(2));
    assert_eq!(
        orbitgrad(
            &["sample", "--checkpoint", "missing.bin", "--out", "s.csv"],
            d
        )
        .status
        .code(),
        Some(2)
    );
    std::fs::write(d.join("hot.toml"), "[train]\nlr = 1e300\niterations = 20\n").unwrap();
    let o = orbitgrad(&["train", "--config", "hot.toml", "--out", "hot"], d);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(
        d.join("hot/loss.csv").exists(),
        "partial outputs are kept on abort"
    );
}
