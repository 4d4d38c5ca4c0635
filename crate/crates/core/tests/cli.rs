use std::path::Path;
use std::process::Command;

const TINY: &str = "\
n_base = 400
n_test = 60
n_attack_test = 60
widths = [5, 8, 1]
train_max_epochs = 3
attack_n_attack = 20
attack_n_clean = 40
grid = [[0, 0], [20, 40]]
search_max_iters = 4
defense_alphas = [0.9, 1.0]
verify_points = 3
verify_paths = 4000
verify_steps = 20
";

fn bdlab(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bdlab"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn tiny_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bdlab(dir.path(), &["frobnicate"]).0, 1);
    assert_eq!(bdlab(dir.path(), &["train", "--scale", "huge"]).0, 1);
    assert_eq!(bdlab(dir.path(), &["train", "--seed", "x"]).0, 1);
    assert_eq!(bdlab(dir.path(), &["--help"]).0, 0);
}

#[test]
fn bad_configs_exit_2() {
    let dir = tiny_dir();
    std::fs::write(dir.path().join("bad.toml"), "n_bse = 3\n").unwrap();
    let (code, text) = bdlab(dir.path(), &["generate", "--config", "bad.toml"]);
    assert_eq!(code, 2, "{text}");
    assert_eq!(bdlab(dir.path(), &["generate", "--config", "missing.toml"]).0, 2);
    let args = ["generate", "--config", "tiny.toml", "--threads", "0"];
    assert_eq!(bdlab(dir.path(), &args).0, 2);
}

#[test]
fn missing_model_is_a_runtime_failure() {
    let dir = tiny_dir();
    let (code, text) = bdlab(dir.path(), &["search", "--config", "tiny.toml", "--out", "run"]);
    assert_eq!(code, 3, "{text}");
    assert!(text.contains("bdlab attack"));
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tiny_dir();
    let common = ["--config", "tiny.toml", "--out", "run", "--seed", "3", "--threads", "1"];
    for cmd in ["generate", "train", "attack", "search", "defend", "grid", "verify-oracle"] {
        let args: Vec<&str> = std::iter::once(cmd).chain(common).collect();
        let (code, text) = bdlab(dir.path(), &args);
        assert_eq!(code, 0, "{cmd}: {text}");
    }
    let (code, text) = bdlab(dir.path(), &["report", "--svg", "--out", "run"]);
    assert_eq!(code, 0, "{text}");
    let run = dir.path().join("run");
    for f in [
        "base.csv",
        "test.csv",
        "attack_test.csv",
        "poison.csv",
        "train.csv",
        "config.toml",
        "baseline_model.json",
        "model.json",
        "maximizers.csv",
        "defense.json",
        "sweep.csv",
        "histogram.csv",
        "grid.csv",
        "oracle.csv",
        "report.md",
        "histogram.svg",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let grid = std::fs::read_to_string(run.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
}

#[test]
fn empty_report_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bdlab(dir.path(), &["report", "--out", "empty"]).0, 3);
}
