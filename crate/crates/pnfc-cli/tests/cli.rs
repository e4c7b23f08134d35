//! Black-box tests of the installed binary: exit codes, stdout contract,
//! artifact determinism, and filesystem discipline.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn pnfc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnfc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PNFC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| l.to_string())
        .collect()
}

/// All files under `dir`, relative path -> content bytes.
fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, into: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, into);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                into.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut map = BTreeMap::new();
    walk(dir, dir, &mut map);
    map
}

#[test]
fn synth_is_deterministic_and_contained() {
    let scratch = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "synth".to_string(),
            "--out".to_string(),
            out.to_string(),
            "--frames".to_string(),
            "4".to_string(),
            "--T".to_string(),
            "20".to_string(),
            "--seed".to_string(),
            "5".to_string(),
            "--trace".to_string(),
        ]
    };
    for out_dir in ["a", "b"] {
        let argv = args(out_dir);
        let argv: Vec<&str> = argv.iter().map(|s| s.as_str()).collect();
        let out = pnfc(&argv, scratch.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = dir_contents(&scratch.path().join("a"));
    let b = dir_contents(&scratch.path().join("b"));
    assert_eq!(a, b, "same seed must give byte-identical output directories");
    assert!(a.contains_key("manifest.json"));
    assert!(a.contains_key("frame_0000.pgm"));
    assert!(a.contains_key("trace/trace.json"));

    // Nothing outside the two --out directories.
    let top: Vec<String> = std::fs::read_dir(scratch.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let mut top_sorted = top.clone();
    top_sorted.sort();
    assert_eq!(top_sorted, ["a", "b"]);
}

#[test]
fn threads_flag_does_not_change_output() {
    let scratch = tempfile::tempdir().unwrap();
    for (dir, threads) in [("t1", "1"), ("t2", "2")] {
        let out = pnfc(
            &[
                "synth", "--out", dir, "--frames", "4", "--T", "20", "--seed", "9",
                "--threads", threads,
            ],
            scratch.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    // The env mirror of --threads behaves the same.
    let out = Command::new(env!("CARGO_BIN_EXE_pnfc"))
        .args(["synth", "--out", "t3", "--frames", "4", "--T", "20", "--seed", "9"])
        .current_dir(scratch.path())
        .env("PNFC_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let t1 = dir_contents(&scratch.path().join("t1"));
    assert_eq!(t1, dir_contents(&scratch.path().join("t2")));
    assert_eq!(t1, dir_contents(&scratch.path().join("t3")));
}

#[test]
fn derain_rejects_two_frame_stack() {
    let scratch = tempfile::tempdir().unwrap();
    let out = pnfc(
        &["synth", "--out", "two", "--frames", "2", "--T", "20"],
        scratch.path(),
    );
    assert!(out.status.success());
    let out = pnfc(
        &["derain", "--stack", "two/manifest.json", "--out", "r.pgm"],
        scratch.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("3 frames"), "stderr must name the precondition: {err}");
    assert!(!scratch.path().join("r.pgm").exists());
}

#[test]
fn derain_writes_reconstruction() {
    let scratch = tempfile::tempdir().unwrap();
    let out = pnfc(
        &["synth", "--out", "s", "--frames", "6", "--T", "20", "--seed", "3"],
        scratch.path(),
    );
    assert!(out.status.success());
    for estimator in ["pnfc", "mean", "median"] {
        let file = format!("{estimator}.pgm");
        let out = pnfc(
            &[
                "derain", "--stack", "s/manifest.json", "--estimator", estimator,
                "--out", &file,
            ],
            scratch.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout_lines(&out).contains(&format!("estimator={estimator}")));
        assert!(scratch.path().join(&file).exists());
    }
}

#[test]
fn eval_identical_images_print_caps() {
    let scratch = tempfile::tempdir().unwrap();
    let out = pnfc(
        &["synth", "--out", "s", "--frames", "3", "--T", "20"],
        scratch.path(),
    );
    assert!(out.status.success());
    let out = pnfc(
        &["eval", "--a", "s/frame_0000.pgm", "--b", "s/frame_0000.pgm"],
        scratch.path(),
    );
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert!(lines.contains(&"psnr_db=99.0".to_string()), "{lines:?}");
    assert!(lines.contains(&"ssim=1.0".to_string()), "{lines:?}");
}

#[test]
fn verify_stats_exit_codes_follow_verdict() {
    let scratch = tempfile::tempdir().unwrap();
    let out = pnfc(
        &[
            "synth", "--out", "s", "--frames", "30", "--T", "20", "--seed", "5",
            "--trace",
        ],
        scratch.path(),
    );
    assert!(out.status.success());

    let out = pnfc(
        &[
            "verify-stats", "--stack", "s/manifest.json", "--trace", "s/trace",
            "--out", "verdict.csv",
        ],
        scratch.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = stdout_lines(&out);
    assert!(lines.contains(&"regime_ok=true".to_string()), "{lines:?}");
    assert!(lines.contains(&"aggregate_pass=true".to_string()), "{lines:?}");
    let verdict = std::fs::read_to_string(scratch.path().join("verdict.csv")).unwrap();
    assert!(verdict.starts_with("tile_x,tile_y,"));

    // A coherence time longer than the frame interval puts the stack in
    // the correlated regime, which the verdict must reject with exit 1.
    let out = pnfc(
        &[
            "verify-stats", "--stack", "s/manifest.json", "--trace", "s/trace",
            "--coherence-ms", "50",
        ],
        scratch.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_lines(&out).contains(&"regime_ok=false".to_string()));
}

#[test]
fn sweep_and_demo_write_reports() {
    let scratch = tempfile::tempdir().unwrap();
    let out = pnfc(
        &[
            "sweep", "--out", "sw", "--T", "20,50", "--frames", "5", "--seeds", "1",
        ],
        scratch.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = stdout_lines(&out);
    assert!(lines.contains(&"rows=6".to_string()), "{lines:?}");
    assert!(lines.iter().any(|l| l.starts_with("psnr_pnfc_t20=")));
    assert!(lines.iter().any(|l| l.starts_with("inflection_pnfc_rainy=")));
    for file in ["report.csv", "curves_psnr.svg", "curves_ssim.svg", "recon_t20_s1_pnfc.pgm"] {
        assert!(scratch.path().join("sw").join(file).exists(), "{file} missing");
    }

    let out = pnfc(
        &[
            "demo-fluctuation", "--out", "d", "--T", "20,50", "--frames", "4",
            "--block", "60,60,8,8",
        ],
        scratch.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = stdout_lines(&out);
    assert!(lines.contains(&"rows=6".to_string()), "{lines:?}");
    assert!(lines.iter().any(|l| l.starts_with("interframe_psnr_t20=")));
    for file in ["fluctuation.csv", "frame_t20.pgm", "block_t50.pgm"] {
        assert!(scratch.path().join("d").join(file).exists(), "{file} missing");
    }
}

#[test]
fn argument_errors_exit_2_with_usage() {
    let scratch = tempfile::tempdir().unwrap();
    // Unknown subcommand and missing required flag are clap usage errors.
    let out = pnfc(&["frobnicate"], scratch.path());
    assert_eq!(out.status.code(), Some(2));
    let out = pnfc(&["derain", "--out", "x.pgm"], scratch.path());
    assert_eq!(out.status.code(), Some(2));
    // Semantic errors surface the same way, with usage guidance.
    let out = pnfc(
        &["derain", "--stack", "missing/manifest.json", "--out", "x.pgm"],
        scratch.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = pnfc(
        &["demo-fluctuation", "--out", "d", "--block", "1,2,3"],
        scratch.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    // Bad thread counts are rejected before any work.
    let out = Command::new(env!("CARGO_BIN_EXE_pnfc"))
        .args(["eval", "--a", "x", "--b", "y"])
        .current_dir(scratch.path())
        .env("PNFC_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PNFC_THREADS"));
}
