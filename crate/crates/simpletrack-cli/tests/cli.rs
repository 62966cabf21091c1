//! End-to-end checks of the command-line surface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simpletrack"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

/// Shared crossing scenario, generated once per test process.
fn crossing_dir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = std::env::temp_dir().join(format!("simpletrack-cli-fixture-{}", std::process::id()));
        let seq = dir.join("crossing");
        let out = run(&[
            "synth",
            "--preset",
            "crossing",
            "--seed",
            "7",
            "--out",
            seq.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "synth failed: {}", stderr(&out));
        seq
    })
}

#[test]
fn synth_is_reproducible_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = run(&[
            "synth",
            "--preset",
            "occlusion-reappear",
            "--seed",
            "9",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for name in ["gt.txt", "dets.txt", "grid.bin"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs between identical synth runs");
    }
}

#[test]
fn track_on_crossing_emits_two_identities_and_a_manifest() {
    let seq = crossing_dir();
    let tmp = tempfile::tempdir().unwrap();
    let res = tmp.path().join("res.txt");
    let out = run(&[
        "track",
        "--dets",
        seq.join("dets.txt").to_str().unwrap(),
        "--grid",
        seq.join("grid.bin").to_str().unwrap(),
        "--out",
        res.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let body = std::fs::read_to_string(&res).unwrap();
    let ids: std::collections::BTreeSet<&str> = body
        .lines()
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(ids.len(), 2, "expected 2 identities, got {ids:?}");

    let manifest = tmp.path().join("res.txt.manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(manifest["command"], "track");
    assert_eq!(manifest["config"]["strategy"], "simpletrack");
}

#[test]
fn byte_strategy_warns_that_grid_is_ignored() {
    let seq = crossing_dir();
    let tmp = tempfile::tempdir().unwrap();
    let res = tmp.path().join("res.txt");
    let out = run(&[
        "track",
        "--dets",
        seq.join("dets.txt").to_str().unwrap(),
        "--grid",
        seq.join("grid.bin").to_str().unwrap(),
        "--strategy",
        "byte",
        "--out",
        res.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("ignored"), "stderr: {}", stderr(&out));
}

#[test]
fn raising_tau_high_empties_the_result_file() {
    let seq = crossing_dir();
    let tmp = tempfile::tempdir().unwrap();
    let res = tmp.path().join("res.txt");
    let out = run(&[
        "track",
        "--dets",
        seq.join("dets.txt").to_str().unwrap(),
        "--out",
        res.to_str().unwrap(),
        "--tau-high",
        "0.99",
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::metadata(&res).unwrap().len(), 0);
}

#[test]
fn eval_of_gt_against_itself_prints_perfect_scores() {
    let seq = crossing_dir();
    let tmp = tempfile::tempdir().unwrap();
    // ground truth reformatted as a results file
    let res = tmp.path().join("res.txt");
    let gt_body = std::fs::read_to_string(seq.join("gt.txt")).unwrap();
    let res_body: String = gt_body
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!(
                "{},{},{},{},{},{},1.0,-1,-1,-1\n",
                f[0], f[1], f[2], f[3], f[4], f[5]
            )
        })
        .collect();
    std::fs::write(&res, res_body).unwrap();

    let report_dir = tmp.path().join("report");
    let svg = tmp.path().join("overlay.svg");
    let out = run(&[
        "eval",
        "--gt",
        seq.join("gt.txt").to_str().unwrap(),
        "--res",
        res.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("MOTA") && text.contains("1.000"), "{text}");
    assert!(text.contains("IDF1"));

    let kv = std::fs::read_to_string(report_dir.join("report.kv")).unwrap();
    assert!(kv.contains("mota=1\n"));
    assert!(kv.contains("idf1=1\n"));
    assert!(report_dir.join("manifest.json").is_file());
    let svg_body = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_body.starts_with("<svg") && svg_body.contains("<rect"));
}

#[test]
fn interp_then_eval_raises_mota_on_occlusion_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("seq");
    assert!(run(&[
        "synth",
        "--preset",
        "occlusion-reappear",
        "--seed",
        "7",
        "--out",
        seq.to_str().unwrap(),
    ])
    .status
    .success());

    // no retrieval, no grid: the dropout stays a gap in the results
    let res = tmp.path().join("res.txt");
    assert!(run(&[
        "track",
        "--dets",
        seq.join("dets.txt").to_str().unwrap(),
        "--retrieval-enabled",
        "false",
        "--out",
        res.to_str().unwrap(),
    ])
    .status
    .success());

    let filled = tmp.path().join("res_interp.txt");
    assert!(run(&[
        "interp",
        "--res",
        res.to_str().unwrap(),
        "--max-gap",
        "20",
        "--out",
        filled.to_str().unwrap(),
    ])
    .status
    .success());

    let mota_of = |res_path: &Path| -> f64 {
        let out = run(&[
            "eval",
            "--gt",
            seq.join("gt.txt").to_str().unwrap(),
            "--res",
            res_path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        stdout(&out)
            .lines()
            .find(|l| l.starts_with("MOTA"))
            .unwrap()
            .split_whitespace()
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    let before = mota_of(&res);
    let after = mota_of(&filled);
    assert!(after > before, "MOTA {after} !> {before}");
}

#[test]
fn directory_mode_fans_out_over_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("sequences");
    for (name, seed) in [("s1", 1u64), ("s2", 2u64)] {
        assert!(run(&[
            "synth",
            "--preset",
            "occlusion-reappear",
            "--seed",
            &seed.to_string(),
            "--out",
            root.join(name).to_str().unwrap(),
        ])
        .status
        .success());
    }
    let out_dir = tmp.path().join("results");
    let out = run(&[
        "track",
        "--dets",
        root.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("s1.txt").is_file());
    assert!(out_dir.join("s2.txt").is_file());
    assert!(out_dir.join("manifest.json").is_file());
}

#[test]
fn error_exit_codes() {
    // unknown flag: usage error
    assert_eq!(run(&["track", "--bogus"]).status.code(), Some(1));
    // malformed input: format error
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.txt");
    std::fs::write(&bad, "not a detections file\n").unwrap();
    let out = run(&[
        "track",
        "--dets",
        bad.to_str().unwrap(),
        "--out",
        tmp.path().join("x.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // missing file
    let out = run(&[
        "eval",
        "--gt",
        tmp.path().join("missing.txt").to_str().unwrap(),
        "--res",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // bad preset name: usage
    let out = run(&[
        "synth",
        "--preset",
        "nope",
        "--out",
        tmp.path().join("d").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
