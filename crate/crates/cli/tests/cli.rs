use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use handcrop::alignment::RigidPose;
use handcrop::camera::{project, CameraIntrinsics};
use handcrop::hand_model::{KeypointSet3D, NUM_JOINTS};
use handcrop::metrics::{absolute_3d_error, centered_2d_error, mpjpe, mrrpe, root_relative_3d_error};
use handcrop::rotation::rotation_angle_between;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handcrop"))
        .args(args)
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_of(out: &Output) -> Value {
    serde_json::from_slice::<Value>(&out.stderr).unwrap()["error"].clone()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
    assert!(run(&["kpe", "--help"]).status.success());
}

#[test]
fn unknown_flag_is_a_validation_error() {
    let out = run(&["kpe", "--nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["kind"], "validation");
}

#[test]
fn reference_only_population_gives_one_zero_row() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "ambiguity-scan",
        "--population",
        "1",
        "--mode",
        "raw",
        "--out",
        path_str(dir.path()),
    ]);
    let csv = std::fs::read_to_string(dir.path().join("records_raw.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "pair_id,crop_px_dist,centered_2d_err,abs_3d_err,rootrel_3d_err"
    );
    assert!(lines[1].split(',').all(|v| v.parse::<f64>().unwrap() == 0.0));
    assert!(dir.path().join("scatter_raw.svg").exists());
}

#[test]
fn default_scan_passes_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_ok(&["ambiguity-scan", "--check", "--out", path_str(dir.path())]);
    assert_eq!(summary["check"]["passed"], true);
    for mode in ["raw", "pnp", "pnp_shift"] {
        assert!(dir.path().join(format!("records_{mode}.csv")).exists());
        assert!(dir.path().join(format!("scatter_{mode}.svg")).exists());
    }
}

#[test]
fn raw_only_check_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "ambiguity-scan",
        "--mode",
        "raw",
        "--check",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_of(&out);
    assert_eq!(err["kind"], "validation");
    assert_eq!(err["module"], "alignment");
    // The records are still written before the check reports.
    assert!(dir.path().join("records_raw.csv").exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let file = tempfile::NamedTempFile::new().unwrap();
    let out = run(&[
        "ambiguity-scan",
        "--population",
        "1",
        "--out",
        &format!("{}/sub", path_str(file.path())),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["kind"], "io");
}

#[test]
fn scan_outputs_are_byte_identical_across_runs_and_threads() {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, threads) in dirs.iter().zip(["1", "1", "3"]) {
        run_ok(&[
            "ambiguity-scan",
            "--population",
            "120",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            path_str(d.path()),
        ]);
    }
    for name in [
        "records_raw.csv",
        "records_pnp.csv",
        "records_pnp_shift.csv",
        "scatter_pnp.svg",
        "summary.json",
        "manifest.json",
    ] {
        let first = std::fs::read(dirs[0].path().join(name)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(std::fs::read(d.path().join(name)).unwrap(), first, "{name}");
        }
    }
}

#[test]
fn manifest_hashes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "ambiguity-scan",
        "--population",
        "30",
        "--seed",
        "9",
        "--out",
        path_str(dir.path()),
    ]);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["command"], "ambiguity-scan");
    let outputs = manifest["outputs"].as_array().unwrap();
    let mut listed: Vec<String> = outputs
        .iter()
        .map(|e| e["path"].as_str().unwrap().to_string())
        .collect();
    listed.sort();
    let mut on_disk: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    for e in outputs {
        let bytes = std::fs::read(dir.path().join(e["path"].as_str().unwrap())).unwrap();
        assert_eq!(e["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn config_file_is_used_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        json!({"seed": 3, "scan": {"population_size": 4, "modes": ["raw"]}}).to_string(),
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(&["--config", path_str(&cfg), "ambiguity-scan", "--out", path_str(&out)]);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["seed"], 3);
    assert_eq!(
        std::fs::read_to_string(out.join("records_raw.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
    run_ok(&[
        "--config",
        path_str(&cfg),
        "--seed",
        "4",
        "ambiguity-scan",
        "--population",
        "2",
        "--out",
        path_str(&out),
    ]);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["seed"], 4);
    assert_eq!(
        std::fs::read_to_string(out.join("records_raw.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    std::fs::write(&cfg, json!({"scan": {"population_size": 0}}).to_string()).unwrap();
    assert_eq!(
        run(&["--config", path_str(&cfg), "ambiguity-scan"]).status.code(),
        Some(1)
    );
}

#[test]
fn bundled_config_validates() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "--config",
        path_str(&data("experiment.json")),
        "perspective-demo",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(dir.path().join("demo.svg").exists());
    let demo = read_json(&dir.path().join("demo.json"));
    assert!(demo.is_object() || demo.is_array());
}

fn kpe(args: &[&str]) -> Value {
    let intr = data("intrinsics_640x480.json");
    let mut full = vec!["kpe", "--intrinsics", path_str(&intr)];
    full.extend_from_slice(args);
    run_ok(&full)
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn kpe_centered_box_has_the_zero_one_center_block() {
    let enc = floats(&kpe(&["--box", "220,140,420,340"])["values"]);
    assert_eq!(enc.len(), 80);
    let center = &enc[64..];
    for (i, v) in center.iter().enumerate() {
        let expected = if i % 2 == 0 { 0.0 } else { 1.0 };
        assert!((v - expected).abs() < 1e-12, "center value {i} = {v}");
    }
    let dense = kpe(&["--box", "220,140,420,340", "--encoding", "dense", "--grid", "1"]);
    let cell = floats(&dense["cells"][0]);
    assert_eq!(cell, center.to_vec());
    let off = floats(&kpe(&["--box", "20,30,220,230"])["values"]);
    assert_ne!(off, enc);
}

#[test]
fn kpe_dense_csv_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("kpe.csv");
    kpe(&[
        "--box",
        "0,0,640,480",
        "--encoding",
        "dense",
        "--grid",
        "4",
        "--csv",
        path_str(&csv),
    ]);
    assert!(
        std::fs::read_to_string(&csv)
            .unwrap()
            .lines()
            .filter(|l| !l.is_empty())
            .count()
            >= 16
    );
}

#[test]
fn kpe_rejects_malformed_boxes() {
    let intr = data("intrinsics_640x480.json");
    for b in ["10,10,5,50", "1,2,3", "a,b,c,d"] {
        let out = run(&["kpe", "--intrinsics", path_str(&intr), "--box", b]);
        assert_eq!(out.status.code(), Some(1), "box {b}");
        assert!(error_of(&out)["message"].is_string());
    }
}

#[test]
fn pnp_fixture_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (intr, r2, h3) = (
        data("intrinsics_640x480.json"),
        data("pnp_ref2d.json"),
        data("pnp_hand3d.json"),
    );
    let report = run_ok(&[
        "pnp",
        "--intrinsics",
        path_str(&intr),
        "--ref2d",
        path_str(&r2),
        "--hand3d",
        path_str(&h3),
        "--out",
        path_str(dir.path()),
    ]);
    assert!(report["residual_px"].as_f64().unwrap() < 1e-8);
    let found: RigidPose = serde_json::from_value(report["pose"].clone()).unwrap();
    let expected: RigidPose = serde_json::from_slice(&std::fs::read(data("pnp_expected_pose.json")).unwrap()).unwrap();
    assert!(rotation_angle_between(&found.rotation, &expected.rotation) < 1e-9);
    assert!((found.translation - expected.translation).norm() < 1e-6);
    assert!(dir.path().join("pose.json").exists());
    assert!(dir.path().join("aligned_hand3d.json").exists());

    let shifted = run_ok(&[
        "pnp",
        "--intrinsics",
        path_str(&intr),
        "--ref2d",
        path_str(&r2),
        "--hand3d",
        path_str(&h3),
        "--shift",
        "-20,15",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(floats(&shifted["shift"]), vec![-20.0, 15.0]);
}

#[test]
fn metrics_on_identical_files_are_zero() {
    let gt = data("metrics_gt.json");
    let intr = data("intrinsics_640x480.json");
    let m = run_ok(&[
        "metrics",
        "--pred",
        path_str(&gt),
        "--gt",
        path_str(&gt),
        "--intrinsics",
        path_str(&intr),
    ]);
    for (_, v) in m["hands"]["hand"].as_object().unwrap() {
        assert_eq!(v.as_f64().unwrap(), 0.0);
    }
}

#[test]
fn metrics_offset_fixture() {
    let (pred, gt) = (data("metrics_pred.json"), data("metrics_gt.json"));
    let m = run_ok(&["metrics", "--pred", path_str(&pred), "--gt", path_str(&gt)]);
    let h = &m["hands"]["hand"];
    assert!((h["absolute_3d"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    assert!(h["mpjpe"].as_f64().unwrap() < 1e-9);
    assert!(m["mrrpe"].is_null());
}

fn random_hand(rng: &mut ChaCha8Rng) -> KeypointSet3D {
    let c = Vector3::new(
        rng.gen_range(-80.0..80.0),
        rng.gen_range(-60.0..60.0),
        rng.gen_range(400.0..600.0),
    );
    let pts: Vec<Vector3<f64>> = (0..NUM_JOINTS)
        .map(|_| {
            c + Vector3::new(
                rng.gen_range(-60.0..60.0),
                rng.gen_range(-60.0..60.0),
                rng.gen_range(-30.0..30.0),
            )
        })
        .collect();
    KeypointSet3D::from_slice(&pts).unwrap()
}

#[test]
fn metrics_on_random_pairs_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let intr = data("intrinsics_640x480.json");
    let cam = CameraIntrinsics::from_json(&std::fs::read_to_string(&intr).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..3 {
        let hands: Vec<KeypointSet3D> = (0..4).map(|_| random_hand(&mut rng)).collect();
        let pred = dir.path().join(format!("pred{trial}.json"));
        let gt = dir.path().join(format!("gt{trial}.json"));
        std::fs::write(
            &pred,
            serde_json::to_string(&json!({"left": hands[0], "right": hands[1]})).unwrap(),
        )
        .unwrap();
        std::fs::write(
            &gt,
            serde_json::to_string(&json!({"left": hands[2], "right": hands[3]})).unwrap(),
        )
        .unwrap();
        let m = run_ok(&[
            "metrics",
            "--pred",
            path_str(&pred),
            "--gt",
            path_str(&gt),
            "--intrinsics",
            path_str(&intr),
        ]);
        for (name, p, g) in [("left", &hands[0], &hands[2]), ("right", &hands[1], &hands[3])] {
            let h = &m["hands"][name];
            let close = |key: &str, v: f64| assert!((h[key].as_f64().unwrap() - v).abs() < 1e-9, "{name} {key}");
            close("mpjpe", mpjpe(p, g));
            close("absolute_3d", absolute_3d_error(p, g));
            close("root_relative_3d", root_relative_3d_error(p, None, g, None).unwrap());
            close(
                "centered_2d",
                centered_2d_error(&project(&cam, p).unwrap(), &project(&cam, g).unwrap()),
            );
        }
        let expected = mrrpe(&hands[0], &hands[1], &hands[2], &hands[3]);
        assert!((m["mrrpe"].as_f64().unwrap() - expected).abs() < 1e-9);
    }
}

#[test]
fn metrics_rejects_wrong_joint_count() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&vec![[0.0, 0.0, 400.0]; 20]).unwrap()).unwrap();
    let gt = data("metrics_gt.json");
    let out = run(&["metrics", "--pred", path_str(&bad), "--gt", path_str(&gt)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn project_prints_21_points() {
    let intr = data("intrinsics_640x480.json");
    let p = run_ok(&["project", "--intrinsics", path_str(&intr)]);
    assert_eq!(p["keypoints_2d"].as_array().unwrap().len(), NUM_JOINTS);
}

#[test]
fn self_target_fit_reports_no_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let render = dir.path().join("render");
    run_ok(&["render-silhouette", "--out", path_str(&render)]);
    for name in ["silhouette.pgm", "mask.pgm", "mask.pgm.json", "params.json"] {
        assert!(render.join(name).exists(), "{name}");
    }
    let fit = dir.path().join("fit");
    let summary = run_ok(&[
        "fit-silhouette",
        "--target",
        path_str(&render.join("mask.pgm")),
        "--init",
        path_str(&render.join("params.json")),
        "--steps",
        "20",
        "--min-relative-decrease",
        "0.01",
        "--out",
        path_str(&fit),
    ]);
    assert_eq!(summary["accepted_steps"], 0);
    assert_eq!(summary["improvement"].as_f64().unwrap(), 0.0);
    assert_eq!(summary["improved"], false);
    assert!(fit.join("loss.csv").exists());
    assert!(fit.join("fitted_params.json").exists());
}

#[test]
fn fit_refuses_modal_targets() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["render-silhouette", "--modal", "--out", path_str(dir.path())]);
    let out = run(&[
        "fit-silhouette",
        "--target",
        path_str(&dir.path().join("mask.pgm")),
        "--steps",
        "2",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["module"], "softras");
}

#[test]
fn grasp_train_on_bundled_toy_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_ok(&[
        "--config",
        path_str(&data("experiment.json")),
        "grasp-train",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(summary["final_accuracy"].as_f64().unwrap() >= 0.95);
    for name in ["trace.csv", "net.json", "summary.json", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let again = tempfile::tempdir().unwrap();
    run_ok(&[
        "--config",
        path_str(&data("experiment.json")),
        "grasp-train",
        "--out",
        path_str(again.path()),
    ]);
    assert_eq!(
        std::fs::read(dir.path().join("net.json")).unwrap(),
        std::fs::read(again.path().join("net.json")).unwrap()
    );
}
