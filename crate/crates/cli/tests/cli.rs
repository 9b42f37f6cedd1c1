use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn goi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goi"))
        .args(args)
        .current_dir(cwd)
        .env("GOI_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stimulus_writes_image_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = goi(&["stimulus", "wundt", "--width", "200", "-o", "fig/w.png"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = goi_core::load_image(dir.path().join("fig/w.png")).unwrap();
    assert_eq!((img.width(), img.height()), (200, 256));
    let meta = json(&dir.path().join("fig/w.json"));
    assert_eq!(meta["kind"], "wundt");
    assert_eq!(meta["target_lines"].as_array().unwrap().len(), 2);
}

#[test]
fn stimulus_output_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = goi(&["stimulus", "random-segments", "--seed", "7", "-o", "r.pgm"], dir.path());
    assert!(out.status.success());
    let mut spec = goi_core::StimulusSpec::new(goi_core::StimulusKind::RandomSegments);
    spec.seed = 7;
    let direct = goi_core::generate(&spec).unwrap();
    let read = goi_core::load_image(dir.path().join("r.pgm")).unwrap();
    assert_eq!(read.to_luma8(), direct.image.to_luma8());
}

#[test]
fn blank_run_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("blank.toml"),
        "preset = \"blank\"\noutput_dir = \"res\"\n[stimulus]\nwidth = 128\nheight = 128\n",
    )
    .unwrap();
    let out = goi(&["run", "-c", "blank.toml"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&dir.path().join("res/metrics.json"));
    assert!(m["max_displacement"].as_f64().unwrap() <= 1e-6);
    let manifest = json(&dir.path().join("res/manifest.json"));
    for name in ["stimulus.png", "warped.png", "overlay.png", "metrics.json", "quiver.csv"] {
        assert!(manifest["files"][name].is_string(), "{name} missing from manifest");
    }
}

#[test]
fn flags_beat_file_beats_preset() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "preset = \"wundt\"\ngamma = 0.05\neig_floor = 0.002\n",
    )
    .unwrap();
    let out = goi(&["config", "-c", "c.toml", "--gamma", "0.07"], dir.path());
    assert!(out.status.success());
    let cfg: toml::Table = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    assert_eq!(cfg["gamma"].as_float(), Some(0.07));
    assert_eq!(cfg["eig_floor"].as_float(), Some(0.002));
    assert_eq!(cfg["sigma"].as_float(), Some(11.2));
    assert_eq!(cfg["name"].as_str(), Some("wundt"));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| goi(args, dir.path()).status.code();
    fs::write(dir.path().join("typo.toml"), "sigmaa = 2.0\n").unwrap();
    assert_eq!(code(&["run", "-c", "typo.toml"]), Some(2));
    assert_eq!(code(&["run", "--gamma", "-1"]), Some(2));
    assert_eq!(code(&["run", "--sigma", "40", "--width", "128", "--height", "128"]), Some(2));
    assert_eq!(code(&["run", "-c", "absent.toml"]), Some(3));
    assert_eq!(code(&["run", "--input", "absent.png"]), Some(3));
    assert_eq!(code(&["stimulus", "mystery", "-o", "m.png"]), Some(2));
    assert_eq!(code(&["run", "--max-iterations", "1", "--solver", "cg", "--width", "128", "--height", "128"]), Some(4));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_goi"))
        .args(["stimulus", "blank", "-o", "b.png"])
        .current_dir(dir.path())
        .env("GOI_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
