use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use haze_core::scenario::{preset, ScenarioConfig, PRESETS};

fn haze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haze"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn haze")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

/// Plume box shrunk to two frames and a small image.
fn small() -> ScenarioConfig {
    let mut cfg = preset("plume").unwrap();
    cfg.schedule.frames = 2;
    cfg.cameras[0].width_px = 48;
    cfg.cameras[0].height_px = 48;
    cfg
}

#[test]
fn lists_every_preset() {
    let out = haze(&["presets"]);
    assert_eq!(code(&out), 0);
    let names: Vec<String> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(names, PRESETS);
}

#[test]
fn missing_scenario_is_a_config_error() {
    let out = haze(&["simulate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--preset"));
}

#[test]
fn unknown_preset_is_a_config_error() {
    assert_eq!(code(&haze(&["--preset", "nope", "simulate"])), 2);
}

#[test]
fn unknown_key_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = small().to_toml_string().unwrap();
    text.push_str("\n[sim_extra]\nwind_m_s = 3.0\n");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = haze(&["--config", path.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn invalid_value_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = small().to_toml_string().unwrap().replace("dt_s = ", "dt_s = -");
    let path = dir.path().join("neg.toml");
    fs::write(&path, text).unwrap();
    let out = haze(&["--config", path.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sim.dt_s"), "{}", stderr(&out));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = haze(&["--config", "/nonexistent/scenario.toml", "simulate"]);
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("/nonexistent/scenario.toml"));
}

#[test]
fn zero_threads_rejected() {
    assert_eq!(code(&haze(&["--preset", "quiescent", "--threads", "0", "simulate"])), 2);
}

#[test]
fn blown_up_step_is_a_solver_error_with_frame() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.sim.dt = 5.0;
    let path = write_config(dir.path(), &cfg);
    let out = haze(&["--config", &path, "simulate"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("frame"));
}

#[test]
fn ablation_without_heat_fails_validation() {
    let out = haze(&["--preset", "quiescent", "--frames", "2", "ablation"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn show_config_round_trips() {
    for name in PRESETS {
        let out = haze(&["--preset", name, "show-config"]);
        assert_eq!(code(&out), 0);
        let parsed = ScenarioConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(parsed, preset(name).unwrap(), "{name}");
    }
}

#[test]
fn overrides_apply() {
    let out = haze(&["--preset", "plume", "--seed", "99", "--frames", "7", "show-config"]);
    let cfg = ScenarioConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.sim.seed, 99);
    assert_eq!(cfg.schedule.frames, 7);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small());
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|r| {
            let out_dir = dir.path().join(r);
            let out = haze(&[
                "--config",
                &path,
                "--out",
                out_dir.to_str().unwrap(),
                "--deterministic",
                "simulate",
            ]);
            assert_eq!(code(&out), 0, "{}", stderr(&out));
            (out.stdout, out_dir)
        })
        .collect();
    assert_eq!(runs[0].0, runs[1].0);
    for file in ["stats.csv", "summary.toml"] {
        let a = fs::read(runs[0].1.join(file)).unwrap();
        let b = fs::read(runs[1].1.join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let stats = fs::read_to_string(runs[0].1.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 3);
}

#[test]
fn render_writes_one_frame_per_camera_and_frame() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    let mut second = cfg.cameras[0].clone();
    second.position_m.x += 0.05;
    cfg.cameras.push(second);
    let path = write_config(dir.path(), &cfg);
    let out_dir = dir.path().join("out");
    let out = haze(&["--config", &path, "--out", out_dir.to_str().unwrap(), "render"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for c in 0..2 {
        for f in 0..2 {
            let bytes = fs::read(out_dir.join(format!("cam{c}_frame{f}.ppm"))).unwrap();
            let img = haze_core::ray::read_ppm(&bytes).unwrap();
            assert_eq!((img.width, img.height), (48, 48));
        }
    }
    assert!(out_dir.join("render_steps.csv").exists());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
}
