//! Shipped scenarios. Tunable knobs (source temperature and strength,
//! buoyancy volume, geometry, grid size) are chosen for desk-scale particle
//! counts and short runtimes.

use crate::error::{HazeError, Result};
use crate::geom::{Aabb, Vec3};
use crate::ray::{Checkerboard, Scene, SteppingPolicy};
use crate::sph::SimParams;
use crate::thermal::HeatSource;

use super::config::{CameraConfig, GridConfig, MarkerLayout, ParticleInit, ScenarioConfig, Schedule, ValidationConfig};

pub const PRESETS: [&str; 7] = [
    "quiescent",
    "plume",
    "discrete-depth",
    "slanted-board",
    "multiview",
    "ablation",
    "bench",
];

const LIGHT: [u8; 3] = [235, 235, 225];
const DARK: [u8; 3] = [25, 25, 30];
const SKY: [u8; 3] = [120, 150, 200];

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    match name {
        "quiescent" => Ok(quiescent()),
        "plume" => Ok(plume()),
        "discrete-depth" => Ok(discrete_depth()),
        "slanted-board" => Ok(slanted_board()),
        "multiview" => Ok(multiview()),
        "ablation" => Ok(ablation()),
        "bench" => Ok(bench()),
        _ => Err(HazeError::config(
            "--preset",
            format!("unknown preset `{name}`, expected one of {}", PRESETS.join(", ")),
        )),
    }
}

fn board(center: Vec3, normal: Vec3, axis: Vec3, half: [f64; 2], square: f64) -> Checkerboard {
    Checkerboard::new(center, normal, axis, half, square, (LIGHT, DARK)).expect("preset board is valid")
}

/// Unit box with a heated block in the middle of the floor.
fn box_base(name: &str) -> ScenarioConfig {
    let sim = SimParams {
        particle_volume: Some(3e-4),
        seed: 7,
        ..SimParams::default()
    };
    let domain = sim.domain;
    ScenarioConfig {
        name: name.into(),
        particles: ParticleInit {
            extent_m: domain,
            spacing_m: 0.05,
            jitter_m: 0.0,
        },
        sources: vec![HeatSource {
            min: Vec3::new(0.35, 0.0, 0.35),
            max: Vec3::new(0.65, 0.08, 0.65),
            temperature: 1000.0,
            lambda: 1.0,
            radius: 0.1,
        }],
        grid: GridConfig::default(),
        cameras: vec![CameraConfig {
            position_m: Vec3::new(0.5, 0.5, -1.2),
            target_m: Vec3::new(0.5, 0.5, 1.8),
            up: Vec3::new(0.0, 1.0, 0.0),
            fov_y_rad: 0.75,
            width_px: 128,
            height_px: 128,
        }],
        scene: Scene::new(
            vec![board(
                Vec3::new(0.5, 0.5, 1.8),
                Vec3::new(0.0, 0.0, -1.0),
                Vec3::new(1.0, 0.0, 0.0),
                [1.0, 1.0],
                0.05,
            )],
            SKY,
        ),
        stepping: SteppingPolicy::default(),
        schedule: Schedule {
            warmup_steps: 0,
            frames: 200,
            steps_per_frame: 1,
            dump_particles: false,
        },
        markers: vec![],
        sim,
        validation: ValidationConfig::default(),
    }
}

fn quiescent() -> ScenarioConfig {
    let mut cfg = box_base("quiescent");
    cfg.sources.clear();
    cfg.schedule.frames = 100;
    cfg
}

fn plume() -> ScenarioConfig {
    box_base("plume")
}

/// Same seed and schedule for the three thermal-force variants.
fn ablation() -> ScenarioConfig {
    let mut cfg = box_base("ablation");
    cfg.schedule = Schedule {
        warmup_steps: 40,
        frames: 6,
        steps_per_frame: 10,
        dump_particles: false,
    };
    cfg
}

fn bench() -> ScenarioConfig {
    let mut cfg = box_base("bench");
    cfg.schedule = Schedule {
        warmup_steps: 200,
        frames: 1,
        steps_per_frame: 1,
        dump_particles: false,
    };
    cfg.cameras[0].width_px = 256;
    cfg.cameras[0].height_px = 256;
    // air's own constant; the plume is too weak for adaptive stepping to pay off below it
    cfg.grid.gladstone_dale_m3_kg = 2.2e-4;
    cfg
}

/// Long channel along z with a heated floor, viewed from behind the end wall.
fn channel_base(name: &str) -> ScenarioConfig {
    let domain = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 0.6, 2.0));
    let sim = SimParams {
        particle_volume: Some(3e-4),
        domain,
        seed: 11,
        ..SimParams::default()
    };
    ScenarioConfig {
        name: name.into(),
        particles: ParticleInit {
            extent_m: domain,
            spacing_m: 0.05,
            jitter_m: 0.01,
        },
        sources: vec![HeatSource {
            min: Vec3::new(0.0, 0.0, 0.0),
            max: Vec3::new(1.0, 0.05, 2.0),
            temperature: 1000.0,
            lambda: 1.0,
            radius: 0.1,
        }],
        grid: GridConfig {
            resolution: [20, 12, 40],
            bounds_m: None,
            gladstone_dale_m3_kg: 1e-5,
        },
        cameras: vec![CameraConfig {
            position_m: Vec3::new(0.5, 0.35, -0.1),
            target_m: Vec3::new(0.5, 0.35, 2.0),
            up: Vec3::new(0.0, 1.0, 0.0),
            fov_y_rad: 0.9,
            width_px: 256,
            height_px: 256,
        }],
        scene: Scene::new(vec![], SKY),
        stepping: SteppingPolicy::default(),
        schedule: Schedule {
            warmup_steps: 200,
            frames: 100,
            steps_per_frame: 3,
            dump_particles: false,
        },
        markers: vec![],
        sim,
        validation: ValidationConfig::default(),
    }
}

/// Longer channel with the camera inside it, clear of the quiet layer at the
/// end wall, so both boards see turbulence over their whole sight lines.
fn immersed_channel_base(name: &str) -> ScenarioConfig {
    let mut cfg = channel_base(name);
    let domain = Aabb::new(Vec3::zeros(), Vec3::new(0.8, 0.6, 2.6));
    cfg.sim.domain = domain;
    cfg.particles.extent_m = domain;
    cfg.sources[0].max = Vec3::new(0.8, 0.05, 2.6);
    cfg.grid.resolution = [16, 12, 52];
    cfg.cameras[0].position_m = Vec3::new(0.4, 0.35, 0.45);
    cfg.cameras[0].target_m = Vec3::new(0.4, 0.35, 2.6);
    cfg
}

fn discrete_depth() -> ScenarioConfig {
    let mut cfg = immersed_channel_base("discrete-depth");
    let facing = Vec3::new(0.0, 0.0, -1.0);
    let x = Vec3::new(1.0, 0.0, 0.0);
    // far board at twice the depth of the near one, offset so both are seen
    cfg.scene.boards = vec![
        board(Vec3::new(0.3, 0.35, 1.35), facing, x, [0.08, 0.1], 0.04),
        board(Vec3::new(0.5, 0.35, 2.25), facing, x, [0.16, 0.2], 0.04),
    ];
    cfg.markers = vec![
        MarkerLayout {
            board: 0,
            count: [3, 4],
            pitch_m: [0.05, 0.05],
        },
        MarkerLayout {
            board: 1,
            count: [3, 4],
            pitch_m: [0.1, 0.1],
        },
    ];
    cfg
}

fn slanted_board() -> ScenarioConfig {
    let mut cfg = channel_base("slanted-board");
    let axis = Vec3::new(0.175, 0.0, 0.8).normalize();
    let normal = Vec3::new(-0.8, 0.0, 0.175).normalize();
    cfg.scene.boards = vec![board(Vec3::new(0.5, 0.35, 1.1), normal, axis, [0.82, 0.1], 0.04)];
    cfg.markers = vec![MarkerLayout {
        board: 0,
        count: [8, 2],
        pitch_m: [0.2, 0.1],
    }];
    cfg
}

fn multiview() -> ScenarioConfig {
    let mut cfg = channel_base("multiview");
    let baseline = Vec3::new(0.05, 0.0, 0.0);
    let mut second = cfg.cameras[0].clone();
    second.position_m += baseline;
    second.target_m += baseline;
    cfg.cameras.push(second);
    cfg.scene.boards = vec![board(
        Vec3::new(0.5, 0.35, 1.5),
        Vec3::new(0.0, 0.0, -1.0),
        Vec3::new(1.0, 0.0, 0.0),
        [0.3, 0.2],
        0.04,
    )];
    cfg.markers = vec![MarkerLayout {
        board: 0,
        count: [4, 3],
        pitch_m: [0.12, 0.12],
    }];
    cfg.schedule.frames = 60;
    cfg
}
