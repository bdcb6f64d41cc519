use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HazeError, Result};
use crate::geom::{Aabb, Vec3};
use crate::ray::{Camera, Scene, SteppingPolicy};
use crate::refract::{GridSpec, DEFAULT_GLADSTONE_DALE};
use crate::sph::{LatticeSpec, SimParams};
use crate::thermal::HeatSource;

/// One file fully describing a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub sim: SimParams,
    pub particles: ParticleInit,
    #[serde(default)]
    pub sources: Vec<HeatSource>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub cameras: Vec<CameraConfig>,
    pub scene: Scene,
    #[serde(default)]
    pub stepping: SteppingPolicy,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub markers: Vec<MarkerLayout>,
    #[serde(default)]
    pub validation: ValidationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleInit {
    pub extent_m: Aabb,
    pub spacing_m: f64,
    #[serde(default)]
    pub jitter_m: f64,
}

impl ParticleInit {
    pub fn lattice(&self) -> LatticeSpec {
        LatticeSpec {
            extent: self.extent_m,
            spacing: self.spacing_m,
            jitter: self.jitter_m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: [usize; 3],
    /// Defaults to the simulation domain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds_m: Option<Aabb>,
    pub gladstone_dale_m3_kg: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: [10, 10, 10],
            bounds_m: None,
            gladstone_dale_m3_kg: DEFAULT_GLADSTONE_DALE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub position_m: Vec3,
    pub target_m: Vec3,
    #[serde(default = "default_up")]
    pub up: Vec3,
    pub fov_y_rad: f64,
    pub width_px: usize,
    pub height_px: usize,
}

fn default_up() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

impl CameraConfig {
    pub fn camera(&self) -> Result<Camera> {
        Camera::look_at(
            self.position_m,
            self.target_m,
            self.up,
            self.fov_y_rad,
            self.width_px,
            self.height_px,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub warmup_steps: usize,
    pub frames: usize,
    pub steps_per_frame: usize,
    /// Write a particle snapshot per recorded frame.
    pub dump_particles: bool,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            warmup_steps: 200,
            frames: 10,
            steps_per_frame: 1,
            dump_particles: false,
        }
    }
}

/// Regular grid of tracked points on one board, centered on the board.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerLayout {
    pub board: usize,
    /// Count along the board's u and v axes.
    pub count: [usize; 2],
    pub pitch_m: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Largest tolerated fraction of lost marker samples.
    pub max_marker_loss: f64,
    pub search_radius_px: usize,
    /// Renders used for benchmarking and goldens average this many rays per
    /// pixel axis.
    pub supersample: usize,
    /// Fine static step of the benchmark reference render, m.
    pub reference_step_m: f64,
    pub theta_sweep_rad: Vec<f64>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            max_marker_loss: 0.1,
            search_radius_px: 32,
            supersample: 1,
            reference_step_m: 1e-3,
            theta_sweep_rad: vec![0.001, 0.003, 0.01],
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HazeError::config(toml_location(text, &e), e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HazeError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HazeError::config("<serialize>", e.to_string()))
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            resolution: self.grid.resolution,
            bounds: self.grid.bounds_m.unwrap_or(self.sim.domain),
            gladstone_dale: self.grid.gladstone_dale_m3_kg,
        }
    }

    pub fn build_cameras(&self) -> Result<Vec<Camera>> {
        self.cameras
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.camera().map_err(|e| match e {
                    HazeError::Parameter(m) => HazeError::config(format!("cameras[{i}]"), m),
                    e => e,
                })
            })
            .collect()
    }

    /// Marker points in layout order.
    pub fn marker_points(&self) -> Vec<Vec3> {
        let mut points = Vec::new();
        for layout in &self.markers {
            let board = &self.scene.boards[layout.board];
            let [nu, nv] = layout.count;
            for j in 0..nv {
                for i in 0..nu {
                    let a = (i as f64 - 0.5 * (nu as f64 - 1.0)) * layout.pitch_m[0];
                    let b = (j as f64 - 0.5 * (nv as f64 - 1.0)) * layout.pitch_m[1];
                    points.push(board.point(a, b));
                }
            }
        }
        points
    }

    /// Board index of every marker, parallel to [`marker_points`](Self::marker_points).
    pub fn marker_boards(&self) -> Vec<usize> {
        self.markers
            .iter()
            .flat_map(|l| std::iter::repeat_n(l.board, l.count[0] * l.count[1]))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let lattice = self.particles.lattice();
        if !(lattice.spacing > 0.0 && lattice.spacing.is_finite()) {
            return Err(HazeError::config("particles.spacing_m", "must be positive"));
        }
        if !(lattice.jitter >= 0.0 && lattice.jitter < lattice.spacing) {
            return Err(HazeError::config("particles.jitter_m", "must be in [0, spacing)"));
        }
        if !lattice.extent.is_valid() {
            return Err(HazeError::config("particles.extent_m", "min must be below max"));
        }
        for (i, s) in self.sources.iter().enumerate() {
            s.validate(&format!("sources[{i}]"))?;
        }
        self.grid_spec().validate()?;
        self.build_cameras()?;
        self.scene.validate()?;
        self.stepping.validate()?;
        if self.schedule.frames == 0 {
            return Err(HazeError::config("schedule.frames", "must be at least 1"));
        }
        if self.schedule.steps_per_frame == 0 {
            return Err(HazeError::config("schedule.steps_per_frame", "must be at least 1"));
        }
        for (i, m) in self.markers.iter().enumerate() {
            if m.board >= self.scene.boards.len() {
                return Err(HazeError::config(
                    format!("markers[{i}].board"),
                    format!("no board {} in the scene", m.board),
                ));
            }
            if m.count.contains(&0) || m.pitch_m.iter().any(|p| !p.is_finite()) {
                return Err(HazeError::config(
                    format!("markers[{i}].count"),
                    "empty or non-finite layout",
                ));
            }
        }
        let v = &self.validation;
        if !(0.0..=1.0).contains(&v.max_marker_loss) {
            return Err(HazeError::config("validation.max_marker_loss", "must be within [0, 1]"));
        }
        if v.supersample == 0 {
            return Err(HazeError::config("validation.supersample", "must be at least 1"));
        }
        if !(v.reference_step_m > 0.0) {
            return Err(HazeError::config("validation.reference_step_m", "must be positive"));
        }
        if v.theta_sweep_rad.iter().any(|t| !(*t > 0.0)) {
            return Err(HazeError::config(
                "validation.theta_sweep_rad",
                "angles must be positive",
            ));
        }
        Ok(())
    }
}

/// Line and column of a parse error.
fn toml_location(text: &str, e: &toml::de::Error) -> String {
    let Some(span) = e.span() else {
        return "<document>".into();
    };
    let before = &text[..span.start.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    format!("line {line}, column {column}")
}
