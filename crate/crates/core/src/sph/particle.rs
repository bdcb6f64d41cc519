use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SpikyKernel;
use crate::error::{HazeError, Result};
use crate::geom::{Aabb, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    /// kg
    pub mass: f64,
    /// m
    pub position: Vec3,
    /// m/s
    pub velocity: Vec3,
    /// kg/m^3
    pub density: f64,
    pub temperature: f64,
}

/// Simulation parameters. Key names carry their units in the scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    #[serde(rename = "dt_s")]
    pub dt: f64,
    #[serde(rename = "h_m")]
    pub smoothing_radius: f64,
    #[serde(rename = "rest_density_kg_m3")]
    pub rest_density: f64,
    #[serde(rename = "thermal_conductivity")]
    pub conductivity: f64,
    #[serde(rename = "buoyancy_constant")]
    pub buoyancy: f64,
    #[serde(rename = "convection_multiplier")]
    pub convection: f64,
    pub ambient_temperature: f64,
    #[serde(rename = "gravity_m_s2")]
    pub gravity: Vec3,
    pub source_transfer_rate: f64,
    /// Volume used by the buoyancy force; `None` means `mass / rest_density`.
    #[serde(rename = "particle_volume_m3", skip_serializing_if = "Option::is_none")]
    pub particle_volume: Option<f64>,
    pub solver_iterations: usize,
    /// Fixed number of conduction sub-steps; `None` picks the smallest count
    /// that keeps the explicit update monotone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conduction_substeps: Option<usize>,
    #[serde(rename = "domain_m")]
    pub domain: Aabb,
    pub seed: u64,
    /// Sort neighbor lists so every reduction runs in ascending index order.
    pub deterministic: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.006,
            smoothing_radius: 0.1,
            rest_density: 300.0,
            conductivity: 100.0,
            buoyancy: 100.0,
            convection: 50.0,
            ambient_temperature: 300.0,
            gravity: Vec3::new(0.0, -9.81, 0.0),
            source_transfer_rate: 1.0,
            particle_volume: None,
            solver_iterations: 3,
            conduction_substeps: None,
            domain: Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)),
            seed: 0,
            deterministic: true,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, msg: String| Err(HazeError::config(format!("sim.{name}"), msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt_s", format!("must be positive, got {}", self.dt));
        }
        if !(self.smoothing_radius > 0.0 && self.smoothing_radius.is_finite()) {
            return bad("h_m", format!("must be positive, got {}", self.smoothing_radius));
        }
        if !(self.rest_density > 0.0 && self.rest_density.is_finite()) {
            return bad(
                "rest_density_kg_m3",
                format!("must be positive, got {}", self.rest_density),
            );
        }
        if self.solver_iterations < 1 {
            return bad("solver_iterations", "must be at least 1".into());
        }
        if self.conductivity < 0.0 || !self.conductivity.is_finite() {
            return bad("thermal_conductivity", "must be non-negative".into());
        }
        if !(self.buoyancy.is_finite() && self.convection.is_finite()) {
            return bad("buoyancy_constant", "thermal force constants must be finite".into());
        }
        if !(self.source_transfer_rate >= 0.0 && self.source_transfer_rate.is_finite()) {
            return bad("source_transfer_rate", "must be non-negative".into());
        }
        if let Some(v) = self.particle_volume {
            if !(v > 0.0 && v.is_finite()) {
                return bad("particle_volume_m3", format!("must be positive, got {v}"));
            }
        }
        if self.conduction_substeps == Some(0) {
            return bad("conduction_substeps", "must be at least 1".into());
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return bad("gravity_m_s2", "must be finite".into());
        }
        if !self.domain.is_valid() {
            return bad("domain_m", "min must be below max on every axis".into());
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<SpikyKernel> {
        SpikyKernel::new(self.smoothing_radius)
    }

    /// Volume entering the buoyancy force for a particle of the given mass.
    pub fn volume_for(&self, mass: f64) -> f64 {
        self.particle_volume.unwrap_or(mass / self.rest_density)
    }
}

/// Regular particle lattice with optional uniform jitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(rename = "extent_m")]
    pub extent: Aabb,
    #[serde(rename = "spacing_m")]
    pub spacing: f64,
    #[serde(rename = "jitter_m", default)]
    pub jitter: f64,
}

/// Particle mass that gives an interior lattice particle exactly the rest
/// density.
pub fn lattice_mass(spacing: f64, rest_density: f64, kernel: &SpikyKernel) -> f64 {
    let reach = (kernel.h() / spacing).ceil() as i64;
    let mut sum = 0.0;
    for k in -reach..=reach {
        for j in -reach..=reach {
            for i in -reach..=reach {
                let r = spacing * ((i * i + j * j + k * k) as f64).sqrt();
                sum += kernel.value(r);
            }
        }
    }
    rest_density / sum
}

pub fn lattice_particles(spec: &LatticeSpec, params: &SimParams, seed: u64) -> Result<Vec<Particle>> {
    if !(spec.spacing > 0.0 && spec.spacing.is_finite()) {
        return Err(HazeError::config("particles.spacing_m", "must be positive"));
    }
    if !(spec.jitter >= 0.0 && spec.jitter < spec.spacing) {
        return Err(HazeError::config("particles.jitter_m", "must be in [0, spacing)"));
    }
    if !spec.extent.is_valid() {
        return Err(HazeError::config("particles.extent_m", "invalid box"));
    }
    let kernel = params.kernel()?;
    let mass = lattice_mass(spec.spacing, params.rest_density, &kernel);
    let ext = spec.extent.extent();
    let counts: Vec<usize> = (0..3)
        .map(|a| ((ext[a] / spec.spacing) + 1e-9).floor().max(1.0) as usize)
        .collect();
    let offset: Vec<f64> = (0..3)
        .map(|a| spec.extent.min[a] + 0.5 * (ext[a] - (counts[a] - 1) as f64 * spec.spacing))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut particles = Vec::with_capacity(counts.iter().product());
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let mut p = Vec3::new(
                    offset[0] + i as f64 * spec.spacing,
                    offset[1] + j as f64 * spec.spacing,
                    offset[2] + k as f64 * spec.spacing,
                );
                if spec.jitter > 0.0 {
                    for a in 0..3 {
                        p[a] += rng.random_range(-spec.jitter..=spec.jitter);
                    }
                }
                particles.push(Particle {
                    mass,
                    position: params.domain.clamp(&p),
                    velocity: Vec3::zeros(),
                    density: params.rest_density,
                    temperature: params.ambient_temperature,
                });
            }
        }
    }
    Ok(particles)
}
