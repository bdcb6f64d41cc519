//! Heat injection from box sources, SPH conduction, and the buoyancy and
//! convection velocity increments driven by the temperature field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HazeError, Result};
use crate::geom::{Aabb, Vec3};
use crate::sph::{NeighborLists, Particle, SimParams, SpikyKernel};

/// Below this norm the temperature gradient has no usable direction.
pub const GRADIENT_EPSILON: f64 = 1e-8;

/// Largest `dt_sub * sum_j c_ij` allowed per conduction sub-step.
const CONDUCTION_STABILITY: f64 = 0.5;

/// Axis-aligned hexahedral heat source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSource {
    #[serde(rename = "box_min")]
    pub min: Vec3,
    #[serde(rename = "box_max")]
    pub max: Vec3,
    pub temperature: f64,
    /// Influence coefficient.
    pub lambda: f64,
    /// Influence radius beyond the box surface, m.
    pub radius: f64,
}

impl HeatSource {
    pub fn region(&self) -> Aabb {
        Aabb::new(self.min, self.max)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !self.region().is_valid() {
            return Err(HazeError::config(
                format!("{path}.box_min"),
                "box_min must be below box_max on every axis",
            ));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(HazeError::config(format!("{path}.radius"), "must be non-negative"));
        }
        if !(self.temperature.is_finite() && self.lambda.is_finite()) {
            return Err(HazeError::config(format!("{path}.temperature"), "must be finite"));
        }
        Ok(())
    }
}

/// Shortest distance from `x` to the source box; zero inside or on a face.
pub fn source_distance(x: &Vec3, source: &HeatSource) -> f64 {
    source.region().distance(x)
}

/// Heat delivered by one source during one step, decaying linearly to zero
/// at `radius` beyond the box surface.
pub fn source_heat_flux(x: &Vec3, temperature: f64, source: &HeatSource, rate: f64, dt: f64) -> f64 {
    let full = (source.temperature - temperature) * source.lambda * rate * dt;
    let d = source_distance(x, source);
    if d == 0.0 {
        full
    } else if d < source.radius {
        full * (1.0 - d / source.radius)
    } else {
        0.0
    }
}

pub fn total_source_heat(x: &Vec3, temperature: f64, sources: &[HeatSource], rate: f64, dt: f64) -> f64 {
    sources
        .iter()
        .map(|s| source_heat_flux(x, temperature, s, rate, dt))
        .sum()
}

/// Pair coefficient `c_ij` such that conduction reads
/// `dT_i/dt = sum_j c_ij (T_j - T_i)`. Non-negative; zero for coincident
/// particles and beyond the kernel support.
#[inline]
fn conduction_coefficient(pi: &Particle, pj: &Particle, k: f64, kernel: &SpikyKernel) -> f64 {
    let r = (pi.position - pj.position).norm();
    // radial_factor = r . grad W / r^2 <= 0, so heat flows from hot to cold
    -2.0 * k * pj.mass / (pj.density * pi.density) * kernel.radial_factor(r)
}

/// SPH pairwise conduction rate `dT_i/dt` with uniform conductivity and unit
/// specific heat.
pub fn conduction_rate(i: usize, particles: &[Particle], lists: &NeighborLists, k: f64, kernel: &SpikyKernel) -> f64 {
    let pi = &particles[i];
    lists
        .of(i)
        .iter()
        .map(|&j| {
            let pj = &particles[j];
            conduction_coefficient(pi, pj, k, kernel) * (pj.temperature - pi.temperature)
        })
        .sum()
}

/// SPH difference-form temperature gradient; exactly zero for a uniform field.
pub fn temperature_gradient(i: usize, particles: &[Particle], lists: &NeighborLists, kernel: &SpikyKernel) -> Vec3 {
    let pi = &particles[i];
    let mut grad = Vec3::zeros();
    for &j in lists.of(i) {
        let pj = &particles[j];
        let dt = pj.temperature - pi.temperature;
        if dt != 0.0 {
            grad += kernel.gradient(&(pi.position - pj.position)) * (pj.mass / pj.density * dt);
        }
    }
    grad
}

/// Buoyancy velocity increment from the linearized density-temperature
/// relation; hotter-than-ambient particles accelerate against gravity.
pub fn buoyancy_delta_v(temperature: f64, density: f64, volume: f64, params: &SimParams) -> Vec3 {
    let force_scale = params.buoyancy * (temperature - params.ambient_temperature) * volume;
    -params.gravity * (force_scale / density * params.dt)
}

/// Convective increment of magnitude `beta` toward increasing temperature,
/// or zero when the gradient is degenerate.
pub fn convection_delta_v(grad_t: &Vec3, beta: f64) -> Vec3 {
    let norm = grad_t.norm();
    if norm > GRADIENT_EPSILON {
        grad_t * (beta / norm)
    } else {
        Vec3::zeros()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThermalReport {
    pub conduction_substeps: usize,
    /// Sum of source heat over all particles this step.
    pub source_heat: f64,
}

/// Beyond this many automatic sub-steps the particle state is treated as
/// blown up rather than merely stiff.
pub const MAX_CONDUCTION_SUBSTEPS: usize = 10_000;

/// Conduction sub-step count that keeps every particle's explicit update a
/// convex combination of its neighbors' temperatures.
pub fn stable_conduction_substeps(
    particles: &[Particle],
    lists: &NeighborLists,
    params: &SimParams,
    kernel: &SpikyKernel,
) -> usize {
    let k = params.conductivity;
    let max_rate = (0..particles.len())
        .into_par_iter()
        .map(|i| {
            lists
                .of(i)
                .iter()
                .map(|&j| conduction_coefficient(&particles[i], &particles[j], k, kernel))
                .sum::<f64>()
        })
        .reduce(|| 0.0, f64::max);
    ((params.dt * max_rate / CONDUCTION_STABILITY).ceil() as usize).max(1)
}

/// Thermal stage of a simulation step.
///
/// Temperatures advance by conduction (sub-stepped, see
/// [`stable_conduction_substeps`]) plus source heat divided by particle mass.
/// Velocities then receive the buoyancy and convection increments, both
/// evaluated on the updated temperature field. The convection increment is
/// treated like the buoyancy force: it is divided by the particle density and
/// multiplied by `dt`. Every update reads a snapshot and writes in a batch.
///
/// Densities and `lists` must be current.
pub fn thermal_update(
    particles: &mut [Particle],
    lists: &NeighborLists,
    sources: &[HeatSource],
    params: &SimParams,
) -> Result<ThermalReport> {
    let kernel = params.kernel()?;
    let n = particles.len();
    let k = params.conductivity;

    // Source heat is taken from the pre-update temperatures.
    let source_dt: Vec<f64> = particles
        .par_iter()
        .map(|p| {
            total_source_heat(
                &p.position,
                p.temperature,
                sources,
                params.source_transfer_rate,
                params.dt,
            ) / p.mass
        })
        .collect();

    let substeps = match params.conduction_substeps {
        Some(s) => s,
        None if k > 0.0 => stable_conduction_substeps(particles, lists, params, &kernel),
        None => 1,
    };
    if substeps > MAX_CONDUCTION_SUBSTEPS {
        return Err(HazeError::StiffConduction {
            substeps,
            limit: MAX_CONDUCTION_SUBSTEPS,
        });
    }
    if k > 0.0 {
        let coefficients: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let pi = particles[i];
                let ps = &*particles;
                lists
                    .of(i)
                    .iter()
                    .map(move |&j| conduction_coefficient(&pi, &ps[j], k, &kernel))
            })
            .collect();
        let tau = params.dt / substeps as f64;
        let mut temps: Vec<f64> = particles.iter().map(|p| p.temperature).collect();
        for _ in 0..substeps {
            temps = (0..n)
                .into_par_iter()
                .map(|i| {
                    let ti = temps[i];
                    let off = lists.offset(i);
                    let rate: f64 = lists
                        .of(i)
                        .iter()
                        .enumerate()
                        .map(|(e, &j)| coefficients[off + e] * (temps[j] - ti))
                        .sum();
                    ti + tau * rate
                })
                .collect();
        }
        for (p, t) in particles.iter_mut().zip(temps) {
            p.temperature = t;
        }
    }
    for (p, dt) in particles.iter_mut().zip(&source_dt) {
        p.temperature += dt;
    }

    let dv: Vec<Vec3> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = &particles[i];
            let buoy = buoyancy_delta_v(p.temperature, p.density, params.volume_for(p.mass), params);
            if params.convection == 0.0 {
                return buoy;
            }
            let grad = temperature_gradient(i, particles, lists, &kernel);
            buoy + convection_delta_v(&grad, params.convection) * (params.dt / p.density)
        })
        .collect();
    for (i, (p, dv)) in particles.iter_mut().zip(dv).enumerate() {
        p.velocity += dv;
        if !p.temperature.is_finite() {
            return Err(HazeError::NonFinite {
                stage: "thermal",
                field: "temperature",
                index: i,
            });
        }
        if !p.velocity.iter().all(|c| c.is_finite()) {
            return Err(HazeError::NonFinite {
                stage: "thermal",
                field: "velocity",
                index: i,
            });
        }
    }

    Ok(ThermalReport {
        conduction_substeps: substeps,
        source_heat: source_dt.iter().zip(particles.iter()).map(|(dt, p)| dt * p.mass).sum(),
    })
}
