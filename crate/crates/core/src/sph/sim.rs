use log::warn;
use rayon::prelude::*;

use super::{density_constraint_solve, evaluate_densities, NeighborLists, Particle, SimParams, SolveReport};
use crate::error::{HazeError, Result};
use crate::geom::Vec3;
use crate::thermal::{thermal_update, HeatSource, ThermalReport};

/// Velocity retained (and reversed) by a wall contact.
const WALL_RESTITUTION: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct StepReport {
    pub thermal: ThermalReport,
    pub solver: SolveReport,
    pub max_speed: f64,
}

/// Owns the particle state between steps. Neighbor lists and densities
/// always correspond to the current positions.
#[derive(Clone, Debug)]
pub struct Simulation {
    particles: Vec<Particle>,
    params: SimParams,
    sources: Vec<HeatSource>,
    lists: NeighborLists,
    steps: u64,
}

impl Simulation {
    pub fn new(particles: Vec<Particle>, params: SimParams, sources: Vec<HeatSource>) -> Result<Self> {
        params.validate()?;
        for (i, s) in sources.iter().enumerate() {
            s.validate(&format!("sources[{i}]"))?;
        }
        if let Some(i) = particles.iter().position(|p| !(p.mass > 0.0 && p.mass.is_finite())) {
            return Err(HazeError::Parameter(format!("particle {i} has non-positive mass")));
        }
        let mut sim = Self {
            particles,
            params,
            sources,
            lists: NeighborLists::default(),
            steps: 0,
        };
        sim.refresh()?;
        Ok(sim)
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn sources(&self) -> &[HeatSource] {
        &self.sources
    }

    pub fn neighbors(&self) -> &NeighborLists {
        &self.lists
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn positions(&self) -> Vec<Vec3> {
        self.particles.iter().map(|p| p.position).collect()
    }

    fn refresh(&mut self) -> Result<()> {
        let positions = self.positions();
        self.lists =
            NeighborLists::from_positions(&positions, self.params.smoothing_radius, self.params.deterministic)?;
        evaluate_densities(&mut self.particles, &self.lists, &self.params.kernel()?);
        Ok(())
    }

    /// One three-stage step: thermal prediction, density-constraint solve,
    /// and velocity update from the net displacement, followed by boundary
    /// handling.
    pub fn step(&mut self) -> Result<StepReport> {
        let dt = self.params.dt;
        let initial: Vec<Vec3> = self.positions();

        // 1. thermal prediction
        let thermal = thermal_update(&mut self.particles, &self.lists, &self.sources, &self.params)?;
        for p in &mut self.particles {
            p.position += p.velocity * dt;
        }
        check_finite(&self.particles, "prediction")?;

        // 2. constraint solve from the predicted positions
        let predicted = self.positions();
        let lists = NeighborLists::from_positions(&predicted, self.params.smoothing_radius, self.params.deterministic)?;
        let solver = density_constraint_solve(&mut self.particles, &lists, &self.params)?;
        check_finite(&self.particles, "constraint solve")?;

        // 3. state update
        let domain = self.params.domain;
        self.particles
            .par_iter_mut()
            .zip(initial.par_iter())
            .for_each(|(p, x0)| {
                p.velocity = (p.position - x0) / dt;
                for a in 0..3 {
                    if p.position[a] < domain.min[a] {
                        p.position[a] = domain.min[a];
                        if p.velocity[a] < 0.0 {
                            p.velocity[a] *= -WALL_RESTITUTION;
                        }
                    } else if p.position[a] > domain.max[a] {
                        p.position[a] = domain.max[a];
                        if p.velocity[a] > 0.0 {
                            p.velocity[a] *= -WALL_RESTITUTION;
                        }
                    }
                }
            });
        self.refresh()?;
        check_finite(&self.particles, "state update")?;
        self.steps += 1;

        let max_speed = self.particles.iter().map(|p| p.velocity.norm()).fold(0.0, f64::max);
        if max_speed * dt > 0.5 * self.params.smoothing_radius {
            warn!(
                "step {}: max speed {max_speed:.3} m/s moves particles more than h/2 per step",
                self.steps
            );
        }
        Ok(StepReport {
            thermal,
            solver,
            max_speed,
        })
    }
}

fn check_finite(particles: &[Particle], stage: &'static str) -> Result<()> {
    for (index, p) in particles.iter().enumerate() {
        let bad = if !p.position.iter().all(|c| c.is_finite()) {
            Some("position")
        } else if !p.velocity.iter().all(|c| c.is_finite()) {
            Some("velocity")
        } else if !p.temperature.is_finite() {
            Some("temperature")
        } else if !(p.density.is_finite() && p.density > 0.0) {
            Some("density")
        } else {
            None
        };
        if let Some(field) = bad {
            return Err(HazeError::NonFinite { stage, field, index });
        }
    }
    Ok(())
}
