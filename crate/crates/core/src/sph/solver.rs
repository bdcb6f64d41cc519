use rayon::prelude::*;

use super::{NeighborLists, Particle, SimParams, SpikyKernel};
use crate::error::{HazeError, Result};
use crate::geom::Vec3;

/// Regularization added to the constraint-gradient norm (1/m^2).
const CONSTRAINT_RELAXATION: f64 = 1e-3;

/// Consecutive growing iterations that count as divergence.
const DIVERGENCE_RUN: usize = 3;

/// SPH density summation at particle `i`, self-contribution included.
pub fn compute_density(i: usize, particles: &[Particle], lists: &NeighborLists, kernel: &SpikyKernel) -> f64 {
    let xi = particles[i].position;
    let mut rho = particles[i].mass * kernel.value(0.0);
    for &j in lists.of(i) {
        rho += particles[j].mass * kernel.value((xi - particles[j].position).norm());
    }
    rho
}

/// Evaluates and stores the density of every particle.
pub fn evaluate_densities(particles: &mut [Particle], lists: &NeighborLists, kernel: &SpikyKernel) {
    let rho: Vec<f64> = (0..particles.len())
        .into_par_iter()
        .map(|i| compute_density(i, particles, lists, kernel))
        .collect();
    for (p, r) in particles.iter_mut().zip(rho) {
        p.density = r;
    }
}

pub fn mean_abs_density_deviation(densities: &[f64], rest_density: f64) -> f64 {
    if densities.is_empty() {
        return 0.0;
    }
    densities.iter().map(|r| (r / rest_density - 1.0).abs()).sum::<f64>() / densities.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Mean compression `max(rho / rho0 - 1, 0)` before the first iteration.
    pub initial_error: f64,
    /// Same measure after the last iteration.
    pub final_error: f64,
    pub initial_abs_deviation: f64,
    pub final_abs_deviation: f64,
}

fn densities_at(positions: &[Vec3], masses: &[f64], lists: &NeighborLists, kernel: &SpikyKernel) -> Vec<f64> {
    (0..positions.len())
        .into_par_iter()
        .map(|i| {
            let xi = positions[i];
            lists.of(i).iter().fold(masses[i] * kernel.value(0.0), |acc, &j| {
                acc + masses[j] * kernel.value((xi - positions[j]).norm())
            })
        })
        .collect()
}

fn compression_error(densities: &[f64], rest_density: f64) -> f64 {
    if densities.is_empty() {
        return 0.0;
    }
    densities.iter().map(|r| (r / rest_density - 1.0).max(0.0)).sum::<f64>() / densities.len() as f64
}

/// Position-based density-constraint iterations.
///
/// Each iteration evaluates `C_i = max(rho_i / rho0 - 1, 0)`, a per-particle
/// scaling `lambda_i = -C_i / (sum_k |grad_k C_i|^2 + eps)` and the symmetric
/// correction `dx_i = sum_j (m_j / rho0) (lambda_i + lambda_j) grad W_ij`.
/// The constraint only resists compression, so rarefied regions (free
/// surfaces, walls) are left alone. Corrections are applied Jacobi-style.
///
/// `lists` must be current for the positions passed in; they are reused
/// across iterations.
pub fn density_constraint_solve(
    particles: &mut [Particle],
    lists: &NeighborLists,
    params: &SimParams,
) -> Result<SolveReport> {
    let kernel = params.kernel()?;
    let rho0 = params.rest_density;
    let mut positions: Vec<Vec3> = particles.iter().map(|p| p.position).collect();
    let masses: Vec<f64> = particles.iter().map(|p| p.mass).collect();

    let mut densities = densities_at(&positions, &masses, lists, &kernel);
    let initial_error = compression_error(&densities, rho0);
    let initial_abs_deviation = mean_abs_density_deviation(&densities, rho0);
    let mut previous = initial_error;
    let mut growing = 0;

    for iteration in 1..=params.solver_iterations {
        let lambdas: Vec<f64> = (0..positions.len())
            .into_par_iter()
            .map(|i| {
                let c = (densities[i] / rho0 - 1.0).max(0.0);
                if c == 0.0 {
                    return 0.0;
                }
                let xi = positions[i];
                let mut grad_i = Vec3::zeros();
                let mut sum_sq = 0.0;
                for &j in lists.of(i) {
                    let g = kernel.gradient(&(xi - positions[j])) * (masses[j] / rho0);
                    grad_i += g;
                    sum_sq += g.norm_squared();
                }
                -c / (sum_sq + grad_i.norm_squared() + CONSTRAINT_RELAXATION)
            })
            .collect();

        let corrections: Vec<Vec3> = (0..positions.len())
            .into_par_iter()
            .map(|i| {
                let xi = positions[i];
                let mut dx = Vec3::zeros();
                for &j in lists.of(i) {
                    let s = lambdas[i] + lambdas[j];
                    if s != 0.0 {
                        dx += kernel.gradient(&(xi - positions[j])) * (masses[j] / rho0 * s);
                    }
                }
                dx
            })
            .collect();
        for (x, dx) in positions.iter_mut().zip(&corrections) {
            *x += dx;
        }

        densities = densities_at(&positions, &masses, lists, &kernel);
        let error = compression_error(&densities, rho0);
        if error > previous {
            growing += 1;
            if growing >= DIVERGENCE_RUN {
                return Err(HazeError::SolverInstability { iteration, error });
            }
        } else {
            growing = 0;
        }
        previous = error;
    }

    for (p, (x, rho)) in particles.iter_mut().zip(positions.into_iter().zip(&densities)) {
        p.position = x;
        p.density = *rho;
    }
    Ok(SolveReport {
        iterations: params.solver_iterations,
        initial_error,
        final_error: previous,
        initial_abs_deviation,
        final_abs_deviation: mean_abs_density_deviation(&densities, rho0),
    })
}
