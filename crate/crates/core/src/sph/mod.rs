//! Particle state, kernel, neighbor search and the simulation step.

mod kernel;
mod neighbors;
mod particle;
mod sim;
mod snapshot;
mod solver;

pub use kernel::{kernel_spiky, kernel_spiky_gradient, SpikyKernel};
pub use neighbors::{build_neighbors, NeighborGrid, NeighborLists};
pub use particle::{lattice_mass, lattice_particles, LatticeSpec, Particle, SimParams};
pub use sim::{Simulation, StepReport};
pub use snapshot::{read_particles, write_particles, SNAPSHOT_HEADER};
pub use solver::{
    compute_density, density_constraint_solve, evaluate_densities, mean_abs_density_deviation, SolveReport,
};
