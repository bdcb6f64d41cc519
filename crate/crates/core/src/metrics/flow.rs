use rayon::prelude::*;

use crate::error::{HazeError, Result};
use crate::geom::Vec3;
use crate::sph::{NeighborLists, Particle, SpikyKernel};

/// Mass-weighted kinetic energy of the velocity fluctuations about the
/// mass-weighted mean velocity, per unit mass.
pub fn tke(particles: &[Particle]) -> Result<f64> {
    if particles.is_empty() {
        return Err(HazeError::Parameter("TKE of an empty particle set".into()));
    }
    let total_mass: f64 = particles.iter().map(|p| p.mass).sum();
    if !(total_mass > 0.0) {
        return Err(HazeError::Parameter("total particle mass must be positive".into()));
    }
    let momentum = particles.iter().fold(Vec3::zeros(), |acc, p| acc + p.velocity * p.mass);
    let mean = momentum / total_mass;
    let energy: f64 = particles
        .iter()
        .map(|p| p.mass * (p.velocity - mean).norm_squared())
        .sum();
    Ok(0.5 * energy / total_mass)
}

/// SPH curl of the velocity field at particle `i`. Densities must be current.
pub fn vorticity(i: usize, particles: &[Particle], lists: &NeighborLists, kernel: &SpikyKernel) -> Vec3 {
    let pi = &particles[i];
    let mut curl = Vec3::zeros();
    for &j in lists.of(i) {
        let pj = &particles[j];
        let dv = pj.velocity - pi.velocity;
        if dv != Vec3::zeros() {
            let grad = kernel.gradient(&(pi.position - pj.position));
            curl += grad.cross(&dv) * (pj.mass / pj.density);
        }
    }
    curl
}

/// Mean vorticity magnitude over all particles.
pub fn mean_vorticity(particles: &[Particle], lists: &NeighborLists, kernel: &SpikyKernel) -> f64 {
    if particles.is_empty() {
        return 0.0;
    }
    let norms: Vec<f64> = (0..particles.len())
        .into_par_iter()
        .map(|i| vorticity(i, particles, lists, kernel).norm())
        .collect();
    norms.iter().sum::<f64>() / particles.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sph::evaluate_densities;
    use proptest::prelude::*;

    fn particle(v: Vec3) -> Particle {
        Particle {
            mass: 1.0,
            position: Vec3::zeros(),
            velocity: v,
            density: 1.0,
            temperature: 300.0,
        }
    }

    #[test]
    fn tke_of_opposed_pair() {
        let ps = [particle(Vec3::new(1.0, 0.0, 0.0)), particle(Vec3::new(-1.0, 0.0, 0.0))];
        assert!((tke(&ps).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tke_zero_for_uniform_motion() {
        let ps = vec![particle(Vec3::new(0.3, -2.0, 1.0)); 5];
        assert_eq!(tke(&ps).unwrap(), 0.0);
        assert!(tke(&[]).is_err());
    }

    fn lattice(n: usize, spacing: f64, velocity: impl Fn(&Vec3) -> Vec3) -> Vec<Particle> {
        let mut ps = Vec::new();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let x = Vec3::new(i as f64, j as f64, k as f64) * spacing;
                    ps.push(Particle {
                        mass: 1e-3,
                        position: x,
                        velocity: velocity(&x),
                        density: 0.0,
                        temperature: 300.0,
                    });
                }
            }
        }
        ps
    }

    #[test]
    fn rigid_rotation_gives_twice_angular_velocity() {
        let h = 0.1;
        let spacing = 0.02;
        let omega = Vec3::new(0.0, 0.0, 1.5);
        let mut ps = lattice(15, spacing, |x| omega.cross(x));
        let kernel = SpikyKernel::new(h).unwrap();
        let positions: Vec<Vec3> = ps.iter().map(|p| p.position).collect();
        let lists = NeighborLists::from_positions(&positions, h, true).unwrap();
        evaluate_densities(&mut ps, &lists, &kernel);
        let centre = Vec3::new(7.0, 7.0, 7.0) * spacing;
        let mut checked = 0;
        for (i, p) in ps.iter().enumerate() {
            // interior: full kernel support inside the lattice
            if (p.position - centre).amax() <= 2.0 * spacing + 1e-9 {
                let w = vorticity(i, &ps, &lists, &kernel);
                assert!((w - omega * 2.0).norm() <= 0.2 * 2.0 * omega.norm(), "{w:?}");
                checked += 1;
            }
        }
        assert_eq!(checked, 125);
    }

    proptest! {
        #[test]
        fn tke_galilean_invariant(
            vs in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, 0.1f64..2.0), 2..30),
            shift in (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0),
        ) {
            let ps: Vec<Particle> = vs.iter().map(|&(x, y, z, m)| Particle { mass: m, ..particle(Vec3::new(x, y, z)) }).collect();
            let s = Vec3::new(shift.0, shift.1, shift.2);
            let moved: Vec<Particle> = ps.iter().map(|p| Particle { velocity: p.velocity + s, ..*p }).collect();
            let a = tke(&ps).unwrap();
            let b = tke(&moved).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
        }

        #[test]
        fn uniform_velocity_has_zero_vorticity(vx in -5.0f64..5.0, vy in -5.0f64..5.0, vz in -5.0f64..5.0) {
            let v = Vec3::new(vx, vy, vz);
            let mut ps = lattice(5, 0.04, |_| v);
            let kernel = SpikyKernel::new(0.1).unwrap();
            let positions: Vec<Vec3> = ps.iter().map(|p| p.position).collect();
            let lists = NeighborLists::from_positions(&positions, 0.1, true).unwrap();
            evaluate_densities(&mut ps, &lists, &kernel);
            for i in 0..ps.len() {
                prop_assert_eq!(vorticity(i, &ps, &lists, &kernel), Vec3::zeros());
            }
        }
    }
}
