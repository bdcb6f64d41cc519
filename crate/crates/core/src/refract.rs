//! Voxelized density field and the refractive index derived from it.
//!
//! Densities are splatted at voxel centers, converted with the
//! Gladstone-Dale relation `n = 1 + K_GD rho`, and sampled with trilinear
//! interpolation. Density gradients are central differences at voxel
//! centers (one-sided on the outer layer), precomputed once per grid and
//! interpolated the same way. Outside the grid the medium is vacuum-like:
//! `n = 1` and `grad n = 0`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HazeError, Result};
use crate::geom::{Aabb, Vec3};
use crate::sph::{NeighborGrid, Particle, SpikyKernel};

pub const DEFAULT_GLADSTONE_DALE: f64 = 1e-5;

/// Anything the ray integrator can sample.
pub trait RefractiveField: Sync {
    /// Region where the index may differ from one.
    fn bounds(&self) -> Aabb;
    /// Refractive index and its gradient at `x`.
    fn sample(&self, x: &Vec3) -> (f64, Vec3);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: [usize; 3],
    #[serde(rename = "bounds_m")]
    pub bounds: Aabb,
    #[serde(rename = "gladstone_dale_m3_kg")]
    pub gladstone_dale: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution.contains(&0) {
            return Err(HazeError::config(
                "grid.resolution",
                "every axis needs at least one voxel",
            ));
        }
        if !self.bounds.is_valid() {
            return Err(HazeError::config("grid.bounds_m", "invalid box"));
        }
        if !(self.gladstone_dale >= 0.0 && self.gladstone_dale.is_finite()) {
            return Err(HazeError::config("grid.gladstone_dale_m3_kg", "must be non-negative"));
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_size(&self) -> Vec3 {
        let e = self.bounds.extent();
        Vec3::new(
            e.x / self.resolution[0] as f64,
            e.y / self.resolution[1] as f64,
            e.z / self.resolution[2] as f64,
        )
    }

    /// Flat index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution[1] + j) * self.resolution[0] + i
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let c = self.cell_size();
        self.bounds.min + Vec3::new((i as f64 + 0.5) * c.x, (j as f64 + 0.5) * c.y, (k as f64 + 0.5) * c.z)
    }

    fn coords(&self, flat: usize) -> (usize, usize, usize) {
        let [nx, ny, _] = self.resolution;
        (flat % nx, (flat / nx) % ny, flat / (nx * ny))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    spec: GridSpec,
    cell: Vec3,
    density: Vec<f64>,
    density_gradient: Vec<Vec3>,
}

impl VoxelGrid {
    /// Wraps raw voxel densities (x fastest) and precomputes gradients.
    pub fn from_densities(spec: GridSpec, density: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if density.len() != spec.voxel_count() {
            return Err(HazeError::Parameter(format!(
                "expected {} voxel densities, got {}",
                spec.voxel_count(),
                density.len()
            )));
        }
        if let Some(i) = density.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(HazeError::Parameter(format!(
                "voxel {i} has invalid density {}",
                density[i]
            )));
        }
        let cell = spec.cell_size();
        let density_gradient = finite_differences(&spec, &density, &cell);
        Ok(Self {
            spec,
            cell,
            density,
            density_gradient,
        })
    }

    pub fn vacuum(spec: GridSpec) -> Result<Self> {
        let n = spec.voxel_count();
        Self::from_densities(spec, vec![0.0; n])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn densities(&self) -> &[f64] {
        &self.density
    }

    pub fn voxel_density(&self, i: usize, j: usize, k: usize) -> f64 {
        self.density[self.spec.index(i, j, k)]
    }

    /// Trilinear weights: base voxel per axis and fractional offset.
    #[inline]
    fn locate(&self, x: &Vec3) -> Option<([usize; 3], [f64; 3])> {
        let b = &self.spec.bounds;
        if !b.contains(x) {
            return None;
        }
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.spec.resolution[a];
            if n == 1 {
                continue;
            }
            let f = ((x[a] - b.min[a]) / self.cell[a] - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (f.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = f - i0 as f64;
        }
        Some((base, frac))
    }

    #[inline]
    fn interpolate<T>(&self, x: &Vec3, values: &[T], zero: T) -> T
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let Some((base, frac)) = self.locate(x) else {
            return zero;
        };
        let [nx, ny, nz] = self.spec.resolution;
        let step = [usize::from(nx > 1), usize::from(ny > 1), usize::from(nz > 1)];
        let mut acc = zero;
        for dk in 0..=step[2] {
            let wz = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
            for dj in 0..=step[1] {
                let wy = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
                for di in 0..=step[0] {
                    let wx = if di == 0 { 1.0 - frac[0] } else { frac[0] };
                    let w = wx * wy * wz;
                    if w != 0.0 {
                        let idx = self.spec.index(base[0] + di, base[1] + dj, base[2] + dk);
                        acc = acc + values[idx] * w;
                    }
                }
            }
        }
        acc
    }

    pub fn density_at(&self, x: &Vec3) -> f64 {
        self.interpolate(x, &self.density, 0.0)
    }

    pub fn density_gradient(&self, x: &Vec3) -> Vec3 {
        self.interpolate(x, &self.density_gradient, Vec3::zeros())
    }

    pub fn refractive_index(&self, x: &Vec3) -> f64 {
        1.0 + self.spec.gladstone_dale * self.density_at(x)
    }

    pub fn refractive_gradient(&self, x: &Vec3) -> Vec3 {
        self.density_gradient(x) * self.spec.gladstone_dale
    }

    /// Text dump: header lines, then one density per line, x fastest.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let [nx, ny, nz] = self.spec.resolution;
        let b = &self.spec.bounds;
        writeln!(out, "# haze-grid v1")?;
        writeln!(out, "resolution {nx} {ny} {nz}")?;
        writeln!(
            out,
            "bounds {} {} {} {} {} {}",
            b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z
        )?;
        writeln!(out, "gladstone_dale {}", self.spec.gladstone_dale)?;
        for d in &self.density {
            writeln!(out, "{d}")?;
        }
        Ok(())
    }
}

impl RefractiveField for VoxelGrid {
    fn bounds(&self) -> Aabb {
        self.spec.bounds
    }

    #[inline]
    fn sample(&self, x: &Vec3) -> (f64, Vec3) {
        (self.refractive_index(x), self.refractive_gradient(x))
    }
}

fn finite_differences(spec: &GridSpec, density: &[f64], cell: &Vec3) -> Vec<Vec3> {
    let res = spec.resolution;
    (0..density.len())
        .into_par_iter()
        .map(|flat| {
            let (i, j, k) = spec.coords(flat);
            let idx = [i, j, k];
            let mut g = Vec3::zeros();
            for a in 0..3 {
                let n = res[a];
                if n < 2 {
                    continue;
                }
                let at = |c: usize| {
                    let mut q = idx;
                    q[a] = c;
                    density[spec.index(q[0], q[1], q[2])]
                };
                let c = idx[a];
                g[a] = if c == 0 {
                    (at(1) - at(0)) / cell[a]
                } else if c == n - 1 {
                    (at(n - 1) - at(n - 2)) / cell[a]
                } else {
                    (at(c + 1) - at(c - 1)) / (2.0 * cell[a])
                };
            }
            g
        })
        .collect()
}

/// Splats particle mass onto voxel centers with the SPH kernel.
pub fn splat_density(particles: &[Particle], kernel: &SpikyKernel, spec: &GridSpec) -> Result<VoxelGrid> {
    spec.validate()?;
    let positions: Vec<Vec3> = particles.iter().map(|p| p.position).collect();
    let grid = NeighborGrid::build(&positions, kernel.h())?;
    let density: Vec<f64> = (0..spec.voxel_count())
        .into_par_iter()
        .map(|flat| {
            let (i, j, k) = spec.coords(flat);
            let c = spec.voxel_center(i, j, k);
            grid.within(&c, &positions, kernel.h())
                .into_iter()
                .map(|p| particles[p].mass * kernel.value((c - positions[p]).norm()))
                .sum()
        })
        .collect();
    VoxelGrid::from_densities(spec.clone(), density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(res: usize, k_gd: f64) -> GridSpec {
        GridSpec {
            resolution: [res; 3],
            bounds: Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)),
            gladstone_dale: k_gd,
        }
    }

    fn particle(x: Vec3, mass: f64) -> Particle {
        Particle {
            mass,
            position: x,
            velocity: Vec3::zeros(),
            density: 1.0,
            temperature: 0.0,
        }
    }

    fn field(spec: &GridSpec, f: impl Fn(Vec3) -> f64) -> VoxelGrid {
        let mut d = vec![0.0; spec.voxel_count()];
        for k in 0..spec.resolution[2] {
            for j in 0..spec.resolution[1] {
                for i in 0..spec.resolution[0] {
                    d[spec.index(i, j, k)] = f(spec.voxel_center(i, j, k));
                }
            }
        }
        VoxelGrid::from_densities(spec.clone(), d).unwrap()
    }

    #[test]
    fn empty_splat_is_zero() {
        let k = SpikyKernel::new(0.1).unwrap();
        let g = splat_density(&[], &k, &spec(10, 1e-5)).unwrap();
        assert!(g.densities().iter().all(|&d| d == 0.0));
        assert_eq!(g.refractive_index(&Vec3::new(0.5, 0.5, 0.5)), 1.0);
    }

    #[test]
    fn single_particle_at_voxel_center() {
        let s = spec(10, 1e-5);
        let k = SpikyKernel::new(0.15).unwrap();
        let c = s.voxel_center(4, 4, 4);
        let g = splat_density(&[particle(c, 1.0)], &k, &s).unwrap();
        assert_eq!(g.voxel_density(4, 4, 4), k.value(0.0));
        let side = g.voxel_density(5, 4, 4);
        assert!((side - k.value(0.1)).abs() <= 1e-12 * side);
        assert_eq!(g.voxel_density(6, 4, 4), 0.0);
    }

    #[test]
    fn random_cloud_matches_brute_force() {
        let s = spec(12, 1e-5);
        let k = SpikyKernel::new(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ps: Vec<Particle> = (0..500)
            .map(|_| {
                particle(
                    Vec3::new(rng.random(), rng.random(), rng.random()),
                    rng.random_range(0.01..0.1),
                )
            })
            .collect();
        let g = splat_density(&ps, &k, &s).unwrap();
        for kk in 0..12 {
            for j in 0..12 {
                for i in 0..12 {
                    let c = s.voxel_center(i, j, kk);
                    let oracle: f64 = ps.iter().map(|p| p.mass * k.value((c - p.position).norm())).sum();
                    let got = g.voxel_density(i, j, kk);
                    assert!((got - oracle).abs() <= 1e-12 * oracle.max(1e-300));
                }
            }
        }
    }

    #[test]
    fn uniform_density_index_and_zero_gradient() {
        let g = field(&spec(10, 1e-6), |_| 300.0);
        for x in [Vec3::new(0.5, 0.5, 0.5), Vec3::new(0.01, 0.93, 0.4)] {
            assert!((g.refractive_index(&x) - (1.0 + 3e-4)).abs() < 1e-15);
            assert_eq!(g.refractive_gradient(&x), Vec3::zeros());
        }
    }

    #[test]
    fn outside_grid_is_vacuum() {
        let g = field(&spec(10, 1e-5), |x| 100.0 * x.y);
        let out = Vec3::new(1.5, 0.5, 0.5);
        assert_eq!(g.refractive_index(&out), 1.0);
        assert_eq!(g.refractive_gradient(&out), Vec3::zeros());
    }

    #[test]
    fn voxel_center_reproduces_stored_density() {
        let g = field(&spec(8, 1e-5), |x| 50.0 + 20.0 * x.x * x.y + x.z);
        let s = g.spec().clone();
        for (i, j, k) in [(0, 0, 0), (3, 4, 5), (7, 7, 7), (2, 6, 1)] {
            let expected = 1.0 + 1e-5 * g.voxel_density(i, j, k);
            let n = g.refractive_index(&s.voxel_center(i, j, k));
            assert!((n - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_field_gradient_exact_at_interior_centers() {
        let a = 120.0;
        let g = field(&spec(10, 1e-5), |x| a * x.y);
        let s = g.spec().clone();
        for j in 1..9 {
            let grad = g.refractive_gradient(&s.voxel_center(4, j, 6));
            assert!((grad.y - 1e-5 * a).abs() < 1e-15, "{grad:?}");
            assert_eq!((grad.x, grad.z), (0.0, 0.0));
        }
    }

    #[test]
    fn trilinear_gradient_consistency_for_smooth_field() {
        let g = field(&spec(32, 1e-3), |x| {
            100.0 + 30.0 * (2.0 * x.x).sin() * (1.5 * x.y).cos() + 10.0 * x.z
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = Vec3::new(
                rng.random_range(0.1..0.9),
                rng.random_range(0.1..0.9),
                rng.random_range(0.1..0.9),
            );
            let d = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let e = 1e-6;
            let fd = (g.refractive_index(&(x + d * e)) - g.refractive_index(&(x - d * e))) / (2.0 * e);
            let interp = g.refractive_gradient(&x).dot(&d);
            let scale = g.refractive_gradient(&x).norm();
            assert!((fd - interp).abs() <= 0.1 * scale, "fd {fd} interp {interp}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gradient_proportional_bit_exact(x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
            let g = field(&spec(6, 2.5e-5), |p| 10.0 + p.x * p.x * 40.0 + p.y * 7.0 + (3.0 * p.z).sin() * 5.0);
            let p = Vec3::new(x, y, z);
            prop_assert_eq!(g.refractive_gradient(&p), g.density_gradient(&p) * 2.5e-5);
            prop_assert!(g.refractive_index(&p) >= 1.0);
        }

        #[test]
        fn doubling_masses_doubles_voxels(seed in any::<u64>()) {
            let s = spec(6, 1e-5);
            let k = SpikyKernel::new(0.2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ps: Vec<Particle> = (0..60)
                .map(|_| particle(Vec3::new(rng.random(), rng.random(), rng.random()), 0.05))
                .collect();
            let doubled: Vec<Particle> = ps.iter().map(|p| particle(p.position, 0.1)).collect();
            let a = splat_density(&ps, &k, &s).unwrap();
            let b = splat_density(&doubled, &k, &s).unwrap();
            for (x, y) in a.densities().iter().zip(b.densities()) {
                prop_assert!((2.0 * x - y).abs() <= 1e-12 * y.max(1e-300));
            }
        }
    }
}
