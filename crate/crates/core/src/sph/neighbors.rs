use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;

use super::Particle;
use crate::error::{HazeError, Result};
use crate::geom::Vec3;

type CellKey = [i64; 3];

/// Uniform hash grid with cell size equal to the search radius.
///
/// Particle indices are stored sorted by `(cell, index)`, so every cell holds
/// a contiguous, ascending run of indices. A query visits the 27 cells around
/// the query point; any particle closer than one cell size is guaranteed to be
/// among the candidates, and no candidate is farther than `2 * h * sqrt(3)`.
#[derive(Clone, Debug)]
pub struct NeighborGrid {
    cell_size: f64,
    cells: HashMap<CellKey, Range<usize>>,
    order: Vec<usize>,
    cell_of: Vec<CellKey>,
}

impl NeighborGrid {
    pub fn build(positions: &[Vec3], cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(HazeError::Parameter(format!(
                "neighbor cell size must be positive, got {cell_size}"
            )));
        }
        if let Some(index) = positions
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(HazeError::NonFinitePosition { index });
        }
        let inv = 1.0 / cell_size;
        let cell_of: Vec<CellKey> = positions.iter().map(|p| key_for(p, inv)).collect();
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_unstable_by_key(|&i| (cell_of[i], i));

        let mut cells = HashMap::new();
        let mut start = 0;
        while start < order.len() {
            let key = cell_of[order[start]];
            let mut end = start + 1;
            while end < order.len() && cell_of[order[end]] == key {
                end += 1;
            }
            cells.insert(key, start..end);
            start = end;
        }
        Ok(Self {
            cell_size,
            cells,
            order,
            cell_of,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.cell_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_of.is_empty()
    }

    /// Number of occupied cells.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Cell containing particle `i`.
    pub fn cell_of(&self, i: usize) -> [i64; 3] {
        self.cell_of[i]
    }

    /// Calls `f` for every candidate in the 27 cells around `p`.
    #[inline]
    pub fn for_each_candidate(&self, p: &Vec3, mut f: impl FnMut(usize)) {
        let c = key_for(p, 1.0 / self.cell_size);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(range) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in &self.order[range.clone()] {
                            f(j);
                        }
                    }
                }
            }
        }
    }

    /// Candidate neighbors of particle `i` (including `i` itself).
    pub fn query(&self, i: usize, positions: &[Vec3]) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(&positions[i], |j| out.push(j));
        out
    }

    /// Indices `j` with `|p - x_j| < radius`, ascending.
    pub fn within(&self, p: &Vec3, positions: &[Vec3], radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.for_each_candidate(p, |j| {
            if (positions[j] - p).norm_squared() < r2 {
                out.push(j);
            }
        });
        out.sort_unstable();
        out
    }
}

#[inline]
fn key_for(p: &Vec3, inv: f64) -> CellKey {
    [
        (p.x * inv).floor() as i64,
        (p.y * inv).floor() as i64,
        (p.z * inv).floor() as i64,
    ]
}

/// Builds the neighbor grid over particle positions with cell size `h`.
pub fn build_neighbors(particles: &[Particle], h: f64) -> Result<NeighborGrid> {
    let positions: Vec<Vec3> = particles.iter().map(|p| p.position).collect();
    NeighborGrid::build(&positions, h)
}

/// Exact neighbor lists (distance strictly below the radius, self excluded)
/// in compressed row form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborLists {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl NeighborLists {
    /// With `sorted`, each list is in ascending index order, which fixes the
    /// reduction order of every neighbor sum.
    pub fn build(grid: &NeighborGrid, positions: &[Vec3], radius: f64, sorted: bool) -> Self {
        let r2 = radius * radius;
        let lists: Vec<Vec<usize>> = (0..positions.len())
            .into_par_iter()
            .map(|i| {
                let xi = positions[i];
                let mut list = Vec::with_capacity(48);
                grid.for_each_candidate(&xi, |j| {
                    if j != i && (positions[j] - xi).norm_squared() < r2 {
                        list.push(j);
                    }
                });
                if sorted {
                    list.sort_unstable();
                }
                list
            })
            .collect();
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut indices = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for list in lists {
            indices.extend_from_slice(&list);
            offsets.push(indices.len());
        }
        Self { offsets, indices }
    }

    /// Builds the grid and the lists in one go.
    pub fn from_positions(positions: &[Vec3], radius: f64, sorted: bool) -> Result<Self> {
        let grid = NeighborGrid::build(positions, radius)?;
        Ok(Self::build(&grid, positions, radius, sorted))
    }

    #[inline]
    pub fn of(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Offset of particle `i`'s list in the flat index array.
    #[inline]
    pub(crate) fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_pairs(&self) -> usize {
        self.indices.len()
    }
}
