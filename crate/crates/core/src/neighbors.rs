//! Uniform-cell spatial index for fixed-radius neighbor queries.
//!
//! Particles are binned into square cells of side `cell_size` (the kernel
//! support), stored as a counting-sorted index array with per-cell offsets.
//! A query scans the 3x3 block of cells around the query point. Within a
//! cell, particles appear in ascending index order, so query results are
//! deterministic for a given set of positions.

use crate::particles::Vec2;

#[derive(Debug, Clone)]
pub struct NeighborGrid {
    cell_size: f64,
    origin: Vec2,
    dims: [usize; 2],
    /// Particle indices sorted by cell.
    sorted: Vec<usize>,
    /// `sorted[offsets[c]..offsets[c + 1]]` are the particles of cell `c`.
    offsets: Vec<usize>,
}

impl NeighborGrid {
    /// Bins `positions` into cells of side `cell_size` covering `[0, side]^2`.
    /// Points slightly outside the square land in the nearest edge cell.
    pub fn build(positions: &[Vec2], side: f64, cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let n = ((side / cell_size).ceil() as usize).max(1);
        let mut grid = Self {
            cell_size,
            origin: Vec2::zeros(),
            dims: [n, n],
            sorted: Vec::new(),
            offsets: Vec::new(),
        };
        grid.rebuild(positions);
        grid
    }

    pub fn rebuild(&mut self, positions: &[Vec2]) {
        let ncells = self.dims[0] * self.dims[1];
        let cells: Vec<usize> = positions.iter().map(|p| self.cell_of(p)).collect();
        let mut counts = vec![0usize; ncells + 1];
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        self.offsets = counts.clone();
        let mut cursor = counts;
        self.sorted = vec![0; positions.len()];
        for (i, &c) in cells.iter().enumerate() {
            self.sorted[cursor[c]] = i;
            cursor[c] += 1;
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    #[inline]
    fn coord(&self, v: f64, axis: usize) -> usize {
        let c = ((v - self.origin[axis]) / self.cell_size).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.dims[axis] - 1)
        }
    }

    #[inline]
    fn cell_of(&self, p: &Vec2) -> usize {
        self.coord(p.x, 0) + self.dims[0] * self.coord(p.y, 1)
    }

    /// Calls `f(j, r, dist)` for every indexed particle `j != exclude` with
    /// `0 <= dist = |x - x_j| < radius`, where `r = x - x_j`.
    ///
    /// `radius` must not exceed the cell size.
    pub fn for_each_within<F>(
        &self,
        positions: &[Vec2],
        x: Vec2,
        radius: f64,
        exclude: Option<usize>,
        mut f: F,
    ) where
        F: FnMut(usize, Vec2, f64),
    {
        debug_assert!(radius <= self.cell_size * (1.0 + 1e-12));
        let cx = self.coord(x.x, 0);
        let cy = self.coord(x.y, 1);
        let r2 = radius * radius;
        for gy in cy.saturating_sub(1)..=(cy + 1).min(self.dims[1] - 1) {
            for gx in cx.saturating_sub(1)..=(cx + 1).min(self.dims[0] - 1) {
                let c = gx + self.dims[0] * gy;
                for &j in &self.sorted[self.offsets[c]..self.offsets[c + 1]] {
                    if Some(j) == exclude {
                        continue;
                    }
                    let r = x - positions[j];
                    let d2 = r.norm_squared();
                    if d2 < r2 {
                        f(j, r, d2.sqrt());
                    }
                }
            }
        }
    }

    /// Indices of particles within `radius` of particle `i`, excluding `i`.
    pub fn neighbors_of(&self, positions: &[Vec2], i: usize, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(positions, positions[i], radius, Some(i), |j, _, _| out.push(j));
        out
    }
}
