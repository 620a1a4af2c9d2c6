//! SPH approximations of the gradient and Laplacian.
//!
//! All sums run over neighbors `j != i` within the kernel support, weighted by
//! the particle volume `V_j = m_j / rho_j`:
//!
//! * gradient: `sum_j V_j (psi_j - psi_i) grad w(r_ij)`
//! * Laplacian: `2 sum_j V_j (psi_i - psi_j) / |r_ij| * (r_ij / |r_ij|) . grad w(r_ij)`
//! * boundary Laplacian (truncated support, prescribed gradient at `x_k`):
//!   `(4 / alpha) sum_j (psi_j - psi_k + r_kj . grad psi_k) / |r_kj|^2 w(r_kj)`
//!   with `alpha = sum_j w(r_kj)`.
//!
//! `r_ij = x_i - x_j` throughout.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::neighbors::NeighborGrid;
use crate::particles::{ParticleSet, Vec2};

/// One neighbor of particle `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub j: usize,
    /// `x_i - x_j`.
    pub r: Vec2,
    pub dist: f64,
    /// `w_h(dist)`.
    pub w: f64,
    /// `dw_h/dr` at `dist`.
    pub dw: f64,
}

impl PairTerm {
    /// `grad_i w_h(|r_ij|)`.
    #[inline]
    pub fn grad_w(&self) -> Vec2 {
        self.r * (self.dw / self.dist)
    }
}

/// Neighbor pair terms for every particle, in compressed row form.
#[derive(Debug, Clone, Default)]
pub struct PairList {
    offsets: Vec<usize>,
    terms: Vec<PairTerm>,
}

impl PairList {
    /// Gathers all pairs within the kernel support. Coincident particles
    /// (zero distance) are skipped since the kernel gradient is undefined there.
    pub fn build(ps: &ParticleSet, grid: &NeighborGrid, kernel: &KernelSpec) -> Self {
        let positions = ps.positions();
        let rows: Vec<Vec<PairTerm>> = (0..positions.len())
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::with_capacity(32);
                grid.for_each_within(&positions, positions[i], kernel.h, Some(i), |j, r, dist| {
                    if dist > 0.0 {
                        let (w, dw) = kernel.eval(dist);
                        row.push(PairTerm { j, r, dist, w, dw });
                    }
                });
                row
            })
            .collect();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut terms = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for row in rows {
            terms.extend(row);
            offsets.push(terms.len());
        }
        Self { offsets, terms }
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn of(&self, i: usize) -> &[PairTerm] {
        &self.terms[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of particles without any neighbor.
    pub fn starved(&self) -> usize {
        (0..self.len()).filter(|&i| self.of(i).is_empty()).count()
    }
}

/// Gradient of `field` at particle `i`. Returns zero for a starved particle.
pub fn sph_gradient(field: &[f64], i: usize, pairs: &[PairTerm], ps: &ParticleSet) -> Vec2 {
    let fi = field[i];
    pairs.iter().fold(Vec2::zeros(), |acc, p| {
        acc + p.grad_w() * (ps.particles[p.j].volume * (field[p.j] - fi))
    })
}

/// Laplacian of `field` at particle `i`. Returns zero for a starved particle.
pub fn sph_laplacian(field: &[f64], i: usize, pairs: &[PairTerm], ps: &ParticleSet) -> f64 {
    let fi = field[i];
    2.0 * pairs
        .iter()
        .map(|p| ps.particles[p.j].volume * (fi - field[p.j]) * p.dw / p.dist)
        .sum::<f64>()
}

/// Laplacian at boundary particle `k` from the Taylor-expansion formula with
/// the gradient at `x_k` prescribed by boundary data.
pub fn boundary_laplacian(field: &[f64], grad_at_k: Vec2, k: usize, pairs: &[PairTerm]) -> Result<f64> {
    let alpha: f64 = pairs.iter().map(|p| p.w).sum();
    if !(alpha > 0.0) {
        return Err(Error::StarvedBoundary { particle: k });
    }
    let fk = field[k];
    let sum: f64 = pairs
        .iter()
        .map(|p| (field[p.j] - fk + p.r.dot(&grad_at_k)) / (p.dist * p.dist) * p.w)
        .sum();
    Ok(4.0 / alpha * sum)
}

/// Shepard (kernel-normalized) interpolation of `field` at `x`. `None` when no
/// particle lies within the support.
pub fn shepard_interpolate(
    field: &[f64],
    x: Vec2,
    grid: &NeighborGrid,
    positions: &[Vec2],
    ps: &ParticleSet,
    kernel: &KernelSpec,
) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    grid.for_each_within(positions, x, kernel.h, None, |j, _, dist| {
        let vw = ps.particles[j].volume * kernel.value(dist);
        num += vw * field[j];
        den += vw;
    });
    (den > 0.0).then(|| num / den)
}

/// Gradient of `field` at every particle.
pub fn gradient_all(field: &[f64], pairs: &PairList, ps: &ParticleSet) -> Vec<Vec2> {
    (0..ps.len())
        .into_par_iter()
        .map(|i| sph_gradient(field, i, pairs.of(i), ps))
        .collect()
}

/// Laplacian of `field` at every particle.
pub fn laplacian_all(field: &[f64], pairs: &PairList, ps: &ParticleSet) -> Vec<f64> {
    (0..ps.len())
        .into_par_iter()
        .map(|i| sph_laplacian(field, i, pairs.of(i), ps))
        .collect()
}
