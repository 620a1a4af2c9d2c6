//! Steadiness measure shared by the particle solver and the grid oracle.
//!
//! The stream function is sampled on a fixed probe lattice after every
//! step; the measure is `max |phi(t) - phi(t - window)| / window` over the
//! probes. Particle values are interpolated with kernel weights, grid
//! values bilinearly.

use std::collections::VecDeque;

use crate::kernel::KernelSpec;
use crate::neighbors::NeighborGrid;
use crate::operators::shepard_interpolate;
use crate::particles::{ParticleSet, Vec2};

/// Probes per side, excluding the walls.
pub const PROBES_PER_SIDE: usize = 19;

/// Interior probe points `(i / 20, j / 20) * side`, `i, j = 1..=19`.
pub fn probe_points(side: f64) -> Vec<Vec2> {
    let m = PROBES_PER_SIDE + 1;
    let mut pts = Vec::with_capacity(PROBES_PER_SIDE * PROBES_PER_SIDE);
    for j in 1..m {
        for i in 1..m {
            pts.push(Vec2::new(side * i as f64 / m as f64, side * j as f64 / m as f64));
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadySample {
    pub time: f64,
    pub values: Vec<f64>,
}

impl SteadySample {
    pub fn from_particles(time: f64, ps: &ParticleSet, grid: &NeighborGrid, kernel: &KernelSpec) -> Self {
        let positions = ps.positions();
        let phi = ps.phi();
        let values = probe_points(ps.side)
            .into_iter()
            .map(|x| shepard_interpolate(&phi, x, grid, &positions, ps, kernel).unwrap_or(0.0))
            .collect();
        Self { time, values }
    }
}

/// Sliding-window rate of change. Every recorded sample is compared with
/// the oldest retained sample no more than `window` older; until a full
/// window of history exists that is the initial sample.
#[derive(Debug, Clone)]
pub struct SteadyMonitor {
    window: f64,
    history: VecDeque<SteadySample>,
}

impl SteadyMonitor {
    pub fn new(window: f64) -> Self {
        Self {
            window,
            history: VecDeque::new(),
        }
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Stores `sample` and returns `max |change| / elapsed` against the
    /// reference sample, `None` for the first sample.
    pub fn record(&mut self, sample: SteadySample) -> Option<f64> {
        // keep the newest sample at or before `time - window` as reference
        let cutoff = sample.time - self.window * (1.0 - 1e-9);
        while self.history.len() > 1 && self.history[1].time <= cutoff {
            self.history.pop_front();
        }
        let rate = self.history.front().map(|prev| {
            let dt = sample.time - prev.time;
            let change = prev
                .values
                .iter()
                .zip(&sample.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dt > 0.0 {
                change / dt
            } else {
                0.0
            }
        });
        self.history.push_back(sample);
        rate
    }
}
