//! Finite-difference stream-function/vorticity solver on a uniform grid,
//! used as a reference for the particle scheme.
//!
//! Vorticity is marched explicitly with first-order upwind advection and
//! second-order central diffusion. Each step the Poisson problem
//! `lap psi = -omega` is relaxed with red-black SOR, and wall vorticity is
//! rebuilt from the one-sided second-order formula
//!
//! ```text
//! omega_w = (7 psi_0 - 8 psi_1 + psi_2) / (2 dX^2) + 3 g / dX - psi_tt
//! ```
//!
//! where `psi_k` are values `k` nodes into the fluid, `g` is the inward
//! normal derivative of `psi` fixed by the wall velocity, and `psi_tt` the
//! second difference along the wall (zero when `psi` is constant there).
//! On the lid, `g = -u_D` and the formula reduces to `-3 u_D / dX` plus the
//! `psi` terms.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::Vec2;
use crate::solver::{RunSummary, StepReport, Termination};
use crate::steady::{probe_points, SteadyMonitor, SteadySample};

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    /// Nodes per side.
    pub n: usize,
    pub side: f64,
    pub dx: f64,
    /// Row-major, `index = j * n + i` with `i` along x.
    pub psi: Vec<f64>,
    pub omega: Vec<f64>,
}

impl GridState {
    pub fn new(n: usize, side: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::GridTooCoarse(format!("{n} nodes per side, need at least 4")));
        }
        Ok(Self {
            n,
            side,
            dx: side / (n - 1) as f64,
            psi: vec![0.0; n * n],
            omega: vec![0.0; n * n],
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(i as f64 * self.dx, j as f64 * self.dx)
    }

    /// Fills `psi` from a function of position.
    pub fn set_psi(&mut self, f: impl Fn(f64, f64) -> f64) {
        for j in 0..self.n {
            for i in 0..self.n {
                let p = self.node(i, j);
                let k = self.idx(i, j);
                self.psi[k] = f(p.x, p.y);
            }
        }
    }

    /// Central-difference velocity `(d psi/dy, -d psi/dx)` at interior nodes;
    /// zero on the walls.
    pub fn velocity(&self, i: usize, j: usize) -> Vec2 {
        let n = self.n;
        if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
            return Vec2::zeros();
        }
        let h2 = 2.0 * self.dx;
        Vec2::new(
            (self.psi[self.idx(i, j + 1)] - self.psi[self.idx(i, j - 1)]) / h2,
            -(self.psi[self.idx(i + 1, j)] - self.psi[self.idx(i - 1, j)]) / h2,
        )
    }

    /// Bilinear interpolation of `field` at `x`.
    pub fn interpolate(&self, field: &[f64], x: Vec2) -> f64 {
        let last = (self.n - 2) as f64;
        let fx = (x.x / self.dx).clamp(0.0, self.n as f64 - 1.0);
        let fy = (x.y / self.dx).clamp(0.0, self.n as f64 - 1.0);
        let i = fx.floor().min(last) as usize;
        let j = fy.floor().min(last) as usize;
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let f00 = field[self.idx(i, j)];
        let f10 = field[self.idx(i + 1, j)];
        let f01 = field[self.idx(i, j + 1)];
        let f11 = field[self.idx(i + 1, j + 1)];
        (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11)
    }

    pub fn psi_min(&self) -> (f64, Vec2) {
        let mut best = (f64::INFINITY, Vec2::zeros());
        for j in 0..self.n {
            for i in 0..self.n {
                let v = self.psi[self.idx(i, j)];
                if v < best.0 {
                    best = (v, self.node(i, j));
                }
            }
        }
        best
    }

    pub fn kinetic_energy(&self) -> f64 {
        let mut e = 0.0;
        for j in 1..self.n - 1 {
            for i in 1..self.n - 1 {
                e += self.velocity(i, j).norm_squared();
            }
        }
        0.5 * e * self.dx * self.dx
    }

    /// Writes `x,y,psi,omega,u,v`, one node per line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "x,y,psi,omega,u,v")?;
            for j in 0..self.n {
                for i in 0..self.n {
                    let p = self.node(i, j);
                    let u = self.velocity(i, j);
                    let k = self.idx(i, j);
                    writeln!(
                        out,
                        "{:e},{:e},{:e},{:e},{:e},{:e}",
                        p.x, p.y, self.psi[k], self.omega[k], u.x, u.y
                    )?;
                }
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Wall vorticity for the cavity: lid speed `lid_speed` on `y = L`,
/// no-slip elsewhere.
pub fn fd_boundary_vorticity(gs: &mut GridState, lid_speed: f64) -> Result<()> {
    let side = gs.side;
    boundary_vorticity_with(gs, |_, y| {
        if y >= side {
            Vec2::new(lid_speed, 0.0)
        } else {
            Vec2::zeros()
        }
    })
}

/// Wall vorticity for arbitrary wall velocity `(u_D, v_D)` given as a
/// function of position. Corner nodes take the mean of their two wall
/// neighbors.
pub fn boundary_vorticity_with(gs: &mut GridState, wall: impl Fn(f64, f64) -> Vec2) -> Result<()> {
    let n = gs.n;
    if n < 4 {
        return Err(Error::GridTooCoarse(format!("{n} nodes per side, need at least 4")));
    }
    let h = gs.dx;
    let last = n - 1;
    let psi = &gs.psi;
    let at = |i: usize, j: usize| psi[j * n + i];
    let formula = |p0: f64, p1: f64, p2: f64, g: f64, tt: f64| {
        (7.0 * p0 - 8.0 * p1 + p2) / (2.0 * h * h) + 3.0 * g / h - tt
    };
    let mut updates = Vec::with_capacity(4 * n);
    for i in 1..last {
        let x = i as f64 * h;
        let tt_top = (at(i + 1, last) - 2.0 * at(i, last) + at(i - 1, last)) / (h * h);
        let u_top = wall(x, gs.side);
        updates.push((
            last * n + i,
            formula(at(i, last), at(i, last - 1), at(i, last - 2), -u_top.x, tt_top),
        ));
        let tt_bot = (at(i + 1, 0) - 2.0 * at(i, 0) + at(i - 1, 0)) / (h * h);
        let u_bot = wall(x, 0.0);
        updates.push((i, formula(at(i, 0), at(i, 1), at(i, 2), u_bot.x, tt_bot)));
    }
    for j in 1..last {
        let y = j as f64 * h;
        let tt_left = (at(0, j + 1) - 2.0 * at(0, j) + at(0, j - 1)) / (h * h);
        let u_left = wall(0.0, y);
        updates.push((j * n, formula(at(0, j), at(1, j), at(2, j), -u_left.y, tt_left)));
        let tt_right = (at(last, j + 1) - 2.0 * at(last, j) + at(last, j - 1)) / (h * h);
        let u_right = wall(gs.side, y);
        updates.push((
            j * n + last,
            formula(at(last, j), at(last - 1, j), at(last - 2, j), u_right.y, tt_right),
        ));
    }
    for (k, v) in updates {
        gs.omega[k] = v;
    }
    let corner = |gs: &GridState, a: (usize, usize), b: (usize, usize)| {
        0.5 * (gs.omega[gs.idx(a.0, a.1)] + gs.omega[gs.idx(b.0, b.1)])
    };
    let c00 = corner(gs, (1, 0), (0, 1));
    let c10 = corner(gs, (last - 1, 0), (last, 1));
    let c01 = corner(gs, (1, last), (0, last - 1));
    let c11 = corner(gs, (last - 1, last), (last, last - 1));
    gs.omega[0] = c00;
    gs.omega[last] = c10;
    gs.omega[last * n] = c01;
    gs.omega[last * n + last] = c11;
    Ok(())
}

/// Red-black SOR for `lap psi = -omega` with the current wall values of
/// `psi` held fixed. Returns the number of sweeps and the final relative
/// residual `||lap psi + omega|| / ||omega||` over the interior.
pub fn relax_stream_function(gs: &mut GridState, tol: f64, max_sweeps: usize) -> Result<(usize, f64)> {
    let n = gs.n;
    let h2 = gs.dx * gs.dx;
    let relax = 2.0 / (1.0 + (std::f64::consts::PI / (n - 1) as f64).sin());
    let mut rhs_norm = 0.0;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            rhs_norm += gs.omega[j * n + i].powi(2);
        }
    }
    let rhs_norm = rhs_norm.sqrt();
    let residual = |gs: &GridState| {
        let mut r2 = 0.0;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let k = j * n + i;
                let lap = (gs.psi[k + 1] + gs.psi[k - 1] + gs.psi[k + n] + gs.psi[k - n]
                    - 4.0 * gs.psi[k])
                    / h2;
                r2 += (lap + gs.omega[k]).powi(2);
            }
        }
        r2.sqrt()
    };
    if rhs_norm == 0.0 {
        let r = residual(gs);
        if r == 0.0 {
            return Ok((0, 0.0));
        }
    }
    let scale = if rhs_norm > 0.0 { rhs_norm } else { 1.0 };
    let mut res = residual(gs) / scale;
    let mut sweeps = 0;
    while res > tol {
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence {
                iterations: sweeps,
                residual: res,
            });
        }
        for color in 0..2 {
            for j in 1..n - 1 {
                let start = 1 + (j + color + 1) % 2;
                for i in (start..n - 1).step_by(2) {
                    let k = j * n + i;
                    let gs_value = 0.25
                        * (gs.psi[k + 1] + gs.psi[k - 1] + gs.psi[k + n] + gs.psi[k - n]
                            + h2 * gs.omega[k]);
                    gs.psi[k] += relax * (gs_value - gs.psi[k]);
                }
            }
        }
        sweeps += 1;
        res = residual(gs) / scale;
    }
    Ok((sweeps, res))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    /// Nodes per side.
    pub n: usize,
    pub reynolds: f64,
    pub dt: f64,
    pub t_end: f64,
    pub steady_tol: f64,
    pub steady_window: f64,
    pub lid_speed: f64,
    pub side: f64,
    pub poisson_tol: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            n: 129,
            reynolds: 100.0,
            dt: 1.0e-3,
            t_end: 100.0,
            steady_tol: 1.0e-4,
            steady_window: 1.0,
            lid_speed: 1.0,
            side: 1.0,
            poisson_tol: 1.0e-8,
        }
    }
}

impl FdConfig {
    /// Largest time step for which the explicit upwind update stays a convex
    /// combination of neighbor values, `dt (4 / (Re dx^2) + (|u| + |v|) / dx) <= 1`,
    /// with `|u| + |v|` bounded by twice the lid speed.
    pub fn stable_dt(&self) -> f64 {
        let dx = self.side / (self.n - 1) as f64;
        let diffusive = 4.0 / (self.reynolds * dx * dx);
        let advective = 2.0 * self.lid_speed.abs() / dx;
        1.0 / (diffusive + advective)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 17 {
            return Err(Error::GridTooCoarse(format!(
                "{} nodes per side, the oracle needs at least 17",
                self.n
            )));
        }
        if !(self.reynolds > 0.0) || !(self.dt > 0.0) || !(self.steady_window > 0.0) {
            return Err(Error::Config(
                "reynolds, dt and steady_window must be positive".into(),
            ));
        }
        if self.dt > self.stable_dt() {
            return Err(Error::ConfigKey {
                key: "dt".into(),
                line: None,
                message: format!(
                    "{} exceeds the explicit stability limit {:.3e}",
                    self.dt,
                    self.stable_dt()
                ),
            });
        }
        Ok(())
    }
}

/// Explicit upwind step of the vorticity equation at interior nodes.
fn advance_vorticity(gs: &GridState, dt: f64, reynolds: f64) -> Vec<f64> {
    let n = gs.n;
    let h = gs.dx;
    let mut next = gs.omega.clone();
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let k = j * n + i;
            let w = &gs.omega;
            let u = gs.velocity(i, j);
            let dwdx = if u.x > 0.0 {
                (w[k] - w[k - 1]) / h
            } else {
                (w[k + 1] - w[k]) / h
            };
            let dwdy = if u.y > 0.0 {
                (w[k] - w[k - n]) / h
            } else {
                (w[k + n] - w[k]) / h
            };
            let lap = (w[k + 1] + w[k - 1] + w[k + n] + w[k - n] - 4.0 * w[k]) / (h * h);
            next[k] = w[k] + dt * (lap / reynolds - u.x * dwdx - u.y * dwdy);
        }
    }
    next
}

fn probe(gs: &GridState, time: f64) -> SteadySample {
    SteadySample {
        time,
        values: probe_points(gs.side)
            .into_iter()
            .map(|x| gs.interpolate(&gs.psi, x))
            .collect(),
    }
}

/// Marches the cavity to a steady state or `t_end`. `observer` sees every
/// step report in the same format as the particle solver.
pub fn fd_run(cfg: &FdConfig, mut observer: impl FnMut(&StepReport, &GridState) -> Result<()>) -> Result<(GridState, RunSummary)> {
    cfg.validate()?;
    let mut gs = GridState::new(cfg.n, cfg.side)?;
    let max_steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut monitor = SteadyMonitor::new(cfg.steady_window);
    monitor.record(probe(&gs, 0.0));
    let mut termination = Termination::NotSteady;
    let mut max_iters = 0;
    let mut step = 0;
    while step < max_steps {
        let run_step = |gs: &mut GridState| -> Result<StepReport> {
            boundary_vorticity_with(gs, |_, y| {
                if y >= cfg.side {
                    Vec2::new(cfg.lid_speed, 0.0)
                } else {
                    Vec2::zeros()
                }
            })?;
            let next = advance_vorticity(gs, cfg.dt, cfg.reynolds);
            let mut rate: f64 = 0.0;
            for (k, (a, b)) in gs.omega.iter().zip(&next).enumerate() {
                if !b.is_finite() {
                    return Err(Error::NonFinite {
                        quantity: "vorticity",
                        particle: k,
                    });
                }
                rate = rate.max((a - b).abs() / cfg.dt);
            }
            gs.omega = next;
            let (sweeps, residual) = relax_stream_function(gs, cfg.poisson_tol, 200_000)?;
            Ok(StepReport {
                step: step + 1,
                time: (step + 1) as f64 * cfg.dt,
                omega_rate: rate,
                substeps: 1,
                poisson_iterations: sweeps,
                poisson_residual: residual,
                clamped: 0,
                max_shift: 0.0,
                kinetic_energy: gs.kinetic_energy(),
                phi_min: gs.psi_min().0,
                starved: 0,
                steadiness: None,
            })
        };
        let mut report = run_step(&mut gs).map_err(|e| e.at_step(step + 1))?;
        step += 1;
        report.steadiness = monitor.record(probe(&gs, report.time));
        max_iters = max_iters.max(report.poisson_iterations);
        observer(&report, &gs).map_err(|e| e.at_step(step))?;
        if report.steadiness.is_some_and(|s| s < cfg.steady_tol) {
            termination = Termination::Steady;
            break;
        }
    }
    // refresh wall vorticity so the returned state is consistent with psi
    fd_boundary_vorticity(&mut gs, cfg.lid_speed)?;
    let summary = RunSummary {
        steps: step,
        time: step as f64 * cfg.dt,
        termination,
        phi_min: gs.psi_min().0,
        max_poisson_iterations: max_iters,
        total_clamped: 0,
    };
    Ok((gs, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn still_walls_give_zero_vorticity() {
        let mut gs = GridState::new(11, 1.0).unwrap();
        fd_boundary_vorticity(&mut gs, 0.0).unwrap();
        assert!(gs.omega.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn lid_term_alone() {
        let mut gs = GridState::new(11, 1.0).unwrap();
        fd_boundary_vorticity(&mut gs, 1.0).unwrap();
        for i in 1..10 {
            let w = gs.omega[gs.idx(i, 10)];
            assert!((w + 30.0).abs() < 1e-12, "{w}");
            assert_eq!(gs.omega[gs.idx(i, 0)], 0.0);
        }
    }

    #[test]
    fn too_coarse() {
        assert!(matches!(GridState::new(3, 1.0), Err(Error::GridTooCoarse(_))));
    }

    fn manufactured_lid_error(n: usize) -> f64 {
        let mut gs = GridState::new(n, 1.0).unwrap();
        gs.set_psi(|x, y| (PI * x).cos() * (PI * y).cos());
        // u = d psi/dy, v = -d psi/dx
        boundary_vorticity_with(&mut gs, |x, y| {
            Vec2::new(
                -PI * (PI * x).cos() * (PI * y).sin(),
                PI * (PI * x).sin() * (PI * y).cos(),
            )
        })
        .unwrap();
        let mut err: f64 = 0.0;
        for i in 1..n - 1 {
            let x = gs.node(i, n - 1).x;
            let exact = 2.0 * PI * PI * (PI * x).cos() * (PI * 1.0f64).cos();
            err = err.max((gs.omega[gs.idx(i, n - 1)] - exact).abs());
        }
        err
    }

    #[test]
    fn wall_formula_is_second_order() {
        let coarse = manufactured_lid_error(21);
        let fine = manufactured_lid_error(41);
        assert!(coarse < 0.05 * 2.0 * PI * PI, "{coarse}");
        assert!(coarse / fine >= 3.0, "{coarse} / {fine}");
    }

    #[test]
    fn sor_solves_manufactured_poisson() {
        let n = 33;
        let mut gs = GridState::new(n, 1.0).unwrap();
        for j in 0..n {
            for i in 0..n {
                let p = gs.node(i, j);
                let k = gs.idx(i, j);
                gs.omega[k] = 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin();
            }
        }
        let (_, res) = relax_stream_function(&mut gs, 1e-10, 10_000).unwrap();
        assert!(res <= 1e-10);
        let mid = gs.psi[gs.idx(16, 16)];
        assert!((mid - 1.0).abs() < 2e-3, "{mid}");
    }

    #[test]
    fn zero_lid_is_a_fixed_point() {
        let cfg = FdConfig {
            n: 17,
            lid_speed: 0.0,
            t_end: 0.1,
            dt: 1e-3,
            steady_tol: 0.0,
            ..Default::default()
        };
        let mut steps = 0;
        let (gs, summary) = fd_run(&cfg, |r, gs| {
            steps += 1;
            assert!(gs.psi.iter().chain(&gs.omega).all(|v| v.to_bits() == 0));
            assert_eq!(r.poisson_iterations, 0);
            Ok(())
        })
        .unwrap();
        assert_eq!(steps, 100);
        assert_eq!(summary.steps, 100);
        assert!(gs.psi.iter().all(|v| v.to_bits() == 0));

        let cfg = FdConfig { steady_tol: 1e-4, ..cfg };
        let (_, summary) = fd_run(&cfg, |_, _| Ok(())).unwrap();
        assert_eq!(summary.termination, Termination::Steady);
        assert_eq!(summary.steps, 1);
    }

    #[test]
    fn rejects_unstable_step() {
        let cfg = FdConfig {
            n: 65,
            dt: 0.05,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::ConfigKey { .. })));
    }
}
