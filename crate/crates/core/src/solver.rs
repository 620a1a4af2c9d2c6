//! Time stepping of the particle stream-function/vorticity scheme.
//!
//! One step, starting from positions `x^n`, stream function `phi^n` and
//! vorticity `omega^n`:
//!
//! 1. neighbor index and pair terms for `x^n`
//! 2. wall vorticity from `phi^n` and the wall velocity
//! 3. explicit vorticity diffusion, `omega^{n+1} = omega^n + dt (lap omega^n / Re + xi)`
//! 4. Poisson solve `-lap phi^{n+1} = omega^{n+1}`
//! 5. particle motion with `u = (d phi/dy, -d phi/dx)`
//! 6. particle shifting with first-order correction of `phi` and `omega`
//! 7. neighbor rebuild and velocity recovery for reporting
//! 8. step report and dumps

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::neighbors::NeighborGrid;
use crate::operators::{self, PairList};
use crate::particles::{CornerPolicy, Particle, ParticleKind, ParticleSet, Vec2};
use crate::poisson::{self, SolveStats};
use crate::steady::{SteadyMonitor, SteadySample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub reynolds: f64,
    pub dt: f64,
    /// Maximum simulated time.
    pub t_end: f64,
    /// Threshold on the steadiness measure, see [`crate::steady`].
    pub steady_tol: f64,
    /// Look-back interval of the steadiness measure (time).
    pub steady_window: f64,
    pub shift_coeff: f64,
    /// Largest shift per step as a fraction of the initial spacing.
    pub shift_cap: f64,
    /// Steps between particle dumps; 0 writes only the final state.
    pub dump_every: usize,
    pub spacing: f64,
    pub side: f64,
    pub lid_speed: f64,
    /// Smoothing length over initial spacing.
    pub h_factor: f64,
    pub poisson_tol: f64,
    pub corners: CornerPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            reynolds: 100.0,
            dt: 2.0e-3,
            t_end: 100.0,
            steady_tol: 1.0e-4,
            steady_window: 1.0,
            shift_coeff: 0.1,
            shift_cap: 0.2,
            dump_every: 0,
            spacing: 1.0e-2,
            side: 1.0,
            lid_speed: 1.0,
            h_factor: 2.1,
            poisson_tol: 1.0e-8,
            corners: CornerPolicy::Wall,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::ConfigKey {
                    key: key.to_string(),
                    line: None,
                    message: msg.to_string(),
                })
            }
        };
        check(self.reynolds > 0.0 && self.reynolds.is_finite(), "reynolds", "must be positive")?;
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", "must be positive")?;
        check(self.t_end >= 0.0, "t_end", "must be non-negative")?;
        check(self.steady_tol >= 0.0, "steady_tol", "must be non-negative")?;
        check(self.steady_window > 0.0, "steady_window", "must be positive")?;
        check(self.shift_coeff >= 0.0, "shift_coeff", "must be non-negative")?;
        check(self.shift_cap >= 0.0, "shift_cap", "must be non-negative")?;
        check(self.spacing > 0.0, "spacing", "must be positive")?;
        check(self.side > 0.0, "side", "must be positive")?;
        check(self.lid_speed.is_finite(), "lid_speed", "must be finite")?;
        check(self.h_factor > 1.0, "h_factor", "must exceed 1")?;
        check(self.poisson_tol > 0.0 && self.poisson_tol < 1.0, "poisson_tol", "must lie in (0, 1)")?;
        Ok(())
    }

    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::from_spacing(self.spacing, self.h_factor)
    }
}

/// Prescribed wall velocity `(u_D, v_D)` for each boundary particle.
pub trait BoundaryVelocity: Sync {
    fn velocity(&self, particle: &Particle) -> Vec2;
}

/// Cavity walls: tangential lid speed on the top, no-slip elsewhere.
#[derive(Debug, Clone, Copy)]
pub struct LidDriven {
    pub speed: f64,
}

impl BoundaryVelocity for LidDriven {
    fn velocity(&self, particle: &Particle) -> Vec2 {
        match particle.kind {
            ParticleKind::BoundaryTop => Vec2::new(self.speed, 0.0),
            _ => Vec2::zeros(),
        }
    }
}

impl<F> BoundaryVelocity for F
where
    F: Fn(&Particle) -> Vec2 + Sync,
{
    fn velocity(&self, particle: &Particle) -> Vec2 {
        self(particle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    /// `max_i |omega_i^{n+1} - omega_i^n| / dt` over interior particles,
    /// before shifting.
    pub omega_rate: f64,
    /// Diffusion sub-steps used for the vorticity update.
    pub substeps: usize,
    pub poisson_iterations: usize,
    pub poisson_residual: f64,
    pub clamped: usize,
    pub max_shift: f64,
    pub kinetic_energy: f64,
    pub phi_min: f64,
    pub starved: usize,
    /// Steadiness measure after this step.
    pub steadiness: Option<f64>,
}

impl StepReport {
    pub const HEADER: &'static str = "step\ttime\tomega_rate\tsubsteps\tpoisson_iter\tpoisson_residual\tclamped\tmax_shift\tkinetic_energy\tphi_min\tstarved\tsteadiness";

    /// Tab-separated log line. Floats use the shortest round-trip form.
    pub fn log_line(&self) -> String {
        format!(
            "{}\t{:e}\t{:e}\t{}\t{}\t{:e}\t{}\t{:e}\t{:e}\t{:e}\t{}\t{}",
            self.step,
            self.time,
            self.omega_rate,
            self.substeps,
            self.poisson_iterations,
            self.poisson_residual,
            self.clamped,
            self.max_shift,
            self.kinetic_energy,
            self.phi_min,
            self.starved,
            self.steadiness.map(|s| format!("{s:e}")).unwrap_or_else(|| "-".into()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Steady,
    /// Reached `t_end` without meeting the steadiness threshold.
    NotSteady,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Steady => "steady",
            Termination::NotSteady => "not steady",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub time: f64,
    pub termination: Termination,
    pub phi_min: f64,
    pub max_poisson_iterations: usize,
    pub total_clamped: usize,
}

/// Receives every step report and particle state.
pub trait RunObserver {
    fn on_step(&mut self, _report: &StepReport, _state: &ParticleSet, _cfg: &SolverConfig) -> Result<()> {
        Ok(())
    }

    fn on_finish(&mut self, _summary: &RunSummary, _state: &ParticleSet, _cfg: &SolverConfig) -> Result<()> {
        Ok(())
    }
}

impl RunObserver for () {}

/// Sets `omega_k = -lap phi(x_k)` on every boundary particle from the
/// Taylor-expansion Laplacian, with `grad phi(x_k) = (-v_D, u_D)`.
pub fn assign_boundary_vorticity(
    ps: &mut ParticleSet,
    pairs: &PairList,
    bc: &impl BoundaryVelocity,
) -> Result<()> {
    let phi = ps.phi();
    let values: Vec<(usize, f64)> = ps
        .particles
        .par_iter()
        .enumerate()
        .filter(|(_, p)| p.is_boundary())
        .map(|(k, p)| {
            let u = bc.velocity(p);
            let grad = Vec2::new(-u.y, u.x);
            operators::boundary_laplacian(&phi, grad, k, pairs.of(k)).map(|lap| (k, 0.0 - lap))
        })
        .collect::<Result<_>>()?;
    // `0 - lap` rather than `-lap`: a resting cavity must keep +0.0 bits
    for (k, omega) in values {
        ps.particles[k].omega = omega;
    }
    Ok(())
}

/// Number of equal sub-steps that keeps the explicit diffusion update a
/// convex combination at every interior particle: `dt / Re * D_i <= 1`,
/// with `D_i = -2 sum_j V_j dw_ij / r_ij` the diagonal of the Laplacian.
/// On a regular lattice with `h = 2.1 d0` this is 1 whenever
/// `dt <= 0.30 Re d0^2`; clustered particles can raise `D_i` well above
/// the lattice value.
pub fn diffusion_substeps(ps: &ParticleSet, pairs: &PairList, dt: f64, reynolds: f64) -> usize {
    let dmax = (0..ps.len())
        .filter(|&i| !ps.particles[i].is_boundary())
        .map(|i| {
            -2.0 * pairs
                .of(i)
                .iter()
                .map(|p| ps.particles[p.j].volume * p.dw / p.dist)
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let ratio = dt / reynolds * dmax;
    if ratio.is_finite() && ratio > 1.0 {
        ratio.ceil() as usize
    } else {
        1
    }
}

/// Explicit Euler update of the vorticity equation on interior particles,
/// split into `substeps` equal steps. Boundary entries of the result are the
/// current boundary values.
pub fn advance_vorticity(
    ps: &ParticleSet,
    pairs: &PairList,
    dt: f64,
    reynolds: f64,
    forcing: Option<&[f64]>,
    substeps: usize,
) -> Result<Vec<f64>> {
    let substeps = substeps.max(1);
    let h = dt / substeps as f64;
    let mut omega = ps.omega();
    for _ in 0..substeps {
        omega = ps
            .particles
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                if p.is_boundary() {
                    return Ok(omega[i]);
                }
                let lap = operators::sph_laplacian(&omega, i, pairs.of(i), ps);
                let xi = forcing.map_or(0.0, |f| f[i]);
                let next = omega[i] + h * (lap / reynolds + xi);
                if next.is_finite() {
                    Ok(next)
                } else {
                    Err(Error::NonFinite {
                        quantity: "vorticity",
                        particle: i,
                    })
                }
            })
            .collect::<Result<_>>()?;
    }
    Ok(omega)
}

/// Solves `-lap phi = omega` for the interior, warm-started from the current
/// stream function, and stores the result in `ps`.
pub fn update_stream_function(ps: &mut ParticleSet, pairs: &PairList, tol: f64) -> Result<SolveStats> {
    let omega = ps.omega();
    let mut phi = ps.phi();
    let sys = poisson::assemble(ps, pairs, &omega, &phi)?;
    let mut x = sys.gather(&phi);
    let stats = poisson::solve(&sys, &mut x, tol, 10 * sys.n.max(1))?;
    sys.scatter(&x, &mut phi);
    for (p, v) in ps.particles.iter_mut().zip(phi) {
        p.phi = v;
    }
    Ok(stats)
}

/// `u = (d phi/dy, -d phi/dx)` at every interior particle; boundary particles
/// get their prescribed wall velocity.
pub fn recover_velocities(ps: &mut ParticleSet, pairs: &PairList, bc: &impl BoundaryVelocity) {
    let phi = ps.phi();
    let grads = operators::gradient_all(&phi, pairs, ps);
    for (p, g) in ps.particles.iter_mut().zip(grads) {
        p.velocity = if p.is_boundary() {
            bc.velocity(p)
        } else {
            // as for the wall vorticity, keep +0.0 where the field is flat
            Vec2::new(g.y, 0.0 - g.x)
        };
    }
}

/// Moves interior particles with the stream-function velocity and clamps
/// them into the cavity. Returns the number of clamped particles.
pub fn move_particles(ps: &mut ParticleSet, pairs: &PairList, bc: &impl BoundaryVelocity, dt: f64) -> usize {
    recover_velocities(ps, pairs, bc);
    for p in ps.particles.iter_mut().filter(|p| !p.is_boundary()) {
        p.position += p.velocity * dt;
    }
    ps.clamp_to_domain()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftParams {
    pub coeff: f64,
    /// Displacement scale, `U_max * dt`.
    pub scale: f64,
    /// Cap on the shift length.
    pub cap: f64,
}

/// Shifting vector `R_i = sum_j (rbar_i / |r_ij|)^2 r_ij / |r_ij|`, with
/// `rbar_i` the mean neighbor distance.
pub fn shift_direction(pairs: &[operators::PairTerm]) -> Vec2 {
    if pairs.is_empty() {
        return Vec2::zeros();
    }
    let rbar = pairs.iter().map(|p| p.dist).sum::<f64>() / pairs.len() as f64;
    pairs.iter().fold(Vec2::zeros(), |acc, p| {
        let q = rbar / p.dist;
        acc + p.r * (q * q / p.dist)
    })
}

/// Displaces interior particles towards a uniform distribution,
/// `dx_i = coeff * scale * R_i` capped at `cap`, and corrects `phi` and
/// `omega` by `dx_i . grad`. Returns the largest shift length.
pub fn apply_shifting(ps: &mut ParticleSet, pairs: &PairList, params: ShiftParams) -> f64 {
    if params.coeff == 0.0 || params.scale == 0.0 {
        return 0.0;
    }
    let phi = ps.phi();
    let omega = ps.omega();
    let shifts: Vec<Option<(Vec2, f64, f64)>> = (0..ps.len())
        .into_par_iter()
        .map(|i| {
            if ps.particles[i].is_boundary() {
                return None;
            }
            let terms = pairs.of(i);
            let mut dx = shift_direction(terms) * (params.coeff * params.scale);
            let len = dx.norm();
            if len > params.cap {
                dx *= params.cap / len;
            }
            let dphi = dx.dot(&operators::sph_gradient(&phi, i, terms, ps));
            let domega = dx.dot(&operators::sph_gradient(&omega, i, terms, ps));
            Some((dx, dphi, domega))
        })
        .collect();
    let mut max_shift: f64 = 0.0;
    for (p, s) in ps.particles.iter_mut().zip(shifts) {
        if let Some((dx, dphi, domega)) = s {
            p.position += dx;
            p.phi += dphi;
            p.omega += domega;
            max_shift = max_shift.max(dx.norm());
        }
    }
    max_shift
}

pub fn kinetic_energy(ps: &ParticleSet) -> f64 {
    0.5 * ps
        .particles
        .iter()
        .map(|p| p.volume * p.velocity.norm_squared())
        .sum::<f64>()
}

/// Particle simulation of the lid-driven cavity.
pub struct Simulation<B: BoundaryVelocity = LidDriven> {
    pub cfg: SolverConfig,
    pub kernel: KernelSpec,
    pub state: ParticleSet,
    pub bc: B,
    pub forcing: Option<Vec<f64>>,
    grid: NeighborGrid,
    pairs: PairList,
    step: usize,
    monitor: SteadyMonitor,
}

impl Simulation<LidDriven> {
    /// Particles at rest on the initial lattice.
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let state = ParticleSet::init_lattice_with(cfg.side, cfg.spacing, cfg.corners)?;
        let bc = LidDriven {
            speed: cfg.lid_speed,
        };
        Ok(Self::with_state(cfg, state, bc))
    }
}

impl<B: BoundaryVelocity> Simulation<B> {
    pub fn with_state(cfg: SolverConfig, state: ParticleSet, bc: B) -> Self {
        let kernel = cfg.kernel();
        let grid = NeighborGrid::build(&state.positions(), state.side, kernel.h);
        let pairs = PairList::build(&state, &grid, &kernel);
        let mut monitor = SteadyMonitor::new(cfg.steady_window);
        monitor.record(SteadySample::from_particles(0.0, &state, &grid, &kernel));
        Self {
            cfg,
            kernel,
            state,
            bc,
            forcing: None,
            grid,
            pairs,
            step: 0,
            monitor,
        }
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn pairs(&self) -> &PairList {
        &self.pairs
    }

    pub fn grid(&self) -> &NeighborGrid {
        &self.grid
    }

    fn reindex(&mut self) {
        self.grid.rebuild(&self.state.positions());
        self.pairs = PairList::build(&self.state, &self.grid, &self.kernel);
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<StepReport> {
        let n = self.step;
        self.advance().map_err(|e| e.at_step(n + 1))
    }

    fn advance(&mut self) -> Result<StepReport> {
        let dt = self.cfg.dt;
        let starved = self.pairs.starved();

        assign_boundary_vorticity(&mut self.state, &self.pairs, &self.bc)?;

        let substeps = diffusion_substeps(&self.state, &self.pairs, dt, self.cfg.reynolds);
        let omega_new = advance_vorticity(
            &self.state,
            &self.pairs,
            dt,
            self.cfg.reynolds,
            self.forcing.as_deref(),
            substeps,
        )?;
        let mut omega_rate: f64 = 0.0;
        for (p, w) in self.state.particles.iter_mut().zip(&omega_new) {
            if !p.is_boundary() {
                omega_rate = omega_rate.max((w - p.omega).abs() / dt);
            }
            p.omega = *w;
        }

        let stats = update_stream_function(&mut self.state, &self.pairs, self.cfg.poisson_tol)?;

        let clamped_move = move_particles(&mut self.state, &self.pairs, &self.bc, dt);
        let umax = self
            .state
            .particles
            .iter()
            .filter(|p| !p.is_boundary())
            .map(|p| p.velocity.norm())
            .fold(0.0, f64::max);

        self.reindex();
        let max_shift = apply_shifting(
            &mut self.state,
            &self.pairs,
            ShiftParams {
                coeff: self.cfg.shift_coeff,
                scale: umax * dt,
                cap: self.cfg.shift_cap * self.cfg.spacing,
            },
        );
        let clamped = clamped_move + self.state.clamp_to_domain();

        self.reindex();
        recover_velocities(&mut self.state, &self.pairs, &self.bc);

        self.step += 1;
        let time = self.time();
        let phi_min = self.state.particles.iter().map(|p| p.phi).fold(f64::INFINITY, f64::min);
        let kinetic_energy = kinetic_energy(&self.state);
        let steadiness = self.monitor.record(SteadySample::from_particles(
            time,
            &self.state,
            &self.grid,
            &self.kernel,
        ));

        if let Some(i) = self
            .state
            .particles
            .iter()
            .position(|p| !p.omega.is_finite() || !p.phi.is_finite())
        {
            return Err(Error::NonFinite {
                quantity: "state",
                particle: i,
            });
        }

        Ok(StepReport {
            step: self.step,
            time,
            omega_rate,
            substeps,
            poisson_iterations: stats.iterations,
            poisson_residual: stats.residual,
            clamped,
            max_shift,
            kinetic_energy,
            phi_min,
            starved,
            steadiness,
        })
    }

    /// Steps until the steadiness measure drops below `steady_tol` or
    /// `t_end` is reached.
    pub fn run(&mut self, observer: &mut impl RunObserver) -> Result<RunSummary> {
        let max_steps = (self.cfg.t_end / self.cfg.dt).round() as usize;
        let mut termination = Termination::NotSteady;
        let mut max_iters = 0;
        let mut total_clamped = 0;
        while self.step < max_steps {
            let report = self.step()?;
            max_iters = max_iters.max(report.poisson_iterations);
            total_clamped += report.clamped;
            observer
                .on_step(&report, &self.state, &self.cfg)
                .map_err(|e| e.at_step(report.step))?;
            if report.steadiness.is_some_and(|s| s < self.cfg.steady_tol) {
                termination = Termination::Steady;
                break;
            }
        }
        let summary = RunSummary {
            steps: self.step,
            time: self.time(),
            termination,
            phi_min: self.state.particles.iter().map(|p| p.phi).fold(f64::INFINITY, f64::min),
            max_poisson_iterations: max_iters,
            total_clamped,
        };
        observer.on_finish(&summary, &self.state, &self.cfg)?;
        Ok(summary)
    }
}
