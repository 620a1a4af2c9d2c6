//! Fast self-checks of the discretization: kernel normalization, operator
//! consistency, manufactured Poisson and wall-vorticity problems, the
//! resting-lid fixed point and the contour extraction.

use std::f64::consts::PI;

use crate::error::Result;
use crate::fd::{fd_run, FdConfig};
use crate::kernel::KernelSpec;
use crate::neighbors::NeighborGrid;
use crate::operators::{sph_gradient, sph_laplacian, PairList};
use crate::particles::{Particle, ParticleSet, Vec2};
use crate::poisson;
use crate::postprocess::{marching_squares, GridField, Level};
use crate::solver::{assign_boundary_vorticity, SolverConfig, Simulation};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition.
    pub limit: String,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("<= {limit:e}"),
            passed: value <= limit,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!(">= {limit:e}"),
            passed: value >= limit,
        }
    }

    fn exact(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: "== 0".into(),
            passed: value == 0.0,
        }
    }
}

/// Pass/fail table, one check per line.
pub fn format_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| {
            format!(
                "{}  {:width$}  {:>12.5e}  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.limit
            )
        })
        .collect()
}

struct Lattice {
    ps: ParticleSet,
    pairs: PairList,
    kernel: KernelSpec,
}

fn lattice(spacing: f64) -> Result<Lattice> {
    let ps = ParticleSet::init_lattice(1.0, spacing)?;
    let kernel = KernelSpec::from_spacing(spacing, 2.1);
    let grid = NeighborGrid::build(&ps.positions(), 1.0, kernel.h);
    let pairs = PairList::build(&ps, &grid, &kernel);
    Ok(Lattice { ps, pairs, kernel })
}

impl Lattice {
    /// Particles whose kernel support lies inside the cavity.
    fn bulk(&self) -> impl Iterator<Item = usize> + '_ {
        let h = self.kernel.h;
        (0..self.ps.len()).filter(move |&i| {
            let q = self.ps.particles[i].position;
            q.x >= h && q.y >= h && q.x <= 1.0 - h && q.y <= 1.0 - h
        })
    }

    fn field(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.ps.particles.iter().map(|p| f(p.position.x, p.position.y)).collect()
    }
}

/// Midpoint rule in polar coordinates over the kernel support.
pub fn kernel_integral(k: &KernelSpec) -> f64 {
    let (nr, ntheta) = (20_000, 8);
    let dr = k.h / nr as f64;
    let dtheta = 2.0 * PI / ntheta as f64;
    let mut total = 0.0;
    for a in 0..ntheta {
        let theta = (a as f64 + 0.5) * dtheta;
        for b in 0..nr {
            let r = (b as f64 + 0.5) * dr;
            total += k.value((r * theta.cos()).hypot(r * theta.sin())) * r * dr * dtheta;
        }
    }
    total
}

pub fn kernel_checks() -> Vec<Check> {
    let mut checks: Vec<Check> = [0.01, 0.021, 0.042, 1.0]
        .into_iter()
        .map(|h| Check::at_most(format!("kernel |integral - 1|, h = {h}"), (kernel_integral(&KernelSpec::new(h)) - 1.0).abs(), 1e-6))
        .collect();
    // the two spline branches written out independently, compared at q = 1/2
    let inner = |q: f64| 1.0 - 6.0 * q * q + 6.0 * q * q * q;
    let outer = |q: f64| 2.0 * (1.0 - q).powi(3);
    let k = KernelSpec::new(1.0);
    let jump = (inner(0.5) - outer(0.5)).abs() + (k.value(0.5) / k.beta - outer(0.5)).abs();
    checks.push(Check::exact("kernel branch mismatch at q = 1/2", jump));
    checks
}

/// Largest errors of the SPH operators on polynomial fields at bulk particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorErrors {
    pub gradient_of_constant: f64,
    pub laplacian_of_constant: f64,
    /// `max |grad f - (3, 2)| / |(3, 2)|` for `f = 3x + 2y`.
    pub gradient_of_linear: f64,
    /// `max |lap f - 4| / 4` for `f = x^2 + y^2`.
    pub laplacian_of_quadratic: f64,
}

pub fn operator_errors(spacing: f64) -> Result<OperatorErrors> {
    let lat = lattice(spacing)?;
    let c = vec![0.75; lat.ps.len()];
    let lin = lat.field(|x, y| 3.0 * x + 2.0 * y);
    let quad = lat.field(|x, y| x * x + y * y);
    let exact = Vec2::new(3.0, 2.0);
    let mut e = OperatorErrors {
        gradient_of_constant: 0.0,
        laplacian_of_constant: 0.0,
        gradient_of_linear: 0.0,
        laplacian_of_quadratic: 0.0,
    };
    // constants are checked at every particle, including truncated supports
    for i in 0..lat.ps.len() {
        let pairs = lat.pairs.of(i);
        e.gradient_of_constant = e.gradient_of_constant.max(sph_gradient(&c, i, pairs, &lat.ps).norm());
        e.laplacian_of_constant = e.laplacian_of_constant.max(sph_laplacian(&c, i, pairs, &lat.ps).abs());
    }
    for i in lat.bulk() {
        let pairs = lat.pairs.of(i);
        let g = sph_gradient(&lin, i, pairs, &lat.ps);
        e.gradient_of_linear = e.gradient_of_linear.max((g - exact).norm() / exact.norm());
        let l = sph_laplacian(&quad, i, pairs, &lat.ps);
        e.laplacian_of_quadratic = e.laplacian_of_quadratic.max((l - 4.0).abs() / 4.0);
    }
    Ok(e)
}

/// Relative L2 error and relative residual of the Poisson solve for
/// `omega = 2 pi^2 sin(pi x) sin(pi y)`, `phi = 0` on the walls.
pub fn poisson_manufactured(spacing: f64) -> Result<(f64, f64)> {
    let lat = lattice(spacing)?;
    let omega = lat.field(|x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
    let zero = vec![0.0; lat.ps.len()];
    let sys = poisson::assemble(&lat.ps, &lat.pairs, &omega, &zero)?;
    let mut x = vec![0.0; sys.n];
    poisson::solve(&sys, &mut x, 1e-8, 10 * sys.n)?;
    let bnorm = sys.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual = sys.residual_norm(&x) / bnorm;
    let (mut err, mut reference) = (0.0, 0.0);
    for (row, &i) in sys.particle_of.iter().enumerate() {
        let p = lat.ps.particles[i].position;
        let exact = (PI * p.x).sin() * (PI * p.y).sin();
        err += (x[row] - exact).powi(2);
        reference += exact * exact;
    }
    Ok(((err / reference).sqrt(), residual))
}

/// Largest wall-vorticity error over all boundary particles for
/// `phi = cos(pi x) cos(pi y)` with its exact wall velocity, relative to
/// the peak vorticity `2 pi^2`.
pub fn wall_vorticity_error(spacing: f64) -> Result<f64> {
    let mut lat = lattice(spacing)?;
    for p in lat.ps.particles.iter_mut() {
        p.phi = (PI * p.position.x).cos() * (PI * p.position.y).cos();
    }
    let wall = |p: &Particle| {
        let (x, y) = (p.position.x, p.position.y);
        Vec2::new(-PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos())
    };
    assign_boundary_vorticity(&mut lat.ps, &lat.pairs, &wall)?;
    let peak = 2.0 * PI * PI;
    Ok(lat
        .ps
        .particles
        .iter()
        .filter(|p| p.is_boundary())
        .map(|p| (p.omega - peak * (PI * p.position.x).cos() * (PI * p.position.y).cos()).abs() / peak)
        .fold(0.0, f64::max))
}

/// Runs `steps` steps of both solvers with the lid at rest and reports
/// whether every state stayed bitwise zero.
pub fn resting_lid(steps: usize, spacing: f64) -> Result<(bool, bool)> {
    let cfg = SolverConfig {
        lid_speed: 0.0,
        spacing,
        steady_tol: 0.0,
        ..SolverConfig::default()
    };
    let mut sim = Simulation::new(cfg)?;
    let initial = sim.state.clone();
    let mut sph = true;
    for _ in 0..steps {
        sim.step()?;
        sph &= sim.state == initial;
    }
    let fd_cfg = FdConfig {
        n: 33,
        lid_speed: 0.0,
        steady_tol: 0.0,
        t_end: steps as f64 * 1e-3,
        dt: 1e-3,
        ..FdConfig::default()
    };
    let mut fd = true;
    fd_run(&fd_cfg, |_, gs| {
        fd &= gs.psi.iter().chain(&gs.omega).all(|v| v.to_bits() == 0);
        Ok(())
    })?;
    Ok((sph, fd))
}

/// Largest distance of the `f = x` contour at 1/2 from the line `x = 1/2`.
pub fn linear_contour_error() -> f64 {
    let gf = GridField::from_fn(41, 1.0, |x, _| x);
    let cs = marching_squares(&gf, &[Level::new(0.5, "")]);
    let lines = &cs.contours[0].polylines;
    if lines.len() != 1 {
        return f64::INFINITY;
    }
    lines[0].iter().map(|p| (p.x - 0.5).abs()).fold(0.0, f64::max)
}

/// Relative arc-length error of the radius-0.2 circle contour at `n = 201`.
pub fn circle_contour_error() -> f64 {
    let gf = GridField::from_fn(201, 1.0, |x, y| (x - 0.5).powi(2) + (y - 0.5).powi(2));
    let cs = marching_squares(&gf, &[Level::new(0.04, "")]);
    let exact = 2.0 * PI * 0.2;
    let length: f64 = cs.contours[0]
        .polylines
        .iter()
        .flat_map(|l| l.windows(2).map(|w| (w[1] - w[0]).norm()))
        .sum();
    (length - exact).abs() / exact
}

/// The gated self-check suite at `d0 = 1/50`.
pub fn suite() -> Result<Vec<Check>> {
    let mut checks = kernel_checks();
    let ops = operator_errors(0.02)?;
    checks.push(Check::exact("gradient of constant", ops.gradient_of_constant));
    checks.push(Check::exact("Laplacian of constant", ops.laplacian_of_constant));
    checks.push(Check::at_most("gradient of linear field, relative", ops.gradient_of_linear, 0.05));
    checks.push(Check::at_most("Laplacian of x^2 + y^2, relative", ops.laplacian_of_quadratic, 0.05));
    let (l2, residual) = poisson_manufactured(0.02)?;
    checks.push(Check::at_most("Poisson sine solution, relative L2", l2, 0.05));
    checks.push(Check::at_most("Poisson residual, relative", residual, 1e-8));
    let coarse = wall_vorticity_error(0.04)?;
    let fine = wall_vorticity_error(0.02)?;
    checks.push(Check::at_most("wall vorticity cos*cos, relative", fine, 0.1));
    checks.push(Check::at_least("wall vorticity error ratio, d0 1/25 -> 1/50", coarse / fine, 1.0 + 1e-9));
    let (sph, fd) = resting_lid(100, 0.05)?;
    checks.push(Check::exact("resting lid, particle state change", if sph { 0.0 } else { 1.0 }));
    checks.push(Check::exact("resting lid, grid state change", if fd { 0.0 } else { 1.0 }));
    checks.push(Check::at_most("contour of linear field, offset", linear_contour_error(), 4.0 * f64::EPSILON));
    checks.push(Check::at_most("circle contour arc length, relative", circle_contour_error(), 0.03));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let checks = suite().unwrap();
        let table = format_table(&checks);
        assert!(checks.iter().all(|c| c.passed), "{table}");
        assert_eq!(table.lines().count(), checks.len());
    }
}
