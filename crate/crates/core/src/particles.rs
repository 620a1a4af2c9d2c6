//! Lagrangian particle state for the square cavity.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParticleKind {
    Interior,
    /// On the moving lid, `y = L`.
    BoundaryTop,
    /// On a stationary wall.
    BoundaryWall,
}

impl ParticleKind {
    pub fn is_boundary(self) -> bool {
        !matches!(self, ParticleKind::Interior)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParticleKind::Interior => "interior",
            ParticleKind::BoundaryTop => "top",
            ParticleKind::BoundaryWall => "wall",
        }
    }
}

impl fmt::Display for ParticleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParticleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "interior" => Ok(ParticleKind::Interior),
            "top" => Ok(ParticleKind::BoundaryTop),
            "wall" => Ok(ParticleKind::BoundaryWall),
            other => Err(format!("unknown particle kind `{other}`")),
        }
    }
}

/// How the two lid corners `(0, L)` and `(L, L)` are classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CornerPolicy {
    /// Corners are no-slip wall particles.
    #[default]
    Wall,
    /// Corners carry the lid velocity.
    Lid,
}

impl fmt::Display for CornerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CornerPolicy::Wall => "wall",
            CornerPolicy::Lid => "lid",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec2,
    pub phi: f64,
    pub omega: f64,
    pub velocity: Vec2,
    /// m / rho, constant over a run.
    pub volume: f64,
    pub kind: ParticleKind,
}

impl Particle {
    pub fn is_boundary(&self) -> bool {
        self.kind.is_boundary()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Cavity side length.
    pub side: f64,
    /// Initial lattice spacing.
    pub spacing: f64,
}

impl ParticleSet {
    /// Uniform lattice of spacing `spacing` covering `[0, side]^2`, boundary
    /// nodes included, at rest.
    pub fn init_lattice(side: f64, spacing: f64) -> Result<Self> {
        Self::init_lattice_with(side, spacing, CornerPolicy::Wall)
    }

    pub fn init_lattice_with(side: f64, spacing: f64, corners: CornerPolicy) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::Config(format!("cavity side must be positive, got {side}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config(format!(
                "particle spacing must be positive, got {spacing}"
            )));
        }
        let cells = cells_per_side(side, spacing)?;
        let volume = spacing * spacing;
        let mut particles = Vec::with_capacity((cells + 1) * (cells + 1));
        for j in 0..=cells {
            for i in 0..=cells {
                let x = side * i as f64 / cells as f64;
                let y = side * j as f64 / cells as f64;
                let on_top = j == cells;
                let on_side = i == 0 || i == cells;
                let kind = if on_top && (!on_side || corners == CornerPolicy::Lid) {
                    ParticleKind::BoundaryTop
                } else if on_top || on_side || j == 0 {
                    ParticleKind::BoundaryWall
                } else {
                    ParticleKind::Interior
                };
                particles.push(Particle {
                    position: Vec2::new(x, y),
                    phi: 0.0,
                    omega: 0.0,
                    velocity: Vec2::zeros(),
                    volume,
                    kind,
                });
            }
        }
        Ok(Self {
            particles,
            side,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.particles.iter().map(|p| p.position).collect()
    }

    pub fn phi(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.phi).collect()
    }

    pub fn omega(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.omega).collect()
    }

    pub fn interior_count(&self) -> usize {
        self.particles.iter().filter(|p| !p.is_boundary()).count()
    }

    /// Minimum distance interior particles keep from the walls: half the
    /// initial spacing, so no interior particle can sit on a wall line
    /// between two boundary particles.
    pub fn clamp_margin(&self) -> f64 {
        0.5 * self.spacing
    }

    /// Projects interior particles that left the open square back inside.
    /// Returns how many particles were moved.
    pub fn clamp_to_domain(&mut self) -> usize {
        let eps = self.clamp_margin();
        let (lo, hi) = (eps, self.side - eps);
        let mut clamped = 0;
        for p in self.particles.iter_mut().filter(|p| !p.is_boundary()) {
            let before = p.position;
            p.position.x = p.position.x.clamp(lo, hi);
            p.position.y = p.position.y.clamp(lo, hi);
            if p.position != before {
                clamped += 1;
            }
        }
        clamped
    }

    /// Writes `x,y,phi,omega,u,v,kind`, one particle per line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "x,y,phi,omega,u,v,kind")?;
            for p in &self.particles {
                writeln!(
                    out,
                    "{:e},{:e},{:e},{:e},{:e},{:e},{}",
                    p.position.x, p.position.y, p.phi, p.omega, p.velocity.x, p.velocity.y, p.kind
                )?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    /// Reads a dump written by [`ParticleSet::write_csv`]. Volumes are set to
    /// `spacing^2`.
    pub fn read_csv(path: &Path, side: f64, spacing: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut particles = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if n == 0 || line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(parse_err(n + 1, format!("expected 7 columns, found {}", cols.len())));
            }
            let mut nums = [0.0; 6];
            for (slot, col) in nums.iter_mut().zip(&cols[..6]) {
                *slot = col
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(n + 1, format!("`{col}`: {e}")))?;
            }
            let kind = cols[6].trim().parse().map_err(|e| parse_err(n + 1, e))?;
            particles.push(Particle {
                position: Vec2::new(nums[0], nums[1]),
                phi: nums[2],
                omega: nums[3],
                velocity: Vec2::new(nums[4], nums[5]),
                volume: spacing * spacing,
                kind,
            });
        }
        Ok(Self {
            particles,
            side,
            spacing,
        })
    }
}

fn cells_per_side(side: f64, spacing: f64) -> Result<usize> {
    let ratio = side / spacing;
    let cells = ratio.round();
    if cells < 1.0 || (ratio - cells).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Config(format!(
            "side / spacing = {ratio} is not a positive integer"
        )));
    }
    Ok(cells as usize)
}
