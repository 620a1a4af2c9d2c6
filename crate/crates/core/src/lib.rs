//! Stream-function/vorticity SPH solver for two-dimensional incompressible
//! flow in a lid-driven square cavity.
//!
//! The vorticity is carried by Lagrangian particles and diffused with an SPH
//! Laplacian; the stream function follows from an SPH Poisson problem and
//! moves the particles through its rotated gradient. Vorticity on the walls
//! is reconstructed from the stream function and the wall velocity. A
//! grid-based finite-difference solver of the same equations serves as a
//! reference, and the `postprocess` module turns particle dumps into contour
//! plots.

pub mod config;
pub mod error;
pub mod fd;
pub mod kernel;
pub mod neighbors;
pub mod operators;
pub mod output;
pub mod particles;
pub mod poisson;
pub mod postprocess;
pub mod solver;
pub mod steady;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::KernelSpec;
pub use neighbors::NeighborGrid;
pub use operators::{PairList, PairTerm};
pub use particles::{CornerPolicy, Particle, ParticleKind, ParticleSet, Vec2};
