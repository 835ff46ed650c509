//! High-frequency scattering by a polyhedron that geometrical-optics rays
//! pass through undisturbed.
//!
//! The obstacle is two mirrored triangular prisms whose inner faces bounce
//! every incident ray twice and send it on in its original direction, only
//! delayed by a constant path length. This crate builds that obstacle,
//! traces rays through it, evaluates the eikonal and Kirchhoff
//! (physical-optics) fields, and computes far-field amplitudes and cross
//! sections so the invisibility effects can be checked numerically.
//!
//! Units: lengths are measured in the obstacle frame where the base width is
//! 1 by default; the incident plane wave is `exp(ikz)`.

pub mod cutoff;
pub mod error;
pub mod farfield;
pub mod geometry;
pub mod kirchhoff;
pub mod potentials;
pub mod quadrature;
pub mod rays;
pub mod sweep;

pub use error::{Result, ScatterError};
pub use geometry::{Obstacle, PolygonFace, Vec3};
pub use num_complex::Complex64;

/// Complex 3-vector, used for field gradients.
pub type CVec3 = nalgebra::Vector3<Complex64>;
