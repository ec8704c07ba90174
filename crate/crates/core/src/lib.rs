//! Numerical experiments on quantum completely integrable systems.
//!
//! The crate builds the classical and spectral objects attached to a few
//! integrable examples (surfaces of revolution, Liouville tori, the
//! triaxial ellipsoid and flat tori) and measures how eigenfunctions and
//! quasimodes concentrate.

pub mod dynamics;
pub mod fit;
pub mod geometry;
pub mod lattice;
pub mod momentmap;
pub mod ode;
pub mod quasimode;
pub mod spectral;
mod spline;
