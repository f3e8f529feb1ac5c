//! Spherical-harmonics gravity fields of small bodies with arbitrary,
//! possibly discontinuous, interior density.
//!
//! The pipeline decomposes a closed shape model into origin-anchored
//! tetrahedra, maps each onto the standard simplex, slices the simplex into
//! slabs of constant sampled density and integrates the solid-harmonic shape
//! functions over every slab in closed form (beta / incomplete-beta
//! integrals). The resulting [`shcoeff::SHModel`] feeds the field evaluator,
//! the mascon comparison, and the trajectory propagator.

pub mod cli;
pub mod density;
pub mod field;
pub mod legendre;
pub mod mascon;
pub mod mesh;
pub mod oracle;
pub mod propagate;
pub mod shcoeff;
pub mod sum;
pub mod trinomial;

/// CODATA 2018 Newtonian constant of gravitation, m^3 kg^-1 s^-2.
pub const G_CODATA_2018: f64 = 6.674_30e-11;

/// One milligal in m/s^2.
pub const MGAL: f64 = 1e-5;
