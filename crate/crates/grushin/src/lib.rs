//! Numerics for a degenerate elliptic operator of Baouendi-Grushin type on
//! R^N x R: gauge geometry, the spherical-harmonic eigenstructure of its
//! angular part, Mellin-side multiplier and kernel bounds, Carleman-inequality
//! verification, a degenerate spectral solver, vanishing-order diagnostics,
//! a Heisenberg-group bridge, and a library of critical potentials.

pub mod carleman;
pub mod error;
pub mod gauge;
pub mod mellin;
pub mod quad;
pub mod special;
pub mod spectral;
pub mod sphere;

pub use error::{GrushinError, Result};
