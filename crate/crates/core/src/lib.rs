//! Two-species Boltzmann collision operators for gas mixtures with unequal
//! masses and soft potentials.
//!
//! The crate covers exact collision kinematics, bi-Maxwellian equilibria and
//! the hydrodynamic projection, quadrature of the nonlinear operator, the
//! linearized operator `L = nu + K` with its kernel decompositions and
//! coercivity estimate, and a small phase-space solver with monitors.

pub mod error;
pub mod vec3;
pub mod kinematics;
pub mod vgrid;
pub mod equilibrium;
pub mod sphere;
pub mod interp;
pub mod quadrature;
pub mod collision;
pub mod linop;
pub mod solver;
pub mod config;
pub mod io;
pub mod cli;
pub mod selftest;
pub mod parallel;

pub use error::{Error, Result};
