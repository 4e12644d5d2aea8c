//! Finite-element discretization and stability analysis of the linear
//! magneto-elastostatic saddle point problem.
//!
//! The coupled unknowns are the displacement `u` (vector Lagrange space) and
//! the magnetic scalar potential `psi` (scalar Lagrange space of the same
//! degree on the same mesh). The discrete system has the block form
//!
//! ```text
//! [ A    C ] [ u   ]   [ l ]
//! [ C^T -B ] [ psi ] = [ m ]
//! ```
//!
//! where `A` is the elastic stiffness, `B` the magnetic permeability form and
//! `C` the (half-weighted) magneto-elastic coupling. Besides assembling and
//! solving this system, the crate estimates the stability constants that
//! govern its well-posedness: coercivity of `A` and `B`, a Korn-type
//! constant, and the discrete inf-sup constant of the coupling.

pub mod analysis;
pub mod assembly;
pub mod cli;
mod error;
mod report;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod verification;

pub use error::{Error, Result};
pub use report::{CheckResult, ValidationReport};
