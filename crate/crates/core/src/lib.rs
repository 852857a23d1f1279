//! Numerical laboratory for the smallest eigenvalues of the lattice
//! Anderson Hamiltonian `-Laplacian + xi` with (renormalised) white-noise
//! potential in dimensions 1, 2 and 3.
//!
//! The crate provides:
//!
//! * lattice grids with Dirichlet boundary and coupled white-noise sampling
//!   ([`lattice`]);
//! * renormalisation constants built from lattice Green's functions
//!   ([`renorm`]);
//! * matrix-free assembly of the operator and a Lanczos smallest-eigenpair
//!   solver with eigenvalue gradients ([`hamiltonian`], [`eigensolver`]);
//! * the radial ground state of `-Lap Q - Q^3 = -Q` and the derived
//!   Gagliardo-Nirenberg constants ([`groundstate`]);
//! * the large-deviations rate function by constrained optimisation
//!   ([`ratefn`]);
//! * the partition-of-unity sub-box eigenvalue bounds ([`subbox`]);
//! * Monte Carlo experiment harnesses ([`experiments`]).

// Indexed loops over the first d axes of fixed [_; 3] arrays, and
// NaN-rejecting `!(x > 0)` validations, are deliberate.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dim;
pub mod eigensolver;
pub mod error;
pub mod experiments;
pub mod groundstate;
pub mod hamiltonian;
pub mod lattice;
pub mod ratefn;
pub mod renorm;
pub mod stats;
pub mod subbox;

mod quad;
mod special;
mod tridiag;

pub use dim::Dim;
pub use error::{CoreError, Result};
pub use lattice::{LatticeGrid, MollifierSpec, PotentialField};
