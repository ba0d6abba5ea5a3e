//! Periodic next-nearest-neighbour embedded-atom chain and its quasicontinuum
//! approximations.
//!
//! The crate models a 2N-periodic chain with reference spacing `ε = 1/N`
//! under three energies:
//!
//! * [`Model::Atomistic`]: exact nearest and next-nearest neighbour EAM
//!   interactions at every atom;
//! * [`Model::Qnl`]: atomistic core `|ℓ| ≤ K`, two quasi-nonlocal transition
//!   atoms per side, Cauchy–Born elsewhere (ghost-force free);
//! * [`Model::Qcl`]: Cauchy–Born at every atom.
//!
//! On top of the energies it provides the stability analysis at a uniform
//! strain `F` (closed-form coefficients, the Fourier eigenvalue cubic and
//! dense numerical eigensolves in the `‖Du‖` metric), critical-strain
//! bisection, and linearized equilibrium solves with consistency-error
//! negative norms for convergence studies.
//!
//! ```
//! use eamqc::{lattice::ChainGrid, models::{Model, RegionDecomposition}, potentials, stability};
//!
//! let p = potentials::default_potential();
//! let grid = ChainGrid::new(16).unwrap();
//! let region = RegionDecomposition::new(grid, 4).unwrap();
//! let coeffs = stability::coefficients(&p, 1.0).unwrap();
//! let (lambda, _mode) = stability::min_eig_numeric(&Model::Qnl(region), &p, 1.0).unwrap();
//! assert!((lambda - coeffs.a).abs() < 1e-9 * coeffs.a);
//! ```

// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod kv;
pub mod lattice;
pub mod models;
pub mod potentials;
pub mod solver;
pub mod stability;
pub mod validation;

pub use error::{Error, Result};
pub use lattice::{ChainGrid, FieldKind, PeriodicField};
pub use models::{Deformation, Model, ModelKind, RegionDecomposition, SymmetricBandedOperator};
pub use potentials::EamPotential;
