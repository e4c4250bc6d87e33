//! Numerical laboratory for discrete one-dimensional Schrödinger operators
//!
//! ```text
//! (Hψ)(n) = ψ(n−1) + ψ(n+1) + V(n)ψ(n)
//! ```
//!
//! on the half-line (Dirichlet at 0) or on the whole line.
//!
//! - [`potentials`]: substitution, Sturmian, prime, sparse, hierarchical and
//!   explicit potentials, plus the block-structure conditions S1–S4.
//! - [`transfer`]: 2×2 transfer cocycles, norm-growth profiles, power-law fits
//!   and the degenerate-gap monodromy energies.
//! - [`cfrac`]: continued fractions, convergents and bounded density.
//! - [`tracemap`]: the hierarchical trace map, its gap edges and the
//!   asymptotic profile `f_R`.
//! - [`dynamics`]: finite-lattice eigendata, Abel-averaged probabilities,
//!   moments and transport exponents.
//! - [`perturb`]: power-decaying perturbations and Prüfer-type amplitude
//!   tracking.
//! - [`verify`]: invariant suites shared by the command line runner.

pub mod cfrac;
pub mod dynamics;
mod error;
pub mod perturb;
pub mod potentials;
pub mod tracemap;
pub mod transfer;
pub mod verify;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use potentials::{Geometry, PotentialSamples, PotentialSpec, Window};
pub use transfer::{Mat2, NormKind};
