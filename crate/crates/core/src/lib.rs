//! Exact construction and analysis of the Reshetikhin–Turaev SO(3) operator
//! attached to a (p,q)-cable space.
//!
//! The operator acts on the torus space spanned by the orthonormal basis
//! `e_1, …, e_m` (level `r = 2m + 1`). Every matrix entry it produces is an
//! integer combination of powers of a primitive `4r`-th root of unity `ζ`
//! with `ζ² = A`, so all structural statements are checked exactly in the
//! group ring `Z[ζ]/(ζ^{4r} − 1)`. Numerical quantities (determinants,
//! operator norms, inverses, growth fits) are obtained by evaluating at
//! `ζ = exp(iπ/(2r))`.
//!
//! Module map:
//!
//! - [`cyclotomic`]: signed monomials, group-ring elements, complex evaluation.
//! - [`skein`]: index reduction on the extended torus basis and the `f_l` vectors.
//! - [`cabling`]: the cabling formula, the `f̃`-expansion, the change-of-basis
//!   matrix `R_m`, and the diagonal–triangular–diagonal factorization with its inverse.
//! - [`structure`]: sparsity predicates, special indices, determinant by
//!   cofactor elimination and singularity certificates.
//! - [`analysis`]: dense numeric oracles, power-iteration norms, sweeps and fits.
//! - [`cli`]: command-line front end and report formats.

pub mod analysis;
pub mod cabling;
pub mod cli;
pub mod cyclotomic;
mod error;
pub mod skein;
pub mod structure;

pub use cabling::CableParams;
pub use cyclotomic::{CycElem, Monomial, RootSystem};
pub use error::{Error, Result};
pub use skein::{ReducedIndex, SkeinVector};
