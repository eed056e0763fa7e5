//! Generalized Dirac operators on Lorentzian manifolds at the level of symbols.
//!
//! * [`geometry`]: metrics on coordinate charts, Christoffel symbols, orthonormal
//!   frames and the Hamiltonian flow of `q(x, ξ) = g^{ij} ξ_i ξ_j`.
//! * [`clifford`]: gamma matrices over the frame, the indefinite spinor product,
//!   `Q`-operators, the spin connection and an axiom certifier.
//! * [`symbols`]: principal and subprincipal symbols, the factorization
//!   `σ̃ σ_1 = q Id`, the matrix Poisson bracket and principal-type certificates.
//! * [`transport`]: polarization transport along null bicharacteristics by the
//!   Denker connection and by the pulled-back spin connection.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clifford;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod ode;
pub mod symbols;
pub mod transport;

pub use error::{Error, Result};
