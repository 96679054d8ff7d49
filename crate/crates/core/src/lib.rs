//! Variational solver and verification suite for superpositions of
//! fractional p-Laplacians.
//!
//! The operator under study is a superposition L_mu u of fractional
//! p-Laplacians (-Delta)_p^s u integrated against a (possibly signed)
//! spectral measure mu over pairs (s, p). The crate discretizes the
//! associated energies on uniform lattices, solves the linear-source
//! minimization and the nonlinear mountain-pass problems, and empirically
//! verifies the structural inequalities the theory rests on (reabsorption of
//! the negative part, growth conditions, Palais-Smale boundedness) together
//! with two ill-posedness examples.
//!
//! Module map:
//! - [`grid`]: lattice domains and discrete functions
//! - [`measure`]: signed spectral measures and hypothesis checks
//! - [`seminorm`]: Gagliardo / endpoint seminorms and empirical constants
//! - [`energy`]: energy functionals, weak residuals, growth conditions
//! - [`solver`]: descent and mountain-pass solvers, PS diagnostics
//! - [`analysis`]: reabsorption verification and the appendix examples
//! - [`probe`]: seeded probe families behind every empirical constant

pub mod analysis;
pub mod energy;
pub mod error;
pub mod grid;
pub mod measure;
pub mod probe;
pub mod seminorm;
pub mod solver;
pub mod special;

pub use error::{FracError, Result};
