//! Numerical resonance reduction, resonant normal forms and Arnold
//! diffusion experiments for nearly integrable two-degree-of-freedom
//! Hamiltonians `H(θ, I) = h(I) + ε f(θ, I)` on `𝕋² × B_R`.

pub mod averaging;
pub mod catalog;
pub mod diffusion;
pub mod error;
pub mod flow;
pub mod lattice;
pub mod phase;
pub mod schema;

pub use error::{Error, Result};
