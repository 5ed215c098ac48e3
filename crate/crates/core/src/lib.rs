//! Exact nonlocal multi-soliton solutions of the extended continuous
//! Heisenberg equation built by iterated Darboux transformations, their images
//! under the gauge maps to the nonlocal Hirota equation and to the extended
//! Landau-Lifschitz equations, and finite-difference residual checks for all
//! of them.

pub mod darboux;
pub mod error;
pub mod heisenberg;
pub mod hirota;
pub mod landau;
pub mod numerics;
pub mod residual;
pub mod spectral;

pub use error::{Error, Result};
pub use numerics::{Complex, Mat2, MatN, StencilSpec};
pub use spectral::SolitonConfig;
