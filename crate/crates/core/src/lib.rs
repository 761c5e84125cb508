//! Decay-length exponent spectra of block tridiagonal Hamiltonians with
//! twisted (non-Hermitian) boundary conditions.
//!
//! The core identity links the eigenvalues of `H(z^n)` with the eigenvalues
//! of the transfer matrix `T(eps)`. Averaging `log |det(eps - H)|` over the
//! phase of `z` gives a counting function whose kinks sit at the exponents,
//! which avoids ever forming the (overflowing) transfer product.

pub mod anderson;
pub mod blockmodel;
pub mod cyclic;
pub mod duality;
pub mod error;
pub mod linalg;
pub mod random;
pub mod spectral;
pub mod transfer;

pub use blockmodel::{BlockModel, BoundaryFactor, DenseSpectrum, SpectrumSource};
pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use num_complex::Complex64;
