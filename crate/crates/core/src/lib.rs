//! Spectral laboratory for the cubic nonlinear Schrödinger and complex mKdV
//! equations on dilated tori `T_λ = R/(2πλZ)`.
//!
//! Fields are stored by their Fourier coefficients on the truncated dual
//! lattice `Z_λ = λ⁻¹Z`, normalised so that
//!
//! ```text
//! û(ξ) = (2π)^{-1/2} ∫ f(x) e^{-ixξ} dx,    f(x) = (2π)^{-1/2} λ^{-1} Σ_ξ û(ξ) e^{ixξ}.
//! ```
//!
//! With that normalisation Plancherel reads `‖f‖_{L²} = ‖û‖_{L²(Z_λ, λ⁻¹·count)}`
//! and every formula below holds without hidden constants.
//!
//! Module map:
//! - [`lattice`]: lattices, fields, transforms, test data.
//! - [`spaces`]: Sobolev, Fourier–Lebesgue, modulation and modulated Sobolev norms.
//! - [`symmetry`]: scaling, Galilean boosts, modulation, gauge.
//! - [`flow`]: integrators and residuals for the five evolution equations.
//! - [`determinant`]: kernel operators and the trace series `α(κ; u)`.
//! - [`harness`]: modulated families, scaling reduction, growth certificates, CLI.

pub mod determinant;
pub mod error;
pub mod exec;
pub mod flow;
pub mod harness;
pub mod io;
pub mod lattice;
pub mod spaces;
pub mod special;
pub mod symmetry;

pub use error::{Error, Result};
pub use lattice::{FrequencyLattice, SpectralField};

pub use num_complex::Complex64;
