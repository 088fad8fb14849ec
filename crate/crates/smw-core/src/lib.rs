//! Sherman-Morrison-Woodbury (SMW) inverse updates under approximate inversion.
//!
//! The SMW identity writes `(A + U·Vᵀ)⁻¹` as a rank-k correction to `A⁻¹`.
//! When `A⁻¹` and the capacitance matrix `I + Vᵀ·A⁻¹·U` are only inverted
//! approximately, the resulting forward and backward errors admit two-norm
//! bounds in terms of the injected error magnitudes ε₁ and ε₂. This crate
//! implements the approximate update itself, the full family of bound
//! evaluators with per-term breakdowns and assumption flags, engineered
//! matrix constructions that place the capacitance spectrum at prescribed
//! targets, and reproducible experiment sweeps that compare measured errors
//! against the bounds.

pub mod bounds;
pub mod construct;
mod error;
pub mod experiment;
pub mod linalg;
pub mod perturb;
pub mod smw;
pub mod verify;

pub use error::Error;
pub use linalg::{Matrix, SvdFactors};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
