//! Dense complex Hermitian linear algebra, mixed characteristic polynomials,
//! derandomized interlacing selectors, finite frame machinery, iterated binary
//! selector trees, frame-operator sampling, and exponential systems on finite
//! unions of intervals.
//!
//! Everything in this crate is a pure function of immutable inputs. All
//! floating-point tolerances live in [`tol`]. Randomized existence proofs are
//! realized constructively: each selection routine returns a certificate whose
//! achieved bound is recomputed from the selected objects, never trusted from
//! intermediate state.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod binsel;
pub mod discretize;
pub mod error;
pub mod expsys;
pub mod frames;
pub mod gen;
pub mod linalg;
pub mod mcp;
pub mod selector;
pub mod tol;

pub use error::CoreError;
pub use nalgebra::Complex;

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
