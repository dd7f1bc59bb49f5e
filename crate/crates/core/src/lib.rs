//! Exact arithmetic and diffraction computations for binary Pisot
//! substitution tilings of the line.
//!
//! Tile endpoints live in `Z[θ]` and are manipulated exactly
//! ([`quadfield`]); real quantities are evaluated with MPFR at a chosen
//! precision.

pub mod amplitude;
pub mod complex;
pub mod error;
mod expsum;
pub mod geometry;
pub mod modelset;
pub mod orbits;
pub mod quadfield;
pub mod substitution;
pub mod wavenumber;

pub use complex::BigComplex;
pub use error::{Error, Result};
pub use quadfield::{Embedding, Precision, QuadElem, RingParams};
pub use substitution::{BinaryPisotRule, Letter, RnmsRule, RuleSpec, Word};
pub use wavenumber::WaveNumber;
