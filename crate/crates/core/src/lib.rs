//! Numerical free probability for heavy-tailed measures on `[0, inf)`.
//!
//! Cauchy and Voiculescu transforms with their Laurent remainders, free
//! additive convolution by subordination, free max-convolution, and
//! regular-variation diagnostics, plus an experiment harness.

pub mod error;
pub mod freeconv;
pub mod harness;
pub mod measures;
pub mod quad;
pub mod regvar;
pub mod series;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
