//! Numerical noncommutative geometry of the compact quantum group `SU_q(2)`.
//!
//! The crate realizes, on finite spin truncations, the Peter-Weyl GNS space
//! of the Haar state, the left action of the coordinate algebra, the naive
//! and true Dirac operators on `C^2 (x) h`, the modular operator, and the
//! heat-trace functionals that recover the Haar state.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod cli;
pub mod dirac;
pub mod error;
pub mod halfint;
pub mod oracle;
pub mod peterweyl;
pub mod qarith;
pub mod spectral;
pub mod summation;

pub use error::{Error, Result};
pub use halfint::HalfInteger;
