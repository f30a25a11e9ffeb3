//! Entropy bookkeeping for classical and quantum spin echoes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod echo;
pub mod entropy;
pub mod error;
pub mod lindblad;
pub mod mat2;
pub mod presets;
pub mod spin;
pub mod validate;

pub use error::{Error, Result};
