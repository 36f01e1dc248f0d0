//! Numerics for self-similar solutions of the Oberbeck–Boussinesq system with a
//! point gravity source, and the non-uniqueness construction built on them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixedpoint;
pub mod grid;
pub mod nonuniq;
mod integrate;
pub mod profiles;
pub mod selfsim;
pub mod semigroups;
pub mod spectra;

pub use error::{ObssError, Result};
