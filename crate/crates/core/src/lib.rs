//! Grasp force estimation from fingernail images.
//!
//! The crate covers the full chain: a synthetic nail and grasp simulator
//! ([`synth`]), appearance-model registration ([`registration`]),
//! eigen-image force regression ([`eigennail`]), finger segmentation in
//! camera frames ([`segmentation`]), eye-in-hand visual servoing
//! ([`servo`]) and grasp statistics ([`analysis`]). [`pipeline`] ties them
//! together behind the `nailforce` binary.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod eigennail;
pub mod error;
pub mod force;
pub mod imaging;
pub mod pipeline;
pub mod pca;
pub mod records;
pub mod registration;
pub mod segmentation;
pub mod servo;
pub mod synth;

pub use error::{Error, Result};
