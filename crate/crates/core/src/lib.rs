//! Error- and representation-alignment metrics between classification systems.
//!
//! Behavioural metrics compare where two systems go wrong: error consistency
//! ([`kappa::error_consistency`]), misclassification agreement
//! ([`kappa::misclassification_agreement`]) and class-level error similarity
//! ([`divergence::cles`]). Representational metrics compare what they compute:
//! linear CKA ([`representation::linear_cka`]) and the similarity of output
//! confidences ([`divergence::soc`]). [`analysis`] scores many pairs and runs
//! rank-correlation and z-score analyses over the results; [`synth`] generates
//! controlled two-system scenarios; [`io`] and [`cli`] handle files.

pub mod analysis;
pub mod cli;
pub mod divergence;
pub mod domain;
pub mod error;
pub mod io;
pub mod kappa;
pub mod numeric;
pub mod representation;
pub mod synth;

pub use error::{AlignError, Result};
