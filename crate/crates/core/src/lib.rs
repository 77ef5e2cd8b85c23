//! Adversarial validation for covariate drift between a training table and a
//! test table.
//!
//! A classifier is trained to tell train rows from test rows. Its propensity
//! scores drive four workflows:
//!
//! * [`adversarial::detect_drift`] for a drift verdict,
//! * [`methods::auto_feature_selection`] to drop drifting features,
//! * [`methods::psm_validation_select`] to pick a test-like validation split,
//! * [`methods::ipw_weights`] to reweight training rows.
//!
//! [`report`] wraps them into reproducible, serializable runs.

pub mod adversarial;
pub mod data;
pub mod error;
pub mod methods;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod synthgen;
pub mod trees;

pub use error::{Error, Result};
