//! Recommendation strategies learned while the recommendations reshape the
//! user's interests.
//!
//! * [`model`]: acceptance probabilities, expected reward and cost, gradients.
//! * [`optimize`]: floored-simplex projection and the static solver.
//! * [`simulate`]: the stochastic session engine.
//! * [`learn`]: the online projected stochastic-gradient learner.
//! * [`influence`]: interest drift under Type-A/Type-B influence and the
//!   coupled learner-user dynamics.
//! * [`check`]: numerical self-checks shared by the CLI and the tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod error;
pub mod influence;
pub mod instances;
pub mod learn;
pub mod model;
pub mod optimize;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{CostSeriesPolicy, InterestProfile, ModelSpec, Strategy};
pub use simulate::{RngStream, SessionOutcome};
