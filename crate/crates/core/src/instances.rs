//! Reference instances: a five-site, four-topic world with `eps = 0.01` and
//! `kappa = 2.5`.

use crate::model::{CostSeriesPolicy, InterestProfile, ModelSpec};

pub const EPSILON: f64 = 0.01;
pub const KAPPA: f64 = 2.5;

/// Session length over which the reference net-revenue figures count cost;
/// pass to [`CostSeriesPolicy::horizon`] to reproduce them.
pub const REPORTED_HORIZON: u64 = 30;

pub fn reported_policy() -> CostSeriesPolicy {
    CostSeriesPolicy::horizon(REPORTED_HORIZON)
}

pub fn publishing_matrix() -> Vec<Vec<f64>> {
    vec![
        vec![0.25, 0.25, 0.25, 0.25],
        vec![0.25, 0.25, 0.25, 0.25],
        vec![0.10, 0.40, 0.45, 0.05],
        vec![0.10, 0.05, 0.15, 0.70],
        vec![0.65, 0.10, 0.20, 0.05],
    ]
}

/// Revenues favouring site 4, which mostly covers topic 4.
pub const REWARDS_SITE4: [f64; 5] = [150.0, 125.0, 150.0, 400.0, 100.0];
/// Revenues favouring site 1, which covers every topic equally.
pub const REWARDS_SITE1: [f64; 5] = [400.0, 125.0, 150.0, 150.0, 100.0];

pub const THETA_TOPIC4: [f64; 4] = [0.03, 0.05, 0.02, 0.9];
pub const THETA_MIXED: [f64; 4] = [0.1, 0.05, 0.25, 0.6];
pub const THETA_TOPIC1: [f64; 4] = [0.9, 0.05, 0.02, 0.03];

pub fn model(rewards: &[f64]) -> ModelSpec {
    ModelSpec::new(publishing_matrix(), rewards.to_vec(), KAPPA, EPSILON).expect("reference model is valid")
}

pub fn interest(theta: &[f64]) -> InterestProfile {
    InterestProfile::new(theta.to_vec()).expect("reference interest profile is valid")
}
