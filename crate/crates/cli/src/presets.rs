//! Named reference experiments.

use recsim::influence::{CouplingMode, InfluenceKind, InfluenceSpec};
use recsim::instances::{
    publishing_matrix, reported_policy, EPSILON, KAPPA, REWARDS_SITE1, REWARDS_SITE4, THETA_MIXED, THETA_TOPIC1,
    THETA_TOPIC4,
};
use recsim::learn::StepSchedule;
use recsim::optimize::SolveConfig;

use crate::config::{ExperimentConfig, Mode, StartPoint};

pub const NAMES: &[&str] = &[
    "table1",
    "example2",
    "exH3",
    "exH4",
    "fig1",
    "fig2",
    "fig3",
    "appJ-typeA-slow",
    "appJ-typeB-slow",
    "appJ-typeA-fast",
    "appJ-typeB-fast",
];

const SESSIONS: u64 = 20_000;
const XI_TOPIC4: [f64; 4] = [0.03, 0.05, 0.02, 0.9];
const XI_MIXED: [f64; 4] = [0.1, 0.05, 0.25, 0.6];

fn base(name: &str, mode: Mode, rewards: &[f64]) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        mode,
        publishing: publishing_matrix(),
        rewards: rewards.to_vec(),
        kappa: KAPPA,
        epsilon: EPSILON,
        cost: reported_policy(),
        theta: None,
        solver: SolveConfig::default(),
        grid: None,
        refine: None,
        x0: StartPoint::Random,
        theta0: None,
        step: None,
        interest_step: None,
        coupling: CouplingMode::TwoTimescale,
        influence: None,
        reference: None,
        sessions: 0,
        seeds: vec![1],
        decimate: 1,
        out: None,
    }
}

fn static_preset(name: &str, rewards: &[f64], theta: &[f64]) -> ExperimentConfig {
    ExperimentConfig {
        theta: Some(theta.to_vec()),
        grid: Some(0.05),
        refine: Some(0.01),
        ..base(name, Mode::Static, rewards)
    }
}

fn coupled_preset(name: &str, kind: InfluenceKind, xi: &[f64], a: (f64, f64), b: (f64, f64)) -> ExperimentConfig {
    ExperimentConfig {
        x0: StartPoint::Uniform,
        step: Some(StepSchedule::new(a.0, a.1).expect("valid preset schedule")),
        interest_step: Some(StepSchedule::mixing(b.0, b.1).expect("valid preset schedule")),
        influence: Some(InfluenceSpec::uniform_kind(kind, xi, &[3.0; 4]).expect("valid preset influence")),
        sessions: SESSIONS,
        seeds: (1..=10).collect(),
        ..base(name, Mode::Coupled, &REWARDS_SITE4)
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    Some(match name {
        "table1" => static_preset(name, &REWARDS_SITE4, &THETA_TOPIC4),
        "example2" => static_preset(name, &REWARDS_SITE1, &THETA_TOPIC4),
        "exH3" => static_preset(name, &REWARDS_SITE4, &THETA_MIXED),
        "exH4" => static_preset(name, &REWARDS_SITE4, &THETA_TOPIC1),
        "fig1" => ExperimentConfig {
            theta: Some(THETA_TOPIC4.to_vec()),
            step: Some(StepSchedule::new(0.01, 2.0 / 3.0).expect("valid preset schedule")),
            reference: Some(vec![0.01, 0.01, 0.01, 0.96, 0.01]),
            sessions: SESSIONS,
            seeds: (1..=10).collect(),
            ..base(name, Mode::Learn, &REWARDS_SITE4)
        },
        "fig2" => coupled_preset(name, InfluenceKind::B, &XI_TOPIC4, (0.1, 1.0), (0.5, 0.6)),
        "fig3" => coupled_preset(name, InfluenceKind::B, &XI_TOPIC4, (0.1, 0.6), (0.5, 1.0)),
        "appJ-typeA-slow" => coupled_preset(name, InfluenceKind::A, &XI_MIXED, (0.001, 1.0), (0.9, 1.4)),
        "appJ-typeB-slow" => coupled_preset(name, InfluenceKind::B, &XI_MIXED, (0.001, 1.0), (0.9, 1.4)),
        "appJ-typeA-fast" => coupled_preset(name, InfluenceKind::A, &XI_MIXED, (0.001, 1.0), (0.9, 0.8)),
        "appJ-typeB-fast" => coupled_preset(name, InfluenceKind::B, &XI_MIXED, (0.001, 1.0), (0.9, 0.8)),
        _ => return None,
    })
}
