//! Online learning of the strategy from session feedback.
//!
//! After each session the platform sees the accepted site, the topic that
//! triggered the click-through and the trial count. From these it forms a
//! one-sample estimate of the net-revenue gradient, non-zero only at the
//! accepted site, and takes a projected ascent step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cost_increment, CostSeriesPolicy, InterestProfile, ModelSpec, Strategy};
use crate::optimize::project_eps_simplex;
use crate::simulate::{RngStream, SessionOutcome, SessionSampler};

/// Step sizes `a(s) = a0 / (1 + s^exponent)` for sessions `s = 1, 2, ...`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub a0: f64,
    pub exponent: f64,
}

impl StepSchedule {
    /// A learning-rate schedule; `exponent` must lie in `(0.5, 1]` so that the
    /// steps sum to infinity while their squares stay summable.
    pub fn new(a0: f64, exponent: f64) -> Result<Self> {
        if !(a0 > 0.0) || !a0.is_finite() {
            return Err(Error::InvalidSchedule(format!("a0 = {a0} must be positive")));
        }
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::InvalidSchedule(format!("exponent {exponent} outside (0.5, 1]")));
        }
        Ok(Self { a0, exponent })
    }

    /// A mixing-rate schedule for the interest update. Any exponent above 0.5
    /// is accepted (exponents above 1 make the total drift finite), and the
    /// first step must not exceed 1.
    pub fn mixing(b0: f64, exponent: f64) -> Result<Self> {
        if !(b0 > 0.0) || !b0.is_finite() {
            return Err(Error::InvalidSchedule(format!("b0 = {b0} must be positive")));
        }
        if !(exponent > 0.5) || !exponent.is_finite() {
            return Err(Error::InvalidSchedule(format!("exponent {exponent} must exceed 0.5")));
        }
        let schedule = Self { a0: b0, exponent };
        if schedule.at(1) > 1.0 {
            return Err(Error::InvalidSchedule(format!(
                "first mixing step {} exceeds 1",
                schedule.at(1)
            )));
        }
        Ok(schedule)
    }

    pub fn at(&self, session: u64) -> f64 {
        self.a0 / (1.0 + (session as f64).powf(self.exponent))
    }
}

/// Single-session gradient estimate.
///
/// Zero except at the accepted site `m`, where it equals
/// `(r_m - E[r | topic] + T dc_{T+1}) / x_m`.
pub fn gradient_estimate(spec: &ModelSpec, x: &Strategy, outcome: &SessionOutcome) -> Result<Vec<f64>> {
    let sites = spec.sites();
    if x.len() != sites {
        return Err(Error::DimensionMismatch {
            what: "strategy",
            expected: sites,
            found: x.len(),
        });
    }
    if outcome.accepted_site >= sites || outcome.topic >= spec.topics() {
        return Err(Error::Infeasible("session outcome indices out of range".into()));
    }
    let xs = x.as_slice();
    let n = outcome.topic;
    let (mut rho, mut weighted) = (0.0, 0.0);
    for (k, row) in spec.publishing().iter().enumerate() {
        rho += xs[k] * row[n];
        weighted += spec.rewards()[k] * xs[k] * row[n];
    }
    if !(rho > 0.0) {
        return Err(Error::DegenerateAcceptance { topic: n, rho });
    }
    let m = outcome.accepted_site;
    let t = outcome.trials;
    let cost_term = t as f64 * cost_increment(t + 1, spec.kappa());
    let mut g = vec![0.0; sites];
    g[m] = (spec.rewards()[m] - weighted / rho + cost_term) / xs[m];
    Ok(g)
}

/// Projected ascent step `P(x + a G)`.
pub fn learner_step(spec: &ModelSpec, x: &Strategy, gradient: &[f64], step: f64) -> Result<Strategy> {
    if gradient.len() != x.len() {
        return Err(Error::DimensionMismatch {
            what: "gradient",
            expected: x.len(),
            found: gradient.len(),
        });
    }
    if gradient.iter().any(|g| !g.is_finite()) || !step.is_finite() {
        return Err(Error::NonFinite("gradient step"));
    }
    let y: Vec<f64> = x.as_slice().iter().zip(gradient).map(|(a, g)| a + step * g).collect();
    project_eps_simplex(&y, spec.epsilon())
}

/// Initial strategy for a learning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Initial {
    Given(Strategy),
    /// Independent uniforms on `[0, 1]`, normalised, then projected.
    Random,
}

impl Initial {
    pub fn resolve(&self, spec: &ModelSpec, rng: &mut RngStream) -> Result<Strategy> {
        match self {
            Initial::Given(x) => spec.strategy(x.as_slice().to_vec()),
            Initial::Random => {
                let draws: Vec<f64> = (0..spec.sites()).map(|_| rng.random::<f64>()).collect();
                let total: f64 = draws.iter().sum();
                let normalised: Vec<f64> = if total > 0.0 {
                    draws.iter().map(|d| d / total).collect()
                } else {
                    vec![1.0 / spec.sites() as f64; spec.sites()]
                };
                project_eps_simplex(&normalised, spec.epsilon())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub initial: Initial,
    pub schedule: StepSchedule,
    pub sessions: u64,
    pub reference: Option<Strategy>,
    /// Record every `decimate`-th session (the first and last are always kept).
    pub decimate: u64,
    /// Policy used to evaluate the recorded net revenue.
    pub policy: CostSeriesPolicy,
}

/// One recorded session of a learning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnRecord {
    pub session: u64,
    /// Strategy in force during the session.
    pub x: Strategy,
    pub value: f64,
    pub error: Option<f64>,
    pub accepted_site: usize,
    pub topic: usize,
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnTrace {
    pub records: Vec<LearnRecord>,
    /// Strategy after the last update.
    pub final_x: Strategy,
}

impl LearnTrace {
    /// Mean strategy over records with `session` in `[from, to]`.
    pub fn window_mean(&self, from: u64, to: u64) -> Option<Vec<f64>> {
        let picked: Vec<&LearnRecord> = self
            .records
            .iter()
            .filter(|r| r.session >= from && r.session <= to)
            .collect();
        let first = picked.first()?;
        let mut mean = vec![0.0; first.x.len()];
        for r in &picked {
            for (acc, v) in mean.iter_mut().zip(r.x.as_slice()) {
                *acc += v;
            }
        }
        let k = picked.len() as f64;
        Some(mean.into_iter().map(|v| v / k).collect())
    }

    /// Mean distance to the reference over records in `[from, to]`.
    pub fn window_error(&self, from: u64, to: u64) -> Option<f64> {
        let errs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.session >= from && r.session <= to)
            .filter_map(|r| r.error)
            .collect();
        if errs.is_empty() {
            None
        } else {
            Some(errs.iter().sum::<f64>() / errs.len() as f64)
        }
    }

    /// CSV with header `s,x_1..x_M,F,err`; `err` is empty without a reference.
    pub fn to_csv(&self) -> String {
        let sites = self.final_x.len();
        let mut out = String::from("s");
        for m in 1..=sites {
            out.push_str(&format!(",x_{m}"));
        }
        out.push_str(",F,err\n");
        for r in &self.records {
            out.push_str(&r.session.to_string());
            for v in r.x.as_slice() {
                out.push(',');
                out.push_str(&fmt_full(*v));
            }
            out.push(',');
            out.push_str(&fmt_full(r.value));
            out.push(',');
            if let Some(e) = r.error {
                out.push_str(&fmt_full(e));
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits, `.` as decimal separator.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

fn should_record(session: u64, total: u64, decimate: u64) -> bool {
    session == 1 || session == total || decimate <= 1 || session.is_multiple_of(decimate)
}

/// Runs the learner against a user with fixed interests.
///
/// The learner uses the publishing matrix and revenues but never reads
/// `theta`, which only drives the simulated user.
pub fn run_learning(
    spec: &ModelSpec,
    theta: &InterestProfile,
    config: &LearnConfig,
    rng: &mut RngStream,
) -> Result<LearnTrace> {
    let mut x = config.initial.resolve(spec, rng)?;
    let mut records = Vec::new();
    for s in 1..=config.sessions {
        let outcome = SessionSampler::new(spec, &x, theta)?.sample(rng)?;
        if should_record(s, config.sessions, config.decimate) {
            let value = spec.net_revenue(&x, theta, &config.policy)?;
            records.push(LearnRecord {
                session: s,
                error: config.reference.as_ref().map(|r| x.distance(r)),
                x: x.clone(),
                value,
                accepted_site: outcome.accepted_site,
                topic: outcome.topic,
                trials: outcome.trials,
            });
        }
        let g = gradient_estimate(spec, &x, &outcome)?;
        x = learner_step(spec, &x, &g, config.schedule.at(s))?;
    }
    Ok(LearnTrace { records, final_x: x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{interest, model, REWARDS_SITE4, THETA_TOPIC4};

    fn outcome(site: usize, topic: usize, trials: u64, topics: usize) -> SessionOutcome {
        let mut exposures = vec![0; topics];
        exposures[topic] = 1;
        SessionOutcome {
            accepted_site: site,
            topic,
            trials,
            exposures,
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(StepSchedule::new(0.01, 2.0 / 3.0).is_ok());
        assert!(StepSchedule::new(0.01, 1.0).is_ok());
        assert!(StepSchedule::new(0.01, 0.5).is_err());
        assert!(StepSchedule::new(0.01, 1.4).is_err());
        assert!(StepSchedule::new(0.0, 1.0).is_err());
        assert!(StepSchedule::mixing(0.9, 1.4).is_ok());
        assert!(StepSchedule::mixing(0.9, 0.4).is_err());
        assert!(StepSchedule::mixing(2.5, 1.0).is_err());
        let a = StepSchedule::new(0.1, 1.0).unwrap();
        assert_eq!(a.at(1), 0.05);
        assert_eq!(a.at(9), 0.01);
    }

    #[test]
    fn single_site_estimate_is_the_cost_term() {
        let spec = ModelSpec::new(vec![vec![0.5]], vec![10.0], 2.5, 0.0).unwrap();
        let x = spec.strategy(vec![1.0]).unwrap();
        let g = gradient_estimate(&spec, &x, &outcome(0, 0, 3, 1)).unwrap();
        let want = 3.0 * (4f64.powf(2.5) - 3f64.powf(2.5));
        assert!((g[0] - want).abs() < 1e-9);
    }

    #[test]
    fn zero_kappa_estimate_is_reward_deviation() {
        let spec = ModelSpec::new(crate::instances::publishing_matrix(), REWARDS_SITE4.to_vec(), 0.0, 0.01).unwrap();
        let x = Strategy::uniform(5);
        let g = gradient_estimate(&spec, &x, &outcome(3, 3, 7, 4)).unwrap();
        let rho = spec.acceptance_probs(&x).unwrap()[3];
        let mean: f64 = (0..5)
            .map(|k| spec.rewards()[k] * 0.2 * spec.coverage(k, 3))
            .sum::<f64>()
            / rho;
        assert!((g[3] - (400.0 - mean) / 0.2).abs() < 1e-9);
        assert!(g.iter().enumerate().all(|(m, v)| m == 3 || *v == 0.0));
    }

    #[test]
    fn estimate_rejects_bad_outcome() {
        let spec = model(&REWARDS_SITE4);
        let x = Strategy::uniform(5);
        assert!(gradient_estimate(&spec, &x, &outcome(5, 0, 1, 4)).is_err());
        assert!(gradient_estimate(&spec, &x, &outcome(0, 4, 1, 5)).is_err());
    }

    #[test]
    fn null_steps_leave_x_unchanged() {
        let spec = model(&REWARDS_SITE4);
        let x = spec.strategy(vec![0.1, 0.2, 0.3, 0.39, 0.01]).unwrap();
        assert_eq!(learner_step(&spec, &x, &[0.0; 5], 0.3).unwrap(), x);
        assert_eq!(learner_step(&spec, &x, &[5.0, -2.0, 1.0, 0.0, 3.0], 0.0).unwrap(), x);
        assert!(learner_step(&spec, &x, &[f64::INFINITY, 0.0, 0.0, 0.0, 0.0], 0.1).is_err());
        assert!(learner_step(&spec, &x, &[0.0; 4], 0.1).is_err());
    }

    #[test]
    fn random_initial_is_feasible() {
        let spec = model(&REWARDS_SITE4);
        let mut rng = RngStream::seed_from(2);
        for _ in 0..50 {
            let x = Initial::Random.resolve(&spec, &mut rng).unwrap();
            assert!(spec.strategy(x.into_inner()).is_ok());
        }
    }

    #[test]
    fn trace_records_and_csv() {
        let spec = model(&REWARDS_SITE4);
        let theta = interest(&THETA_TOPIC4);
        let config = LearnConfig {
            initial: Initial::Given(Strategy::uniform(5)),
            schedule: StepSchedule::new(0.01, 2.0 / 3.0).unwrap(),
            sessions: 25,
            reference: Some(Strategy::uniform(5)),
            decimate: 10,
            policy: CostSeriesPolicy::default(),
        };
        let trace = run_learning(&spec, &theta, &config, &mut RngStream::seed_from(4)).unwrap();
        let sessions: Vec<u64> = trace.records.iter().map(|r| r.session).collect();
        assert_eq!(sessions, vec![1, 10, 20, 25]);
        assert_eq!(trace.records[0].error, Some(0.0));
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "s,x_1,x_2,x_3,x_4,x_5,F,err");
        assert_eq!(lines.count(), 4);
        assert!(trace.window_mean(1, 10).is_some());
        assert!(trace.window_mean(30, 40).is_none());
        assert_eq!(trace.window_error(1, 1), Some(0.0));
    }

    #[test]
    fn full_precision_format() {
        assert_eq!(fmt_full(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_full(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
