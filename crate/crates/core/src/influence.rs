//! Interest drift driven by what the user is shown.
//!
//! Each session exposes the user to topics `chi_n` times. A per-topic
//! influence level `v_n` is derived from the exposure count, normalised into
//! a distribution `w`, and the interest profile moves towards it:
//! `theta <- (1 - b) theta + b w`. The platform keeps learning as if the
//! interests were fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{fmt_full, gradient_estimate, learner_step, StepSchedule};
use crate::model::{CostSeriesPolicy, InterestProfile, ModelSpec, Strategy, SIMPLEX_TOL};
use crate::optimize::project_raw;
use crate::simulate::{RngStream, SessionSampler};

/// Smallest admissible total influence level.
pub const INFLUENCE_SUM_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfluenceKind {
    /// Repeated showing suppresses interest: `v = xi beta^-chi`.
    A,
    /// Repeated showing amplifies interest: `v = xi (1 - beta^-chi)`.
    B,
    /// Constant level `v = xi`.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicInfluence {
    pub kind: InfluenceKind,
    /// Intrinsic interest, in `[0, 1]`.
    pub xi: f64,
    /// Influence factor, `>= 1`.
    pub beta: f64,
}

impl TopicInfluence {
    pub fn new(kind: InfluenceKind, xi: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::InvalidModel(format!("intrinsic interest {xi} outside [0, 1]")));
        }
        if !(beta >= 1.0) || !beta.is_finite() {
            return Err(Error::InvalidModel(format!("influence factor {beta} must be >= 1")));
        }
        Ok(Self { kind, xi, beta })
    }

    /// Influence level after `exposures` showings in one session.
    pub fn level(&self, exposures: u64) -> f64 {
        influence_level(self, exposures)
    }
}

pub fn influence_level(topic: &TopicInfluence, exposures: u64) -> f64 {
    let decay = topic.beta.powf(-(exposures as f64));
    match topic.kind {
        InfluenceKind::A => topic.xi * decay,
        InfluenceKind::B => topic.xi * (1.0 - decay),
        InfluenceKind::None => topic.xi,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceSpec {
    pub topics: Vec<TopicInfluence>,
    /// Lower bound applied to every level before normalising. Zero means an
    /// all-zero level vector is an error.
    #[serde(default)]
    pub v_floor: f64,
}

impl InfluenceSpec {
    pub fn new(topics: Vec<TopicInfluence>) -> Result<Self> {
        let spec = Self { topics, v_floor: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Every topic of the same kind with per-topic `xi` and `beta`.
    pub fn uniform_kind(kind: InfluenceKind, xi: &[f64], beta: &[f64]) -> Result<Self> {
        if xi.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                what: "influence factors",
                expected: xi.len(),
                found: beta.len(),
            });
        }
        let topics = xi
            .iter()
            .zip(beta)
            .map(|(&x, &b)| TopicInfluence::new(kind, x, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(topics)
    }

    pub fn with_floor(mut self, v_floor: f64) -> Result<Self> {
        self.v_floor = v_floor;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() {
            return Err(Error::InvalidModel("influence spec has no topics".into()));
        }
        for t in &self.topics {
            TopicInfluence::new(t.kind, t.xi, t.beta)?;
        }
        if !(self.v_floor >= 0.0) || !self.v_floor.is_finite() {
            return Err(Error::InvalidModel(format!(
                "influence floor {} must be >= 0",
                self.v_floor
            )));
        }
        // Largest level each topic can ever reach; at least one must be positive.
        let reachable = self.topics.iter().any(|t| match t.kind {
            InfluenceKind::B => t.xi > 0.0 && t.beta > 1.0,
            _ => t.xi > 0.0,
        });
        if !reachable && self.v_floor == 0.0 {
            return Err(Error::InvalidModel(
                "no topic can reach a positive influence level".into(),
            ));
        }
        Ok(())
    }

    /// Type-B topics with `beta = 1` have a level identically zero.
    pub fn inert_topics(&self) -> Vec<usize> {
        self.topics
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == InfluenceKind::B && t.beta == 1.0)
            .map(|(n, _)| n)
            .collect()
    }

    pub fn levels(&self, exposures: &[u64]) -> Vec<f64> {
        self.topics
            .iter()
            .zip(exposures)
            .map(|(t, &chi)| influence_level(t, chi).max(self.v_floor))
            .collect()
    }
}

/// Normalises influence levels into a distribution over topics.
pub fn influence_weights(levels: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = levels.iter().sum();
    if !(total >= INFLUENCE_SUM_FLOOR) {
        return Err(Error::DegenerateInfluence(total));
    }
    Ok(levels.iter().map(|v| v / total).collect())
}

/// `theta <- (1 - b) theta + b w`, renormalised against rounding drift.
pub fn theta_step(theta: &InterestProfile, weights: &[f64], step: f64) -> Result<InterestProfile> {
    if !(0.0..=1.0).contains(&step) {
        return Err(Error::InvalidMixingStep(step));
    }
    if weights.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            what: "influence weights",
            expected: theta.len(),
            found: weights.len(),
        });
    }
    let mut next: Vec<f64> = theta
        .as_slice()
        .iter()
        .zip(weights)
        .map(|(&t, &w)| ((1.0 - step) * t + step * w).max(0.0))
        .collect();
    let sum: f64 = next.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        next.iter_mut().for_each(|v| *v /= sum);
    }
    if (next.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Infeasible("interest update left the simplex".into()));
    }
    InterestProfile::new(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingMode {
    /// Separate step sequences for the strategy and the interests.
    TwoTimescale,
    /// One step sequence for both, applied as a single stacked projected
    /// iteration; the interest schedule is ignored.
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledConfig {
    pub x0: Strategy,
    pub theta0: InterestProfile,
    pub strategy_schedule: StepSchedule,
    pub interest_schedule: StepSchedule,
    pub sessions: u64,
    pub mode: CouplingMode,
    pub decimate: u64,
    pub policy: CostSeriesPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledRecord {
    pub session: u64,
    pub x: Strategy,
    pub theta: InterestProfile,
    pub value: f64,
    pub strategy_step: f64,
    pub interest_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrace {
    pub records: Vec<CoupledRecord>,
    pub final_x: Strategy,
    pub final_theta: InterestProfile,
}

/// Averages over the final fraction of a coupled run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub value: f64,
}

impl CoupledTrace {
    /// Mean of the records in the last `fraction` of sessions.
    pub fn steady_state(&self, fraction: f64) -> Option<SteadyState> {
        let last = self.records.last()?.session;
        let from = ((last as f64) * (1.0 - fraction)).floor() as u64;
        let picked: Vec<&CoupledRecord> = self.records.iter().filter(|r| r.session > from).collect();
        let k = picked.len() as f64;
        let first = picked.first()?;
        let mut x = vec![0.0; first.x.len()];
        let mut theta = vec![0.0; first.theta.len()];
        let mut value = 0.0;
        for r in &picked {
            x.iter_mut().zip(r.x.as_slice()).for_each(|(a, v)| *a += v / k);
            theta.iter_mut().zip(r.theta.as_slice()).for_each(|(a, v)| *a += v / k);
            value += r.value / k;
        }
        Some(SteadyState { x, theta, value })
    }

    /// CSV with header `s,x_1..x_M,theta_1..theta_N,F`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s");
        for m in 1..=self.final_x.len() {
            out.push_str(&format!(",x_{m}"));
        }
        for n in 1..=self.final_theta.len() {
            out.push_str(&format!(",theta_{n}"));
        }
        out.push_str(",F\n");
        for r in &self.records {
            out.push_str(&r.session.to_string());
            for v in r.x.as_slice().iter().chain(r.theta.as_slice()) {
                out.push(',');
                out.push_str(&fmt_full(*v));
            }
            out.push(',');
            out.push_str(&fmt_full(r.value));
            out.push('\n');
        }
        out
    }
}

/// Runs the learner against a user whose interests drift with exposure.
///
/// Each session is sampled under the current `(x, theta)`; both are then
/// updated from that same session's outcome.
pub fn run_coupled(
    spec: &ModelSpec,
    influence: &InfluenceSpec,
    config: &CoupledConfig,
    rng: &mut RngStream,
) -> Result<CoupledTrace> {
    if influence.topics.len() != spec.topics() {
        return Err(Error::DimensionMismatch {
            what: "influence spec",
            expected: spec.topics(),
            found: influence.topics.len(),
        });
    }
    let mut x = spec.strategy(config.x0.as_slice().to_vec())?;
    let mut theta = spec.interest(config.theta0.as_slice().to_vec())?;
    let mut records = Vec::new();
    for s in 1..=config.sessions {
        let a = config.strategy_schedule.at(s);
        let b = match config.mode {
            CouplingMode::TwoTimescale => config.interest_schedule.at(s),
            CouplingMode::Joint => a,
        };
        if s == 1 || s == config.sessions || config.decimate <= 1 || s.is_multiple_of(config.decimate) {
            let value = spec.net_revenue(&x, &theta, &config.policy)?;
            records.push(CoupledRecord {
                session: s,
                x: x.clone(),
                theta: theta.clone(),
                value,
                strategy_step: a,
                interest_step: b,
            });
        }
        let outcome = SessionSampler::new(spec, &x, &theta)?.sample(rng)?;
        let g = gradient_estimate(spec, &x, &outcome)?;
        let w = influence_weights(&influence.levels(&outcome.exposures))?;
        x = learner_step(spec, &x, &g, a)?;
        theta = match config.mode {
            CouplingMode::TwoTimescale => theta_step(&theta, &w, b)?,
            CouplingMode::Joint => {
                // theta-block of the stacked iteration, projected onto the simplex
                let y: Vec<f64> = theta
                    .as_slice()
                    .iter()
                    .zip(&w)
                    .map(|(t, wn)| t + a * (wn - t))
                    .collect();
                InterestProfile::new(project_raw(&y, 0.0)?)?
            }
        };
    }
    Ok(CoupledTrace {
        records,
        final_x: x,
        final_theta: theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topic(kind: InfluenceKind, xi: f64, beta: f64) -> TopicInfluence {
        TopicInfluence::new(kind, xi, beta).unwrap()
    }

    #[test]
    fn level_arithmetic() {
        assert_eq!(topic(InfluenceKind::A, 0.5, 2.0).level(1), 0.25);
        assert_eq!(topic(InfluenceKind::B, 0.5, 2.0).level(1), 0.25);
        assert_eq!(topic(InfluenceKind::None, 0.5, 2.0).level(7), 0.5);
        for chi in 0..20 {
            assert_eq!(topic(InfluenceKind::A, 0.3, 1.0).level(chi), 0.3);
        }
        assert_eq!(topic(InfluenceKind::B, 0.3, 3.0).level(0), 0.0);
    }

    #[test]
    fn levels_are_monotone_in_exposure() {
        let a = topic(InfluenceKind::A, 0.6, 3.0);
        let b = topic(InfluenceKind::B, 0.6, 3.0);
        for chi in 0..20 {
            assert!(a.level(chi + 1) < a.level(chi));
            assert!(b.level(chi + 1) > b.level(chi));
        }
    }

    #[test]
    fn weights() {
        assert_eq!(influence_weights(&[1.0; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(
            influence_weights(&[0.3, 0.0, 0.0, 0.0]).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert!(matches!(
            influence_weights(&[0.0; 4]),
            Err(Error::DegenerateInfluence(_))
        ));
    }

    #[test]
    fn unexposed_type_b_is_degenerate_without_floor() {
        let spec = InfluenceSpec::uniform_kind(InfluenceKind::B, &[0.25; 4], &[3.0; 4]).unwrap();
        assert!(influence_weights(&spec.levels(&[0; 4])).is_err());
        let floored = spec.with_floor(1e-6).unwrap();
        assert_eq!(influence_weights(&floored.levels(&[0; 4])).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn theta_updates() {
        let theta = InterestProfile::uniform(4);
        let w = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(theta_step(&theta, &w, 0.0).unwrap(), theta);
        assert_eq!(theta_step(&theta, &w, 1.0).unwrap().as_slice(), &w);
        assert_eq!(
            theta_step(&theta, &w, 0.5).unwrap().as_slice(),
            &[0.625, 0.125, 0.125, 0.125]
        );
        assert!(matches!(theta_step(&theta, &w, 1.5), Err(Error::InvalidMixingStep(_))));
        assert!(theta_step(&theta, &w, -0.1).is_err());
        assert!(theta_step(&theta, &w[..3], 0.5).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(TopicInfluence::new(InfluenceKind::A, 1.5, 2.0).is_err());
        assert!(TopicInfluence::new(InfluenceKind::A, 0.5, 0.9).is_err());
        assert!(InfluenceSpec::new(vec![]).is_err());
        assert!(InfluenceSpec::uniform_kind(InfluenceKind::A, &[0.5; 3], &[2.0; 2]).is_err());
        // no topic can ever be reached
        assert!(InfluenceSpec::uniform_kind(InfluenceKind::B, &[0.5; 2], &[1.0; 2]).is_err());
        assert!(InfluenceSpec::uniform_kind(InfluenceKind::A, &[0.0; 2], &[2.0; 2]).is_err());
    }

    #[test]
    fn inert_type_b_topics_are_flagged() {
        let spec = InfluenceSpec::new(vec![
            topic(InfluenceKind::B, 0.5, 1.0),
            topic(InfluenceKind::B, 0.5, 3.0),
            topic(InfluenceKind::A, 0.5, 1.0),
        ])
        .unwrap();
        assert_eq!(spec.inert_topics(), vec![0]);
    }
}
