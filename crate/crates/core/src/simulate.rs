//! Session engine: one user session is a run of recommendation trials that
//! ends at the first showing covering the user's topic of interest.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{session_cost, InterestProfile, ModelSpec, Strategy};

/// Safety cap on trials per session.
pub const MAX_TRIALS: u64 = 100_000_000;

/// A seeded random stream. Streams with the same seed but different stream
/// ids are independent; identical seed, stream and call sequence reproduce
/// identical draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn seed_from(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Position within the stream, in 32-bit words.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// What the platform observes at the end of a session, plus the per-topic
/// exposure counts seen by the user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub accepted_site: usize,
    pub topic: usize,
    pub trials: u64,
    /// Times each topic was covered across all trials, the accepting one included.
    pub exposures: Vec<u64>,
}

/// Reusable sampler for a fixed strategy and interest profile.
#[derive(Clone, Debug)]
pub struct SessionSampler<'a> {
    spec: &'a ModelSpec,
    topics: WeightedIndex<f64>,
    sites: WeightedIndex<f64>,
}

impl<'a> SessionSampler<'a> {
    pub fn new(spec: &'a ModelSpec, x: &Strategy, theta: &InterestProfile) -> Result<Self> {
        if x.len() != spec.sites() {
            return Err(Error::DimensionMismatch {
                what: "strategy",
                expected: spec.sites(),
                found: x.len(),
            });
        }
        if theta.len() != spec.topics() {
            return Err(Error::DimensionMismatch {
                what: "interest profile",
                expected: spec.topics(),
                found: theta.len(),
            });
        }
        let rho = spec.acceptance_probs(x)?;
        for (topic, (&r, &t)) in rho.iter().zip(theta.as_slice()).enumerate() {
            if t > 0.0 && r <= 0.0 {
                return Err(Error::DegenerateAcceptance { topic, rho: r });
            }
        }
        let topics = WeightedIndex::new(theta.as_slice()).map_err(|_| Error::Infeasible("interest weights".into()))?;
        let sites = WeightedIndex::new(x.as_slice()).map_err(|_| Error::Infeasible("strategy weights".into()))?;
        Ok(Self { spec, topics, sites })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SessionOutcome> {
        let topic = self.topics.sample(rng);
        let mut exposures = vec![0u64; self.spec.topics()];
        let mut trials = 0u64;
        loop {
            trials += 1;
            if trials > MAX_TRIALS {
                return Err(Error::RunawaySession(MAX_TRIALS));
            }
            let site = self.sites.sample(rng);
            let row = &self.spec.publishing()[site];
            let mut accepted = false;
            for (n, &p) in row.iter().enumerate() {
                if rng.random::<f64>() < p {
                    exposures[n] += 1;
                    accepted |= n == topic;
                }
            }
            if accepted {
                return Ok(SessionOutcome {
                    accepted_site: site,
                    topic,
                    trials,
                    exposures,
                });
            }
        }
    }
}

/// Simulates one session under strategy `x` for a user with interests `theta`.
pub fn sample_session(
    spec: &ModelSpec,
    x: &Strategy,
    theta: &InterestProfile,
    rng: &mut RngStream,
) -> Result<SessionOutcome> {
    SessionSampler::new(spec, x, theta)?.sample(rng)
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_moments(sum: f64, sum_sq: f64, samples: u64) -> Self {
        let k = samples as f64;
        let mean = sum / k;
        let var = if samples > 1 {
            ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / k).sqrt(),
            samples,
        }
    }

    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        if self.std_error == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / self.std_error
        }
    }
}

/// Monte-Carlo mean of the realised session cost `T^kappa`.
pub fn empirical_cost(
    spec: &ModelSpec,
    x: &Strategy,
    theta: &InterestProfile,
    sessions: u64,
    rng: &mut RngStream,
) -> Result<Estimate> {
    let sampler = SessionSampler::new(spec, x, theta)?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..sessions {
        let outcome = sampler.sample(rng)?;
        let c = session_cost(outcome.trials, spec.kappa());
        sum += c;
        sum_sq += c * c;
    }
    Ok(Estimate::from_moments(sum, sum_sq, sessions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{interest, model, REWARDS_SITE4, THETA_TOPIC4};

    #[test]
    fn certain_coverage_ends_in_one_trial() {
        let p = vec![vec![1.0, 1.0, 1.0]];
        let spec = ModelSpec::new(p, vec![1.0], 2.5, 0.0).unwrap();
        let x = spec.strategy(vec![1.0]).unwrap();
        let theta = InterestProfile::uniform(3);
        let mut rng = RngStream::seed_from(3);
        for _ in 0..100 {
            let o = sample_session(&spec, &x, &theta, &mut rng).unwrap();
            assert_eq!(o.trials, 1);
            assert_eq!(o.exposures, vec![1, 1, 1]);
        }
    }

    #[test]
    fn outcome_invariants() {
        let spec = model(&REWARDS_SITE4);
        let theta = interest(&THETA_TOPIC4);
        let x = Strategy::uniform(5);
        let sampler = SessionSampler::new(&spec, &x, &theta).unwrap();
        let mut rng = RngStream::seed_from(11);
        for _ in 0..2000 {
            let o = sampler.sample(&mut rng).unwrap();
            assert!(o.trials >= 1);
            assert!(o.exposures[o.topic] >= 1);
            assert!(o.exposures.iter().all(|&c| c <= o.trials));
        }
    }

    #[test]
    fn same_seed_same_sessions() {
        let spec = model(&REWARDS_SITE4);
        let theta = interest(&THETA_TOPIC4);
        let x = Strategy::uniform(5);
        let run = |seed, stream| {
            let mut rng = RngStream::new(seed, stream);
            (0..200)
                .map(|_| sample_session(&spec, &x, &theta, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5, 0), run(5, 0));
        assert_ne!(run(5, 0), run(5, 1));
        assert_ne!(run(5, 0), run(6, 0));
    }

    #[test]
    fn zero_kappa_cost_is_exactly_one() {
        let spec = ModelSpec::new(crate::instances::publishing_matrix(), REWARDS_SITE4.to_vec(), 0.0, 0.01).unwrap();
        let est = empirical_cost(
            &spec,
            &Strategy::uniform(5),
            &interest(&THETA_TOPIC4),
            500,
            &mut RngStream::seed_from(1),
        )
        .unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.z_score(1.0), 0.0);
        assert_eq!(est.z_score(2.0), f64::INFINITY);
    }

    #[test]
    fn unreachable_interest_topic_is_rejected() {
        let p = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let spec = ModelSpec::new(p, vec![1.0, 1.0], 1.0, 0.0).unwrap();
        let x = spec.strategy(vec![1.0, 0.0]).unwrap();
        let theta = spec.interest(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            SessionSampler::new(&spec, &x, &theta),
            Err(Error::DegenerateAcceptance { topic: 1, .. })
        ));
        // a topic nobody seeks may be unreachable
        let theta = spec.interest(vec![1.0, 0.0]).unwrap();
        assert!(SessionSampler::new(&spec, &x, &theta).is_ok());
    }

    #[test]
    fn estimate_moments() {
        let e = Estimate::from_moments(6.0, 14.0, 3); // samples 1, 2, 3
        assert!((e.mean - 2.0).abs() < 1e-15);
        assert!((e.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
