//! Seeded counter-based random streams.
//!
//! Every stochastic concern (arrivals, SINR draws, lifetimes, exploration
//! noise, ...) owns its own ChaCha stream derived from one master seed, so
//! consuming draws on one stream never perturbs another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Stream identifiers, one per stochastic concern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    Arrivals,
    Sinr,
    Lifetimes,
    ActorInit,
    Critic1Init,
    Critic2Init,
    Warmup,
    Exploration,
    TargetSmoothing,
    ReplaySampling,
}

impl StreamId {
    fn as_u64(self) -> u64 {
        match self {
            StreamId::Arrivals => 1,
            StreamId::Sinr => 2,
            StreamId::Lifetimes => 3,
            StreamId::ActorInit => 10,
            StreamId::Critic1Init => 11,
            StreamId::Critic2Init => 12,
            StreamId::Warmup => 13,
            StreamId::Exploration => 14,
            StreamId::TargetSmoothing => 15,
            StreamId::ReplaySampling => 16,
        }
    }
}

/// One independent random stream: a ChaCha12 generator keyed by the master
/// seed with the stream counter set per concern.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

/// Serializable snapshot of a stream, precise enough for exact resume.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RngStreamState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngStream {
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(id.as_u64());
        Self { rng }
    }

    pub fn state(&self) -> RngStreamState {
        RngStreamState {
            seed: self.rng.get_seed(),
            stream: self.rng.get_stream(),
            word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn from_state(state: &RngStreamState) -> Self {
        let mut rng = ChaCha12Rng::from_seed(state.seed);
        rng.set_stream(state.stream);
        rng.set_word_pos(state.word_pos);
        Self { rng }
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform in [low, high).
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }

    /// Standard normal draw scaled to the given deviation.
    pub fn normal(&mut self, std_dev: f64) -> f64 {
        let z: f64 = self.rng.sample(rand_distr::StandardNormal);
        z * std_dev
    }
}
