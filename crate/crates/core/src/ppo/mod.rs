//! PPO agent: environment, Gaussian policy, clipped-surrogate learner and the
//! episode loop.

mod env;
mod learner;
mod policy;
mod train;

pub use env::{EnvConfig, EnvError, EnvState, Evaluation, IsacEnv, StepResult, DEFAULT_TARGET_MOTION, DEFAULT_USER_MOTION};
pub use learner::{
    accumulate_surrogate_grad, advantage, clipped_objective, clipped_objective_slope, probability_ratio, PpoLearner,
    UpdateDiagnostics,
};
pub use policy::{features, log_density, GaussianPolicy, PolicyGradients, LOG_STD_MAX, LOG_STD_MIN};
pub use train::{rollout, train, train_observed};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approximator::ApproxError;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error("invalid PPO configuration: {0}")]
    Config(String),
    #[error("experience pool holds {have} transitions, update needs {need}")]
    InsufficientPool { have: usize, need: usize },
    #[error("non-finite policy density")]
    NonFiniteDensity,
    #[error("training diverged in episode {episode}: {detail}")]
    Diverged { episode: usize, detail: String },
    #[error("state has length {got}, learner expects {expected}")]
    StateLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub discount: f64,
    pub clip: f64,
    /// Λ, transitions sampled per SGD step.
    pub minibatch: usize,
    /// Transitions collected between update rounds; the pool is cleared after each round.
    pub pool_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub epochs: usize,
    pub episode_len: usize,
    pub episodes: usize,
    pub log_std_init: f64,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            discount: 0.9,
            clip: 0.2,
            minibatch: 64,
            pool_capacity: 64,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            epochs: 10,
            episode_len: 100,
            episodes: 500,
            log_std_init: 0.5f64.ln(),
            hidden: vec![128, 128],
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: String| Err(PpoError::Config(m));
        if !(0.0..=1.0).contains(&self.discount) {
            return bad(format!("discount {} outside [0, 1]", self.discount));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad(format!("clip {} outside (0, 1)", self.clip));
        }
        if self.minibatch == 0 {
            return bad("minibatch must be at least 1".into());
        }
        if self.pool_capacity < self.minibatch {
            return bad(format!("pool_capacity {} < minibatch {}", self.pool_capacity, self.minibatch));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(format!("{name} {lr} must be finite and non-negative"));
            }
        }
        if self.episode_len == 0 || self.episodes == 0 {
            return bad("episode_len and episodes must be at least 1".into());
        }
        if !self.log_std_init.is_finite() {
            return bad("log_std_init must be finite".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub logprob_old: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Last step of an episode. Episodes end on a time limit, so the
    /// advantage still bootstraps from the next state.
    pub done: bool,
}

/// On-policy transition buffer.
#[derive(Debug, Clone)]
pub struct ExperiencePool {
    capacity: usize,
    items: Vec<Transition>,
}

impl ExperiencePool {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.capacity
    }

    /// Returns false, and drops `t`, when the pool is full.
    pub fn push(&mut self, t: Transition) -> bool {
        if self.is_full() {
            return false;
        }
        self.items.push(t);
        true
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.items
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }
}

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Channel = 2,
    Policy = 3,
    Update = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
