//! Reference policies run on the same environment as the agent.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{AccessScheme, RawAction};
use crate::ppo::{rollout, stream_rng, EnvError, IsacEnv, PpoError, StepResult, Stream};
use crate::trace::{StepRecord, TrainingTrace};

/// Logits are drawn from U[−LOGIT_RANGE, LOGIT_RANGE]; tanh(3) ≈ 0.995.
pub const LOGIT_RANGE: f64 = 3.0;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("greedy needs at least one candidate")]
    NoCandidates,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Rollout(#[from] PpoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Random,
    Greedy,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Greedy => "greedy",
        }
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub greedy_candidates: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { greedy_candidates: 32 }
    }
}

pub fn random_action<R: Rng + ?Sized>(len: usize, rng: &mut R) -> RawAction {
    RawAction((0..len).map(|_| rng.gen_range(-LOGIT_RANGE..=LOGIT_RANGE)).collect())
}

/// One uniformly random action, then one environment step.
pub fn random_step<R: Rng + ?Sized>(env: &mut IsacEnv, rng: &mut R) -> Result<(RawAction, StepResult), BaselineError> {
    let a = random_action(env.action_len(), rng);
    let res = env.step(&a)?;
    Ok((a, res))
}

/// Best of `candidates` random actions by immediate reward on the current
/// channel, then one step with the winner. Ties go to the earliest candidate.
pub fn greedy_step<R: Rng + ?Sized>(
    env: &mut IsacEnv,
    rng: &mut R,
    candidates: usize,
) -> Result<(RawAction, StepResult), BaselineError> {
    if candidates == 0 {
        return Err(BaselineError::NoCandidates);
    }
    let mut best: Option<(RawAction, f64)> = None;
    for _ in 0..candidates {
        let a = random_action(env.action_len(), rng);
        let r = env.evaluate(&a)?.metrics.reward;
        if best.as_ref().map_or(true, |(_, br)| r > *br) {
            best = Some((a, r));
        }
    }
    let (a, _) = best.expect("at least one candidate");
    let res = env.step(&a)?;
    Ok((a, res))
}

/// The SDMA benchmark: no common stream, action length K + N + 3.
pub fn sdma_mode(env: &IsacEnv) -> Result<IsacEnv, EnvError> {
    IsacEnv::new(env.config().clone().with_scheme(AccessScheme::Sdma))
}

/// Runs a baseline for `episodes` × `episode_len` steps. Channel draws
/// follow the same seed stream as [`crate::ppo::train`].
pub fn run_baseline(
    env: &mut IsacEnv,
    kind: BaselineKind,
    config: &BaselineConfig,
    episodes: usize,
    episode_len: usize,
    seed: u64,
    observer: &mut dyn FnMut(&StepRecord),
) -> Result<TrainingTrace, BaselineError> {
    if kind == BaselineKind::Greedy && config.greedy_candidates == 0 {
        return Err(BaselineError::NoCandidates);
    }
    let mut rng = stream_rng(seed, Stream::Policy);
    let q = config.greedy_candidates;
    let trace = rollout(
        env,
        episodes,
        episode_len,
        seed,
        |env, _, _, _| {
            let out = match kind {
                BaselineKind::Random => random_step(env, &mut rng),
                BaselineKind::Greedy => greedy_step(env, &mut rng, q),
            };
            match out {
                Ok((_, res)) => Ok(res),
                Err(BaselineError::Env(e)) => Err(PpoError::Env(e)),
                Err(BaselineError::Rollout(e)) => Err(e),
                Err(BaselineError::NoCandidates) => Err(PpoError::Config("greedy needs at least one candidate".into())),
            }
        },
        observer,
    )?;
    Ok(trace)
}
