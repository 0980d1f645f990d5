use rand::RngCore;

use super::env::{EnvState, IsacEnv, StepResult};
use super::learner::PpoLearner;
use super::{stream_rng, ExperiencePool, PpoError, Stream, Transition};
use crate::beamforming::RawAction;
use crate::trace::{EpisodeAccumulator, StepRecord, TrainingTrace};

/// Episode loop shared by every policy. Each episode resets the environment
/// with the next seed of the channel stream, so two policies run with the
/// same master seed see the same channel draws.
pub fn rollout<F>(
    env: &mut IsacEnv,
    episodes: usize,
    episode_len: usize,
    seed: u64,
    mut step: F,
    observer: &mut dyn FnMut(&StepRecord),
) -> Result<TrainingTrace, PpoError>
where
    F: FnMut(&mut IsacEnv, &EnvState, usize, usize) -> Result<StepResult, PpoError>,
{
    let mut channel_seeds = stream_rng(seed, Stream::Channel);
    let mut trace = TrainingTrace::default();
    for episode in 0..episodes {
        let mut state = env.reset(channel_seeds.next_u64());
        let mut acc = EpisodeAccumulator::default();
        for t in 0..episode_len {
            let res = step(env, &state, episode, t)?;
            acc.push(res.reward, &res.metrics);
            observer(&StepRecord {
                episode,
                step: t,
                reward: res.reward,
                metrics: res.metrics.clone(),
                fallback: res.fallback,
            });
            state = res.state;
        }
        trace.push(&acc, episode);
    }
    Ok(trace)
}

/// Runs the PPO episode loop with the learner's configuration.
pub fn train(env: &mut IsacEnv, learner: &mut PpoLearner, seed: u64) -> Result<TrainingTrace, PpoError> {
    train_observed(env, learner, seed, &mut |_| {})
}

pub fn train_observed(
    env: &mut IsacEnv,
    learner: &mut PpoLearner,
    seed: u64,
    observer: &mut dyn FnMut(&StepRecord),
) -> Result<TrainingTrace, PpoError> {
    let cfg = learner.config.clone();
    cfg.validate()?;
    if learner.state_len() != env.state_len() || learner.policy.action_len() != env.action_len() {
        return Err(PpoError::Config(format!(
            "learner is {}→{}, environment is {}→{}",
            learner.state_len(),
            learner.policy.action_len(),
            env.state_len(),
            env.action_len()
        )));
    }
    let mut policy_rng = stream_rng(seed, Stream::Policy);
    let mut update_rng = stream_rng(seed, Stream::Update);
    let mut pool = ExperiencePool::new(cfg.pool_capacity);
    let episode_len = cfg.episode_len;
    rollout(
        env,
        cfg.episodes,
        episode_len,
        seed,
        |env, state, episode, t| {
            let (action, logprob_old) = learner.act(&state.0, &mut policy_rng)?;
            let res = env.step(&RawAction(action.clone()))?;
            pool.push(Transition {
                state: state.0.clone(),
                action,
                logprob_old,
                reward: res.reward,
                next_state: res.state.0.clone(),
                done: t + 1 == episode_len,
            });
            if pool.is_full() {
                let diag = learner.update(&mut pool, &mut update_rng)?;
                if !learner.is_finite() {
                    return Err(PpoError::Diverged {
                        episode,
                        detail: format!(
                            "non-finite parameters after update (objective {}, value loss {}, ratio {})",
                            diag.mean_objective(),
                            diag.mean_value_loss(),
                            diag.mean_ratio()
                        ),
                    });
                }
                log::debug!(
                    "episode {episode} step {t}: objective {:.4e} value loss {:.4e} ratio {:.4}",
                    diag.mean_objective(),
                    diag.mean_value_loss(),
                    diag.mean_ratio()
                );
            }
            Ok(res)
        },
        observer,
    )
}
