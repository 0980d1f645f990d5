use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::policy::{features, log_density, GaussianPolicy, PolicyGradients};
use super::{ExperiencePool, PpoConfig, PpoError};
use crate::approximator::{self, ApproxError, DenseNetwork, Direction, ForwardTrace, Gradients};

/// A = r + μ·V(s') − V(s).
pub fn advantage(reward: f64, v_next: f64, v_now: f64, discount: f64) -> f64 {
    reward + discount * v_next - v_now
}

/// π_θ(a|s) / π_θold(a|s) via the log densities.
pub fn probability_ratio(
    policy: &GaussianPolicy,
    old: &GaussianPolicy,
    features: &[f64],
    action: &[f64],
) -> Result<f64, PpoError> {
    let lp = policy.log_prob(features, action)?;
    let lp_old = old.log_prob(features, action)?;
    if !lp.is_finite() || !lp_old.is_finite() {
        return Err(PpoError::NonFiniteDensity);
    }
    Ok((lp - lp_old).exp())
}

/// min{σA, clip(σ, 1−ε, 1+ε)·A}.
pub fn clipped_objective(ratio: f64, adv: f64, clip: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - clip, 1.0 + clip) * adv)
}

/// ∂/∂σ of [`clipped_objective`]: A while the unclipped term is selected, 0 otherwise.
pub fn clipped_objective_slope(ratio: f64, adv: f64, clip: f64) -> f64 {
    if ratio * adv <= ratio.clamp(1.0 - clip, 1.0 + clip) * adv {
        adv
    } else {
        0.0
    }
}

/// Adds ∇θ min{σA, clip(σ)A} for one transition into `grads`, given the
/// actor's forward trace for the transition's features. Returns the
/// objective and the ratio σ.
pub fn accumulate_surrogate_grad(
    policy: &GaussianPolicy,
    trace: &ForwardTrace,
    action: &[f64],
    logprob_old: f64,
    adv: f64,
    clip: f64,
    grads: &mut PolicyGradients,
) -> Result<(f64, f64), PpoError> {
    let lp = log_density(trace.output(), &policy.log_std, action);
    if !lp.is_finite() || !logprob_old.is_finite() {
        return Err(PpoError::NonFiniteDensity);
    }
    let ratio = (lp - logprob_old).exp();
    // ∂σ/∂θ = σ·∇log π.
    let weight = clipped_objective_slope(ratio, adv, clip) * ratio;
    if weight != 0.0 {
        policy.accumulate_log_prob_grad(trace, action, weight, grads)?;
    }
    Ok((clipped_objective(ratio, adv, clip), ratio))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochDiagnostics {
    pub objective: f64,
    pub value_loss: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateDiagnostics {
    pub epochs: Vec<EpochDiagnostics>,
}

impl UpdateDiagnostics {
    fn mean(&self, f: impl Fn(&EpochDiagnostics) -> f64) -> f64 {
        self.epochs.iter().map(f).sum::<f64>() / self.epochs.len().max(1) as f64
    }

    pub fn mean_objective(&self) -> f64 {
        self.mean(|e| e.objective)
    }

    pub fn mean_value_loss(&self) -> f64 {
        self.mean(|e| e.value_loss)
    }

    pub fn mean_ratio(&self) -> f64 {
        self.mean(|e| e.ratio)
    }
}

/// Actor-critic pair updated by the clipped surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoLearner {
    pub policy: GaussianPolicy,
    pub critic: DenseNetwork,
    pub config: PpoConfig,
}

impl PpoLearner {
    pub fn new<R: Rng + ?Sized>(
        state_len: usize,
        action_len: usize,
        config: PpoConfig,
        rng: &mut R,
    ) -> Result<Self, PpoError> {
        config.validate()?;
        let mut actor_sizes = vec![state_len];
        actor_sizes.extend(&config.hidden);
        let mut critic_sizes = actor_sizes.clone();
        actor_sizes.push(action_len);
        critic_sizes.push(1);
        let actor = DenseNetwork::new(&actor_sizes, rng)?;
        let critic = DenseNetwork::new(&critic_sizes, rng)?;
        Ok(Self {
            policy: GaussianPolicy::new(actor, config.log_std_init),
            critic,
            config,
        })
    }

    pub fn state_len(&self) -> usize {
        self.critic.input_size()
    }

    pub fn value(&self, state: &[f64]) -> Result<f64, PpoError> {
        self.check_state(state)?;
        Ok(self.critic.forward(&features(state))?[0])
    }

    /// Draws a raw action and its log density under the current policy.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64), PpoError> {
        self.check_state(state)?;
        let (a, lp) = self.policy.sample(&features(state), rng)?;
        if !lp.is_finite() {
            return Err(PpoError::NonFiniteDensity);
        }
        Ok((a, lp))
    }

    /// Mean action, no exploration noise.
    pub fn act_deterministic(&self, state: &[f64]) -> Result<Vec<f64>, PpoError> {
        self.check_state(state)?;
        Ok(self.policy.mean(&features(state))?.as_slice().to_vec())
    }

    fn check_state(&self, state: &[f64]) -> Result<(), PpoError> {
        if state.len() != self.state_len() {
            return Err(PpoError::StateLength {
                expected: self.state_len(),
                got: state.len(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.policy.is_finite() && self.critic.is_finite()
    }

    /// One update round: `epochs` SGD steps, each on Λ transitions drawn
    /// without replacement from the pool. The pool is cleared afterwards.
    pub fn update<R: Rng + ?Sized>(&mut self, pool: &mut ExperiencePool, rng: &mut R) -> Result<UpdateDiagnostics, PpoError> {
        let cfg = self.config.clone();
        if pool.len() < cfg.minibatch {
            return Err(PpoError::InsufficientPool {
                have: pool.len(),
                need: cfg.minibatch,
            });
        }
        let mut diag = UpdateDiagnostics::default();
        for _ in 0..cfg.epochs {
            let picks = rand::seq::index::sample(rng, pool.len(), cfg.minibatch);
            let batch: Vec<_> = picks.iter().map(|i| &pool.transitions()[i]).collect();
            let mut pg = PolicyGradients::zeros_like(&self.policy);
            let mut cg = Gradients::zeros_like(&self.critic);
            let mut stats = EpochDiagnostics {
                objective: 0.0,
                value_loss: 0.0,
                ratio: 0.0,
            };
            for t in batch {
                let f = features(&t.state);
                let f_next = features(&t.next_state);
                let v_trace = self.critic.forward_trace(&f)?;
                let v = v_trace.output()[0];
                let v_next = self.critic.forward(&f_next)?[0];
                let adv = advantage(t.reward, v_next, v, cfg.discount);

                let a_trace = self.policy.actor.forward_trace(&f)?;
                let (objective, ratio) =
                    accumulate_surrogate_grad(&self.policy, &a_trace, &t.action, t.logprob_old, adv, cfg.clip, &mut pg)?;
                stats.ratio += ratio;
                stats.objective += objective;
                stats.value_loss += adv * adv;
                // ∂(V − y)²/∂V with the target y held fixed.
                self.critic.accumulate_backward(&v_trace, &[-2.0 * adv], &mut cg)?;
            }
            let inv = 1.0 / cfg.minibatch as f64;
            pg.scale(inv);
            cg.scale(inv);
            stats.objective *= inv;
            stats.value_loss *= inv;
            stats.ratio *= inv;
            if !pg.is_finite() {
                return Err(ApproxError::NonFiniteGradient.into());
            }
            self.policy.actor.sgd_step(&pg.actor, cfg.actor_lr, Direction::Ascend)?;
            self.policy.log_std.axpy(cfg.actor_lr, &pg.log_std, 1.0);
            self.policy.clamp_log_std();
            self.critic.sgd_step(&cg, cfg.critic_lr, Direction::Descend)?;
            diag.epochs.push(stats);
        }
        pool.clear();
        Ok(diag)
    }

    /// Writes actor, log-std and critic tensors in the dump format.
    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        approximator::write_dump_header(&mut out)?;
        self.policy.actor.write_tensors("actor.", &mut out)?;
        let ls = DMatrix::from_column_slice(self.policy.log_std.len(), 1, self.policy.log_std.as_slice());
        approximator::write_tensor(&mut out, "actor.log_std", &ls)?;
        self.critic.write_tensors("critic.", &mut out)
    }

    pub fn load<R: BufRead>(input: R, config: PpoConfig) -> Result<Self, PpoError> {
        let tensors = approximator::read_tensors(input)?;
        let actor = DenseNetwork::from_tensors("actor.", &tensors)?;
        let critic = DenseNetwork::from_tensors("critic.", &tensors)?;
        let ls = tensors
            .get("actor.log_std")
            .ok_or_else(|| ApproxError::MissingTensor("actor.log_std".into()))?;
        if ls.len() != actor.output_size() {
            return Err(ApproxError::Parse {
                line: 0,
                message: format!("actor.log_std has {} entries, actor outputs {}", ls.len(), actor.output_size()),
            }
            .into());
        }
        Ok(Self {
            policy: GaussianPolicy {
                actor,
                log_std: DVector::from_column_slice(ls.as_slice()),
            },
            critic,
            config,
        })
    }
}
