use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::approximator::{ApproxError, DenseNetwork, ForwardTrace, Gradients};

/// Bounds applied to every log-std entry after an update.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

/// Network input for an encoded state: sign(x)·ln(1 + |x|) per entry.
/// SINRs span several decades, this keeps them on the scale of the logits.
pub fn features(state: &[f64]) -> Vec<f64> {
    state.iter().map(|&x| x.signum() * x.abs().ln_1p()).collect()
}

/// Diagonal Gaussian over raw actions. The mean is the actor output, the
/// log standard deviation is a free parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub actor: DenseNetwork,
    pub log_std: DVector<f64>,
}

impl GaussianPolicy {
    pub fn new(actor: DenseNetwork, log_std_init: f64) -> Self {
        let n = actor.output_size();
        Self {
            actor,
            log_std: DVector::from_element(n, log_std_init),
        }
    }

    pub fn action_len(&self) -> usize {
        self.log_std.len()
    }

    pub fn mean(&self, features: &[f64]) -> Result<DVector<f64>, ApproxError> {
        self.actor.forward(features)
    }

    pub fn sample<R: Rng + ?Sized>(&self, features: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64), ApproxError> {
        let mean = self.mean(features)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(self.log_std.iter())
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = log_density(&mean, &self.log_std, &action);
        Ok((action, lp))
    }

    pub fn log_prob(&self, features: &[f64], action: &[f64]) -> Result<f64, ApproxError> {
        Ok(log_density(&self.mean(features)?, &self.log_std, action))
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }

    pub fn clamp_log_std(&mut self) {
        self.log_std.apply(|v| *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }
}

/// Σ_i −(a_i − m_i)²/(2σ_i²) − ln σ_i − ½ ln 2π.
pub fn log_density(mean: &DVector<f64>, log_std: &DVector<f64>, action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std.iter())
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// Gradient accumulator for a policy: actor parameters plus log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradients {
    pub actor: Gradients,
    pub log_std: DVector<f64>,
}

impl PolicyGradients {
    pub fn zeros_like(policy: &GaussianPolicy) -> Self {
        Self {
            actor: Gradients::zeros_like(&policy.actor),
            log_std: DVector::zeros(policy.log_std.len()),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.actor.scale(factor);
        self.log_std *= factor;
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }
}

impl GaussianPolicy {
    /// Adds `weight · ∇ log π(action | features)` into `grads`, given the
    /// actor's forward trace for `features`.
    pub fn accumulate_log_prob_grad(
        &self,
        trace: &ForwardTrace,
        action: &[f64],
        weight: f64,
        grads: &mut PolicyGradients,
    ) -> Result<(), ApproxError> {
        let mean = trace.output();
        let mut upstream = vec![0.0; mean.len()];
        for i in 0..mean.len() {
            let var = (2.0 * self.log_std[i]).exp();
            let diff = action[i] - mean[i];
            upstream[i] = weight * diff / var;
            grads.log_std[i] += weight * (diff * diff / var - 1.0);
        }
        self.actor.accumulate_backward(trace, &upstream, &mut grads.actor)
    }
}
