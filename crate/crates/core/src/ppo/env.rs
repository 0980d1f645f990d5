//! The MDP seen by the agents: one step decodes a raw action into a decision,
//! scores it on the current channel, then advances the channel by Δt.
//!
//! Encoded state: previous raw action, per-user common SINRs, per-user
//! private SINRs, previous reward. Length 4K + N + 4 for RSMA and
//! 3K + N + 4 for SDMA.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{self, AccessScheme, ActionLayout, BeamformingError, PhaseCodebook, RawAction};
use crate::channel::{ChannelError, ChannelModel, ChannelRealization, FadingConfig};
use crate::geometry::{Mobility, Motion, SceneGeometry, SceneLayout};
use crate::metrics::{self, Decision, LinkMetrics, MetricsError, PowerModel, QosThresholds, SinrOptions, SystemModel};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid environment configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub geometry: SceneGeometry,
    pub mobility: Mobility,
    pub fading: FadingConfig,
    pub power: PowerModel,
    pub qos: QosThresholds,
    pub sinr: SinrOptions,
    pub phase_bits: u32,
    pub scheme: AccessScheme,
    /// Δt between steps, seconds.
    pub step_interval: f64,
}

/// Default user and target motion, m/s and radians.
pub const DEFAULT_USER_MOTION: Motion = Motion { speed: 1.0, angle: 0.0 };
pub const DEFAULT_TARGET_MOTION: Motion = Motion { speed: 5.0, angle: 0.0 };

impl Default for EnvConfig {
    /// Two users, four BS antennas, a 3×3 IRS at 2.4 GHz, 2-bit phases,
    /// R_th = 4 bit/s/Hz, SNR_th = 0 dB, Δt = 1 ms.
    fn default() -> Self {
        let fading = FadingConfig::default();
        let geometry = SceneLayout::default()
            .resolve(fading.wavelength())
            .expect("default layout is valid");
        let users = geometry.users;
        Self {
            mobility: Mobility::uniform(users, DEFAULT_USER_MOTION, DEFAULT_TARGET_MOTION),
            geometry,
            fading,
            power: PowerModel::default(),
            qos: QosThresholds::uniform(users, 4.0, 1.0),
            sinr: SinrOptions::default(),
            phase_bits: 2,
            scheme: AccessScheme::Rsma,
            step_interval: 1e-3,
        }
    }
}

impl EnvConfig {
    /// Same environment with a different multiple-access scheme.
    pub fn with_scheme(mut self, scheme: AccessScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn layout(&self) -> ActionLayout {
        ActionLayout::new(self.geometry.users, self.geometry.irs_elements, self.scheme)
    }

    pub fn system(&self) -> SystemModel {
        SystemModel {
            power: self.power.clone(),
            qos: self.qos.clone(),
            noise_user: self.fading.noise_user,
            noise_radar: self.fading.noise_radar,
            sinr: self.sinr,
        }
    }

    pub fn state_len(&self) -> usize {
        self.layout().len() + 2 * self.geometry.users + 1
    }
}

/// Encoded observation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState(pub Vec<f64>);

impl EnvState {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Outcome of scoring one action on the current channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub decision: Decision,
    pub metrics: LinkMetrics,
    /// The action could not be decoded and the silent decision was scored instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: f64,
    pub metrics: LinkMetrics,
    pub fallback: bool,
}

/// Sole owner of one channel state and its evolution.
#[derive(Debug, Clone)]
pub struct IsacEnv {
    config: EnvConfig,
    model: ChannelModel,
    system: SystemModel,
    layout: ActionLayout,
    codebook: PhaseCodebook,
    channel: ChannelRealization,
    prev_action: Vec<f64>,
    prev_reward: f64,
    sinr_common: Vec<f64>,
    sinr_private: Vec<f64>,
    steps: usize,
}

impl IsacEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        if !(config.step_interval >= 0.0) {
            return Err(EnvError::Config(format!("step_interval {} < 0", config.step_interval)));
        }
        if config.qos.rate_thresholds.len() != config.geometry.users {
            return Err(EnvError::Config(format!(
                "{} rate thresholds for {} users",
                config.qos.rate_thresholds.len(),
                config.geometry.users
            )));
        }
        if !(config.power.amplifier_efficiency >= 1.0) || !(config.power.max_power > 0.0) || !(config.power.static_power >= 0.0) {
            return Err(EnvError::Config("power model needs μ ≥ 1, P_max > 0, P_ST ≥ 0".into()));
        }
        let model = ChannelModel::new(&config.geometry, &config.fading, &config.mobility)?;
        let codebook = PhaseCodebook::new(config.phase_bits)?;
        let layout = config.layout();
        let system = config.system();
        let users = config.geometry.users;
        let channel = model.realize(0.0, 0);
        Ok(Self {
            prev_action: vec![0.0; layout.len()],
            config,
            model,
            system,
            layout,
            codebook,
            channel,
            prev_reward: 0.0,
            sinr_common: vec![0.0; users],
            sinr_private: vec![0.0; users],
            steps: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn action_len(&self) -> usize {
        self.layout.len()
    }

    pub fn state_len(&self) -> usize {
        self.config.state_len()
    }

    pub fn channel(&self) -> &ChannelRealization {
        &self.channel
    }

    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Starts an episode: fresh NLoS draw from `seed`, t = 0, zero previous
    /// action and reward, SINRs of the zero-logit decision.
    pub fn reset(&mut self, seed: u64) -> EnvState {
        self.channel = self.model.realize(0.0, seed);
        self.steps = 0;
        self.prev_reward = 0.0;
        self.prev_action = vec![0.0; self.layout.len()];
        let zero = RawAction::zeros(&self.layout);
        let eval = self.evaluate(&zero).expect("zero action has the layout length");
        self.sinr_common = eval.metrics.sinr_common;
        self.sinr_private = eval.metrics.sinr_private;
        self.state()
    }

    pub fn state(&self) -> EnvState {
        let mut v = Vec::with_capacity(self.state_len());
        v.extend_from_slice(&self.prev_action);
        v.extend_from_slice(&self.sinr_common);
        v.extend_from_slice(&self.sinr_private);
        v.push(self.prev_reward);
        EnvState(v)
    }

    /// Scores `action` on the current channel without advancing time.
    pub fn evaluate(&self, action: &RawAction) -> Result<Evaluation, EnvError> {
        action.check(&self.layout)?;
        let scored = beamforming::assemble(action, &self.layout, &self.channel, &self.system, &self.codebook)
            .map_err(EnvError::from)
            .and_then(|asm| {
                let m = metrics::evaluate_with_cascade(&self.channel, &asm.gamma, &asm.decision, &self.system)?;
                Ok((asm.decision, m))
            });
        match scored {
            Ok((decision, metrics)) => Ok(Evaluation {
                decision,
                metrics,
                fallback: false,
            }),
            Err(err) => {
                log::warn!("action could not be scored ({err}); using the silent decision");
                let g = &self.config.geometry;
                let decision = Decision::silent(g.bs_antennas, g.users, g.irs_elements);
                Ok(Evaluation {
                    metrics: silent_metrics(&self.channel, &decision, &self.system),
                    decision,
                    fallback: true,
                })
            }
        }
    }

    /// Applies `action`, then moves the channel forward by Δt.
    pub fn step(&mut self, action: &RawAction) -> Result<StepResult, EnvError> {
        let eval = self.evaluate(action)?;
        self.channel = self.model.advance(&self.channel, self.config.step_interval)?;
        self.steps += 1;
        self.prev_action.clone_from(&action.0);
        self.prev_reward = eval.metrics.reward;
        self.sinr_common.clone_from(&eval.metrics.sinr_common);
        self.sinr_private.clone_from(&eval.metrics.sinr_private);
        Ok(StepResult {
            state: self.state(),
            reward: eval.metrics.reward,
            metrics: eval.metrics,
            fallback: eval.fallback,
        })
    }
}

/// Metrics of the silent decision. Echo SNR is 0 since nothing is radiated.
fn silent_metrics(channel: &ChannelRealization, decision: &Decision, system: &SystemModel) -> LinkMetrics {
    let k = channel.h_users.ncols();
    let zeros = vec![0.0; k];
    let power = metrics::transmit_power(decision, &system.power);
    let snr = 0.0;
    let budgeted = metrics::budgeted_power(decision, &system.power);
    let flags = metrics::constraint_flags(&zeros, &zeros, &zeros, budgeted, snr, &system.power, &system.qos);
    LinkMetrics {
        sinr_common: zeros.clone(),
        sinr_private: zeros.clone(),
        rate_common: zeros.clone(),
        rate_private: zeros.clone(),
        common_rates: zeros,
        sum_rate: 0.0,
        power,
        energy_efficiency: 0.0,
        echo_snr: snr,
        flags,
        reward: 0.0,
    }
}
