//! Energy-efficiency optimization for rate-splitting, IRS-assisted integrated
//! sensing and communication, with a PPO agent and reference policies.

pub mod approximator;
pub mod baselines;
pub mod beamforming;
pub mod channel;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod ppo;
pub mod trace;

pub use beamforming::{AccessScheme, ActionLayout, RawAction};
pub use channel::{ChannelModel, ChannelRealization, FadingConfig};
pub use experiment::{ExperimentConfig, PolicyKind};
pub use geometry::{SceneGeometry, SceneLayout};
pub use metrics::{Decision, LinkMetrics, PowerModel, QosThresholds, SystemModel};
pub use ppo::{EnvConfig, IsacEnv, PpoConfig, PpoLearner};
pub use trace::{EpisodeSummary, TrainingTrace};
