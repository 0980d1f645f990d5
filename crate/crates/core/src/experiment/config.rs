//! Experiment configuration files.
//!
//! TOML with one table per subsystem. Physical quantities take SI numbers or
//! unit strings (`"20 dBm"`, `"2.4 GHz"`, `"0.5 lambda"`, `"5 m/s"`). Omitted
//! keys keep their defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::units::{Area, Hertz, IrsCount, LengthSpec, Meters, Radians, Ratio, Seconds, Speed, Watts};
use crate::baselines::{BaselineConfig, BaselineKind};
use crate::beamforming::AccessScheme;
use crate::channel::{FadingConfig, NlosWeight, PathLossDistance, RadarExponent};
use crate::geometry::{Mobility, Motion, SceneLayout};
use crate::metrics::{PowerBudget, PowerModel, QosThresholds, SinrOptions};
use crate::ppo::{EnvConfig, IsacEnv, PpoConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: cannot read: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse {
        path: String,
        line: Option<usize>,
        message: String,
    },
    #[error("{path}{}: `{key}`: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Invalid {
        path: String,
        line: Option<usize>,
        key: String,
        message: String,
    },
}

/// Which controller drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Ppo,
    Random,
    Greedy,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Ppo => "ppo",
            PolicyKind::Random => "random",
            PolicyKind::Greedy => "greedy",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            PolicyKind::Ppo => None,
            PolicyKind::Random => Some(BaselineKind::Random),
            PolicyKind::Greedy => Some(BaselineKind::Greedy),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ppo" => Ok(PolicyKind::Ppo),
            "random" => Ok(PolicyKind::Random),
            "greedy" => Ok(PolicyKind::Greedy),
            _ => Err(format!("unknown policy {s:?} (expected ppo, random or greedy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub bs_antennas: usize,
    pub users: usize,
    pub irs_elements: IrsCount,
    pub bs_spacing: LengthSpec,
    pub irs_spacing: LengthSpec,
    pub user_spacing: LengthSpec,
    pub bs_height: Meters,
    pub irs_height: Meters,
    pub target_height: Meters,
    pub irs_x: Meters,
    pub irs_y: Meters,
    pub user_x: Meters,
    pub target_x: Meters,
    pub target_y: Meters,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self::from(&SceneLayout::default())
    }
}

impl From<&SceneLayout> for SceneSection {
    fn from(l: &SceneLayout) -> Self {
        Self {
            bs_antennas: l.bs_antennas,
            users: l.users,
            irs_elements: IrsCount(l.irs_elements),
            bs_spacing: LengthSpec(l.bs_spacing),
            irs_spacing: LengthSpec(l.irs_spacing),
            user_spacing: LengthSpec(l.user_spacing),
            bs_height: Meters(l.bs_height),
            irs_height: Meters(l.irs_height),
            target_height: Meters(l.target_height),
            irs_x: Meters(l.irs_x),
            irs_y: Meters(l.irs_y),
            user_x: Meters(l.user_x),
            target_x: Meters(l.target_x),
            target_y: Meters(l.target_y),
        }
    }
}

impl SceneSection {
    pub fn layout(&self) -> SceneLayout {
        SceneLayout {
            bs_antennas: self.bs_antennas,
            users: self.users,
            irs_elements: self.irs_elements.0,
            bs_spacing: self.bs_spacing.0,
            irs_spacing: self.irs_spacing.0,
            user_spacing: self.user_spacing.0,
            bs_height: self.bs_height.0,
            irs_height: self.irs_height.0,
            target_height: self.target_height.0,
            irs_x: self.irs_x.0,
            irs_y: self.irs_y.0,
            user_x: self.user_x.0,
            target_x: self.target_x.0,
            target_y: self.target_y.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilitySection {
    pub user_speed: Speed,
    pub user_angle: Radians,
    pub target_speed: Speed,
    pub target_angle: Radians,
}

impl Default for MobilitySection {
    fn default() -> Self {
        use crate::ppo::{DEFAULT_TARGET_MOTION as T, DEFAULT_USER_MOTION as U};
        Self {
            user_speed: Speed(U.speed),
            user_angle: Radians(U.angle),
            target_speed: Speed(T.speed),
            target_angle: Radians(T.angle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub carrier_frequency: Hertz,
    pub rician_bs_irs: Ratio,
    pub rician_irs_user: Ratio,
    pub rician_irs_target: Ratio,
    pub rcs: Area,
    pub nlos_weight: NlosWeight,
    pub path_loss: PathLossDistance,
    pub radar_exponent: RadarExponent,
    pub noise_user: Watts,
    pub noise_radar: Watts,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let f = FadingConfig::default();
        Self {
            carrier_frequency: Hertz(f.carrier_frequency),
            rician_bs_irs: Ratio(f.rician_bs_irs),
            rician_irs_user: Ratio(f.rician_irs_user),
            rician_irs_target: Ratio(f.rician_irs_target),
            rcs: Area(f.rcs),
            nlos_weight: f.nlos_weight,
            path_loss: f.path_loss,
            radar_exponent: f.radar_exponent,
            noise_user: Watts(f.noise_user),
            noise_radar: Watts(f.noise_radar),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub amplifier_efficiency: f64,
    pub chi: bool,
    pub static_power: Watts,
    pub max_power: Watts,
    pub budget: PowerBudget,
}

impl Default for PowerSection {
    fn default() -> Self {
        let p = PowerModel::default();
        Self {
            amplifier_efficiency: p.amplifier_efficiency,
            chi: p.chi,
            static_power: Watts(p.static_power),
            max_power: Watts(p.max_power),
            budget: p.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosSection {
    /// bit/s/Hz, applied to every user.
    pub rate_threshold: f64,
    pub snr_threshold: Ratio,
}

impl Default for QosSection {
    fn default() -> Self {
        Self {
            rate_threshold: 4.0,
            snr_threshold: Ratio(1.0),
        }
    }
}

/// Axes swept in a Cartesian product; an empty axis keeps the base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub bs_antennas: Vec<usize>,
    pub irs_elements: Vec<IrsCount>,
    pub carrier_frequency: Vec<Hertz>,
    pub rcs: Vec<Area>,
    /// Sets all three Rician factors at once.
    pub rician: Vec<Ratio>,
    pub scheme: Vec<AccessScheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicyKind>,
    pub scheme: AccessScheme,
    pub phase_bits: u32,
    pub step_interval: Seconds,
    pub scene: SceneSection,
    pub mobility: MobilitySection,
    pub channel: ChannelSection,
    pub power: PowerSection,
    pub qos: QosSection,
    pub ppo: PpoConfig,
    pub baseline: BaselineConfig,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
            policies: vec![PolicyKind::Ppo, PolicyKind::Random, PolicyKind::Greedy],
            scheme: AccessScheme::Rsma,
            phase_bits: 2,
            step_interval: Seconds(1e-3),
            scene: SceneSection::default(),
            mobility: MobilitySection::default(),
            channel: ChannelSection::default(),
            power: PowerSection::default(),
            qos: QosSection::default(),
            ppo: PpoConfig::default(),
            baseline: BaselineConfig::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// One concrete combination of swept values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bs_antennas: usize,
    pub irs_elements: usize,
    pub carrier_frequency: f64,
    pub rcs: f64,
    /// `None` keeps the per-link factors of the base configuration.
    pub rician: Option<f64>,
    pub scheme: AccessScheme,
}

impl SweepPoint {
    /// Filesystem-safe identifier, e.g. `M4_N9_f2.4GHz_rcs20_rsma`.
    pub fn id(&self) -> String {
        let mut s = format!(
            "M{}_N{}_f{}GHz_rcs{}",
            self.bs_antennas,
            self.irs_elements,
            self.carrier_frequency / 1e9,
            self.rcs
        );
        if let Some(k) = self.rician {
            s.push_str(&format!("_K{k}"));
        }
        s.push('_');
        s.push_str(&self.scheme.to_string());
        s
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// First line whose key matches the last component of a dotted key path.
fn line_of_key(src: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    src.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(leaf)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&src, &path.display().to_string())
    }

    /// Parses and validates. `origin` names the source in error messages.
    pub fn from_toml_str(src: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_of(src, s.start));
            let key = line
                .and_then(|l| src.lines().nth(l - 1))
                .and_then(|text| text.split_once('='))
                .map(|(k, _)| k.trim())
                .filter(|k| !k.is_empty() && !k.starts_with('['));
            ConfigError::Parse {
                path: origin.to_string(),
                line,
                message: match key {
                    Some(k) => format!("`{k}`: {}", e.message()),
                    None => e.message().to_string(),
                },
            }
        })?;
        cfg.validate().map_err(|(key, message)| ConfigError::Invalid {
            path: origin.to_string(),
            line: line_of_key(src, &key),
            key,
            message,
        })?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks everything that can be checked without running: (key, message).
    pub fn validate(&self) -> Result<(), (String, String)> {
        let bad = |k: &str, m: String| Err((k.to_string(), m));
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required".into());
        }
        if self.policies.is_empty() {
            return bad("policies", "at least one policy is required".into());
        }
        if self.scene.users == 0 {
            return bad("scene.users", "at least one user is required".into());
        }
        if self.scene.bs_antennas < self.scene.users {
            return bad(
                "scene.bs_antennas",
                format!("M = {} is below K = {}", self.scene.bs_antennas, self.scene.users),
            );
        }
        if !(self.power.amplifier_efficiency >= 1.0) {
            return bad("power.amplifier_efficiency", "must be at least 1".into());
        }
        if !(self.power.max_power.0 > 0.0) {
            return bad("power.max_power", "must be positive".into());
        }
        if !(self.power.static_power.0 >= 0.0) {
            return bad("power.static_power", "must be non-negative".into());
        }
        if !(self.qos.rate_threshold >= 0.0) {
            return bad("qos.rate_threshold", "must be non-negative".into());
        }
        if !(self.step_interval.0 > 0.0) {
            return bad("step_interval", "must be positive".into());
        }
        if self.phase_bits == 0 || self.phase_bits > 16 {
            return bad("phase_bits", format!("must be in 1..=16, got {}", self.phase_bits));
        }
        if let Some(&m) = self.sweep.bs_antennas.iter().find(|&&m| m < self.scene.users) {
            return bad("sweep.bs_antennas", format!("M = {m} is below K = {}", self.scene.users));
        }
        self.ppo.validate().map_err(|e| ("ppo".to_string(), e.to_string()))?;
        if self.policies.contains(&PolicyKind::Greedy) && self.baseline.greedy_candidates == 0 {
            return bad("baseline.greedy_candidates", "must be at least 1".into());
        }
        for p in self.points() {
            let cfg = self.env_config(&p).map_err(|e| (format!("sweep point {}", p.id()), e))?;
            IsacEnv::new(cfg).map_err(|e| (format!("sweep point {}", p.id()), e.to_string()))?;
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes, in (M, N, f_c, σ, K, scheme) order.
    pub fn points(&self) -> Vec<SweepPoint> {
        fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let s = &self.sweep;
        let ms = axis(&s.bs_antennas, self.scene.bs_antennas);
        let ns = axis(&s.irs_elements.iter().map(|n| n.0).collect::<Vec<_>>(), self.scene.irs_elements.0);
        let fs = axis(&s.carrier_frequency.iter().map(|f| f.0).collect::<Vec<_>>(), self.channel.carrier_frequency.0);
        let rs = axis(&s.rcs.iter().map(|r| r.0).collect::<Vec<_>>(), self.channel.rcs.0);
        let ks = axis(&s.rician.iter().map(|k| Some(k.0)).collect::<Vec<_>>(), None);
        let ss = axis(&s.scheme, self.scheme);
        let mut out = Vec::new();
        for &bs_antennas in &ms {
            for &irs_elements in &ns {
                for &carrier_frequency in &fs {
                    for &rcs in &rs {
                        for &rician in &ks {
                            for &scheme in &ss {
                                out.push(SweepPoint {
                                    bs_antennas,
                                    irs_elements,
                                    carrier_frequency,
                                    rcs,
                                    rician,
                                    scheme,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Environment at the base point (no sweep overrides).
    pub fn base_point(&self) -> SweepPoint {
        SweepPoint {
            bs_antennas: self.scene.bs_antennas,
            irs_elements: self.scene.irs_elements.0,
            carrier_frequency: self.channel.carrier_frequency.0,
            rcs: self.channel.rcs.0,
            rician: None,
            scheme: self.scheme,
        }
    }

    pub fn env_config(&self, p: &SweepPoint) -> Result<EnvConfig, String> {
        let c = &self.channel;
        let (k1, k2, k3) = match p.rician {
            Some(k) => (k, k, k),
            None => (c.rician_bs_irs.0, c.rician_irs_user.0, c.rician_irs_target.0),
        };
        let fading = FadingConfig {
            carrier_frequency: p.carrier_frequency,
            rician_bs_irs: k1,
            rician_irs_user: k2,
            rician_irs_target: k3,
            rcs: p.rcs,
            nlos_weight: c.nlos_weight,
            path_loss: c.path_loss,
            radar_exponent: c.radar_exponent,
            noise_user: c.noise_user.0,
            noise_radar: c.noise_radar.0,
        };
        fading.validate().map_err(|e| e.to_string())?;
        let mut layout = self.scene.layout();
        layout.bs_antennas = p.bs_antennas;
        layout.irs_elements = p.irs_elements;
        let geometry = layout.resolve(fading.wavelength()).map_err(|e| e.to_string())?;
        let users = geometry.users;
        let m = &self.mobility;
        Ok(EnvConfig {
            geometry,
            mobility: Mobility::uniform(
                users,
                Motion {
                    speed: m.user_speed.0,
                    angle: m.user_angle.0,
                },
                Motion {
                    speed: m.target_speed.0,
                    angle: m.target_angle.0,
                },
            ),
            fading,
            power: PowerModel {
                amplifier_efficiency: self.power.amplifier_efficiency,
                chi: self.power.chi,
                static_power: self.power.static_power.0,
                max_power: self.power.max_power.0,
                budget: self.power.budget,
            },
            qos: QosThresholds::uniform(users, self.qos.rate_threshold, self.qos.snr_threshold.0),
            sinr: SinrOptions::default(),
            phase_bits: self.phase_bits,
            scheme: p.scheme,
            step_interval: self.step_interval.0,
        })
    }
}
