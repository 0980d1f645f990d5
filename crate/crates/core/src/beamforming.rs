//! Maps raw agent logits onto a feasible [`Decision`].
//!
//! Beam directions are closed-form (sum-channel MRT for the common stream,
//! ZF for the private streams, cascaded-target MRT for the radar stream and
//! a matched filter for the echo receiver); the logits only set stream
//! powers, common-rate shares and the quantized IRS phases.

use std::f64::consts::TAU;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelRealization;
use crate::metrics::{self, Decision, MetricsError, SystemModel};

/// Largest condition number of Γ for which ZF is attempted.
pub const ZF_CONDITION_LIMIT: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamformingError {
    #[error("ZF infeasible: {0}")]
    ZfInfeasible(String),
    #[error("{0} channel is zero")]
    ZeroChannel(&'static str),
    #[error("action has {got} logits, expected {expected}")]
    ActionLength { expected: usize, got: usize },
    #[error("action logit {index} is not finite")]
    NonFiniteLogit { index: usize },
    #[error("phase quantization needs 1..=16 bits, got {0}")]
    Bits(u32),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Multiple-access scheme of the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessScheme {
    /// Rate splitting: one common stream plus K private streams.
    #[default]
    Rsma,
    /// Private streams only; no common stream and no common-rate logits.
    Sdma,
}

impl std::fmt::Display for AccessScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AccessScheme::Rsma => "rsma",
            AccessScheme::Sdma => "sdma",
        })
    }
}

/// Index layout of the raw action vector.
///
/// RSMA order: K common-rate logits, K private-power logits, the common-power
/// logit, the radar-power logit, N phase logits and the receive-beamformer
/// logit (2K + N + 3 in total). SDMA drops the common-rate block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionLayout {
    pub users: usize,
    pub elements: usize,
    pub scheme: AccessScheme,
}

impl ActionLayout {
    pub fn new(users: usize, elements: usize, scheme: AccessScheme) -> Self {
        Self { users, elements, scheme }
    }

    fn rate_block(&self) -> usize {
        match self.scheme {
            AccessScheme::Rsma => self.users,
            AccessScheme::Sdma => 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rate_block() + self.users + self.elements + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn common_rates(&self) -> Option<Range<usize>> {
        (self.scheme == AccessScheme::Rsma).then_some(0..self.users)
    }

    pub fn private_powers(&self) -> Range<usize> {
        let start = self.rate_block();
        start..start + self.users
    }

    pub fn common_power(&self) -> usize {
        self.rate_block() + self.users
    }

    pub fn radar_power(&self) -> usize {
        self.common_power() + 1
    }

    pub fn phases(&self) -> Range<usize> {
        let start = self.radar_power() + 1;
        start..start + self.elements
    }

    /// Consumed for cardinality only; the receiver is closed-form.
    pub fn receive(&self) -> usize {
        self.phases().end
    }
}

/// Raw, unbounded agent output ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAction(pub Vec<f64>);

impl RawAction {
    pub fn zeros(layout: &ActionLayout) -> Self {
        RawAction(vec![0.0; layout.len()])
    }

    pub fn check(&self, layout: &ActionLayout) -> Result<(), BeamformingError> {
        if self.0.len() != layout.len() {
            return Err(BeamformingError::ActionLength {
                expected: layout.len(),
                got: self.0.len(),
            });
        }
        match self.0.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(BeamformingError::NonFiniteLogit { index }),
            None => Ok(()),
        }
    }
}

/// Uniform B-bit phase grid {0, Δφ, …, (2^B − 1)Δφ} with Δφ = 2π / 2^B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCodebook {
    bits: u32,
}

impl PhaseCodebook {
    pub fn new(bits: u32) -> Result<Self, BeamformingError> {
        if !(1..=16).contains(&bits) {
            return Err(BeamformingError::Bits(bits));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn level_count(&self) -> usize {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        TAU / self.level_count() as f64
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.level_count()).map(|i| i as f64 * self.step()).collect()
    }

    /// Whether `phase` is exactly one of the grid levels.
    pub fn contains(&self, phase: f64) -> bool {
        self.levels().contains(&phase)
    }
}

/// Amplitude 0.5·√P_max·(tanh ξ + 1) ∈ [0, √P_max].
pub fn decode_power(logit: f64, max_power: f64) -> f64 {
    0.5 * max_power.sqrt() * (logit.tanh() + 1.0)
}

/// C_k = 0.5·min_i R_i^(c)·(tanh ξ_k + 1).
pub fn decode_common_rates(logits: &[f64], rate_common: &[f64]) -> Vec<f64> {
    let min_rate = rate_common.iter().copied().fold(f64::INFINITY, f64::min);
    let min_rate = if min_rate.is_finite() { min_rate } else { 0.0 };
    logits.iter().map(|x| 0.5 * min_rate * (x.tanh() + 1.0)).collect()
}

/// Continuous map 0.5(tanh ξ + 1)(2^B − 1)Δφ snapped to the nearest grid
/// level; a value exactly between two levels goes to the lower one.
pub fn decode_phases(logits: &[f64], codebook: &PhaseCodebook) -> Vec<f64> {
    let top = (codebook.level_count() - 1) as f64;
    logits
        .iter()
        .map(|x| {
            let position = 0.5 * (x.tanh() + 1.0) * top;
            let index = (position - 0.5).ceil().clamp(0.0, top);
            index * codebook.step()
        })
        .collect()
}

fn normalized(v: DVector<Complex64>, what: &'static str) -> Result<DVector<Complex64>, BeamformingError> {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(BeamformingError::ZeroChannel(what));
    }
    Ok(v / Complex64::new(norm, 0.0))
}

/// Unit ZF directions: normalized columns of Γᴴ(ΓΓᴴ)⁻¹ (M × K).
pub fn zf_private_directions(gamma: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, BeamformingError> {
    let (k, m) = gamma.shape();
    if k > m {
        return Err(BeamformingError::ZfInfeasible(format!("{k} users exceed {m} antennas")));
    }
    let sv = gamma.clone().svd(false, false).singular_values;
    let largest = sv.max();
    let smallest = sv.min();
    if !(largest > 0.0) || smallest * ZF_CONDITION_LIMIT < largest {
        return Err(BeamformingError::ZfInfeasible(format!(
            "cascaded channel is rank deficient (singular values {smallest:e}..{largest:e})"
        )));
    }
    let gram = gamma * gamma.adjoint();
    let gram_inv = gram
        .cholesky()
        .ok_or_else(|| BeamformingError::ZfInfeasible("Gram matrix not positive definite".into()))?
        .inverse();
    let mut xi = gamma.adjoint() * gram_inv;
    for mut col in xi.column_iter_mut() {
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
    }
    Ok(xi)
}

/// Per-user MRT directions F_kᴴ / ‖F_k‖ (M × K).
pub fn mrt_private_directions(gamma: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, BeamformingError> {
    let mut out = gamma.adjoint();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(BeamformingError::ZeroChannel("user cascaded"));
        }
        col /= Complex64::new(norm, 0.0);
    }
    Ok(out)
}

/// Σ F_iᴴ / ‖Σ F_iᴴ‖.
pub fn mrt_common_direction(gamma: &DMatrix<Complex64>) -> Result<DVector<Complex64>, BeamformingError> {
    let sum: DVector<Complex64> = gamma.adjoint().column_sum();
    normalized(sum, "sum cascaded")
}

/// a / ‖a‖ with a = Gᴴ Φ h_r.
pub fn mrt_radar_direction(
    g: &DMatrix<Complex64>,
    phases: &[f64],
    h_target: &DVector<Complex64>,
) -> Result<DVector<Complex64>, BeamformingError> {
    normalized(metrics::echo_steering(g, phases, h_target)?, "cascaded target")
}

/// u = F̂ v_r / ‖F̂ v_r‖.
pub fn matched_receive_beamformer(
    fhat: &DMatrix<Complex64>,
    radar: &DVector<Complex64>,
) -> Result<DVector<Complex64>, BeamformingError> {
    normalized(fhat * radar, "echo")
}

/// A decoded decision together with the cascaded channel Γ it was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub decision: Decision,
    pub gamma: DMatrix<Complex64>,
    /// True when Γ was too ill-conditioned for ZF and MRT was used instead.
    pub zf_fallback: bool,
}

/// Builds the full decision from logits: phases, then powers and beam
/// directions, then the common-rate split from the resulting common rates.
pub fn assemble(
    action: &RawAction,
    layout: &ActionLayout,
    channel: &ChannelRealization,
    system: &SystemModel,
    codebook: &PhaseCodebook,
) -> Result<Assembly, BeamformingError> {
    action.check(layout)?;
    let xi = &action.0;
    let p_max = system.power.max_power;

    let phases = decode_phases(&xi[layout.phases()], codebook);
    let gamma = metrics::cascade_users(&channel.h_users, &phases, &channel.g)?;

    let (private_dirs, zf_fallback) = match zf_private_directions(&gamma) {
        Ok(dirs) => (dirs, false),
        Err(BeamformingError::ZfInfeasible(reason)) => {
            log::warn!("{reason}; falling back to MRT private beams");
            (mrt_private_directions(&gamma)?, true)
        }
        Err(e) => return Err(e),
    };
    let mut private = private_dirs;
    for (k, i) in layout.private_powers().enumerate() {
        let amp = decode_power(xi[i], p_max);
        private.column_mut(k).scale_mut(amp);
    }

    let m = channel.g.ncols();
    let common = match layout.scheme {
        AccessScheme::Rsma => {
            let amp = decode_power(xi[layout.common_power()], p_max);
            mrt_common_direction(&gamma)? * Complex64::new(amp, 0.0)
        }
        AccessScheme::Sdma => DVector::zeros(m),
    };

    let radar_dir = mrt_radar_direction(&channel.g, &phases, &channel.h_target)?;
    let radar_amp = decode_power(xi[layout.radar_power()], p_max);
    let radar = &radar_dir * Complex64::new(radar_amp, 0.0);
    // With v_r silent every receiver gives zero SNR; keep the direction the
    // matched filter converges to (F̂ v_r is collinear with a).
    let receive = if radar_amp > 0.0 {
        let fhat = metrics::cascade_echo(&channel.g, &phases, &channel.h_target)?;
        matched_receive_beamformer(&fhat, &radar)?
    } else {
        radar_dir
    };

    let users = layout.users;
    let mut decision = Decision {
        common,
        private,
        radar,
        receive,
        common_rates: vec![0.0; users],
        phases,
    };
    if let Some(range) = layout.common_rates() {
        let sinr_c = metrics::sinr_common(
            &gamma,
            &decision,
            system.noise_user,
            system.power.chi,
            system.sinr,
        )?;
        decision.common_rates = decode_common_rates(&xi[range], &metrics::rates(&sinr_c));
    }
    Ok(Assembly {
        decision,
        gamma,
        zf_fallback,
    })
}
