//! System metrics for one channel realization and one transmit design:
//! cascaded channels, RSMA SINRs and rates, consumed power, energy
//! efficiency, radar echo SNR, constraint flags and the gated reward.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelRealization;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("receive beamformer is zero")]
    ZeroReceiver,
    #[error("consumed power must be positive, got {0}")]
    NonPositivePower(f64),
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), MetricsError> {
    if expected == got {
        Ok(())
    } else {
        Err(MetricsError::Dimension { what, expected, got })
    }
}

/// Which power the transmit budget `P_max` constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerBudget {
    /// Radiated power `‖v_c‖² + Σ‖v_k‖² + ‖v_r‖²`.
    Radiated,
    /// Total consumed power `P`, including amplifier losses and static power.
    Total,
    /// `P − P_ST`: amplifier-scaled stream power with the χ-gated radar term.
    #[default]
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// μ ≥ 1.
    pub amplifier_efficiency: f64,
    /// χ: whether the radar sequence still interferes at the users (cannot be
    /// SIC-removed). Off by default: the radar sequence is known to the users.
    pub chi: bool,
    /// P_ST in W.
    pub static_power: f64,
    /// P_max in W.
    pub max_power: f64,
    pub budget: PowerBudget,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            amplifier_efficiency: 1.0,
            chi: false,
            static_power: 1.0,
            max_power: 0.1,
            budget: PowerBudget::default(),
        }
    }
}

impl PowerModel {
    fn chi_weight(&self) -> f64 {
        if self.chi {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosThresholds {
    /// R_k^(th) per user, bit/s/Hz.
    pub rate_thresholds: Vec<f64>,
    /// Linear echo SNR threshold.
    pub snr_threshold: f64,
}

impl QosThresholds {
    pub fn uniform(users: usize, rate_threshold: f64, snr_threshold: f64) -> Self {
        Self {
            rate_thresholds: vec![rate_threshold; users],
            snr_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinrOptions {
    /// Count user k's own private stream as interference to its common stream.
    pub common_counts_own_private: bool,
}

impl Default for SinrOptions {
    fn default() -> Self {
        Self {
            common_counts_own_private: true,
        }
    }
}

/// Everything needed to score a decision besides the channel itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub power: PowerModel,
    pub qos: QosThresholds,
    /// δ_k² in W.
    pub noise_user: f64,
    /// δ_r² in W.
    pub noise_radar: f64,
    pub sinr: SinrOptions,
}

/// Complete transmit/receive design for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// v_c (M).
    pub common: DVector<Complex64>,
    /// Column k is v_k (M × K).
    pub private: DMatrix<Complex64>,
    /// v_r (M).
    pub radar: DVector<Complex64>,
    /// u (M).
    pub receive: DVector<Complex64>,
    /// C_k, the common rate assigned to each user.
    pub common_rates: Vec<f64>,
    /// φ_n in [0, 2π).
    pub phases: Vec<f64>,
}

impl Decision {
    /// All beamformers zero, phases zero, receiver on the first antenna.
    pub fn silent(antennas: usize, users: usize, elements: usize) -> Self {
        let mut receive = DVector::zeros(antennas);
        receive[0] = Complex64::new(1.0, 0.0);
        Self {
            common: DVector::zeros(antennas),
            private: DMatrix::zeros(antennas, users),
            radar: DVector::zeros(antennas),
            receive,
            common_rates: vec![0.0; users],
            phases: vec![0.0; elements],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintFlags {
    /// Σ C_k ≤ min_k R_k^(c).
    pub common: bool,
    /// C_k + R_k^(p) ≥ R_k^(th) for every user.
    pub qos: bool,
    /// Budgeted power ≤ P_max.
    pub power: bool,
    /// Echo SNR ≥ threshold.
    pub echo: bool,
}

impl ConstraintFlags {
    pub fn all(&self) -> bool {
        self.common && self.qos && self.power && self.echo
    }

    pub fn product(&self) -> f64 {
        [self.common, self.qos, self.power, self.echo]
            .iter()
            .map(|&f| if f { 1.0 } else { 0.0 })
            .product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub sinr_common: Vec<f64>,
    pub sinr_private: Vec<f64>,
    pub rate_common: Vec<f64>,
    pub rate_private: Vec<f64>,
    pub common_rates: Vec<f64>,
    pub sum_rate: f64,
    pub power: f64,
    pub energy_efficiency: f64,
    pub echo_snr: f64,
    pub flags: ConstraintFlags,
    pub reward: f64,
}

fn phase_factors(phases: &[f64]) -> impl Iterator<Item = Complex64> + '_ {
    phases.iter().map(|&p| Complex64::from_polar(1.0, p))
}

/// F_k = h_kᴴ Φ G, a length-M row.
pub fn cascade_user(
    h_k: &DVector<Complex64>,
    phases: &[f64],
    g: &DMatrix<Complex64>,
) -> Result<RowDVector<Complex64>, MetricsError> {
    check_len("h_k", g.nrows(), h_k.len())?;
    check_len("phases", g.nrows(), phases.len())?;
    let mut out = RowDVector::zeros(g.ncols());
    for (n, rot) in phase_factors(phases).enumerate() {
        let w = h_k[n].conj() * rot;
        for m in 0..g.ncols() {
            out[m] += w * g[(n, m)];
        }
    }
    Ok(out)
}

/// Γ, the K × M stack of cascaded user channels (row k is F_k).
pub fn cascade_users(
    h_users: &DMatrix<Complex64>,
    phases: &[f64],
    g: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>, MetricsError> {
    check_len("h_users rows", g.nrows(), h_users.nrows())?;
    let mut gamma = DMatrix::zeros(h_users.ncols(), g.ncols());
    for k in 0..h_users.ncols() {
        let row = cascade_user(&h_users.column(k).into_owned(), phases, g)?;
        gamma.set_row(k, &row);
    }
    Ok(gamma)
}

/// a = Gᴴ Φ h_r, the cascaded BS→target steering vector (length M).
pub fn echo_steering(
    g: &DMatrix<Complex64>,
    phases: &[f64],
    h_target: &DVector<Complex64>,
) -> Result<DVector<Complex64>, MetricsError> {
    check_len("h_r", g.nrows(), h_target.len())?;
    check_len("phases", g.nrows(), phases.len())?;
    let mut a = DVector::zeros(g.ncols());
    for (n, rot) in phase_factors(phases).enumerate() {
        let w = rot * h_target[n];
        for m in 0..g.ncols() {
            a[m] += g[(n, m)].conj() * w;
        }
    }
    Ok(a)
}

/// F̂ = Gᴴ Φ h_r h_rᴴ Φᴴ G = a aᴴ (M × M, Hermitian, rank ≤ 1).
pub fn cascade_echo(
    g: &DMatrix<Complex64>,
    phases: &[f64],
    h_target: &DVector<Complex64>,
) -> Result<DMatrix<Complex64>, MetricsError> {
    let a = echo_steering(g, phases, h_target)?;
    Ok(&a * a.adjoint())
}

fn gain(f: &RowDVector<Complex64>, v: impl Iterator<Item = Complex64>) -> f64 {
    f.iter().zip(v).map(|(a, b)| a * b).sum::<Complex64>().norm_sqr()
}

fn check_decision(gamma: &DMatrix<Complex64>, d: &Decision) -> Result<(), MetricsError> {
    let m = gamma.ncols();
    check_len("v_c", m, d.common.len())?;
    check_len("v_r", m, d.radar.len())?;
    check_len("private rows", m, d.private.nrows())?;
    check_len("private columns", gamma.nrows(), d.private.ncols())
}

/// Per-user |F_k v_c|², |F_k v_i|² (i over users) and |F_k v_r|².
struct Gains {
    common: Vec<f64>,
    private: DMatrix<f64>,
    radar: Vec<f64>,
}

fn stream_gains(gamma: &DMatrix<Complex64>, d: &Decision) -> Result<Gains, MetricsError> {
    check_decision(gamma, d)?;
    let k_count = gamma.nrows();
    let mut common = Vec::with_capacity(k_count);
    let mut radar = Vec::with_capacity(k_count);
    let mut private = DMatrix::zeros(k_count, k_count);
    for k in 0..k_count {
        let f = gamma.row(k).into_owned();
        common.push(gain(&f, d.common.iter().copied()));
        radar.push(gain(&f, d.radar.iter().copied()));
        for i in 0..k_count {
            private[(k, i)] = gain(&f, d.private.column(i).iter().copied());
        }
    }
    Ok(Gains { common, private, radar })
}

/// Common-stream SINR at each user. Every private stream is interference;
/// `options.common_counts_own_private = false` drops the user's own one.
pub fn sinr_common(
    gamma: &DMatrix<Complex64>,
    decision: &Decision,
    noise: f64,
    chi: bool,
    options: SinrOptions,
) -> Result<Vec<f64>, MetricsError> {
    let g = stream_gains(gamma, decision)?;
    let chi = if chi { 1.0 } else { 0.0 };
    Ok((0..gamma.nrows())
        .map(|k| {
            let interference: f64 = (0..gamma.nrows())
                .filter(|&i| options.common_counts_own_private || i != k)
                .map(|i| g.private[(k, i)])
                .sum();
            g.common[k] / (interference + chi * g.radar[k] + noise)
        })
        .collect())
}

/// Private-stream SINR at each user after the common stream is removed.
pub fn sinr_private(
    gamma: &DMatrix<Complex64>,
    decision: &Decision,
    noise: f64,
    chi: bool,
) -> Result<Vec<f64>, MetricsError> {
    let g = stream_gains(gamma, decision)?;
    let chi = if chi { 1.0 } else { 0.0 };
    Ok((0..gamma.nrows())
        .map(|k| {
            let interference: f64 = (0..gamma.nrows()).filter(|&i| i != k).map(|i| g.private[(k, i)]).sum();
            g.private[(k, k)] / (interference + chi * g.radar[k] + noise)
        })
        .collect())
}

/// log₂(1 + SINR), elementwise.
pub fn rates(sinr: &[f64]) -> Vec<f64> {
    sinr.iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect()
}

/// P = μ(‖v_c‖² + Σ‖v_k‖² + χ‖v_r‖²) + P_ST.
pub fn transmit_power(decision: &Decision, pm: &PowerModel) -> f64 {
    let streams = decision.common.norm_squared()
        + decision.private.norm_squared()
        + pm.chi_weight() * decision.radar.norm_squared();
    pm.amplifier_efficiency * streams + pm.static_power
}

/// The power compared against `P_max`.
pub fn budgeted_power(decision: &Decision, pm: &PowerModel) -> f64 {
    match pm.budget {
        PowerBudget::Radiated => {
            decision.common.norm_squared() + decision.private.norm_squared() + decision.radar.norm_squared()
        }
        PowerBudget::Total => transmit_power(decision, pm),
        PowerBudget::Dynamic => transmit_power(decision, pm) - pm.static_power,
    }
}

/// η = R / P.
pub fn energy_efficiency(sum_rate: f64, power: f64) -> Result<f64, MetricsError> {
    if !(power > 0.0) {
        return Err(MetricsError::NonPositivePower(power));
    }
    Ok(sum_rate / power)
}

/// uᴴ F̂ v_r v_rᴴ F̂ᴴ u / (δ_r² uᴴ u).
pub fn echo_snr(
    receive: &DVector<Complex64>,
    fhat: &DMatrix<Complex64>,
    radar: &DVector<Complex64>,
    noise: f64,
) -> Result<f64, MetricsError> {
    check_len("u", fhat.nrows(), receive.len())?;
    check_len("v_r", fhat.ncols(), radar.len())?;
    let norm = receive.norm_squared();
    if norm == 0.0 {
        return Err(MetricsError::ZeroReceiver);
    }
    let echo = fhat * radar;
    let projected = receive.dotc(&echo);
    Ok(projected.norm_sqr() / (noise * norm))
}

/// Closed inequalities: equality satisfies every constraint.
pub fn constraint_flags(
    rate_common: &[f64],
    rate_private: &[f64],
    common_rates: &[f64],
    budgeted_power: f64,
    echo_snr: f64,
    pm: &PowerModel,
    qos: &QosThresholds,
) -> ConstraintFlags {
    let min_common = rate_common.iter().copied().fold(f64::INFINITY, f64::min);
    let allocated: f64 = common_rates.iter().sum();
    ConstraintFlags {
        common: allocated - min_common <= 0.0,
        qos: common_rates
            .iter()
            .zip(rate_private)
            .zip(&qos.rate_thresholds)
            .all(|((c, p), th)| c + p - th >= 0.0),
        power: budgeted_power - pm.max_power <= 0.0,
        echo: echo_snr - qos.snr_threshold >= 0.0,
    }
}

/// r = η · Ω_Com · Ω_QoS · Ω_Pow · Ω_echo.
pub fn reward(energy_efficiency: f64, flags: &ConstraintFlags) -> f64 {
    if flags.all() {
        energy_efficiency
    } else {
        0.0
    }
}

/// Scores a decision on a channel realization.
pub fn evaluate(
    channel: &ChannelRealization,
    decision: &Decision,
    system: &SystemModel,
) -> Result<LinkMetrics, MetricsError> {
    let gamma = cascade_users(&channel.h_users, &decision.phases, &channel.g)?;
    evaluate_with_cascade(channel, &gamma, decision, system)
}

/// As [`evaluate`] with Γ already computed for `decision.phases`.
pub fn evaluate_with_cascade(
    channel: &ChannelRealization,
    gamma: &DMatrix<Complex64>,
    decision: &Decision,
    system: &SystemModel,
) -> Result<LinkMetrics, MetricsError> {
    let pm = &system.power;
    check_len("common rates", gamma.nrows(), decision.common_rates.len())?;
    let sinr_c = sinr_common(gamma, decision, system.noise_user, pm.chi, system.sinr)?;
    let sinr_p = sinr_private(gamma, decision, system.noise_user, pm.chi)?;
    let rate_c = rates(&sinr_c);
    let rate_p = rates(&sinr_p);
    let sum_rate = decision.common_rates.iter().sum::<f64>() + rate_p.iter().sum::<f64>();
    let power = transmit_power(decision, pm);
    let ee = energy_efficiency(sum_rate, power)?;
    let fhat = cascade_echo(&channel.g, &decision.phases, &channel.h_target)?;
    let snr = echo_snr(&decision.receive, &fhat, &decision.radar, system.noise_radar)?;
    let flags = constraint_flags(
        &rate_c,
        &rate_p,
        &decision.common_rates,
        budgeted_power(decision, pm),
        snr,
        pm,
        &system.qos,
    );
    Ok(LinkMetrics {
        sinr_common: sinr_c,
        sinr_private: sinr_p,
        rate_common: rate_c,
        rate_private: rate_p,
        common_rates: decision.common_rates.clone(),
        sum_rate,
        power,
        energy_efficiency: ee,
        echo_snr: snr,
        reward: reward(ee, &flags),
        flags,
    })
}
