//! Aggregation of per-run results into per-point statistics and effect ratios.

use serde::{Deserialize, Serialize};

use crate::beamforming::AccessScheme;

/// One (sweep point, policy, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub point: String,
    pub bs_antennas: usize,
    pub irs_elements: usize,
    pub carrier_frequency: f64,
    pub rcs: f64,
    pub rician: Option<f64>,
    pub scheme: AccessScheme,
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    /// Constraint-gated EE over the final 10% of episodes.
    pub converged_ee: f64,
    /// Ungated EE over the same window.
    pub converged_raw_ee: f64,
    pub converged_sum_rate: f64,
    pub converged_echo_snr_db: f64,
    pub converged_violation_fraction: f64,
    pub initial_ee: f64,
    /// `ok` or `error: <message>`.
    pub status: String,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub point: String,
    pub bs_antennas: usize,
    pub irs_elements: usize,
    pub carrier_frequency: f64,
    pub rcs: f64,
    pub rician: Option<f64>,
    pub scheme: AccessScheme,
    pub policy: String,
    pub runs: usize,
    pub ee_mean: f64,
    pub ee_std: f64,
    pub sum_rate_mean: f64,
    pub sum_rate_std: f64,
    pub echo_snr_db_mean: f64,
    pub echo_snr_db_std: f64,
    pub violation_mean: f64,
    pub violation_std: f64,
    pub status: String,
}

/// Ratio of mean converged EE between two values of one axis, all other axes
/// and the policy held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub axis: String,
    pub policy: String,
    /// Point identifier with the varied axis replaced by `*`.
    pub fixed: String,
    pub from: String,
    pub to: String,
    pub ratio: f64,
    /// 95% half-width, delta method with a Student-t quantile.
    pub ci_half_width: f64,
}

/// Sample mean and standard deviation (n − 1); std is 0 for one sample.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, v.sqrt())
}

/// Two-sided 97.5% Student-t quantile.
pub fn t_quantile_975(df: usize) -> f64 {
    const T: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    match df {
        0 => f64::INFINITY,
        1..=30 => T[df - 1],
        _ => 1.960,
    }
}

/// Ratio b̄/ā and its 95% half-width.
pub fn ratio_ci(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let r = mb / ma;
    let rel = ((sa * sa / a.len() as f64) / (ma * ma) + (sb * sb / b.len() as f64) / (mb * mb)).sqrt();
    let df = a.len().min(b.len()).saturating_sub(1);
    (r, (r * rel * t_quantile_975(df)).abs())
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, String, Vec<&RunRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(p, q, _)| *p == r.point && *q == r.policy) {
            Some(g) => g.2.push(r),
            None => groups.push((r.point.clone(), r.policy.clone(), vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(point, policy, rs)| {
            let first = rs[0];
            let failed = rs.iter().find(|r| !r.is_ok());
            let ok: Vec<&RunRecord> = if failed.is_some() { Vec::new() } else { rs.clone() };
            let col = |f: fn(&RunRecord) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (ee_mean, ee_std) = col(|r| r.converged_ee);
            let (sum_rate_mean, sum_rate_std) = col(|r| r.converged_sum_rate);
            let (echo_snr_db_mean, echo_snr_db_std) = col(|r| r.converged_echo_snr_db);
            let (violation_mean, violation_std) = col(|r| r.converged_violation_fraction);
            SummaryRow {
                point,
                bs_antennas: first.bs_antennas,
                irs_elements: first.irs_elements,
                carrier_frequency: first.carrier_frequency,
                rcs: first.rcs,
                rician: first.rician,
                scheme: first.scheme,
                policy,
                runs: ok.len(),
                ee_mean,
                ee_std,
                sum_rate_mean,
                sum_rate_std,
                echo_snr_db_mean,
                echo_snr_db_std,
                violation_mean,
                violation_std,
                status: failed.map_or_else(|| "ok".to_string(), |r| r.status.clone()),
            }
        })
        .collect()
}

const AXES: [&str; 6] = ["bs_antennas", "irs_elements", "carrier_frequency", "rcs", "rician", "scheme"];

fn axis_value(r: &RunRecord, axis: &str) -> String {
    match axis {
        "bs_antennas" => r.bs_antennas.to_string(),
        "irs_elements" => r.irs_elements.to_string(),
        "carrier_frequency" => r.carrier_frequency.to_string(),
        "rcs" => r.rcs.to_string(),
        "rician" => r.rician.map_or_else(|| "base".into(), |k| k.to_string()),
        _ => r.scheme.to_string(),
    }
}

fn fixed_key(r: &RunRecord, axis: &str) -> String {
    AXES.iter()
        .map(|&a| if a == axis { format!("{a}=*") } else { format!("{a}={}", axis_value(r, a)) })
        .collect::<Vec<_>>()
        .join(",")
}

fn sort_key(v: &str) -> (u8, f64, String) {
    match v.parse::<f64>() {
        Ok(x) => (0, x, String::new()),
        Err(_) => (1, 0.0, v.to_string()),
    }
}

/// For every axis with more than one value, the EE ratio of each value
/// against the smallest one (lexical order for non-numeric axes), per policy
/// and per combination of the other axes. Points with a failed run are skipped.
pub fn effects(records: &[RunRecord]) -> Vec<EffectRow> {
    let failed: std::collections::BTreeSet<&str> =
        records.iter().filter(|r| !r.is_ok()).map(|r| r.point.as_str()).collect();
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !failed.contains(r.point.as_str())).collect();
    let mut out = Vec::new();
    for axis in AXES {
        // (policy, fixed) → value → converged EE samples
        let mut groups: Vec<((String, String), Vec<(String, Vec<f64>)>)> = Vec::new();
        for r in &ok {
            let key = (r.policy.clone(), fixed_key(r, axis));
            let v = axis_value(r, axis);
            let g = match groups.iter_mut().position(|(k, _)| *k == key) {
                Some(i) => &mut groups[i].1,
                None => {
                    groups.push((key, Vec::new()));
                    &mut groups.last_mut().expect("just pushed").1
                }
            };
            match g.iter_mut().find(|(x, _)| *x == v) {
                Some((_, xs)) => xs.push(r.converged_ee),
                None => g.push((v, vec![r.converged_ee])),
            }
        }
        for ((policy, fixed), mut values) in groups {
            if values.len() < 2 {
                continue;
            }
            values.sort_by(|a, b| {
                let (ka, kb) = (sort_key(&a.0), sort_key(&b.0));
                ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
            });
            let (base, base_xs) = &values[0];
            for (v, xs) in &values[1..] {
                let (ratio, ci_half_width) = ratio_ci(base_xs, xs);
                out.push(EffectRow {
                    axis: axis.to_string(),
                    policy: policy.clone(),
                    fixed: fixed.clone(),
                    from: base.clone(),
                    to: v.clone(),
                    ratio,
                    ci_half_width,
                });
            }
        }
    }
    out
}
