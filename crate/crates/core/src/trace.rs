//! Per-episode training traces shared by the PPO agent and the baselines.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::metrics::LinkMetrics;

/// Floor applied before converting a mean echo SNR to dB.
const SNR_FLOOR: f64 = 1e-30;

/// One step as seen by an observer.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub metrics: LinkMetrics,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_ee: f64,
    pub mean_sum_rate: f64,
    pub mean_echo_snr_db: f64,
    pub violation_fraction: f64,
}

/// Violated-constraint counts for one episode, in step units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub common: usize,
    pub qos: usize,
    pub power: usize,
    pub echo: usize,
    pub any: usize,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeAccumulator {
    steps: usize,
    reward: f64,
    ee: f64,
    sum_rate: f64,
    echo_snr: f64,
    violations: ViolationCounts,
}

impl EpisodeAccumulator {
    pub fn push(&mut self, reward: f64, m: &LinkMetrics) {
        self.steps += 1;
        self.reward += reward;
        self.ee += m.energy_efficiency;
        self.sum_rate += m.sum_rate;
        self.echo_snr += m.echo_snr;
        let f = &m.flags;
        let v = &mut self.violations;
        v.common += usize::from(!f.common);
        v.qos += usize::from(!f.qos);
        v.power += usize::from(!f.power);
        v.echo += usize::from(!f.echo);
        v.any += usize::from(!f.all());
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn finish(&self, episode: usize) -> (EpisodeSummary, ViolationCounts) {
        let n = self.steps.max(1) as f64;
        let summary = EpisodeSummary {
            episode,
            mean_reward: self.reward / n,
            mean_ee: self.ee / n,
            mean_sum_rate: self.sum_rate / n,
            mean_echo_snr_db: 10.0 * (self.echo_snr / n).max(SNR_FLOOR).log10(),
            violation_fraction: self.violations.any as f64 / n,
        };
        (summary, self.violations)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub rows: Vec<EpisodeSummary>,
    pub violations: Vec<ViolationCounts>,
}

impl TrainingTrace {
    pub fn push(&mut self, acc: &EpisodeAccumulator, episode: usize) {
        let (row, counts) = acc.finish(episode);
        self.rows.push(row);
        self.violations.push(counts);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Episodes in the final (or first) 10%, at least one.
    pub fn tail_len(&self) -> usize {
        (self.rows.len() / 10).max(1).min(self.rows.len())
    }

    fn mean_of(rows: &[EpisodeSummary], f: impl Fn(&EpisodeSummary) -> f64) -> f64 {
        if rows.is_empty() {
            return f64::NAN;
        }
        rows.iter().map(f).sum::<f64>() / rows.len() as f64
    }

    /// Mean constraint-gated EE over the final 10% of episodes.
    pub fn converged_ee(&self) -> f64 {
        let n = self.tail_len();
        Self::mean_of(&self.rows[self.rows.len() - n..], |r| r.mean_reward)
    }

    /// Mean constraint-gated EE over the first 10% of episodes.
    pub fn initial_ee(&self) -> f64 {
        Self::mean_of(&self.rows[..self.tail_len()], |r| r.mean_reward)
    }

    /// Mean of any per-episode column over the final 10% of episodes.
    pub fn converged_mean(&self, f: impl Fn(&EpisodeSummary) -> f64) -> f64 {
        let n = self.tail_len();
        Self::mean_of(&self.rows[self.rows.len() - n..], f)
    }

    pub fn converged_violation_fraction(&self) -> f64 {
        let n = self.tail_len();
        Self::mean_of(&self.rows[self.rows.len() - n..], |r| r.violation_fraction)
    }

    /// (max − min) / mean of the per-episode reward over the final 10%.
    pub fn converged_spread(&self) -> f64 {
        let n = self.tail_len();
        let tail = &self.rows[self.rows.len() - n..];
        let mean = Self::mean_of(tail, |r| r.mean_reward);
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.mean_reward), hi.max(r.mean_reward))
        });
        if hi == lo {
            0.0
        } else if mean == 0.0 {
            f64::INFINITY
        } else {
            (hi - lo) / mean.abs()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        self.write_csv_tagged(out, None)
    }

    /// Writes the trace; with `policy` set a `policy` column is appended.
    pub fn write_csv_tagged<W: Write>(&self, out: W, policy: Option<&str>) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "episode",
            "mean_reward",
            "mean_ee",
            "mean_sum_rate",
            "mean_echo_snr_db",
            "violation_fraction",
        ];
        if policy.is_some() {
            header.push("policy");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.episode.to_string(),
                r.mean_reward.to_string(),
                r.mean_ee.to_string(),
                r.mean_sum_rate.to_string(),
                r.mean_echo_snr_db.to_string(),
                r.violation_fraction.to_string(),
            ];
            if let Some(p) = policy {
                rec.push(p.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`TrainingTrace::write_csv_tagged`]; the
    /// policy column, if any, is ignored. Violation counts are not stored.
    pub fn read_csv<R: Read>(input: R) -> csv::Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or_default();
            let num = |i: usize| -> csv::Result<f64> {
                field(i).parse::<f64>().map_err(|e| {
                    csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("column {i}: {e}")))
                })
            };
            rows.push(EpisodeSummary {
                episode: num(0)? as usize,
                mean_reward: num(1)?,
                mean_ee: num(2)?,
                mean_sum_rate: num(3)?,
                mean_echo_snr_db: num(4)?,
                violation_fraction: num(5)?,
            });
        }
        let violations = vec![ViolationCounts::default(); rows.len()];
        Ok(Self { rows, violations })
    }
}
