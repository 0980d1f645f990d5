//! Runs every (sweep point, seed, policy) combination and writes the results.
//!
//! Output layout under the run directory:
//!
//! ```text
//! manifest.toml                      resolved configuration
//! runs.csv                           one row per run
//! summary.csv                        per point and policy
//! effects.csv                        EE ratios along each swept axis
//! traces/<point>/<policy>_seed<s>.csv
//! traces/<point>/ppo_seed<s>.ckpt    trained agent
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, PolicyKind, SweepPoint};
use super::summary::{effects, summarize, EffectRow, RunRecord, SummaryRow};
use crate::baselines::run_baseline;
use crate::ppo::{stream_rng, train, IsacEnv, PpoLearner, Stream};
use crate::trace::TrainingTrace;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTask {
    pub point: SweepPoint,
    pub policy: PolicyKind,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub effects: Vec<EffectRow>,
}

/// Points × seeds × policies, in that nesting order.
pub fn tasks(cfg: &ExperimentConfig) -> Vec<RunTask> {
    let mut out = Vec::new();
    for point in cfg.points() {
        for &seed in &cfg.seeds {
            for &policy in &cfg.policies {
                out.push(RunTask {
                    point: point.clone(),
                    policy,
                    seed,
                });
            }
        }
    }
    out
}

/// Trains or rolls out one policy. With `checkpoint` set the trained PPO
/// agent is written there.
pub fn run_one(cfg: &ExperimentConfig, task: &RunTask, checkpoint: Option<&Path>) -> Result<TrainingTrace, String> {
    let env_cfg = cfg.env_config(&task.point)?;
    let mut env = IsacEnv::new(env_cfg).map_err(|e| e.to_string())?;
    match task.policy.baseline() {
        Some(kind) => run_baseline(
            &mut env,
            kind,
            &cfg.baseline,
            cfg.ppo.episodes,
            cfg.ppo.episode_len,
            task.seed,
            &mut |_| {},
        )
        .map_err(|e| e.to_string()),
        None => {
            let mut learner = PpoLearner::new(
                env.state_len(),
                env.action_len(),
                cfg.ppo.clone(),
                &mut stream_rng(task.seed, Stream::Init),
            )
            .map_err(|e| e.to_string())?;
            let trace = train(&mut env, &mut learner, task.seed).map_err(|e| e.to_string())?;
            if let Some(path) = checkpoint {
                let f = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
                learner
                    .save(BufWriter::new(f))
                    .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            Ok(trace)
        }
    }
}

pub fn record(task: &RunTask, episodes: usize, outcome: &Result<TrainingTrace, String>) -> RunRecord {
    let p = &task.point;
    let (vals, status) = match outcome {
        Ok(t) => (
            [
                t.converged_ee(),
                t.converged_mean(|r| r.mean_ee),
                t.converged_mean(|r| r.mean_sum_rate),
                t.converged_mean(|r| r.mean_echo_snr_db),
                t.converged_violation_fraction(),
                t.initial_ee(),
            ],
            "ok".to_string(),
        ),
        Err(e) => ([f64::NAN; 6], format!("error: {e}")),
    };
    RunRecord {
        point: p.id(),
        bs_antennas: p.bs_antennas,
        irs_elements: p.irs_elements,
        carrier_frequency: p.carrier_frequency,
        rcs: p.rcs,
        rician: p.rician,
        scheme: p.scheme,
        policy: task.policy.name().to_string(),
        seed: task.seed,
        episodes,
        converged_ee: vals[0],
        converged_raw_ee: vals[1],
        converged_sum_rate: vals[2],
        converged_echo_snr_db: vals[3],
        converged_violation_fraction: vals[4],
        initial_ee: vals[5],
        status,
    }
}

pub fn write_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

/// Writes summary.csv and effects.csv next to `runs.csv` records.
pub fn write_summaries(dir: &Path, records: &[RunRecord]) -> Result<(Vec<SummaryRow>, Vec<EffectRow>), ExperimentError> {
    let summary = summarize(records);
    let fx = effects(records);
    write_rows(&dir.join("summary.csv"), &summary)?;
    write_rows(&dir.join("effects.csv"), &fx)?;
    Ok((summary, fx))
}

/// Runs everything on `jobs` worker threads. Results do not depend on `jobs`:
/// each run is seeded only by its own (point, policy, seed). A failing run is
/// recorded and marks its point as failed; the rest of the sweep continues.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<RunReport, ExperimentError> {
    use rayon::prelude::*;

    fs::create_dir_all(out_dir.join("traces")).map_err(io_err(out_dir))?;
    let manifest = out_dir.join("manifest.toml");
    let mut m = File::create(&manifest).map_err(io_err(&manifest))?;
    writeln!(m, "# isac-core {}", env!("CARGO_PKG_VERSION")).map_err(io_err(&manifest))?;
    m.write_all(cfg.to_toml_string().as_bytes()).map_err(io_err(&manifest))?;

    let all = tasks(cfg);
    for t in &all {
        let d = out_dir.join("traces").join(t.point.id());
        fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let records: Vec<RunRecord> = pool.install(|| {
        all.par_iter()
            .map(|t| {
                let dir = out_dir.join("traces").join(t.point.id());
                let stem = format!("{}_seed{}", t.policy, t.seed);
                let ckpt = dir.join(format!("{stem}.ckpt"));
                let mut outcome = run_one(cfg, t, (t.policy == PolicyKind::Ppo).then_some(ckpt.as_path()));
                if let Ok(trace) = &outcome {
                    let path = dir.join(format!("{stem}.csv"));
                    let written = File::create(&path)
                        .map_err(|e| e.to_string())
                        .and_then(|f| trace.write_csv(BufWriter::new(f)).map_err(|e| e.to_string()));
                    if let Err(e) = written {
                        outcome = Err(format!("{}: {e}", path.display()));
                    }
                }
                match &outcome {
                    Ok(tr) => log::info!(
                        "{} {} seed {}: converged EE {:.4}",
                        t.point.id(),
                        t.policy,
                        t.seed,
                        tr.converged_ee()
                    ),
                    Err(e) => log::error!("{} {} seed {}: {e}", t.point.id(), t.policy, t.seed),
                }
                record(t, cfg.ppo.episodes, &outcome)
            })
            .collect()
    });
    write_rows(&out_dir.join("runs.csv"), &records)?;
    let (summary, effects) = write_summaries(out_dir, &records)?;
    Ok(RunReport {
        records,
        summary,
        effects,
    })
}
