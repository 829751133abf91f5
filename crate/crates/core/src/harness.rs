//! Monte Carlo trials, sweeps and their on-disk outputs.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{EpisodeSummary, Evaluator, MetricReport, OspaVariant};
use crate::par::{map_indexed, Execution};
use crate::rng::derive_seed;
use crate::scenario::{generate_scenario, AttackConfig, ScenarioConfig};
use crate::sim::{Episode, FrameLog, Pipeline};

pub fn trial_seed(root: u64, trial: usize) -> u64 {
    derive_seed(root, "trial", trial as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub trials: usize,
    pub pipeline: Pipeline,
    pub out: PathBuf,
    pub force: bool,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        self.config.validate()
    }

    /// SHA-256 over everything that determines the results.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            config: &'a ScenarioConfig,
            seed: u64,
            trials: usize,
            pipeline: Pipeline,
        }
        let key = Key {
            config: &self.config,
            seed: self.seed,
            trials: self.trials,
            pipeline: self.pipeline,
        };
        let json = serde_json::to_vec(&key).expect("manifest serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Runs one trial, handing every frame to `sink` as it is produced.
pub fn run_trial_with(cfg: &ScenarioConfig, seed: u64, pipeline: Pipeline, mut sink: impl FnMut(&FrameLog) -> Result<()>) -> Result<MetricReport> {
    let scn = generate_scenario(cfg, seed)?;
    let mut eval = Evaluator::new(&scn.metrics, scn.duration);
    for log in Episode::new(&scn, pipeline) {
        let log = log?;
        eval.push(&log)?;
        sink(&log)?;
    }
    Ok(eval.finish())
}

pub fn run_trial(cfg: &ScenarioConfig, seed: u64, pipeline: Pipeline) -> Result<MetricReport> {
    run_trial_with(cfg, seed, pipeline, |_| Ok(()))
}

/// Summaries of `trials` independent trials, in trial order.
pub fn run_trials(cfg: &ScenarioConfig, root: u64, trials: usize, pipeline: Pipeline, exec: Execution) -> Result<Vec<EpisodeSummary>> {
    map_indexed(trials, exec, |i| run_trial(cfg, trial_seed(root, i), pipeline).map(|r| r.summary))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    /// Mean and sample standard deviation of the present values.
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Stat {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        if n == 0 {
            return Stat { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Aggregate {
    pub precision: Stat,
    pub recall: Stat,
    pub f1: Stat,
    pub ospa: Stat,
    pub track_trust_accuracy: Stat,
    pub agent_trust_accuracy: Stat,
    pub attacked_agent_trust: Stat,
    pub fake_tracks: usize,
    pub fake_tracks_flagged: usize,
}

impl Aggregate {
    pub fn of(s: &[EpisodeSummary]) -> Aggregate {
        Aggregate {
            precision: Stat::of(s.iter().map(|x| Some(x.precision))),
            recall: Stat::of(s.iter().map(|x| Some(x.recall))),
            f1: Stat::of(s.iter().map(|x| Some(x.f1))),
            ospa: Stat::of(s.iter().map(|x| Some(x.ospa))),
            track_trust_accuracy: Stat::of(s.iter().map(|x| x.track_trust_accuracy)),
            agent_trust_accuracy: Stat::of(s.iter().map(|x| x.agent_trust_accuracy)),
            attacked_agent_trust: Stat::of(s.iter().map(|x| x.attacked_agent_trust)),
            fake_tracks: s.iter().map(|x| x.fake_tracks).sum(),
            fake_tracks_flagged: s.iter().map(|x| x.fake_tracks_flagged).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Density,
    AttackedFraction,
}

/// The two pipelines every sweep compares.
pub const SWEEP_VARIANTS: [(&str, Pipeline); 2] = [("trust_off", Pipeline::PLAIN), ("trust_on", Pipeline::TRUST)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub variant: String,
    pub stats: Aggregate,
}

pub fn apply_axis(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::config("values", format!("{value} is outside [0, 1]")));
    }
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Density => c.density = value,
        SweepAxis::AttackedFraction => {
            let att = c.attack.get_or_insert_with(AttackConfig::default);
            att.victims.clear();
            att.attacked_fraction = value;
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64], root: u64, trials: usize, exec: Execution) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &v in values {
        let c = apply_axis(cfg, axis, v)?;
        for (name, pipeline) in SWEEP_VARIANTS {
            let summaries = run_trials(&c, root, trials, pipeline, exec)?;
            rows.push(SweepRow {
                value: v,
                variant: name.to_string(),
                stats: Aggregate::of(&summaries),
            });
        }
    }
    Ok(rows)
}

fn provenance(digest: &str, seed: u64) -> String {
    format!("# manifest_digest={digest}\n# root_seed={seed}\n")
}

pub fn sweep_csv(rows: &[SweepRow], axis: SweepAxis, digest: &str, seed: u64) -> String {
    let mut s = provenance(digest, seed);
    let name = match axis {
        SweepAxis::Density => "density",
        SweepAxis::AttackedFraction => "attacked_fraction",
    };
    s.push_str(name);
    s.push_str(",variant,trials");
    for m in ["precision", "recall", "f1", "ospa", "track_trust_accuracy", "agent_trust_accuracy"] {
        let _ = write!(s, ",{m}_mean,{m}_std");
    }
    s.push('\n');
    for r in rows {
        let a = &r.stats;
        let _ = write!(s, "{},{},{}", r.value, r.variant, a.precision.n);
        for st in [a.precision, a.recall, a.f1, a.ospa, a.track_trust_accuracy, a.agent_trust_accuracy] {
            let _ = write!(s, ",{:.6},{:.6}", st.mean, st.std);
        }
        s.push('\n');
    }
    s
}

fn prepare_out(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        let occupied = fs::read_dir(out)?.next().is_some();
        if occupied && !force {
            return Err(Error::Io(format!("{} is not empty; pass --force to overwrite", out.display())));
        }
    }
    fs::create_dir_all(out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRecord {
    pub manifest_digest: String,
    pub root_seed: u64,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub summary: EpisodeSummary,
}

/// Runs every trial and writes, per trial, `frames.ndjson`, `metrics.csv`
/// and `summary.json`, plus a top-level `summary.json`.
pub fn cmd_simulate(m: &RunManifest, exec: Execution, write_frames: bool) -> Result<SimulateRecord> {
    m.validate()?;
    prepare_out(&m.out, m.force)?;
    let digest = m.digest();
    let results: Vec<Result<TrialRecord>> = map_indexed(m.trials, exec, |i| {
        let seed = trial_seed(m.seed, i);
        let dir = m.out.join(format!("trial_{i:04}"));
        fs::create_dir_all(&dir)?;
        let header = serde_json::json!({"manifest_digest": digest, "root_seed": m.seed, "trial": i, "trial_seed": seed});
        let report = if write_frames {
            let mut w = BufWriter::new(fs::File::create(dir.join("frames.ndjson"))?);
            writeln!(w, "{header}")?;
            let r = run_trial_with(&m.config, seed, m.pipeline, |log| {
                serde_json::to_writer(&mut w, log).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(w)?;
                Ok(())
            })?;
            w.flush()?;
            r
        } else {
            run_trial(&m.config, seed, m.pipeline)?
        };
        let csv = format!("{}# trial={i}\n# trial_seed={seed}\n{}", provenance(&digest, m.seed), report.to_csv());
        fs::write(dir.join("metrics.csv"), csv)?;
        let summary = serde_json::json!({"manifest_digest": digest, "root_seed": m.seed, "trial": i, "trial_seed": seed, "summary": report.summary});
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary).expect("json"))?;
        Ok(TrialRecord {
            trial: i,
            seed,
            summary: report.summary,
        })
    });
    let trials: Vec<TrialRecord> = results.into_iter().collect::<Result<_>>()?;
    let summaries: Vec<EpisodeSummary> = trials.iter().map(|t| t.summary.clone()).collect();
    let record = SimulateRecord {
        manifest_digest: digest,
        root_seed: m.seed,
        aggregate: Aggregate::of(&summaries),
        trials,
    };
    fs::write(m.out.join("summary.json"), serde_json::to_string_pretty(&record).expect("json"))?;
    fs::write(m.out.join("manifest.json"), serde_json::to_string_pretty(m).expect("json"))?;
    Ok(record)
}

pub fn cmd_sweep(m: &RunManifest, axis: SweepAxis, values: &[f64], exec: Execution) -> Result<Vec<SweepRow>> {
    m.validate()?;
    if values.is_empty() {
        return Err(Error::config("values", "at least one value is required"));
    }
    prepare_out(&m.out, m.force)?;
    let mut h = Sha256::new();
    h.update(m.digest().as_bytes());
    h.update(serde_json::to_vec(&(axis, values)).expect("json"));
    let digest = hex::encode(h.finalize());
    let rows = sweep(&m.config, axis, values, m.seed, m.trials, exec)?;
    fs::write(m.out.join("sweep.csv"), sweep_csv(&rows, axis, &digest, m.seed))?;
    let record = serde_json::json!({"manifest_digest": digest, "root_seed": m.seed, "axis": axis, "values": values, "rows": rows});
    fs::write(m.out.join("sweep.json"), serde_json::to_string_pretty(&record).expect("json"))?;
    fs::write(m.out.join("manifest.json"), serde_json::to_string_pretty(m).expect("json"))?;
    Ok(rows)
}

/// Overrides the OSPA variant in a config.
pub fn with_ospa_variant(mut cfg: ScenarioConfig, variant: OspaVariant) -> ScenarioConfig {
    cfg.metrics.ospa_variant = variant;
    cfg
}
