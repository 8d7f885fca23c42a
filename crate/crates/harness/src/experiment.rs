//! Multi-seed execution, aggregation and the artifact directory.
//!
//! Layout of an output directory:
//!
//! ```text
//! config.toml          resolved config echo (replay input)
//! summary.jsonl        one record per run, then one aggregate record
//! transcript.jsonl     messages, fallbacks and language-model exchanges
//! runs/<run_id>.csv    per-round records
//! networks/<run_id>.edges   scenario 2 only
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cdsim_core::agents::ExternalPolicy;
use cdsim_core::exec::Exec;
use cdsim_core::stats::MeanStd;
use cdsim_llm::{LlmPolicy, LlmStats, PromptOptions, TranscriptEntry};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::metrics::{run_metrics, MetricMap, RoundSeries};
use crate::record::write_run_csv;
use crate::runner::{run_seed, RunResult};
use crate::HarnessError;

pub const CONFIG_ECHO: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.jsonl";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummaryRecord {
    Run {
        run_id: String,
        config_hash: String,
        seed: u64,
        metrics: MetricMap,
        fallbacks: usize,
    },
    Aggregate {
        config_hash: String,
        seeds: Vec<u64>,
        scenario: u8,
        consensus: String,
        diversity: String,
        volatility: String,
        baseline: String,
        epsilon: f64,
        metrics: BTreeMap<String, MeanStd>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptLine {
    Message { run_id: String, seed: u64, round: u32, agent_id: usize, text: String, intent: Option<String> },
    Fallback { run_id: String, seed: u64, round: u32, agent_id: usize, phase: String, reason: String },
    Llm { run_id: String, seed: u64, entry: TranscriptEntry },
    LlmStats { run_id: String, seed: u64, stats: LlmStats },
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub run: RunResult,
    pub metrics: MetricMap,
    pub llm_log: Vec<TranscriptEntry>,
    pub llm_stats: Option<LlmStats>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub outcomes: Vec<SeedOutcome>,
    pub aggregate: BTreeMap<String, MeanStd>,
}

impl ExperimentResult {
    pub fn summary_records(&self) -> Vec<SummaryRecord> {
        let hash = self.config.hash();
        let mut out: Vec<SummaryRecord> = self
            .outcomes
            .iter()
            .map(|o| SummaryRecord::Run {
                run_id: o.run.run_id.clone(),
                config_hash: hash.clone(),
                seed: o.run.seed,
                metrics: o.metrics.clone(),
                fallbacks: o.run.records.iter().map(|r| r.fallbacks.len()).sum(),
            })
            .collect();
        out.push(SummaryRecord::Aggregate {
            config_hash: hash,
            seeds: self.config.seeds.clone(),
            scenario: self.config.scenario,
            consensus: self.config.consensus.to_string(),
            diversity: self.config.diversity.to_string(),
            volatility: self.config.volatility.to_string(),
            baseline: self.config.baseline.to_string(),
            epsilon: self.config.epsilon,
            metrics: self.aggregate.clone(),
        });
        out
    }

    pub fn metric_values(&self, name: &str) -> Vec<f64> {
        self.outcomes.iter().filter_map(|o| o.metrics.get(name).copied()).collect()
    }
}

fn llm_policy(cfg: &ExperimentConfig) -> Option<LlmPolicy> {
    let llm = cfg.llm.as_ref()?;
    let mut p = LlmPolicy::new(
        llm.endpoint.clone().with_env_overrides(),
        PromptOptions { force_alignment: llm.force_alignment },
    );
    for (id, ep) in &llm.agents {
        if let Ok(id) = id.parse() {
            p = p.with_override(id, ep.clone());
        }
    }
    Some(p)
}

pub fn run_one(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome, HarnessError> {
    let policy = llm_policy(cfg);
    let run = run_seed(cfg, seed, policy.as_ref().map(|p| p as &dyn ExternalPolicy))?;
    let series = RoundSeries::from_records(&run.records, cfg.disaster.high_severity, cfg.disaster.misallocation_penalty)?;
    let d_bars: Vec<f64> = run.records.iter().map(|r| r.d_bar).collect();
    let metrics = run_metrics(&series, &d_bars)?;
    let (llm_log, llm_stats) = match &policy {
        Some(p) => (p.take_transcript(), Some(p.stats())),
        None => (Vec::new(), None),
    };
    Ok(SeedOutcome { run, metrics, llm_log, llm_stats })
}

/// Validates the config, then runs every seed. Nothing runs if validation
/// fails.
pub fn run_experiment(cfg: ExperimentConfig, exec: Exec) -> Result<ExperimentResult, HarnessError> {
    let cfg = cfg.resolve()?;
    let outcomes = exec.map(&cfg.seeds, |&seed| run_one(&cfg, seed)).into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for o in &outcomes {
        for (k, v) in &o.metrics {
            by_metric.entry(k.clone()).or_default().push(*v);
        }
    }
    let aggregate = by_metric.into_iter().map(|(k, v)| (k, MeanStd::of(&v))).collect();
    Ok(ExperimentResult { config: cfg, outcomes, aggregate })
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRecord>, HarnessError> {
    let f = File::open(path).map_err(|e| HarnessError::Artifact(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn run_csv_path(dir: &Path, run_id: &str) -> PathBuf {
    dir.join(RUNS_DIR).join(format!("{run_id}.csv"))
}

/// Writes every artifact for `result` under `dir`.
pub fn write_artifacts(dir: &Path, result: &ExperimentResult) -> Result<(), HarnessError> {
    let cfg = &result.config;
    fs::create_dir_all(dir.join(RUNS_DIR))?;
    let hash = cfg.hash();
    let echo = format!("# config_hash = {hash}\n{}", cfg.to_toml()?);
    fs::write(dir.join(CONFIG_ECHO), echo)?;

    let mut transcript = Vec::new();
    for o in &result.outcomes {
        let run = &o.run;
        let mut w = BufWriter::new(File::create(run_csv_path(dir, &run.run_id))?);
        write_run_csv(&mut w, cfg, run)?;
        w.flush()?;
        if let Some(net) = &run.network {
            fs::create_dir_all(dir.join("networks"))?;
            let f = File::create(dir.join("networks").join(format!("{}.edges", run.run_id)))?;
            net.write_edge_list(BufWriter::new(f))?;
        }
        for r in &run.records {
            for m in &r.messages {
                transcript.push(TranscriptLine::Message {
                    run_id: run.run_id.clone(),
                    seed: run.seed,
                    round: r.round,
                    agent_id: m.agent_id,
                    text: m.text.clone(),
                    intent: m.intent.as_ref().map(|a| a.encode()),
                });
            }
            for f in &r.fallbacks {
                transcript.push(TranscriptLine::Fallback {
                    run_id: run.run_id.clone(),
                    seed: run.seed,
                    round: r.round,
                    agent_id: f.agent_id,
                    phase: f.phase.to_string(),
                    reason: f.reason.clone(),
                });
            }
        }
        for entry in &o.llm_log {
            transcript.push(TranscriptLine::Llm { run_id: run.run_id.clone(), seed: run.seed, entry: entry.clone() });
        }
        if let Some(stats) = o.llm_stats {
            transcript.push(TranscriptLine::LlmStats { run_id: run.run_id.clone(), seed: run.seed, stats });
        }
    }
    write_jsonl(&dir.join(TRANSCRIPT_FILE), transcript)?;
    write_jsonl(&dir.join(SUMMARY_FILE), result.summary_records())?;
    Ok(())
}
