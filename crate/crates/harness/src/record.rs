//! Per-round CSV files: one per run, enough columns to recompute every
//! summary metric without the simulator.
//!
//! Floats are written with Rust's shortest round-trip formatting, and the
//! structured columns (`active`, `reward_events`, `outbreaks`, ...) hold JSON,
//! so reading a file back yields bit-identical values.

use std::collections::HashMap;
use std::io::{Read, Write};

use cdsim_core::env::disaster::{DisasterRoundStats, DisasterSnapshot, RewardEvent};
use cdsim_core::env::infospread::{InfoRoundStats, OutbreakStatus};
use cdsim_core::env::publicgoods::Settlement;
use cdsim_core::env::Scenario;
use cdsim_core::ActionValue;

use crate::config::ExperimentConfig;
use crate::metrics::{run_metrics, MetricMap, RoundSeries};
use crate::runner::{RoundDetail, RunResult};
use crate::HarnessError;

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn header(scenario: Scenario, n: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "run_id",
        "config_hash",
        "seed",
        "round",
        "scenario",
        "consensus_mode",
        "phases",
        "d_bar",
        "performance",
        "explored",
        "fallbacks",
        "messages",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for prefix in ["v", "a", "d"] {
        h.extend((0..n).map(|i| format!("{prefix}{i}")));
    }
    let extra: &[&str] = match scenario {
        Scenario::Disaster => &[
            "high_severity",
            "misallocation_unit",
            "active",
            "attended",
            "cleared",
            "misallocation_points",
            "reward",
            "cumulative_reward",
            "reward_events",
            "env_events",
        ],
        Scenario::InfoSpread => {
            &["nodes", "misinformed", "checked", "corrected", "newly_infected", "injected", "outbreaks", "states"]
        }
        Scenario::PublicGoods => &["theta", "benefit", "shock", "rumor_claim", "total", "funded", "clamped"],
    };
    h.extend(extra.iter().map(|s| s.to_string()));
    if scenario == Scenario::PublicGoods {
        h.extend((0..n).map(|i| format!("pay{i}")));
    }
    h
}

pub fn write_run_csv(out: impl Write, cfg: &ExperimentConfig, run: &RunResult) -> Result<(), HarnessError> {
    let scenario = cfg.scenario_kind()?;
    let n = cfg.agents;
    let hash = cfg.hash();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(scenario, n))?;
    for r in &run.records {
        let mut row: Vec<String> = vec![
            run.run_id.clone(),
            hash.clone(),
            run.seed.to_string(),
            r.round.to_string(),
            cfg.scenario.to_string(),
            cfg.consensus.to_string(),
            r.phases.iter().map(|p| p.tag()).collect::<Vec<_>>().join(">"),
            r.d_bar.to_string(),
            opt(r.performance),
            r.explored.to_string(),
            r.fallbacks.len().to_string(),
            r.messages.len().to_string(),
        ];
        row.extend(r.proposals.iter().map(ActionValue::encode));
        row.extend(r.actions.iter().map(ActionValue::encode));
        row.extend(r.deviations.iter().map(f64::to_string));
        match &r.detail {
            RoundDetail::Disaster { stats, reward_events, env_events, cumulative_reward } => {
                row.extend([
                    cfg.disaster.high_severity.to_string(),
                    cfg.disaster.misallocation_penalty.to_string(),
                    json(&stats.active),
                    json(&stats.attended),
                    json(&stats.cleared),
                    stats.misallocation_points.to_string(),
                    stats.reward.to_string(),
                    cumulative_reward.to_string(),
                    json(reward_events),
                    json(env_events),
                ]);
            }
            RoundDetail::Info { stats, injected, states } => {
                row.extend([
                    stats.nodes.to_string(),
                    stats.misinformed.to_string(),
                    stats.checked.to_string(),
                    stats.corrected.to_string(),
                    stats.newly_infected.to_string(),
                    json(injected),
                    json(&stats.outbreaks),
                    states.clone(),
                ]);
            }
            RoundDetail::Public { settlement: s, shock, rumor_claim } => {
                row.extend([
                    s.theta.to_string(),
                    s.benefit.to_string(),
                    opt(*shock),
                    opt(*rumor_claim),
                    s.total().to_string(),
                    (s.funded as u8).to_string(),
                    json(&s.clamped),
                ]);
                row.extend(s.payoffs.iter().map(f64::to_string));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A per-round CSV read back as named string columns.
#[derive(Debug, Clone)]
pub struct CsvRun {
    pub headers: Vec<String>,
    pub rows: Vec<HashMap<String, String>>,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Artifact(msg.into())
}

impl CsvRun {
    pub fn read(input: impl Read) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_reader(input);
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(headers.iter().cloned().zip(rec.iter().map(str::to_string)).collect());
        }
        Ok(Self { headers, rows })
    }

    pub fn agent_count(&self) -> usize {
        self.headers.iter().filter(|h| h.starts_with('a') && h[1..].parse::<usize>().is_ok()).count()
    }

    pub fn scenario(&self) -> Result<Scenario, HarnessError> {
        let first = self.rows.first().ok_or_else(|| bad("empty run file"))?;
        let n: u8 = parse(first, "scenario")?;
        Ok(Scenario::from_number(n)?)
    }

    pub fn column<T: std::str::FromStr>(&self, name: &str) -> Result<Vec<T>, HarnessError> {
        self.rows.iter().map(|r| parse(r, name)).collect()
    }

    /// (d̄, performance) pairs for rounds that have a performance value.
    pub fn performance_pairs(&self) -> Result<Vec<(f64, f64)>, HarnessError> {
        let mut out = Vec::new();
        for r in &self.rows {
            let p = field(r, "performance")?;
            if !p.is_empty() {
                out.push((parse(r, "d_bar")?, p.parse().map_err(|_| bad(format!("bad performance {p:?}")))?));
            }
        }
        Ok(out)
    }

    pub fn series(&self) -> Result<RoundSeries, HarnessError> {
        let n = self.agent_count();
        Ok(match self.scenario()? {
            Scenario::Disaster => {
                let first = self.rows.first().ok_or_else(|| bad("empty run file"))?;
                let rounds = self
                    .rows
                    .iter()
                    .map(|r| {
                        Ok(DisasterRoundStats {
                            round: parse(r, "round")?,
                            active: from_json::<Vec<DisasterSnapshot>>(r, "active")?,
                            attended: from_json(r, "attended")?,
                            cleared: from_json(r, "cleared")?,
                            misallocation_points: parse(r, "misallocation_points")?,
                            reward: parse(r, "reward")?,
                        })
                    })
                    .collect::<Result<_, HarnessError>>()?;
                RoundSeries::Disaster {
                    rounds,
                    high_severity: parse(first, "high_severity")?,
                    misallocation_unit: parse(first, "misallocation_unit")?,
                }
            }
            Scenario::InfoSpread => RoundSeries::Info(
                self.rows
                    .iter()
                    .map(|r| {
                        Ok(InfoRoundStats {
                            round: parse(r, "round")?,
                            nodes: parse(r, "nodes")?,
                            misinformed: parse(r, "misinformed")?,
                            checked: parse(r, "checked")?,
                            corrected: parse(r, "corrected")?,
                            newly_infected: parse(r, "newly_infected")?,
                            outbreaks: from_json::<Vec<OutbreakStatus>>(r, "outbreaks")?,
                        })
                    })
                    .collect::<Result<_, HarnessError>>()?,
            ),
            Scenario::PublicGoods => RoundSeries::Public(
                self.rows
                    .iter()
                    .map(|r| {
                        let contributions = (0..n)
                            .map(|i| parse::<f64>(r, &format!("a{i}")))
                            .collect::<Result<Vec<_>, _>>()?;
                        let payoffs = (0..n)
                            .map(|i| parse::<f64>(r, &format!("pay{i}")))
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok(Settlement {
                            round: parse(r, "round")?,
                            theta: parse(r, "theta")?,
                            benefit: parse(r, "benefit")?,
                            contributions,
                            funded: parse::<u8>(r, "funded")? == 1,
                            payoffs,
                            clamped: from_json(r, "clamped")?,
                        })
                    })
                    .collect::<Result<_, HarnessError>>()?,
            ),
        })
    }

    /// Every summary metric, recomputed from this file alone.
    pub fn recompute_metrics(&self) -> Result<MetricMap, HarnessError> {
        run_metrics(&self.series()?, &self.column::<f64>("d_bar")?)
    }

    pub fn reward_events(&self) -> Result<Vec<Vec<RewardEvent>>, HarnessError> {
        self.rows.iter().map(|r| from_json(r, "reward_events")).collect()
    }
}

fn field<'a>(row: &'a HashMap<String, String>, name: &str) -> Result<&'a str, HarnessError> {
    row.get(name).map(String::as_str).ok_or_else(|| bad(format!("missing column {name}")))
}

fn parse<T: std::str::FromStr>(row: &HashMap<String, String>, name: &str) -> Result<T, HarnessError> {
    let s = field(row, name)?;
    s.parse().map_err(|_| bad(format!("column {name}: cannot parse {s:?}")))
}

fn from_json<T: serde::de::DeserializeOwned>(row: &HashMap<String, String>, name: &str) -> Result<T, HarnessError> {
    serde_json::from_str(field(row, name)?).map_err(|e| bad(format!("column {name}: {e}")))
}
