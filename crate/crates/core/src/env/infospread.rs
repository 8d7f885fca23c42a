//! Misinformation spread on a scale-free network.
//!
//! Round order: the adversary injects, defenders fact-check against the state
//! they observed, then misinformation spreads synchronously. Fact-checked
//! nodes are protected for the rest of the round.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::{IndexedRandom, IteratorRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::Volatility;
use crate::model::NodeSet;
use crate::rng::{keyed_unit, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeState {
    Unaware,
    Informed,
    Misinformed,
}

impl NodeState {
    pub fn code(self) -> char {
        match self {
            Self::Unaware => 'U',
            Self::Informed => 'I',
            Self::Misinformed => 'M',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfoParams {
    /// Maximum nodes one defender may fact-check per round.
    pub budget: usize,
    pub initial_misinformed: (usize, usize),
    /// The run halts once the misinformed fraction exceeds this.
    pub halt_fraction: f64,
}

impl Default for InfoParams {
    fn default() -> Self {
        Self { budget: 3, initial_misinformed: (2, 5), halt_fraction: 0.8 }
    }
}

pub fn spread_probability(v: Volatility) -> f64 {
    match v {
        Volatility::Low => 0.1,
        Volatility::Moderate => 0.2,
        Volatility::High => 0.3,
    }
}

/// Low: every 4th round. Moderate: gaps alternate 2, 3, 2, 3 (rounds 2, 5, 7,
/// 10, ...). High: every round.
pub fn is_injection_round(v: Volatility, round: u32) -> bool {
    match v {
        Volatility::Low => round.is_multiple_of(4),
        Volatility::Moderate => matches!(round % 5, 0 | 2),
        Volatility::High => true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outbreak {
    pub id: u32,
    pub injection_round: u32,
    pub cohort: BTreeSet<u32>,
    pub resolved_round: Option<u32>,
}

impl Outbreak {
    pub fn peak(&self) -> usize {
        self.cohort.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rumor {
    pub node: u32,
    pub text: String,
    pub partial_truth: bool,
}

const CLAIMS: [&str; 6] = [
    "Secret leak: Node #{n} claims vaccines contain microchips.",
    "Breaking: Node #{n} says the water supply has been poisoned.",
    "Node #{n} shares a post that the election results were altered.",
    "Insiders at Node #{n} report that the bank is about to collapse.",
    "Node #{n} forwards a warning that 5G towers spread illness.",
    "Node #{n} claims the evacuation order is a hoax.",
];

fn rumor_text(node: u32, rng: &mut SimRng) -> Rumor {
    let claim = CLAIMS.choose(rng).expect("claims").replace("{n}", &node.to_string());
    let partial_truth = rng.random_bool(0.3);
    let text = if partial_truth { format!("{claim} Parts of this were confirmed by a local outlet.") } else { claim };
    Rumor { node, text, partial_truth }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoState {
    pub round: u32,
    pub network: Arc<Network>,
    pub states: Vec<NodeState>,
    pub outbreaks: Vec<Outbreak>,
    pub params: InfoParams,
    pub halted: bool,
    /// Rumors emitted by this round's injection.
    pub rumors: Vec<Rumor>,
}

impl InfoState {
    /// Seeds 2–5 misinformed nodes as outbreak 0 at round 0.
    pub fn new(network: Arc<Network>, params: InfoParams, rng: &mut SimRng) -> Self {
        let n = network.node_count();
        let mut states = vec![NodeState::Unaware; n];
        let (lo, hi) = params.initial_misinformed;
        let k = rng.random_range(lo..=hi).min(n);
        let seeds: BTreeSet<u32> = (0..n as u32).choose_multiple(rng, k).into_iter().collect();
        for &s in &seeds {
            states[s as usize] = NodeState::Misinformed;
        }
        let rumors = seeds.iter().map(|&s| rumor_text(s, rng)).collect();
        let outbreaks = vec![Outbreak { id: 0, injection_round: 0, cohort: seeds, resolved_round: None }];
        Self { round: 0, network, states, outbreaks, params, halted: false, rumors }
    }

    pub fn misinformed(&self) -> impl Iterator<Item = u32> + '_ {
        self.states.iter().enumerate().filter(|(_, s)| **s == NodeState::Misinformed).map(|(i, _)| i as u32)
    }

    pub fn misinformed_count(&self) -> usize {
        self.misinformed().count()
    }

    pub fn misinformed_fraction(&self) -> f64 {
        self.misinformed_count() as f64 / self.states.len() as f64
    }

    pub fn state_vector(&self) -> String {
        self.states.iter().map(|s| s.code()).collect()
    }

    /// Starts a new round and, on injection rounds, flips 1–2 non-misinformed
    /// nodes. Returns the injected nodes.
    pub fn adversary_step(&mut self, volatility: Volatility, rng: &mut SimRng) -> BTreeSet<u32> {
        self.round += 1;
        self.rumors.clear();
        let mut injected = BTreeSet::new();
        if !is_injection_round(volatility, self.round) {
            return injected;
        }
        let candidates: Vec<u32> = self
            .states
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != NodeState::Misinformed)
            .map(|(i, _)| i as u32)
            .collect();
        let k = rng.random_range(1..=2usize).min(candidates.len());
        injected.extend(candidates.choose_multiple(rng, k).copied());
        for &v in &injected {
            self.states[v as usize] = NodeState::Misinformed;
            let r = rumor_text(v, rng);
            self.rumors.push(r);
        }
        if !injected.is_empty() {
            self.outbreaks.push(Outbreak {
                id: self.outbreaks.len() as u32,
                injection_round: self.round,
                cohort: injected.clone(),
                resolved_round: None,
            });
        }
        injected
    }

    /// Applies every defender's fact-check set. Returns `(corrected, protected)`.
    pub fn apply_factchecks(&mut self, targets: &[NodeSet]) -> Result<(BTreeSet<u32>, BTreeSet<u32>)> {
        let n = self.states.len() as u32;
        for t in targets {
            if t.len() > self.params.budget {
                return Err(Error::BudgetExceeded { len: t.len(), budget: self.params.budget });
            }
            if let Some(&bad) = t.nodes().iter().find(|&&v| v >= n) {
                return Err(Error::InvalidParameter(format!("node {bad} not in network")));
            }
        }
        let protected: BTreeSet<u32> = targets.iter().flat_map(|t| t.nodes().iter().copied()).collect();
        let mut corrected = BTreeSet::new();
        for &v in &protected {
            if self.states[v as usize] == NodeState::Misinformed {
                self.states[v as usize] = NodeState::Informed;
                corrected.insert(v);
            }
        }
        Ok((corrected, protected))
    }

    /// Synchronous spread: every (misinformed, susceptible neighbour) pair
    /// infects independently with probability `p_spread`. Draws are keyed by
    /// the pair, so the outcome does not depend on iteration order.
    pub fn spread_step(&mut self, p_spread: f64, protected: &BTreeSet<u32>, rng: &mut SimRng) -> BTreeSet<u32> {
        let key: u64 = rng.random();
        let r = self.round;
        let fresh: Vec<(u32, &BTreeSet<u32>)> = self
            .outbreaks
            .iter()
            .filter(|o| o.injection_round == r)
            .map(|o| (o.id, &o.cohort))
            .collect();
        let mut infected: BTreeMap<u32, Option<u32>> = BTreeMap::new();
        for u in self.misinformed() {
            let source_outbreak = fresh.iter().find(|(_, c)| c.contains(&u)).map(|(id, _)| *id);
            for &v in self.network.neighbors(u) {
                if self.states[v as usize] == NodeState::Misinformed || protected.contains(&v) {
                    continue;
                }
                if keyed_unit(key, u as u64, v as u64) < p_spread {
                    let e = infected.entry(v).or_insert(None);
                    if let Some(o) = source_outbreak {
                        *e = Some(e.map_or(o, |cur| cur.min(o)));
                    }
                }
            }
        }
        for (&v, &o) in &infected {
            self.states[v as usize] = NodeState::Misinformed;
            if let Some(o) = o {
                self.outbreaks[o as usize].cohort.insert(v);
            }
        }
        infected.into_keys().collect()
    }

    /// Closes the round: marks outbreaks whose surviving cohort dropped below
    /// half its size and checks the halt condition.
    pub fn end_round(&mut self) {
        let r = self.round;
        for o in &mut self.outbreaks {
            if o.resolved_round.is_none() {
                let alive = o.cohort.iter().filter(|&&v| self.states[v as usize] == NodeState::Misinformed).count();
                if 2 * alive < o.cohort.len() {
                    o.resolved_round = Some(r);
                }
            }
        }
        self.halted = self.misinformed_fraction() > self.params.halt_fraction;
    }

    pub fn outbreak_status(&self) -> Vec<OutbreakStatus> {
        self.outbreaks
            .iter()
            .map(|o| OutbreakStatus {
                id: o.id,
                injection_round: o.injection_round,
                peak: o.peak(),
                alive: o.cohort.iter().filter(|&&v| self.states[v as usize] == NodeState::Misinformed).count(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Claim {
    Suspicious,
    Cleared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoLine {
    pub text: String,
    pub node: u32,
    pub claim: Claim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoReport {
    pub rumors: Vec<Rumor>,
    pub lines: Vec<InfoLine>,
    #[serde(skip)]
    truthful: Vec<bool>,
}

impl InfoReport {
    /// A report assembled by hand; its truth flags are unknown and left empty.
    pub fn from_parts(rumors: Vec<Rumor>, lines: Vec<InfoLine>) -> Self {
        Self { rumors, lines, truthful: Vec::new() }
    }

    pub fn truth_flags(&self) -> &[bool] {
        &self.truthful
    }

    /// Nodes the report currently flags as spreading misinformation.
    pub fn suspicious(&self) -> BTreeSet<u32> {
        self.lines.iter().filter(|l| l.claim == Claim::Suspicious).map(|l| l.node).collect()
    }

    pub fn text(&self) -> String {
        self.rumors
            .iter()
            .map(|r| r.text.as_str())
            .chain(self.lines.iter().map(|l| l.text.as_str()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub const CONTRADICTION_PROBABILITY: f64 = 0.2;

/// One line per misinformed node (20% replaced by a false "already checked"
/// claim) plus, with probability 0.2, a false alarm about a healthy node.
pub fn generate_info_report(state: &InfoState, rng: &mut SimRng) -> InfoReport {
    let mut lines = Vec::new();
    let mut truthful = Vec::new();
    for v in state.misinformed() {
        if rng.random_bool(CONTRADICTION_PROBABILITY) {
            lines.push(InfoLine {
                text: format!("Some people say Node #{v} was already fact-checked."),
                node: v,
                claim: Claim::Cleared,
            });
            truthful.push(false);
        } else {
            lines.push(InfoLine {
                text: format!("Suspicious rumor activity detected at Node #{v}."),
                node: v,
                claim: Claim::Suspicious,
            });
            truthful.push(true);
        }
    }
    if rng.random_bool(CONTRADICTION_PROBABILITY) {
        let healthy: Vec<u32> = state
            .states
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != NodeState::Misinformed)
            .map(|(i, _)| i as u32)
            .collect();
        if let Some(&v) = healthy.choose(rng) {
            lines.push(InfoLine {
                text: format!("A new wave of misinformation might have reached Node #{v}."),
                node: v,
                claim: Claim::Suspicious,
            });
            truthful.push(false);
        }
    }
    InfoReport { rumors: state.rumors.clone(), lines, truthful }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutbreakStatus {
    pub id: u32,
    pub injection_round: u32,
    pub peak: usize,
    pub alive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoRoundStats {
    pub round: u32,
    pub nodes: usize,
    pub misinformed: usize,
    /// Unique nodes fact-checked across all defenders this round.
    pub checked: usize,
    pub corrected: usize,
    pub newly_infected: usize,
    pub outbreaks: Vec<OutbreakStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoMetrics {
    /// Misinformed fraction at termination.
    pub spread: f64,
    /// Mean rounds for an outbreak cohort to fall below half its size.
    pub containment_time: f64,
    /// Mean unique fact-checked nodes per round.
    pub coverage_diversity: f64,
}

/// An outbreak resolves in the first round whose end state has fewer than
/// half its cohort still misinformed; unresolved outbreaks count up to the
/// final round.
pub fn infospread_metrics(rounds: &[InfoRoundStats]) -> Result<InfoMetrics> {
    let last = rounds.last().ok_or(Error::EmptyRecords)?;
    let spread = last.misinformed as f64 / last.nodes as f64;
    let mut outbreaks: BTreeMap<u32, (u32, Option<u32>)> = BTreeMap::new();
    for r in rounds {
        for o in &r.outbreaks {
            let e = outbreaks.entry(o.id).or_insert((o.injection_round, None));
            if e.1.is_none() && r.round >= o.injection_round && 2 * o.alive < o.peak {
                e.1 = Some(r.round);
            }
        }
    }
    let times: Vec<f64> = outbreaks
        .values()
        .map(|&(inj, res)| res.unwrap_or(last.round).saturating_sub(inj) as f64)
        .collect();
    let containment_time = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    let coverage_diversity = rounds.iter().map(|r| r.checked as f64).sum::<f64>() / rounds.len() as f64;
    Ok(InfoMetrics { spread, containment_time, coverage_diversity })
}
