//! One seeded run: environment, team and the five-phase round loop.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use cdsim_core::agents::{
    self, AgentSpec, DisasterView, ExternalPolicy, InfoView, LastOutcome, Message, Observation, PublicView,
    ScenarioView,
};
use cdsim_core::consensus::{commit_actions, Proposal};
use cdsim_core::env::disaster::{generate_report, DisasterRoundStats, DisasterState, EnvEvent, RewardEvent};
use cdsim_core::env::infospread::{generate_info_report, spread_probability, InfoRoundStats, InfoState};
use cdsim_core::env::network::{generate_network, Network};
use cdsim_core::env::publicgoods::{PublicGoodsState, Settlement};
use cdsim_core::env::Scenario;
use cdsim_core::rng::{self, SimRng};
use cdsim_core::model::deviations;
use cdsim_core::{ActionValue, GridCell, NodeSet};
use serde::{Deserialize, Serialize};

use crate::config::{Baseline, ExperimentConfig};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Environment,
    Report,
    Discussion,
    Action,
    Reward,
}

impl Phase {
    pub const ORDER: [Phase; 5] = [Phase::Environment, Phase::Report, Phase::Discussion, Phase::Action, Phase::Reward];

    pub fn tag(self) -> &'static str {
        match self {
            Phase::Environment => "env",
            Phase::Report => "report",
            Phase::Discussion => "discuss",
            Phase::Action => "act",
            Phase::Reward => "reward",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoundDetail {
    Disaster {
        stats: DisasterRoundStats,
        reward_events: Vec<RewardEvent>,
        env_events: Vec<EnvEvent>,
        cumulative_reward: f64,
    },
    Info {
        stats: InfoRoundStats,
        injected: BTreeSet<u32>,
        states: String,
    },
    Public {
        settlement: Settlement,
        shock: Option<f64>,
        rumor_claim: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fallback {
    pub agent_id: usize,
    pub phase: Phase,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    /// Phase tags in execution order.
    pub phases: Vec<Phase>,
    pub proposals: Vec<ActionValue>,
    pub actions: Vec<ActionValue>,
    pub deviations: Vec<f64>,
    pub d_bar: f64,
    /// Round-level performance used by the inverted-U analysis; `None` for
    /// disaster rounds with nothing active.
    pub performance: Option<f64>,
    pub explored: usize,
    pub messages: Vec<Message>,
    pub fallbacks: Vec<Fallback>,
    pub detail: RoundDetail,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: String,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub network: Option<Arc<Network>>,
}

pub fn run_id(config_hash: &str, seed: u64) -> String {
    format!("{config_hash}-s{seed}")
}

/// Agents and their private random streams.
struct Team<'a> {
    cfg: &'a ExperimentConfig,
    specs: Vec<AgentSpec>,
    rngs: Vec<SimRng>,
    external: Option<&'a dyn ExternalPolicy>,
    last_messages: Vec<Message>,
    last_actions: Vec<Option<ActionValue>>,
}

struct TeamOutcome {
    proposals: Vec<ActionValue>,
    actions: Vec<ActionValue>,
    deviations: Vec<f64>,
    d_bar: f64,
    explored: usize,
    messages: Vec<Message>,
    fallbacks: Vec<Fallback>,
}

impl<'a> Team<'a> {
    fn new(cfg: &'a ExperimentConfig, seed: u64, external: Option<&'a dyn ExternalPolicy>) -> Self {
        let specs = cfg.team_specs();
        let rngs = specs.iter().map(|a| rng::agent_stream(seed, a.agent_id)).collect();
        let n = specs.len();
        Self { cfg, specs, rngs, external, last_messages: Vec::new(), last_actions: vec![None; n] }
    }

    fn observation(&self, i: usize, round: u32, view: &ScenarioView, transcript: &[Message]) -> Observation {
        Observation {
            round,
            team_size: self.specs.len(),
            consensus: self.cfg.consensus,
            view: view.clone(),
            transcript: transcript.to_vec(),
            own_last_action: self.last_actions[i].clone(),
        }
    }

    /// Discussion, proposal and commitment for one round.
    fn play(&mut self, round: u32, views: &[ScenarioView], phases: &mut Vec<Phase>) -> Result<TeamOutcome, HarnessError> {
        let interact = self.cfg.baseline != Baseline::NoInteraction;
        let mut transcript = if interact { self.last_messages.clone() } else { Vec::new() };
        let mut messages = Vec::new();
        let mut fallbacks = Vec::new();

        phases.push(Phase::Discussion);
        if interact {
            for _ in 0..self.cfg.discussion_turns {
                for (i, view) in views.iter().enumerate() {
                    let obs = self.observation(i, round, view, &transcript);
                    let spoken = agents::communicate(&self.specs[i], &obs, &mut self.rngs[i], self.external);
                    if let Some(reason) = spoken.fallback {
                        fallbacks.push(Fallback { agent_id: i, phase: Phase::Discussion, reason });
                    }
                    transcript.push(spoken.message.clone());
                    messages.push(spoken.message);
                }
            }
        }

        phases.push(Phase::Action);
        let mut proposals = Vec::with_capacity(self.specs.len());
        let mut explored = 0;
        for (i, view) in views.iter().enumerate() {
            let obs = self.observation(i, round, view, &transcript);
            let d = agents::decide(&self.specs[i], &obs, &mut self.rngs[i], self.external);
            if let Some(reason) = d.fallback {
                fallbacks.push(Fallback { agent_id: i, phase: Phase::Action, reason });
            }
            explored += d.explored as usize;
            proposals.push(Proposal::new(i, d.action));
        }
        let actions: Vec<ActionValue> =
            commit_actions(self.cfg.consensus, &proposals, self.cfg.contribution_rule)?.into_iter().map(|(_, a)| a).collect();
        let kind = self.cfg.scenario_kind()?.deviation_kind(self.cfg.c_max());
        let devs = deviations(&actions, kind)?;
        let d_bar = devs.iter().sum::<f64>() / devs.len() as f64;

        self.last_messages = messages.clone();
        for (slot, a) in self.last_actions.iter_mut().zip(&actions) {
            *slot = Some(a.clone());
        }
        Ok(TeamOutcome {
            proposals: proposals.into_iter().map(|p| p.action).collect(),
            actions,
            deviations: devs,
            d_bar,
            explored,
            messages,
            fallbacks,
        })
    }
}

fn record(round: u32, phases: Vec<Phase>, out: TeamOutcome, performance: Option<f64>, detail: RoundDetail) -> RoundRecord {
    RoundRecord {
        round,
        phases,
        proposals: out.proposals,
        actions: out.actions,
        deviations: out.deviations,
        d_bar: out.d_bar,
        performance,
        explored: out.explored,
        messages: out.messages,
        fallbacks: out.fallbacks,
        detail,
    }
}

/// Runs one seed of a resolved configuration.
pub fn run_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    external: Option<&dyn ExternalPolicy>,
) -> Result<RunResult, HarnessError> {
    let run_id = run_id(&cfg.hash(), seed);
    let mut team = Team::new(cfg, seed, external);
    let (records, network) = match cfg.scenario_kind()? {
        Scenario::Disaster => (run_disaster(cfg, seed, &mut team)?, None),
        Scenario::InfoSpread => {
            let (r, n) = run_info(cfg, seed, &mut team)?;
            (r, Some(n))
        }
        Scenario::PublicGoods => (run_public(cfg, seed, &mut team)?, None),
    };
    Ok(RunResult { run_id, seed, records, network })
}

fn run_disaster(cfg: &ExperimentConfig, seed: u64, team: &mut Team) -> Result<Vec<RoundRecord>, HarnessError> {
    let mut env_rng = rng::stream(seed, rng::ENV_STREAM);
    let mut report_rng = rng::stream(seed, rng::REPORT_STREAM);
    let mut state = DisasterState::new(team.specs.len(), cfg.disaster, &mut rng::stream(seed, rng::SETUP_STREAM));
    let infra: Vec<GridCell> = state.infra_cells.iter().copied().collect();
    let mut out = Vec::new();
    for round in 1..=cfg.rounds {
        let mut phases = vec![Phase::Environment];
        let env_events = state.step_environment(cfg.volatility, &mut env_rng);
        phases.push(Phase::Report);
        let report = generate_report(&state, &mut report_rng);
        let views: Vec<ScenarioView> = state
            .drone_positions
            .iter()
            .map(|&position| {
                ScenarioView::Disaster(DisasterView { report: report.clone(), position, infra_cells: infra.clone() })
            })
            .collect();
        let o = team.play(round, &views, &mut phases)?;
        phases.push(Phase::Reward);
        let cells: Vec<GridCell> = o.actions.iter().map(|a| a.as_cell().expect("cell action")).collect();
        let (stats, reward_events) = state.apply_actions(&cells)?;
        let perf = stats.attendance();
        let detail =
            RoundDetail::Disaster { stats, reward_events, env_events, cumulative_reward: state.cumulative_reward };
        out.push(record(round, phases, o, perf, detail));
    }
    Ok(out)
}

fn run_info(cfg: &ExperimentConfig, seed: u64, team: &mut Team) -> Result<(Vec<RoundRecord>, Arc<Network>), HarnessError> {
    let mut env_rng = rng::stream(seed, rng::ENV_STREAM);
    let mut report_rng = rng::stream(seed, rng::REPORT_STREAM);
    let mut setup = rng::stream(seed, rng::SETUP_STREAM);
    let network = Arc::new(generate_network(&mut setup));
    let mut state = InfoState::new(Arc::clone(&network), cfg.infospread, &mut setup);
    let centrality = cfg.exact_betweenness.then(|| Arc::new(network.betweenness()));
    let p = spread_probability(cfg.volatility);
    let mut previous_suspicious = BTreeSet::new();
    let mut out = Vec::new();
    for round in 1..=cfg.rounds {
        let mut phases = vec![Phase::Environment];
        let injected = state.adversary_step(cfg.volatility, &mut env_rng);
        phases.push(Phase::Report);
        let report = generate_info_report(&state, &mut report_rng);
        let view = ScenarioView::Info(InfoView {
            network: Arc::clone(&network),
            report: report.clone(),
            previous_suspicious: previous_suspicious.clone(),
            budget: cfg.infospread.budget,
            centrality: centrality.clone(),
        });
        let views = vec![view; team.specs.len()];
        let o = team.play(round, &views, &mut phases)?;
        phases.push(Phase::Reward);
        let sets: Vec<NodeSet> = o.actions.iter().map(|a| a.as_nodes().expect("node action").clone()).collect();
        let (corrected, protected) = state.apply_factchecks(&sets)?;
        let newly = state.spread_step(p, &protected, &mut env_rng);
        state.end_round();
        let stats = InfoRoundStats {
            round: state.round,
            nodes: network.node_count(),
            misinformed: state.misinformed_count(),
            checked: protected.len(),
            corrected: corrected.len(),
            newly_infected: newly.len(),
            outbreaks: state.outbreak_status(),
        };
        let perf = Some(1.0 - state.misinformed_fraction());
        let detail = RoundDetail::Info { stats, injected, states: state.state_vector() };
        out.push(record(round, phases, o, perf, detail));
        previous_suspicious = report.suspicious();
        if state.halted {
            log::info!("seed {seed}: misinformation passed the halt threshold in round {round}");
            break;
        }
    }
    Ok((out, network))
}

fn run_public(cfg: &ExperimentConfig, seed: u64, team: &mut Team) -> Result<Vec<RoundRecord>, HarnessError> {
    let mut env_rng = rng::stream(seed, rng::ENV_STREAM);
    let n = team.specs.len();
    let mut state = PublicGoodsState::new(n, cfg.publicgoods)?;
    let mut out = Vec::new();
    for round in 1..=cfg.rounds {
        let mut phases = vec![Phase::Environment];
        let theta_last = state.history.last().map_or(cfg.publicgoods.initial_threshold, |s| s.theta);
        let shock = state.step_environment(cfg.volatility, &mut env_rng);
        phases.push(Phase::Report);
        let view = ScenarioView::Public(PublicView {
            theta_last,
            rumor: state.rumor.clone(),
            last: state.history.last().map(|s| LastOutcome { theta: s.theta, total: s.total(), funded: s.funded }),
            benefit: state.benefit,
            n,
            c_max: cfg.publicgoods.c_max,
        });
        let views = vec![view; n];
        let o = team.play(round, &views, &mut phases)?;
        phases.push(Phase::Reward);
        let amounts: Vec<f64> = o.actions.iter().map(|a| a.as_contribution().expect("contribution")).collect();
        let settlement = state.settle_round(&amounts)?;
        let perf = Some(if settlement.funded { 1.0 } else { 0.0 });
        let rumor_claim = state.rumor.as_ref().map(|r| r.claimed_threshold);
        let detail = RoundDetail::Public { settlement, shock, rumor_claim };
        out.push(record(round, phases, o, perf, detail));
    }
    Ok(out)
}
