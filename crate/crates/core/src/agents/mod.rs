//! Agent policies: role heuristics, the random baseline and a hook for
//! externally driven agents such as language models.

mod heuristics;
mod roles;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::{IndexedRandom, IteratorRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::ConsensusMode;
use crate::env::disaster::{grid_neighbors_within, SituationReport};
use crate::env::infospread::InfoReport;
use crate::env::network::Network;
use crate::env::publicgoods::ThresholdRumor;
use crate::env::Scenario;
use crate::model::{ActionValue, GridCell, NodeSet};
use crate::rng::SimRng;

pub use heuristics::{believed_targets, disaster_ranking, info_ranking, Target};
pub use roles::{team_roles, Diversity, RoleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Heuristic,
    Random,
    /// Driven by an [`ExternalPolicy`], falling back to the role heuristic.
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: usize,
    pub role: RoleKind,
    /// Inverts the agent's trust in reports and rumors.
    pub contrarian: bool,
    pub policy: PolicyKind,
    pub epsilon: f64,
}

impl AgentSpec {
    pub fn role_prompt(&self, scenario: Scenario) -> String {
        let mut s = format!("You are a {}. {}", self.role.title(scenario), self.role.instructions(scenario));
        if self.contrarian {
            s.push_str(" Treat official reports and rumors with suspicion and assume the opposite of what they claim.");
        }
        s
    }
}

/// Builds the agent list for a team.
pub fn build_team(scenario: Scenario, diversity: Diversity, n: usize, policy: PolicyKind, epsilon: f64) -> Vec<AgentSpec> {
    team_roles(scenario, diversity, n)
        .into_iter()
        .enumerate()
        .map(|(agent_id, (role, contrarian))| AgentSpec { agent_id, role, contrarian, policy, epsilon })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub agent_id: usize,
    pub round: u32,
    pub text: String,
    /// Structured intent, when the sender declared one.
    pub intent: Option<ActionValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisasterView {
    pub report: SituationReport,
    pub position: GridCell,
    pub infra_cells: Vec<GridCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoView {
    pub network: Arc<Network>,
    pub report: InfoReport,
    /// Nodes flagged in the previous round's report.
    pub previous_suspicious: BTreeSet<u32>,
    pub budget: usize,
    /// Exact betweenness, when precomputed; degree is used otherwise.
    pub centrality: Option<Arc<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LastOutcome {
    pub theta: f64,
    pub total: f64,
    pub funded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublicView {
    /// Last announced threshold.
    pub theta_last: f64,
    pub rumor: Option<ThresholdRumor>,
    pub last: Option<LastOutcome>,
    pub benefit: f64,
    pub n: usize,
    pub c_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioView {
    Disaster(DisasterView),
    Info(InfoView),
    Public(PublicView),
}

impl ScenarioView {
    pub fn scenario(&self) -> Scenario {
        match self {
            Self::Disaster(_) => Scenario::Disaster,
            Self::Info(_) => Scenario::InfoSpread,
            Self::Public(_) => Scenario::PublicGoods,
        }
    }
}

/// Everything an agent sees when it speaks or acts.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub round: u32,
    pub team_size: usize,
    pub consensus: ConsensusMode,
    pub view: ScenarioView,
    /// Messages from earlier turns this round and from the previous round.
    pub transcript: Vec<Message>,
    pub own_last_action: Option<ActionValue>,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct PolicyError(pub String);

/// A policy living outside this crate. Errors make the agent fall back to
/// its role heuristic for that call.
pub trait ExternalPolicy: Send + Sync {
    fn message(&self, agent: &AgentSpec, obs: &Observation) -> Result<String, PolicyError>;
    fn action(&self, agent: &AgentSpec, obs: &Observation) -> Result<ActionValue, PolicyError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spoken {
    pub message: Message,
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: ActionValue,
    /// The exploration step replaced the intended action.
    pub explored: bool,
    pub fallback: Option<String>,
}

/// What the role heuristic would do given the observation.
pub fn heuristic_intent(spec: &AgentSpec, obs: &Observation) -> ActionValue {
    match &obs.view {
        ScenarioView::Disaster(v) => ActionValue::Cell(heuristics::disaster_intent(spec, obs, v)),
        ScenarioView::Info(v) => ActionValue::Nodes(heuristics::info_intent(spec, obs, v)),
        ScenarioView::Public(v) => ActionValue::Contribution(heuristics::contribution_intent(spec, v)),
    }
}

pub fn random_action(view: &ScenarioView, rng: &mut SimRng) -> ActionValue {
    match view {
        ScenarioView::Disaster(_) => {
            let c = GridCell::all().choose(rng).expect("grid is non-empty");
            ActionValue::Cell(c)
        }
        ScenarioView::Info(v) => {
            let k = v.budget.min(v.network.node_count());
            let picked = v.network.nodes().choose_multiple(rng, k);
            ActionValue::Nodes(NodeSet::new(picked).expect("distinct sample"))
        }
        ScenarioView::Public(v) => ActionValue::Contribution(rng.random_range(0.0..=v.c_max)),
    }
}

/// Exploration move: a cell one or two steps away, one node swapped for a
/// non-member, or a contribution shifted by up to 20% of `c_max`.
pub fn perturb(action: &ActionValue, view: &ScenarioView, rng: &mut SimRng) -> ActionValue {
    match (action, view) {
        (ActionValue::Cell(c), _) => {
            let options = grid_neighbors_within(*c, 1, 2);
            ActionValue::Cell(*options.choose(rng).expect("every cell has neighbours"))
        }
        (ActionValue::Nodes(s), ScenarioView::Info(v)) => {
            let outside: Vec<u32> = v.network.nodes().filter(|n| !s.contains(*n)).collect();
            let Some(&new) = outside.choose(rng) else { return action.clone() };
            let mut nodes = s.nodes().to_vec();
            if nodes.is_empty() {
                nodes.push(new);
            } else {
                let i = rng.random_range(0..nodes.len());
                nodes[i] = new;
            }
            ActionValue::Nodes(NodeSet::new(nodes).expect("swap keeps nodes distinct"))
        }
        (ActionValue::Contribution(x), ScenarioView::Public(v)) => {
            let d = rng.random_range(-0.2 * v.c_max..=0.2 * v.c_max);
            ActionValue::Contribution((x + d).clamp(0.0, v.c_max))
        }
        _ => action.clone(),
    }
}

fn describe(spec: &AgentSpec, scenario: Scenario, action: &ActionValue) -> String {
    let who = format!("{} {}", spec.role.title(scenario), spec.agent_id);
    match action {
        ActionValue::Cell(c) => format!("{who}: heading to {c}."),
        ActionValue::Nodes(s) if s.is_empty() => format!("{who}: no nodes to check this round."),
        ActionValue::Nodes(s) => format!("{who}: fact-checking nodes {s}."),
        ActionValue::Contribution(x) => format!("{who}: planning to contribute {x:.2}."),
    }
}

/// Communication phase. Heuristic and random agents announce their intent;
/// external agents send free text.
pub fn communicate(spec: &AgentSpec, obs: &Observation, rng: &mut SimRng, external: Option<&dyn ExternalPolicy>) -> Spoken {
    let scenario = obs.view.scenario();
    let mut fallback = None;
    let (text, intent) = match spec.policy {
        PolicyKind::Random => {
            let a = random_action(&obs.view, rng);
            (describe(spec, scenario, &a), Some(a))
        }
        PolicyKind::Llm => match external.map(|e| e.message(spec, obs)) {
            Some(Ok(text)) => (text, None),
            other => {
                fallback = Some(fallback_reason(other.map(|r| r.map(|_| ()))));
                let a = heuristic_intent(spec, obs);
                (describe(spec, scenario, &a), Some(a))
            }
        },
        PolicyKind::Heuristic => {
            let a = heuristic_intent(spec, obs);
            (describe(spec, scenario, &a), Some(a))
        }
    };
    Spoken { message: Message { agent_id: spec.agent_id, round: obs.round, text, intent }, fallback }
}

fn fallback_reason(r: Option<Result<(), PolicyError>>) -> String {
    match r {
        None => "no external policy configured".into(),
        Some(Err(e)) => e.0,
        Some(Ok(())) => "invalid action".into(),
    }
}

fn valid_for_view(a: &ActionValue, view: &ScenarioView) -> bool {
    match (a, view) {
        (ActionValue::Cell(_), ScenarioView::Disaster(_)) => true,
        (ActionValue::Nodes(s), ScenarioView::Info(v)) => {
            s.len() <= v.budget && s.nodes().iter().all(|&n| (n as usize) < v.network.node_count())
        }
        (ActionValue::Contribution(x), ScenarioView::Public(v)) => x.is_finite() && (0.0..=v.c_max).contains(x),
        _ => false,
    }
}

/// Action phase. Random agents keep the intent they announced this round;
/// others act on their rule (or external reply) and then explore with
/// probability `epsilon`.
pub fn decide(spec: &AgentSpec, obs: &Observation, rng: &mut SimRng, external: Option<&dyn ExternalPolicy>) -> Decision {
    if spec.policy == PolicyKind::Random {
        let announced = obs
            .transcript
            .iter()
            .find(|m| m.round == obs.round && m.agent_id == spec.agent_id)
            .and_then(|m| m.intent.clone());
        let action = announced.unwrap_or_else(|| random_action(&obs.view, rng));
        return Decision { action, explored: false, fallback: None };
    }
    let mut fallback = None;
    let intended = if spec.policy == PolicyKind::Llm {
        match external.map(|e| e.action(spec, obs)) {
            Some(Ok(a)) if valid_for_view(&a, &obs.view) => a,
            other => {
                fallback = Some(fallback_reason(other.map(|r| r.map(|_| ()))));
                heuristic_intent(spec, obs)
            }
        }
    } else {
        heuristic_intent(spec, obs)
    };
    let explored = spec.epsilon > 0.0 && rng.random_bool(spec.epsilon.min(1.0));
    let action = if explored { perturb(&intended, &obs.view, rng) } else { intended };
    Decision { action, explored, fallback }
}
