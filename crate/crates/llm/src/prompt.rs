//! Prompt templates for the three scenarios.

use std::fmt::Write;

use cdsim_core::agents::{AgentSpec, Message, Observation, ScenarioView};
use cdsim_core::env::Scenario;

/// Rounds of peer messages kept in a prompt.
pub const MESSAGE_WINDOW: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PromptOptions {
    /// Appends the clause that asks every agent to take one shared action.
    pub force_alignment: bool,
}

fn peer_lines(obs: &Observation, me: usize) -> String {
    let start = obs.round.saturating_sub(MESSAGE_WINDOW - 1);
    let msgs: Vec<&Message> =
        obs.transcript.iter().filter(|m| m.agent_id != me && m.round >= start && !m.text.is_empty()).collect();
    if msgs.is_empty() {
        return "(none)".into();
    }
    msgs.iter().map(|m| format!("[round {}] Agent {}: {}", m.round, m.agent_id, m.text)).collect::<Vec<_>>().join("\n")
}

fn alignment_clause(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::Disaster => "All drones must agree on and execute the exact same action.",
        Scenario::InfoSpread => "All defenders must agree on and execute the exact same action.",
        Scenario::PublicGoods => "All contributors must agree on and execute the exact same action.",
    }
}

pub fn render_prompt(spec: &AgentSpec, obs: &Observation, opts: PromptOptions) -> String {
    let scenario = obs.view.scenario();
    let role = spec.role.title(scenario);
    let guide = spec.role_prompt(scenario);
    let peers = peer_lines(obs, spec.agent_id);
    let id = spec.agent_id;
    let mut p = match &obs.view {
        ScenarioView::Disaster(v) => {
            let infra = v.infra_cells.iter().map(|c| format!("[{},{}]", c.x, c.y)).collect::<Vec<_>>().join(", ");
            let situation = format!(
                "Round {}. The area is a 10x10 grid with coordinates 0-9. You are at [{},{}]. Infrastructure at: {}. Reports: {}",
                obs.round, v.position.x, v.position.y, infra, v.report.text()
            );
            format!(
                "You are Drone {id}, a {role} in a disaster response team.\n\n\
                 Current situation: {situation}\n\n\
                 Other drone messages: {peers}\n\n\
                 Your role instructions: {guide}\n\n\
                 Based on the current situation and your role, provide:\n\
                 1. Your analysis of the situation\n\
                 2. Your proposed action as grid coordinates [x,y]\n\
                 3. A brief message to share with other drones\n\n\
                 Format your response as JSON exactly like this example:\n\
                 {{\"analysis\": \"My analysis of the situation...\", \"action\": [3,4], \"message\": \"My message to other drones...\"}}"
            )
        }
        ScenarioView::Info(v) => {
            let g = &v.network;
            let situation = format!("Round {}. {}", obs.round, v.report.text());
            let mut hubs: Vec<u32> = g.nodes().collect();
            hubs.sort_by(|&a, &b| g.degree(b).cmp(&g.degree(a)).then(a.cmp(&b)));
            let hubs = hubs.iter().take(8).map(|&n| format!("#{n} (degree {})", g.degree(n))).collect::<Vec<_>>().join(", ");
            let mut network = format!(
                "{} nodes (ids 0-{}), {} edges. Highest-degree nodes: {hubs}.",
                g.node_count(),
                g.node_count().saturating_sub(1),
                g.edge_count()
            );
            let flagged = v.report.suspicious();
            if !flagged.is_empty() {
                let _ = write!(network, " Neighbours of flagged nodes:");
                for n in &flagged {
                    let _ = write!(network, " #{n}->{:?}", g.neighbors(*n));
                }
            }
            format!(
                "You are Defender {id}, a {role} in an information manipulation defense team.\n\n\
                 Current situation: {situation}\n\n\
                 Network information: {network}\n\n\
                 Other defender messages: {peers}\n\n\
                 Your role instructions: {guide}\n\n\
                 Based on the situation and your role, provide:\n\
                 1. Your analysis of the network state\n\
                 2. Your proposed nodes to fact-check [maximum {}]\n\
                 3. A brief message to share with other defenders\n\n\
                 Format your response as JSON exactly like this example:\n\
                 {{\"analysis\": \"My analysis of the situation...\", \"target_nodes\": [1, 4, 7], \"message\": \"My message to other defenders...\"}}",
                v.budget
            )
        }
        ScenarioView::Public(v) => {
            let mut situation = format!(
                "Round {}. The last announced threshold is {}. If total contributions reach the threshold, a benefit of {} is shared equally among {} contributors; each unit contributed costs 1.",
                obs.round, v.theta_last, v.benefit, v.n
            );
            if let Some(r) = &v.rumor {
                let _ = write!(situation, " Rumor: {}", r.text);
            }
            let previous = match &v.last {
                Some(l) => format!(
                    "Total contribution {:.2} against threshold {}: {}.",
                    l.total,
                    l.theta,
                    if l.funded { "funded" } else { "not funded" }
                ),
                None => "(none yet)".into(),
            };
            let c_max = v.c_max;
            format!(
                "You are Contributor {id}, a {role} in a public goods provision team.\n\n\
                 Current situation: {situation}\n\n\
                 Previous outcomes: {previous}\n\n\
                 Other contributor messages: {peers}\n\n\
                 Your role instructions: {guide}\n\n\
                 Based on the situation and your role, provide:\n\
                 1. Your analysis of the situation\n\
                 2. Your proposed contribution amount [0-{c_max}]\n\
                 3. A brief message to share with other contributors\n\n\
                 Format your response as JSON exactly like this example:\n\
                 {{\"analysis\": \"My analysis of the situation...\", \"contribution\": 10.5, \"message\": \"My message to other contributors...\"}}"
            )
        }
    };
    if opts.force_alignment {
        p.push_str("\n\n");
        p.push_str(alignment_clause(scenario));
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use cdsim_core::agents::{build_team, DisasterView, Diversity, PolicyKind, PublicView};
    use cdsim_core::consensus::ConsensusMode;
    use cdsim_core::env::disaster::{ReportLine, SituationReport};
    use cdsim_core::GridCell;

    fn disaster_obs(transcript: Vec<Message>) -> Observation {
        let line = ReportLine {
            text: "A fire at (2,3) has severity 8; no sign of growth.".into(),
            cell: Some(GridCell { x: 2, y: 3 }),
            claimed_severity: Some(8),
            trend: None,
            under_control: false,
        };
        Observation {
            round: 3,
            team_size: 3,
            consensus: ConsensusMode::Implicit,
            view: ScenarioView::Disaster(DisasterView {
                report: SituationReport::from_lines(vec![line]),
                position: GridCell { x: 0, y: 0 },
                infra_cells: vec![GridCell { x: 1, y: 1 }],
            }),
            transcript,
            own_last_action: None,
        }
    }

    #[test]
    fn disaster_prompt() {
        let team = build_team(Scenario::Disaster, Diversity::Medium, 3, PolicyKind::Llm, 0.0);
        let p = render_prompt(&team[0], &disaster_obs(vec![]), PromptOptions::default());
        assert!(p.starts_with("You are Drone 0, a Medical Drone in a disaster response team."));
        assert!(p.contains("proposed action as grid coordinates [x,y]"));
        assert!(p.contains("severity 8"));
        assert!(p.contains("Other drone messages: (none)"));
        assert!(!p.contains("exact same action"));
        let aligned = render_prompt(&team[0], &disaster_obs(vec![]), PromptOptions { force_alignment: true });
        assert!(aligned.ends_with("must agree on and execute the exact same action."));
    }

    #[test]
    fn peer_window() {
        let msg = |agent_id, round, text: &str| Message { agent_id, round, text: text.into(), intent: None };
        let obs = disaster_obs(vec![msg(1, 1, "old"), msg(1, 2, "recent"), msg(0, 3, "mine"), msg(2, 3, "now")]);
        let team = build_team(Scenario::Disaster, Diversity::Low, 3, PolicyKind::Llm, 0.0);
        let p = render_prompt(&team[0], &obs, PromptOptions::default());
        assert!(p.contains("recent") && p.contains("now"));
        assert!(!p.contains("old") && !p.contains("mine"));
    }

    #[test]
    fn public_goods_bound() {
        let team = build_team(Scenario::PublicGoods, Diversity::High, 4, PolicyKind::Llm, 0.0);
        let obs = Observation {
            round: 1,
            team_size: 4,
            consensus: ConsensusMode::Explicit,
            view: ScenarioView::Public(PublicView { theta_last: 30.0, rumor: None, last: None, benefit: 100.0, n: 4, c_max: 20.0 }),
            transcript: vec![],
            own_last_action: None,
        };
        let p = render_prompt(&team[1], &obs, PromptOptions::default());
        assert!(p.contains("contribution amount [0-20]"));
        assert!(p.contains("Previous outcomes: (none yet)"));
        assert!(p.contains("Strategic contributor"));
    }
}
