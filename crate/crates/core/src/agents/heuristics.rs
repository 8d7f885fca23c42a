//! Deterministic role rules. Given the same observation every rule returns
//! the same intent; randomness enters only through exploration.

use std::collections::{BTreeMap, BTreeSet};

use super::{DisasterView, InfoView, Observation, PublicView};
use crate::agents::{AgentSpec, RoleKind};
use crate::model::{GridCell, NodeSet};

/// A disaster location as an agent believes it to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Target {
    pub cell: GridCell,
    pub severity: u8,
}

/// Reads the situation report. "Under control" claims are taken at face
/// value as severity 1; a contrarian reads every line the other way round.
pub fn believed_targets(view: &DisasterView, contrarian: bool) -> Vec<Target> {
    let mut by_cell: BTreeMap<GridCell, u8> = BTreeMap::new();
    for line in &view.report.lines {
        let Some(cell) = line.cell else { continue };
        let claimed = if line.under_control { 1 } else { line.claimed_severity.unwrap_or(1) };
        let severity = if contrarian { 11 - claimed.clamp(1, 10) } else { claimed };
        let e = by_cell.entry(cell).or_insert(severity);
        *e = (*e).max(severity);
    }
    by_cell.into_iter().map(|(cell, severity)| Target { cell, severity }).collect()
}

/// Full preference order over believed targets; the head is the role's pick.
pub fn disaster_ranking(role: RoleKind, targets: &[Target], pos: GridCell, infra: &[GridCell]) -> Vec<GridCell> {
    let mut ts = targets.to_vec();
    let dist = |t: &Target| t.cell.manhattan(pos);
    match role {
        RoleKind::Infrastructure => {
            let near = |t: &Target| infra.iter().any(|c| c.manhattan(t.cell) <= 1);
            ts.sort_by(|a, b| {
                near(b).cmp(&near(a)).then_with(|| {
                    if near(a) {
                        dist(a).cmp(&dist(b)).then(b.severity.cmp(&a.severity))
                    } else {
                        b.severity.cmp(&a.severity).then(dist(a).cmp(&dist(b)))
                    }
                })
                .then(a.cell.cmp(&b.cell))
            });
        }
        RoleKind::Logistics => {
            let urgent = |t: &Target| t.severity > 5;
            ts.sort_by(|a, b| {
                urgent(b)
                    .cmp(&urgent(a))
                    .then(dist(a).cmp(&dist(b)))
                    .then(b.severity.cmp(&a.severity))
                    .then(a.cell.cmp(&b.cell))
            });
        }
        _ => {
            ts.sort_by(|a, b| b.severity.cmp(&a.severity).then(dist(a).cmp(&dist(b))).then(a.cell.cmp(&b.cell)));
        }
    }
    ts.into_iter().map(|t| t.cell).collect()
}

/// Peers' declared intents from the current round, excluding the agent.
fn peer_intents(obs: &Observation, me: usize) -> impl Iterator<Item = &crate::model::ActionValue> {
    obs.transcript
        .iter()
        .filter(move |m| m.round == obs.round && m.agent_id != me)
        .filter_map(|m| m.intent.as_ref())
}

/// Walks the preference order and skips targets that already have their
/// share of declared drones. With no peer messages this is the role's pick.
pub fn disaster_intent(spec: &AgentSpec, obs: &Observation, view: &DisasterView) -> GridCell {
    let targets = believed_targets(view, spec.contrarian);
    if targets.is_empty() {
        return view.position;
    }
    let ranking = disaster_ranking(spec.role, &targets, view.position, &view.infra_cells);
    let mut claims: BTreeMap<GridCell, usize> = BTreeMap::new();
    for a in peer_intents(obs, spec.agent_id) {
        if let Some(c) = a.as_cell() {
            *claims.entry(c).or_default() += 1;
        }
    }
    let cap = obs.team_size.max(1).div_ceil(targets.len());
    ranking
        .iter()
        .copied()
        .find(|c| claims.get(c).copied().unwrap_or(0) < cap)
        .unwrap_or(ranking[0])
}

fn by_score_desc(mut nodes: Vec<u32>, score: impl Fn(u32) -> f64) -> Vec<u32> {
    nodes.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    nodes
}

pub fn info_ranking(role: RoleKind, contrarian: bool, view: &InfoView) -> Vec<u32> {
    let g = &view.network;
    let suspicious: BTreeSet<u32> =
        if contrarian { view.previous_suspicious.clone() } else { view.report.suspicious() };
    let degree = |v: u32| g.degree(v) as f64;
    let reactive = || {
        let susceptible = |v: u32| g.neighbors(v).iter().filter(|u| !suspicious.contains(u)).count() as f64;
        let mut s: Vec<u32> = suspicious.iter().copied().collect();
        s.sort_by(|&a, &b| {
            susceptible(b).total_cmp(&susceptible(a)).then(degree(b).total_cmp(&degree(a))).then(a.cmp(&b))
        });
        s
    };
    match role {
        RoleKind::Proactive => {
            let mut ring: BTreeSet<u32> = BTreeSet::new();
            for &v in &suspicious {
                ring.extend(g.neighbors(v).iter().filter(|u| !suspicious.contains(u)));
            }
            if ring.is_empty() {
                ring = g.nodes().filter(|v| !suspicious.contains(v)).collect();
            }
            by_score_desc(ring.into_iter().collect(), degree)
        }
        RoleKind::Reactive => reactive(),
        RoleKind::Analyzer => {
            let frontier: Vec<u32> = g
                .nodes()
                .filter(|&v| {
                    let inside = suspicious.contains(&v);
                    g.neighbors(v).iter().any(|u| suspicious.contains(u) != inside)
                })
                .collect();
            match &view.centrality {
                Some(c) => by_score_desc(frontier, |v| c[v as usize]),
                None => by_score_desc(frontier, degree),
            }
        }
        RoleKind::Rapid => {
            let mut fresh: BTreeSet<u32> = suspicious.difference(&view.previous_suspicious).copied().collect();
            if !contrarian {
                fresh.extend(view.report.rumors.iter().map(|r| r.node).filter(|v| !view.previous_suspicious.contains(v)));
            }
            if fresh.is_empty() {
                reactive()
            } else {
                by_score_desc(fresh.into_iter().collect(), degree)
            }
        }
        _ => by_score_desc(suspicious.into_iter().collect(), degree),
    }
}

/// Top of the ranking up to the budget, preferring nodes no peer has
/// announced this round.
pub fn info_intent(spec: &AgentSpec, obs: &Observation, view: &InfoView) -> NodeSet {
    let ranking = info_ranking(spec.role, spec.contrarian, view);
    let claimed: BTreeSet<u32> = peer_intents(obs, spec.agent_id)
        .filter_map(|a| a.as_nodes())
        .flat_map(|s| s.nodes().iter().copied())
        .collect();
    let (free, taken): (Vec<u32>, Vec<u32>) = ranking.into_iter().partition(|v| !claimed.contains(v));
    let picked = free.into_iter().chain(taken).take(view.budget);
    NodeSet::new(picked).expect("ranking has no duplicates")
}

pub fn contribution_intent(spec: &AgentSpec, view: &PublicView) -> f64 {
    let trusts = spec.role.trusts_rumors() != spec.contrarian;
    let theta = match (&view.rumor, trusts) {
        (Some(r), true) => r.claimed_threshold,
        _ => view.theta_last,
    };
    let n = view.n.max(1) as f64;
    let fair = theta / n;
    let x = match spec.role {
        RoleKind::Altruistic => fair + 2.0,
        RoleKind::Strategic => match &view.last {
            Some(l) => fair + (l.theta - l.total) / n,
            None => fair,
        },
        RoleKind::Conservative => fair.min(0.25 * view.c_max),
        RoleKind::Adaptive => match &view.last {
            Some(l) if l.funded => l.total / n,
            _ => fair,
        },
        _ => fair,
    };
    x.clamp(0.0, view.c_max)
}
