//! Disaster response on a 10×10 grid.
//!
//! Up to three disasters are active at once. Each round the world may move a
//! disaster, perturb severities and spawn a new incident according to the
//! volatility schedule; drones then move to their committed cells and the
//! round is scored.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Volatility;
use crate::model::{GridCell, GRID_SIZE};
use crate::rng::SimRng;
use crate::{Error, Result};

pub const MAX_ACTIVE: usize = 3;
pub const SPAWN_PROBABILITY: f64 = 0.2;
pub const MAX_SEVERITY: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisasterParams {
    pub initial_disasters: usize,
    pub infra_cells: usize,
    /// Severity removed per occupying drone per round.
    pub reduction_per_drone: i32,
    /// Reward per point of spawn severity when a disaster is cleared.
    pub clear_reward: f64,
    /// Penalty per point of severity for each round a disaster stays active.
    pub uncontained_penalty: f64,
    /// More than this many drones on one cell counts as crowding.
    pub crowd_limit: usize,
    pub misallocation_penalty: f64,
    /// Spawn severity at or above which a disaster counts for response delay.
    pub high_severity: u8,
}

impl Default for DisasterParams {
    fn default() -> Self {
        Self {
            initial_disasters: 2,
            infra_cells: 8,
            reduction_per_drone: 3,
            clear_reward: 5.0,
            uncontained_penalty: 2.0,
            crowd_limit: 2,
            misallocation_penalty: 5.0,
            high_severity: 7,
        }
    }
}

/// Per-volatility event cadence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub move_period: u32,
    pub max_severity_delta: i32,
    pub spawn_period: u32,
    /// Guarantee at least one shift or spawn every round.
    pub forced_shift: bool,
}

impl Schedule {
    pub fn for_volatility(v: Volatility) -> Self {
        match v {
            Volatility::Low => {
                Schedule { move_period: 3, max_severity_delta: 1, spawn_period: 3, forced_shift: false }
            }
            Volatility::Moderate => {
                Schedule { move_period: 2, max_severity_delta: 2, spawn_period: 2, forced_shift: false }
            }
            Volatility::High => {
                Schedule { move_period: 1, max_severity_delta: 3, spawn_period: 1, forced_shift: true }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisasterKind {
    Fire,
    Flood,
    Collapse,
}

impl DisasterKind {
    fn from_id(id: u32) -> Self {
        match id % 3 {
            0 => Self::Fire,
            1 => Self::Flood,
            _ => Self::Collapse,
        }
    }

    fn noun(self) -> &'static str {
        match self {
            Self::Fire => "fire",
            Self::Flood => "flood",
            Self::Collapse => "building collapse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disaster {
    pub id: u32,
    pub kind: DisasterKind,
    pub pos: GridCell,
    pub severity: i32,
    /// Severity at the start of the previous environment update, for trends.
    pub prev_severity: i32,
    pub spawn_round: u32,
    pub spawn_severity: u8,
    pub first_attended_round: Option<u32>,
    pub cleared_round: Option<u32>,
}

impl Disaster {
    pub fn is_active(&self) -> bool {
        self.cleared_round.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvEvent {
    Moved { id: u32, from: GridCell, to: GridCell },
    SeverityChanged { id: u32, from: i32, to: i32 },
    Spawned { id: u32, pos: GridCell, severity: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RewardEvent {
    Cleared { id: u32, spawn_severity: u8, amount: f64 },
    Uncontained { id: u32, severity: i32, amount: f64 },
    Misallocation { crowded: Vec<GridCell>, uncovered: Vec<u32>, amount: f64 },
}

impl RewardEvent {
    pub fn amount(&self) -> f64 {
        match self {
            Self::Cleared { amount, .. }
            | Self::Uncontained { amount, .. }
            | Self::Misallocation { amount, .. } => *amount,
        }
    }
}

/// What the scoring step saw, kept for metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisasterSnapshot {
    pub id: u32,
    pub pos: GridCell,
    pub severity: i32,
    pub spawn_round: u32,
    pub spawn_severity: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisasterRoundStats {
    pub round: u32,
    /// Disasters active when drones arrived, with pre-reduction severity.
    pub active: Vec<DisasterSnapshot>,
    pub attended: Vec<u32>,
    pub cleared: Vec<u32>,
    /// Raw misallocation penalty points (positive magnitude).
    pub misallocation_points: f64,
    pub reward: f64,
}

impl DisasterRoundStats {
    /// Fraction of active disaster cells with at least one drone; `None` when
    /// nothing was active.
    pub fn attendance(&self) -> Option<f64> {
        if self.active.is_empty() {
            None
        } else {
            Some(self.attended.len() as f64 / self.active.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisasterState {
    pub round: u32,
    pub disasters: Vec<Disaster>,
    pub drone_positions: Vec<GridCell>,
    pub infra_cells: BTreeSet<GridCell>,
    pub cumulative_reward: f64,
    pub params: DisasterParams,
    next_id: u32,
}

impl DisasterState {
    /// Infrastructure cells, drone start cells and the initial disasters are
    /// drawn from `rng`. Initial disasters count as spawned in round 1.
    pub fn new(n_drones: usize, params: DisasterParams, rng: &mut SimRng) -> Self {
        let all: Vec<GridCell> = GridCell::all().collect();
        let infra_cells: BTreeSet<GridCell> =
            all.choose_multiple(rng, params.infra_cells).copied().collect();
        let drone_positions = (0..n_drones).map(|_| *all.choose(rng).expect("grid")).collect();
        let mut state = Self {
            round: 0,
            disasters: Vec::new(),
            drone_positions,
            infra_cells,
            cumulative_reward: 0.0,
            params,
            next_id: 0,
        };
        for _ in 0..params.initial_disasters.min(MAX_ACTIVE) {
            state.spawn(rng, 1);
        }
        state
    }

    pub fn active(&self) -> impl Iterator<Item = &Disaster> {
        self.disasters.iter().filter(|d| d.is_active())
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }

    /// High-severity disasters no drone has reached yet, with their spawn round.
    pub fn pending_high_severity(&self) -> BTreeMap<u32, u32> {
        self.active()
            .filter(|d| d.spawn_severity >= self.params.high_severity && d.first_attended_round.is_none())
            .map(|d| (d.id, d.spawn_round))
            .collect()
    }

    fn occupied(&self, cell: GridCell) -> bool {
        self.active().any(|d| d.pos == cell)
    }

    fn spawn(&mut self, rng: &mut SimRng, round: u32) -> Option<EnvEvent> {
        let free: Vec<GridCell> = GridCell::all().filter(|c| !self.occupied(*c)).collect();
        let pos = *free.choose(rng)?;
        let severity: u8 = rng.random_range(1..=MAX_SEVERITY as u8);
        let id = self.next_id;
        self.next_id += 1;
        self.disasters.push(Disaster {
            id,
            kind: DisasterKind::from_id(id),
            pos,
            severity: severity as i32,
            prev_severity: severity as i32,
            spawn_round: round,
            spawn_severity: severity,
            first_attended_round: None,
            cleared_round: None,
        });
        Some(EnvEvent::Spawned { id, pos, severity })
    }

    /// Advances the world by one round. Call once at the start of each round.
    pub fn step_environment(&mut self, volatility: Volatility, rng: &mut SimRng) -> Vec<EnvEvent> {
        let sched = Schedule::for_volatility(volatility);
        self.round += 1;
        let r = self.round;
        let mut events = Vec::new();
        for d in self.disasters.iter_mut().filter(|d| d.is_active()) {
            d.prev_severity = d.severity;
        }

        let active_idx: Vec<usize> =
            (0..self.disasters.len()).filter(|&i| self.disasters[i].is_active()).collect();

        if r.is_multiple_of(sched.move_period) && !active_idx.is_empty() {
            let i = *active_idx.choose(rng).expect("non-empty");
            let (dx, dy) = [(0, 1), (0, -1), (1, 0), (-1, 0)][rng.random_range(0..4)];
            let from = self.disasters[i].pos;
            let to = GridCell::clamped(from.x as i64 + dx, from.y as i64 + dy);
            let blocked = self.active().any(|d| d.id != self.disasters[i].id && d.pos == to);
            if to != from && !blocked {
                self.disasters[i].pos = to;
                events.push(EnvEvent::Moved { id: self.disasters[i].id, from, to });
            }
        }

        if !active_idx.is_empty() {
            let mut chosen: Vec<usize> =
                active_idx.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            if chosen.is_empty() {
                chosen.push(*active_idx.choose(rng).expect("non-empty"));
            }
            for i in chosen {
                let mag = rng.random_range(1..=sched.max_severity_delta);
                let delta = if rng.random_bool(0.5) { mag } else { -mag };
                let d = &mut self.disasters[i];
                let from = d.severity;
                d.severity = (from + delta).clamp(1, MAX_SEVERITY);
                if d.severity != from {
                    events.push(EnvEvent::SeverityChanged { id: d.id, from, to: d.severity });
                }
            }
        }

        let active = self.active_count();
        if active < MAX_ACTIVE {
            let forced = sched.forced_shift && active == 0;
            let scheduled = r.is_multiple_of(sched.spawn_period);
            let draw = rng.random_bool(SPAWN_PROBABILITY);
            if forced || (scheduled && draw) {
                events.extend(self.spawn(rng, r));
            }
        }
        events
    }

    /// Moves drones to their committed cells and scores the round.
    pub fn apply_actions(&mut self, actions: &[GridCell]) -> Result<(DisasterRoundStats, Vec<RewardEvent>)> {
        if actions.len() != self.drone_positions.len() {
            return Err(Error::ActionCount { expected: self.drone_positions.len(), got: actions.len() });
        }
        let r = self.round;
        let p = self.params;
        self.drone_positions = actions.to_vec();
        let mut occupancy: BTreeMap<GridCell, usize> = BTreeMap::new();
        for c in actions {
            *occupancy.entry(*c).or_insert(0) += 1;
        }

        let snapshot: Vec<DisasterSnapshot> = self
            .active()
            .map(|d| DisasterSnapshot {
                id: d.id,
                pos: d.pos,
                severity: d.severity,
                spawn_round: d.spawn_round,
                spawn_severity: d.spawn_severity,
            })
            .collect();

        let crowded: Vec<GridCell> =
            occupancy.iter().filter(|(_, &k)| k > p.crowd_limit).map(|(c, _)| *c).collect();
        let uncovered: Vec<u32> = snapshot
            .iter()
            .filter(|d| !occupancy.contains_key(&d.pos))
            .map(|d| d.id)
            .collect();

        let mut events = Vec::new();
        let mut attended = Vec::new();
        let mut cleared = Vec::new();
        for d in self.disasters.iter_mut().filter(|d| d.is_active()) {
            let k = occupancy.get(&d.pos).copied().unwrap_or(0);
            if k > 0 {
                attended.push(d.id);
                d.first_attended_round.get_or_insert(r);
                d.severity -= p.reduction_per_drone * k as i32;
            }
            if d.severity <= 0 {
                d.cleared_round = Some(r);
                cleared.push(d.id);
                events.push(RewardEvent::Cleared {
                    id: d.id,
                    spawn_severity: d.spawn_severity,
                    amount: d.spawn_severity as f64 * p.clear_reward,
                });
            } else {
                events.push(RewardEvent::Uncontained {
                    id: d.id,
                    severity: d.severity,
                    amount: -(d.severity as f64) * p.uncontained_penalty,
                });
            }
        }
        let mut misallocation_points = 0.0;
        if !crowded.is_empty() && !uncovered.is_empty() {
            misallocation_points = p.misallocation_penalty;
            events.push(RewardEvent::Misallocation {
                crowded,
                uncovered,
                amount: -p.misallocation_penalty,
            });
        }

        let mut reward = 0.0;
        for e in &events {
            reward += e.amount();
            self.cumulative_reward += e.amount();
        }
        let stats = DisasterRoundStats {
            round: r,
            active: snapshot,
            attended,
            cleared,
            misallocation_points,
            reward,
        };
        Ok((stats, events))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Rising,
    Falling,
    Stable,
}

impl Trend {
    fn inverted(self) -> Self {
        match self {
            Self::Rising => Self::Falling,
            Self::Falling => Self::Rising,
            Self::Stable => Self::Rising,
        }
    }

    fn phrase(self) -> &'static str {
        match self {
            Self::Rising => "witnesses say it is spreading",
            Self::Falling => "it appears to be weakening",
            Self::Stable => "no sign of growth",
        }
    }
}

/// One line of a situation report as agents see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub text: String,
    pub cell: Option<GridCell>,
    pub claimed_severity: Option<u8>,
    pub trend: Option<Trend>,
    pub under_control: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationReport {
    pub lines: Vec<ReportLine>,
    #[serde(skip)]
    truthful: Vec<bool>,
}

pub const CONTRADICTION_PROBABILITY: f64 = 0.2;

impl SituationReport {
    /// A report assembled by hand; its truth flags are unknown and left empty.
    pub fn from_lines(lines: Vec<ReportLine>) -> Self {
        Self { lines, truthful: Vec::new() }
    }

    /// Which lines were accurate. For analysis only; agents never read this.
    pub fn truth_flags(&self) -> &[bool] {
        &self.truthful
    }

    pub fn text(&self) -> String {
        self.lines.iter().map(|l| l.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

/// One line per active disaster; each line is independently replaced by a
/// misleading variant with probability 0.2 (severity understated by at least
/// 3 with the trend inverted, or an "under control" claim).
pub fn generate_report(state: &DisasterState, rng: &mut SimRng) -> SituationReport {
    let mut lines = Vec::new();
    let mut truthful = Vec::new();
    for d in state.active() {
        let trend = match d.severity.cmp(&d.prev_severity) {
            std::cmp::Ordering::Greater => Trend::Rising,
            std::cmp::Ordering::Less => Trend::Falling,
            std::cmp::Ordering::Equal => Trend::Stable,
        };
        let noun = d.kind.noun();
        let sev = d.severity as u8;
        if rng.random_bool(CONTRADICTION_PROBABILITY) {
            let understate = sev >= 4 && rng.random_bool(0.5);
            if understate {
                let claimed = rng.random_range(1..=sev - 3);
                let t = trend.inverted();
                lines.push(ReportLine {
                    text: format!("A {noun} at {} has severity {claimed}; {}.", d.pos, t.phrase()),
                    cell: Some(d.pos),
                    claimed_severity: Some(claimed),
                    trend: Some(t),
                    under_control: false,
                });
            } else {
                lines.push(ReportLine {
                    text: format!("Another source says the {noun} at {} is under control.", d.pos),
                    cell: Some(d.pos),
                    claimed_severity: None,
                    trend: None,
                    under_control: true,
                });
            }
            truthful.push(false);
        } else {
            lines.push(ReportLine {
                text: format!("A {noun} at {} has severity {sev}; {}.", d.pos, trend.phrase()),
                cell: Some(d.pos),
                claimed_severity: Some(sev),
                trend: Some(trend),
                under_control: false,
            });
            truthful.push(true);
        }
    }
    if lines.is_empty() {
        lines.push(ReportLine {
            text: "No active incidents reported.".into(),
            cell: None,
            claimed_severity: None,
            trend: None,
            under_control: false,
        });
        truthful.push(true);
    }
    SituationReport { lines, truthful }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisasterMetrics {
    /// Mean per-round fraction of active disaster cells attended.
    pub coverage_rate: f64,
    /// Mean misallocation penalty per round, one event = 1.0.
    pub misallocation: f64,
    pub misallocation_raw: f64,
    /// Mean rounds from spawn to first drone arrival over high-severity disasters.
    pub response_delay: f64,
    /// Fraction of disasters cleared within two rounds of spawning.
    pub contained_within_two: f64,
    pub net_reward: f64,
}

/// Rounds with no active disaster are left out of the coverage average; if
/// every round was empty the coverage rate is 1.
pub fn disaster_metrics(rounds: &[DisasterRoundStats], high_severity: u8, misallocation_unit: f64) -> Result<DisasterMetrics> {
    let last = rounds.last().ok_or(Error::EmptyRecords)?;
    let final_round = last.round;

    let cov: Vec<f64> = rounds.iter().filter_map(DisasterRoundStats::attendance).collect();
    let coverage_rate = if cov.is_empty() { 1.0 } else { cov.iter().sum::<f64>() / cov.len() as f64 };

    let n = rounds.len() as f64;
    let raw: f64 = rounds.iter().map(|r| r.misallocation_points).sum::<f64>() / n;

    // id → (spawn_round, spawn_severity, first attended, cleared)
    let mut seen: BTreeMap<u32, (u32, u8, Option<u32>, Option<u32>)> = BTreeMap::new();
    for r in rounds {
        for d in &r.active {
            seen.entry(d.id).or_insert((d.spawn_round, d.spawn_severity, None, None));
        }
        for id in &r.attended {
            if let Some(e) = seen.get_mut(id) {
                e.2.get_or_insert(r.round);
            }
        }
        for id in &r.cleared {
            if let Some(e) = seen.get_mut(id) {
                e.3.get_or_insert(r.round);
            }
        }
    }

    let delays: Vec<f64> = seen
        .values()
        .filter(|e| e.1 >= high_severity)
        .map(|&(spawn, _, first, _)| first.unwrap_or(final_round).saturating_sub(spawn) as f64)
        .collect();
    let response_delay =
        if delays.is_empty() { 0.0 } else { delays.iter().sum::<f64>() / delays.len() as f64 };

    let mut eligible = 0usize;
    let mut contained = 0usize;
    for &(spawn, _, _, cleared) in seen.values() {
        let ok = cleared.is_some_and(|c| c - spawn <= 2);
        if ok || spawn + 2 <= final_round {
            eligible += 1;
            contained += ok as usize;
        }
    }
    let contained_within_two = if eligible == 0 { 1.0 } else { contained as f64 / eligible as f64 };

    let net_reward = rounds.iter().map(|r| r.reward).sum();
    Ok(DisasterMetrics {
        coverage_rate,
        misallocation: raw / misallocation_unit,
        misallocation_raw: raw,
        response_delay,
        contained_within_two,
        net_reward,
    })
}

pub(crate) fn grid_neighbors_within(cell: GridCell, min: u32, max: u32) -> Vec<GridCell> {
    let mut out = Vec::new();
    let r = max as i64;
    for dx in -r..=r {
        for dy in -r..=r {
            let d = (dx.abs() + dy.abs()) as u32;
            if d < min || d > max {
                continue;
            }
            let (x, y) = (cell.x as i64 + dx, cell.y as i64 + dy);
            if (0..GRID_SIZE as i64).contains(&x) && (0..GRID_SIZE as i64).contains(&y) {
                out.push(GridCell { x: x as u8, y: y as u8 });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn cell(x: u8, y: u8) -> GridCell {
        GridCell { x, y }
    }

    fn disaster(id: u32, pos: GridCell, severity: i32) -> Disaster {
        Disaster {
            id,
            kind: DisasterKind::from_id(id),
            pos,
            severity,
            prev_severity: severity,
            spawn_round: 1,
            spawn_severity: severity as u8,
            first_attended_round: None,
            cleared_round: None,
        }
    }

    fn state_with(n: usize, ds: Vec<Disaster>) -> DisasterState {
        let mut s = DisasterState::new(n, DisasterParams { initial_disasters: 0, ..Default::default() }, &mut rng::stream(0, 9));
        s.next_id = ds.iter().map(|d| d.id + 1).max().unwrap_or(0);
        s.disasters = ds;
        s.round = 1;
        s
    }

    #[test]
    fn no_spawn_when_full() {
        let ds = vec![disaster(0, cell(1, 1), 5), disaster(1, cell(5, 5), 5), disaster(2, cell(8, 2), 5)];
        for seed in 0..50 {
            let mut s = state_with(0, ds.clone());
            let ev = s.step_environment(Volatility::High, &mut rng::stream(seed, 1));
            assert!(!ev.iter().any(|e| matches!(e, EnvEvent::Spawned { .. })));
            assert_eq!(s.active_count(), 3);
        }
    }

    #[test]
    fn low_volatility_moves_only_every_third_round() {
        let mut s = state_with(0, vec![disaster(0, cell(5, 5), 6)]);
        s.round = 0;
        let mut r = rng::stream(3, 1);
        let mut move_rounds = Vec::new();
        for _ in 0..9 {
            let ev = s.step_environment(Volatility::Low, &mut r);
            if ev.iter().any(|e| matches!(e, EnvEvent::Moved { .. })) {
                move_rounds.push(s.round);
            }
        }
        assert!(move_rounds.iter().all(|r| r % 3 == 0), "{move_rounds:?}");
        assert!(!move_rounds.is_empty());
    }

    #[test]
    fn moves_clamp_at_the_corner() {
        // A corner disaster can only ever move east or north.
        for seed in 0..40 {
            let mut s = state_with(0, vec![disaster(0, cell(0, 0), 6)]);
            s.step_environment(Volatility::High, &mut rng::stream(seed, 1));
            let p = s.disasters[0].pos;
            assert!(p == cell(0, 0) || p == cell(1, 0) || p == cell(0, 1), "{p}");
        }
        assert_eq!(GridCell::clamped(-1, 0), cell(0, 0));
    }

    #[test]
    fn severities_and_counts_stay_in_bounds() {
        for vol in Volatility::ALL {
            let mut r = rng::stream(77, 1);
            let mut s = DisasterState::new(5, DisasterParams::default(), &mut r);
            for _ in 0..200 {
                s.step_environment(vol, &mut r);
                assert!(s.active_count() <= MAX_ACTIVE);
                assert!(s.active().all(|d| (1..=10).contains(&d.severity)));
                let targets: Vec<GridCell> = s.drone_positions.iter().map(|_| cell(r.random_range(0..10), r.random_range(0..10))).collect();
                s.apply_actions(&targets).unwrap();
            }
        }
    }

    #[test]
    fn clearing_and_uncontained_penalty() {
        let mut s = state_with(1, vec![disaster(0, cell(2, 2), 2), disaster(1, cell(7, 7), 8)]);
        let (stats, ev) = s.apply_actions(&[cell(2, 2)]).unwrap();
        assert_eq!(stats.cleared, vec![0]);
        assert_eq!(ev[0], RewardEvent::Cleared { id: 0, spawn_severity: 2, amount: 10.0 });
        assert_eq!(ev[1], RewardEvent::Uncontained { id: 1, severity: 8, amount: -16.0 });
        assert_eq!(s.cumulative_reward, 10.0 - 16.0);
    }

    #[test]
    fn crowding_with_uncovered_disaster_costs_five_once() {
        let mut s = state_with(5, vec![disaster(0, cell(5, 5), 10), disaster(1, cell(0, 9), 4)]);
        let acts = [cell(5, 5), cell(5, 5), cell(5, 5), cell(3, 3), cell(3, 3)];
        let (stats, ev) = s.apply_actions(&acts).unwrap();
        let mis: Vec<_> = ev.iter().filter(|e| matches!(e, RewardEvent::Misallocation { .. })).collect();
        assert_eq!(mis.len(), 1);
        assert_eq!(mis[0].amount(), -5.0);
        assert_eq!(stats.misallocation_points, 5.0);
        // Crowding without an uncovered disaster is free.
        let mut s = state_with(3, vec![disaster(0, cell(5, 5), 10)]);
        let (_, ev) = s.apply_actions(&[cell(5, 5); 3]).unwrap();
        assert!(ev.iter().all(|e| !matches!(e, RewardEvent::Misallocation { .. })));
    }

    #[test]
    fn zero_drones_pay_full_severity() {
        let mut s = state_with(0, vec![disaster(0, cell(1, 1), 3), disaster(1, cell(4, 4), 9)]);
        let (stats, _) = s.apply_actions(&[]).unwrap();
        assert_eq!(stats.reward, -2.0 * (3.0 + 9.0));
        assert!(s.apply_actions(&[cell(0, 0)]).is_err());
    }

    #[test]
    fn reports() {
        let s = state_with(0, vec![]);
        let rep = generate_report(&s, &mut rng::stream(1, 2));
        assert_eq!(rep.lines.len(), 1);
        assert!(rep.lines[0].text.contains("No active incidents"));

        let s = state_with(0, vec![disaster(0, cell(1, 1), 3), disaster(1, cell(4, 4), 9), disaster(2, cell(8, 0), 5)]);
        let rep = generate_report(&s, &mut rng::stream(1, 2));
        assert_eq!(rep.lines.len(), 3);
        assert_eq!(rep.truth_flags().len(), 3);
    }

    #[test]
    fn contradicted_severe_fire_is_understated_or_under_control() {
        let s = state_with(0, vec![disaster(0, cell(3, 4), 8)]);
        let mut false_lines = 0;
        for seed in 0..2000 {
            let a = generate_report(&s, &mut rng::stream(seed, 2));
            let b = generate_report(&s, &mut rng::stream(seed, 2));
            assert_eq!(a, b);
            assert_eq!(a.truth_flags(), b.truth_flags());
            let line = &a.lines[0];
            if a.truth_flags()[0] {
                assert_eq!(line.claimed_severity, Some(8));
            } else {
                false_lines += 1;
                assert!(line.under_control || line.claimed_severity.is_some_and(|c| c <= 5), "{line:?}");
            }
        }
        let frac = false_lines as f64 / 2000.0;
        assert!((frac - 0.2).abs() < 0.03, "{frac}");
    }

    fn snap(id: u32, spawn_round: u32, sev: u8) -> DisasterSnapshot {
        DisasterSnapshot { id, pos: cell(0, 0), severity: sev as i32, spawn_round, spawn_severity: sev }
    }

    #[test]
    fn metrics_hand_traced() {
        // High-severity disaster 0 spawns in round 4 and is first reached in round 6.
        let rounds = vec![
            DisasterRoundStats { round: 4, active: vec![snap(0, 4, 9)], attended: vec![], cleared: vec![], misallocation_points: 0.0, reward: -18.0 },
            DisasterRoundStats { round: 5, active: vec![snap(0, 4, 9)], attended: vec![], cleared: vec![], misallocation_points: 5.0, reward: -23.0 },
            DisasterRoundStats { round: 6, active: vec![snap(0, 4, 9)], attended: vec![0], cleared: vec![], misallocation_points: 0.0, reward: -12.0 },
        ];
        let m = disaster_metrics(&rounds, 7, 5.0).unwrap();
        assert_eq!(m.response_delay, 2.0);
        assert!((m.coverage_rate - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.misallocation - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.misallocation_raw - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.contained_within_two, 0.0);
        assert_eq!(m.net_reward, -53.0);
        assert!(disaster_metrics(&[], 7, 5.0).is_err());
    }

    #[test]
    fn metric_bounds() {
        let all = vec![DisasterRoundStats { round: 1, active: vec![snap(0, 1, 3)], attended: vec![0], cleared: vec![0], misallocation_points: 0.0, reward: 15.0 }];
        let m = disaster_metrics(&all, 7, 5.0).unwrap();
        assert_eq!(m.coverage_rate, 1.0);
        assert_eq!(m.misallocation, 0.0);
        assert_eq!(m.contained_within_two, 1.0);
    }

    #[test]
    fn neighborhood_ring() {
        let n = grid_neighbors_within(cell(5, 5), 1, 2);
        assert_eq!(n.len(), 12);
        assert!(n.iter().all(|c| (1..=2).contains(&c.manhattan(cell(5, 5)))));
        assert_eq!(grid_neighbors_within(cell(0, 0), 1, 2).len(), 5);
    }
}
