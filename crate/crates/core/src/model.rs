//! Action values, the empirical action distribution C(t), the mean action
//! and the three deviation metrics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Side length of the disaster-response grid.
pub const GRID_SIZE: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub x: u8,
    pub y: u8,
}

impl GridCell {
    pub fn new(x: i64, y: i64) -> Result<Self> {
        if (0..GRID_SIZE as i64).contains(&x) && (0..GRID_SIZE as i64).contains(&y) {
            Ok(Self { x: x as u8, y: y as u8 })
        } else {
            Err(Error::OffGrid { x, y })
        }
    }

    /// Clamps arbitrary coordinates onto the grid.
    pub fn clamped(x: i64, y: i64) -> Self {
        let hi = GRID_SIZE as i64 - 1;
        Self { x: x.clamp(0, hi) as u8, y: y.clamp(0, hi) as u8 }
    }

    pub fn manhattan(self, other: GridCell) -> u32 {
        (self.x.abs_diff(other.x) + self.y.abs_diff(other.y)) as u32
    }

    /// All grid cells, row-major by `x` then `y`.
    pub fn all() -> impl Iterator<Item = GridCell> {
        (0..GRID_SIZE).flat_map(|x| (0..GRID_SIZE).map(move |y| GridCell { x, y }))
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// A duplicate-free set of node ids, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct NodeSet(Vec<u32>);

impl NodeSet {
    pub fn new(nodes: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut v: Vec<u32> = nodes.into_iter().collect();
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateNode(w[0]));
        }
        Ok(Self(v))
    }

    pub fn with_budget(nodes: impl IntoIterator<Item = u32>, budget: usize) -> Result<Self> {
        let set = Self::new(nodes)?;
        if set.len() > budget {
            return Err(Error::BudgetExceeded { len: set.len(), budget });
        }
        Ok(set)
    }

    pub fn nodes(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: u32) -> bool {
        self.0.binary_search(&node).is_ok()
    }

    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// `1 - |A ∩ B| / |A ∪ B|`, with two empty sets at distance 0.
    pub fn jaccard_distance(&self, other: &NodeSet) -> f64 {
        let inter = self.intersection_len(other);
        let union = self.len() + other.len() - inter;
        if union == 0 {
            return 0.0;
        }
        1.0 - inter as f64 / union as f64
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Cell,
    Nodes,
    Contribution,
}

/// One agent's committed action in a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionValue {
    Cell(GridCell),
    Nodes(NodeSet),
    Contribution(f64),
}

impl ActionValue {
    pub fn contribution(amount: f64, c_max: f64) -> Result<Self> {
        if amount.is_finite() && (0.0..=c_max).contains(&amount) {
            Ok(Self::Contribution(amount))
        } else {
            Err(Error::ContributionOutOfRange { amount, c_max })
        }
    }

    pub fn kind(&self) -> ActionKind {
        match self {
            Self::Cell(_) => ActionKind::Cell,
            Self::Nodes(_) => ActionKind::Nodes,
            Self::Contribution(_) => ActionKind::Contribution,
        }
    }

    /// Canonical ordering key for discrete actions; `None` for contributions.
    pub fn key(&self) -> Option<ActionKey> {
        match self {
            Self::Cell(c) => Some(ActionKey::Cell(*c)),
            Self::Nodes(s) => Some(ActionKey::Nodes(s.clone())),
            Self::Contribution(_) => None,
        }
    }

    pub fn as_cell(&self) -> Option<GridCell> {
        match self {
            Self::Cell(c) => Some(*c),
            _ => None,
        }
    }

    pub fn as_nodes(&self) -> Option<&NodeSet> {
        match self {
            Self::Nodes(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_contribution(&self) -> Option<f64> {
        match self {
            Self::Contribution(x) => Some(*x),
            _ => None,
        }
    }

    /// Compact text encoding used in CSV columns: `3:4`, `1 5 9`, `6.5`.
    pub fn encode(&self) -> String {
        match self {
            Self::Cell(c) => format!("{}:{}", c.x, c.y),
            Self::Nodes(s) => s.nodes().iter().map(u32::to_string).collect::<Vec<_>>().join(" "),
            Self::Contribution(x) => format!("{x}"),
        }
    }

    pub fn decode(kind: ActionKind, text: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot decode {kind:?} action from {text:?}"));
        match kind {
            ActionKind::Cell => {
                let (x, y) = text.split_once(':').ok_or_else(bad)?;
                let x = x.trim().parse().map_err(|_| bad())?;
                let y = y.trim().parse().map_err(|_| bad())?;
                Ok(Self::Cell(GridCell::new(x, y)?))
            }
            ActionKind::Nodes => {
                let nodes = text
                    .split_whitespace()
                    .map(|t| t.parse::<u32>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Nodes(NodeSet::new(nodes)?))
            }
            ActionKind::Contribution => {
                let x: f64 = text.trim().parse().map_err(|_| bad())?;
                if !x.is_finite() {
                    return Err(bad());
                }
                Ok(Self::Contribution(x))
            }
        }
    }
}

impl fmt::Display for ActionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cell(c) => write!(f, "{c}"),
            Self::Nodes(s) => write!(f, "{s}"),
            Self::Contribution(x) => write!(f, "{x:.2}"),
        }
    }
}

/// Discrete action with a total order: cells by `(x, y)`, node sets by their
/// sorted id sequence. Used for frequency tables and tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKey {
    Cell(GridCell),
    Nodes(NodeSet),
}

impl From<ActionKey> for ActionValue {
    fn from(k: ActionKey) -> Self {
        match k {
            ActionKey::Cell(c) => ActionValue::Cell(c),
            ActionKey::Nodes(s) => ActionValue::Nodes(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Support {
    Discrete(BTreeMap<ActionKey, usize>),
    /// Sorted samples, one per agent.
    Continuous(Vec<f64>),
}

/// Empirical distribution of one round's actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    n: usize,
    support: Support,
}

impl ActionDistribution {
    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.support, Support::Discrete(_))
    }

    /// Action frequencies in canonical order; empty for continuous kinds.
    pub fn frequencies(&self) -> Vec<(ActionKey, f64)> {
        match &self.support {
            Support::Discrete(m) => {
                m.iter().map(|(k, &c)| (k.clone(), c as f64 / self.n as f64)).collect()
            }
            Support::Continuous(_) => Vec::new(),
        }
    }

    pub fn frequency(&self, action: &ActionValue) -> f64 {
        match (&self.support, action.key()) {
            (Support::Discrete(m), Some(k)) => {
                m.get(&k).map_or(0.0, |&c| c as f64 / self.n as f64)
            }
            _ => 0.0,
        }
    }

    /// Sorted samples for continuous kinds; empty for discrete kinds.
    pub fn samples(&self) -> &[f64] {
        match &self.support {
            Support::Continuous(v) => v,
            Support::Discrete(_) => &[],
        }
    }
}

fn homogeneous_kind(actions: &[ActionValue]) -> Result<ActionKind> {
    let first = actions.first().ok_or(Error::EmptyActions)?.kind();
    for a in &actions[1..] {
        if a.kind() != first {
            return Err(Error::MixedKinds { expected: first, found: a.kind() });
        }
    }
    Ok(first)
}

pub fn action_distribution(actions: &[ActionValue]) -> Result<ActionDistribution> {
    let kind = homogeneous_kind(actions)?;
    let support = if kind == ActionKind::Contribution {
        let mut v: Vec<f64> = actions.iter().filter_map(ActionValue::as_contribution).collect();
        v.sort_by(f64::total_cmp);
        Support::Continuous(v)
    } else {
        let mut m = BTreeMap::new();
        for a in actions {
            *m.entry(a.key().expect("discrete")).or_insert(0) += 1;
        }
        Support::Discrete(m)
    };
    Ok(ActionDistribution { n: actions.len(), support })
}

/// Mode for discrete kinds (ties go to the canonically least action),
/// arithmetic mean for contributions. The mean is taken as an offset from the
/// smallest value, so identical contributions give exactly that value back.
pub fn mean_action(dist: &ActionDistribution) -> ActionValue {
    match &dist.support {
        Support::Discrete(m) => {
            let mut best: Option<(&ActionKey, usize)> = None;
            for (k, &c) in m {
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((k, c));
                }
            }
            best.expect("non-empty distribution").0.clone().into()
        }
        Support::Continuous(v) => {
            let base = v[0];
            ActionValue::Contribution(base + v.iter().map(|x| x - base).sum::<f64>() / v.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeviationKind {
    Manhattan,
    Jaccard,
    NormalizedAbs { c_max: f64 },
}

impl DeviationKind {
    pub fn normalized_abs(c_max: f64) -> Result<Self> {
        if c_max.is_finite() && c_max > 0.0 {
            Ok(Self::NormalizedAbs { c_max })
        } else {
            Err(Error::InvalidParameter(format!("c_max must be > 0, got {c_max}")))
        }
    }

    fn applies_to(self) -> ActionKind {
        match self {
            Self::Manhattan => ActionKind::Cell,
            Self::Jaccard => ActionKind::Nodes,
            Self::NormalizedAbs { .. } => ActionKind::Contribution,
        }
    }
}

pub fn deviation(a: &ActionValue, mu: &ActionValue, kind: DeviationKind) -> Result<f64> {
    match (a, mu, kind) {
        (ActionValue::Cell(p), ActionValue::Cell(q), DeviationKind::Manhattan) => {
            Ok(p.manhattan(*q) as f64)
        }
        (ActionValue::Nodes(s), ActionValue::Nodes(t), DeviationKind::Jaccard) => {
            Ok(s.jaccard_distance(t))
        }
        (
            ActionValue::Contribution(x),
            ActionValue::Contribution(m),
            DeviationKind::NormalizedAbs { c_max },
        ) => {
            if c_max.is_nan() || c_max <= 0.0 {
                return Err(Error::InvalidParameter(format!("c_max must be > 0, got {c_max}")));
            }
            Ok((x - m).abs() / c_max)
        }
        _ if a.kind() != mu.kind() => {
            Err(Error::MixedKinds { expected: a.kind(), found: mu.kind() })
        }
        _ => Err(Error::MetricMismatch { metric: kind, kind: a.kind() }),
    }
}

/// Per-agent deviations from the round's mean action, in input order.
pub fn deviations(actions: &[ActionValue], kind: DeviationKind) -> Result<Vec<f64>> {
    let dist = action_distribution(actions)?;
    let found = actions[0].kind();
    if kind.applies_to() != found {
        return Err(Error::MetricMismatch { metric: kind, kind: found });
    }
    let mu = mean_action(&dist);
    actions.iter().map(|a| deviation(a, &mu, kind)).collect()
}

/// `d̄ = (1/N) Σ d_i`. Terms are summed in sorted order so the result does not
/// depend on how the agents are listed.
pub fn mean_deviation(actions: &[ActionValue], kind: DeviationKind) -> Result<f64> {
    let mut d = deviations(actions, kind)?;
    d.sort_by(f64::total_cmp);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}
