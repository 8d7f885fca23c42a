//! Explicit (plurality vote) and implicit (keep your own proposal) action
//! commitment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{ActionKey, ActionValue};
use crate::stats::median;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub agent_id: usize,
    pub action: ActionValue,
}

impl Proposal {
    pub fn new(agent_id: usize, action: ActionValue) -> Self {
        Self { agent_id, action }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusMode {
    Explicit,
    Implicit,
}

impl std::fmt::Display for ConsensusMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Explicit => "explicit",
            Self::Implicit => "implicit",
        })
    }
}

impl std::str::FromStr for ConsensusMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" => Ok(Self::Explicit),
            "implicit" => Ok(Self::Implicit),
            other => Err(Error::InvalidParameter(format!("unknown consensus mode {other:?}"))),
        }
    }
}

/// How a vote over contribution amounts is merged into one value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContributionRule {
    #[default]
    Median,
    Mean,
}

fn validate(proposals: &[Proposal]) -> Result<()> {
    let first = proposals.first().ok_or(Error::EmptyActions)?.action.kind();
    let mut ids = BTreeSet::new();
    for p in proposals {
        if p.action.kind() != first {
            return Err(Error::MixedKinds { expected: first, found: p.action.kind() });
        }
        if !ids.insert(p.agent_id) {
            return Err(Error::DuplicateProposer(p.agent_id));
        }
    }
    Ok(())
}

/// Single-round plurality over whole actions. Ties resolve to the canonically
/// least action; contribution votes merge by `rule`.
pub fn explicit_aggregate(proposals: &[Proposal], rule: ContributionRule) -> Result<ActionValue> {
    validate(proposals)?;
    if let ActionValue::Contribution(_) = proposals[0].action {
        let amounts: Vec<f64> =
            proposals.iter().filter_map(|p| p.action.as_contribution()).collect();
        let merged = match rule {
            ContributionRule::Median => median(&amounts),
            ContributionRule::Mean => {
                let mut s = amounts.clone();
                s.sort_by(f64::total_cmp);
                s.iter().sum::<f64>() / s.len() as f64
            }
        };
        return Ok(ActionValue::Contribution(merged));
    }
    let mut votes: BTreeMap<ActionKey, usize> = BTreeMap::new();
    for p in proposals {
        *votes.entry(p.action.key().expect("discrete")).or_insert(0) += 1;
    }
    let mut winner: Option<(&ActionKey, usize)> = None;
    for (k, &c) in &votes {
        if winner.is_none_or(|(_, wc)| c > wc) {
            winner = Some((k, c));
        }
    }
    Ok(winner.expect("non-empty").0.clone().into())
}

/// Returns `(agent_id, action)` pairs in proposal order.
pub fn commit_actions(
    mode: ConsensusMode,
    proposals: &[Proposal],
    rule: ContributionRule,
) -> Result<Vec<(usize, ActionValue)>> {
    validate(proposals)?;
    match mode {
        ConsensusMode::Explicit => {
            let collective = explicit_aggregate(proposals, rule)?;
            Ok(proposals.iter().map(|p| (p.agent_id, collective.clone())).collect())
        }
        ConsensusMode::Implicit => {
            Ok(proposals.iter().map(|p| (p.agent_id, p.action.clone())).collect())
        }
    }
}
