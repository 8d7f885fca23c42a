//! Experiment configuration: a TOML file plus command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cdsim_core::agents::{build_team, AgentSpec, Diversity, PolicyKind, RoleKind};
use cdsim_core::consensus::{ConsensusMode, ContributionRule};
use cdsim_core::env::disaster::DisasterParams;
use cdsim_core::env::infospread::InfoParams;
use cdsim_core::env::publicgoods::PublicGoodsParams;
use cdsim_core::env::{Scenario, Volatility};
use cdsim_llm::EndpointConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

pub const DEFAULT_AGENTS: usize = 5;
pub const DEFAULT_ROUNDS: u32 = 20;
pub const DEFAULT_SEEDS: u64 = 5;
pub const MIN_ROUNDS: u32 = 20;
pub const MAX_ROUNDS: u32 = 30;
pub const MIN_AGENTS: usize = 3;
pub const MAX_AGENTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    None,
    /// Agents act on their own observations with no messages.
    NoInteraction,
    /// Every agent draws a uniformly random valid action.
    Random,
    SingleAgent,
    /// Every agent shares one role.
    NoDiversity,
}

impl Baseline {
    pub const ALL: [Baseline; 5] =
        [Baseline::None, Baseline::NoInteraction, Baseline::Random, Baseline::SingleAgent, Baseline::NoDiversity];
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::NoInteraction => "no_interaction",
            Self::Random => "random",
            Self::SingleAgent => "single_agent",
            Self::NoDiversity => "no_diversity",
        })
    }
}

impl FromStr for Baseline {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Self::None),
            "no_interaction" | "nointeraction" => Ok(Self::NoInteraction),
            "random" => Ok(Self::Random),
            "single_agent" | "single" => Ok(Self::SingleAgent),
            "no_diversity" | "nodiversity" => Ok(Self::NoDiversity),
            other => Err(HarnessError::Config(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Explicit team entry; unset fields inherit the experiment-wide values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamMember {
    pub role: RoleKind,
    #[serde(default)]
    pub contrarian: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Language-model settings: one default endpoint plus per-agent overrides
/// keyed by agent id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSection {
    #[serde(flatten)]
    pub endpoint: EndpointConfig,
    pub force_alignment: bool,
    pub agents: BTreeMap<String, EndpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: u8,
    pub consensus: ConsensusMode,
    pub diversity: Diversity,
    pub volatility: Volatility,
    pub agents: usize,
    pub rounds: u32,
    pub seeds: Vec<u64>,
    pub baseline: Baseline,
    pub policy: PolicyKind,
    /// Probability of replacing the intended action with a nearby one.
    pub epsilon: f64,
    /// Messages each agent posts per round.
    pub discussion_turns: u32,
    pub contribution_rule: ContributionRule,
    /// Hand exact betweenness centrality to network analyzers.
    pub exact_betweenness: bool,
    /// Not part of the config hash.
    pub output_dir: PathBuf,
    pub team: Vec<TeamMember>,
    pub disaster: DisasterParams,
    pub infospread: InfoParams,
    pub publicgoods: PublicGoodsParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: 1,
            consensus: ConsensusMode::Implicit,
            diversity: Diversity::Medium,
            volatility: Volatility::Moderate,
            agents: DEFAULT_AGENTS,
            rounds: DEFAULT_ROUNDS,
            seeds: (0..DEFAULT_SEEDS).collect(),
            baseline: Baseline::None,
            policy: PolicyKind::Heuristic,
            epsilon: 0.0,
            discussion_turns: 1,
            contribution_rule: ContributionRule::Median,
            exact_betweenness: false,
            output_dir: PathBuf::from("out"),
            team: Vec::new(),
            disaster: DisasterParams::default(),
            infospread: InfoParams::default(),
            publicgoods: PublicGoodsParams::default(),
            llm: None,
        }
    }
}

/// Parses `--seeds`: a count (`5` → 0..5) or an explicit list (`3,7,9`).
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Config(format!("invalid seed list {s:?}"));
    if s.contains(',') {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
    } else {
        let n: u64 = s.trim().parse().map_err(|_| bad())?;
        Ok((0..n).collect())
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn scenario_kind(&self) -> Result<Scenario, HarnessError> {
        Ok(Scenario::from_number(self.scenario)?)
    }

    pub fn c_max(&self) -> f64 {
        self.publicgoods.c_max
    }

    /// Applies baseline rules, fills in the team and checks everything. The
    /// result is idempotent: resolving a resolved config changes nothing.
    pub fn resolve(mut self) -> Result<Self, HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let scenario = self.scenario_kind()?;
        match self.baseline {
            Baseline::SingleAgent => {
                self.agents = 1;
                self.diversity = Diversity::Low;
            }
            Baseline::NoDiversity => self.diversity = Diversity::Low,
            Baseline::Random => self.policy = PolicyKind::Random,
            Baseline::None | Baseline::NoInteraction => {}
        }
        if self.baseline != Baseline::SingleAgent && !(MIN_AGENTS..=MAX_AGENTS).contains(&self.agents) {
            return bad(format!("agents must be in {MIN_AGENTS}..={MAX_AGENTS}, got {}", self.agents));
        }
        if !(MIN_ROUNDS..=MAX_ROUNDS).contains(&self.rounds) {
            return bad(format!("rounds must be in {MIN_ROUNDS}..={MAX_ROUNDS}, got {}", self.rounds));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut uniq = self.seeds.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must be in [0, 1], got {}", self.epsilon));
        }
        if !(1..=2).contains(&self.discussion_turns) {
            return bad(format!("discussion_turns must be 1 or 2, got {}", self.discussion_turns));
        }
        if self.team.is_empty() {
            self.team = build_team(scenario, self.diversity, self.agents, self.policy, self.epsilon)
                .into_iter()
                .map(|a| TeamMember { role: a.role, contrarian: a.contrarian, policy: None, epsilon: None })
                .collect();
        }
        if self.baseline == Baseline::NoDiversity {
            for m in &mut self.team {
                m.role = RoleKind::Uniform;
                m.contrarian = false;
            }
        }
        if self.baseline == Baseline::Random {
            for m in &mut self.team {
                m.policy = None;
            }
        }
        if self.team.len() != self.agents {
            return bad(format!("team lists {} agents but agents = {}", self.team.len(), self.agents));
        }
        for (i, m) in self.team.iter().enumerate() {
            if !m.role.valid_for(scenario) {
                return bad(format!("agent {i}: role {:?} does not belong to scenario {}", m.role, self.scenario));
            }
            if m.epsilon.is_some_and(|e| !(0.0..=1.0).contains(&e)) {
                return bad(format!("agent {i}: epsilon must be in [0, 1]"));
            }
        }
        let wants_llm = self.team_specs().iter().any(|a| a.policy == PolicyKind::Llm);
        if wants_llm && self.llm.is_none() {
            return bad("llm agents need an [llm] section or --llm-base-url".into());
        }
        if let Some(llm) = &self.llm {
            for key in llm.agents.keys() {
                match key.parse::<usize>() {
                    Ok(i) if i < self.agents => {}
                    _ => return bad(format!("llm override for unknown agent {key:?}")),
                }
            }
        }
        cdsim_core::env::publicgoods::PublicGoodsState::new(self.agents, self.publicgoods)?;
        if self.infospread.budget == 0 {
            return bad("infospread budget must be positive".into());
        }
        Ok(self)
    }

    pub fn team_specs(&self) -> Vec<AgentSpec> {
        self.team
            .iter()
            .enumerate()
            .map(|(agent_id, m)| AgentSpec {
                agent_id,
                role: m.role,
                contrarian: m.contrarian,
                policy: m.policy.unwrap_or(self.policy),
                epsilon: m.epsilon.unwrap_or(self.epsilon),
            })
            .collect()
    }

    /// Short hex digest of the canonical TOML form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let canon = ExperimentConfig { output_dir: PathBuf::new(), ..self.clone() };
        let text = toml::to_string(&canon).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = ExperimentConfig::default().resolve().unwrap();
        assert_eq!(c.team.len(), 5);
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.clone().resolve().unwrap(), c);
    }

    #[test]
    fn single_agent_forces_one() {
        let c = ExperimentConfig { baseline: Baseline::SingleAgent, ..Default::default() }.resolve().unwrap();
        assert_eq!(c.agents, 1);
        assert_eq!(c.team[0].role, RoleKind::Uniform);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            ExperimentConfig { rounds: 10, ..Default::default() },
            ExperimentConfig { agents: 2, ..Default::default() },
            ExperimentConfig { scenario: 4, ..Default::default() },
            ExperimentConfig { seeds: vec![], ..Default::default() },
            ExperimentConfig { seeds: vec![1, 1], ..Default::default() },
            ExperimentConfig { epsilon: 1.5, ..Default::default() },
            ExperimentConfig { policy: PolicyKind::Llm, ..Default::default() },
        ] {
            assert!(c.resolve().is_err());
        }
        let wrong_role = ExperimentConfig {
            agents: 3,
            team: vec![TeamMember { role: RoleKind::Altruistic, contrarian: false, policy: None, epsilon: None }; 3],
            ..Default::default()
        };
        assert!(wrong_role.resolve().is_err());
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let text = r#"
            scenario = 3
            consensus = "explicit"
            volatility = "high"
            seeds = [4, 9]
            [publicgoods]
            c_max = 15.0
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap().resolve().unwrap();
        assert_eq!(c.publicgoods.c_max, 15.0);
        assert_eq!(c.publicgoods.benefit, 100.0);
        let back = ExperimentConfig::from_toml_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let moved = ExperimentConfig { output_dir: "elsewhere".into(), ..c.clone() };
        assert_eq!(moved.hash(), c.hash());
        let other = ExperimentConfig { epsilon: 0.1, ..c.clone() };
        assert_ne!(other.hash(), c.hash());
        assert!(ExperimentConfig::from_toml_str("scenari = 1").is_err());
    }

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5, 8").unwrap(), vec![5, 8]);
        assert!(parse_seeds("x").is_err());
    }
}
