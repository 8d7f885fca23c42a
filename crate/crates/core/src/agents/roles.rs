use serde::{Deserialize, Serialize};

use crate::env::Scenario;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleKind {
    Medical,
    Infrastructure,
    Logistics,
    Proactive,
    Reactive,
    Analyzer,
    Rapid,
    Altruistic,
    Strategic,
    Conservative,
    Adaptive,
    /// Shared prompt used by low-diversity teams and single-agent runs.
    Uniform,
}

impl RoleKind {
    pub fn roles_for(scenario: Scenario) -> &'static [RoleKind] {
        use RoleKind::*;
        match scenario {
            Scenario::Disaster => &[Medical, Infrastructure, Logistics],
            Scenario::InfoSpread => &[Proactive, Reactive, Analyzer, Rapid],
            Scenario::PublicGoods => &[Altruistic, Strategic, Conservative, Adaptive],
        }
    }

    pub fn valid_for(self, scenario: Scenario) -> bool {
        self == RoleKind::Uniform || Self::roles_for(scenario).contains(&self)
    }

    pub fn title(self, scenario: Scenario) -> &'static str {
        use RoleKind::*;
        match (self, scenario) {
            (Medical, _) => "Medical Drone",
            (Infrastructure, _) => "Infrastructure Drone",
            (Logistics, _) => "Logistics Drone",
            (Proactive, _) => "Proactive Defender",
            (Reactive, _) => "Reactive Defender",
            (Analyzer, _) => "Network Analyzer",
            (Rapid, _) => "Rapid Responder",
            (Altruistic, _) => "Altruistic contributor",
            (Strategic, _) => "Strategic contributor",
            (Conservative, _) => "Conservative contributor",
            (Adaptive, _) => "Adaptive contributor",
            (Uniform, Scenario::Disaster) => "Response Drone",
            (Uniform, Scenario::InfoSpread) => "Defender",
            (Uniform, Scenario::PublicGoods) => "Contributor",
        }
    }

    /// Role guidelines handed to language-model agents.
    pub fn instructions(self, scenario: Scenario) -> &'static str {
        use RoleKind::*;
        match (self, scenario) {
            (Medical, _) => "Focus on rescuing casualties in highest-severity disaster zones for people.",
            (Infrastructure, _) => "Protect power lines and roads. Even if severity is high elsewhere, prioritize built structures.",
            (Logistics, _) => "Minimize travel cost. Quickly move to nearest active zone if severity is above 5.",
            (Proactive, _) => "Prioritize checking high-influence nodes before they get infected. Focus on creating network firebreaks.",
            (Reactive, _) => "Target nodes that are actively spreading misinformation. Focus on reducing current spread.",
            (Analyzer, _) => "Study network structure and identify critical nodes. Track infection patterns.",
            (Rapid, _) => "Quickly respond to new infections. Focus on containing new outbreaks.",
            (Altruistic, _) => "Prioritize meeting the threshold to ensure public good provision. Willing to contribute more than fair share.",
            (Strategic, _) => "Balance personal costs against public benefits. Adjust contributions based on others' behavior.",
            (Conservative, _) => "Prefer smaller, safer contributions. Focus on sustainable long-term participation.",
            (Adaptive, _) => "Quickly adjust to threshold and benefit changes. Learn from past outcomes.",
            (Uniform, Scenario::Disaster) => "Always address the highest severity zone.",
            (Uniform, Scenario::InfoSpread) => "Prioritize the highest-degree suspicious node.",
            (Uniform, Scenario::PublicGoods) => "Aim to exactly meet the threshold.",
        }
    }

    /// Whether the role acts on third-party threshold rumors.
    pub fn trusts_rumors(self) -> bool {
        matches!(self, RoleKind::Altruistic | RoleKind::Adaptive)
    }
}

impl std::str::FromStr for RoleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        use RoleKind::*;
        Ok(match s.to_ascii_lowercase().as_str() {
            "medical" => Medical,
            "infrastructure" => Infrastructure,
            "logistics" => Logistics,
            "proactive" => Proactive,
            "reactive" => Reactive,
            "analyzer" => Analyzer,
            "rapid" => Rapid,
            "altruistic" => Altruistic,
            "strategic" => Strategic,
            "conservative" => Conservative,
            "adaptive" => Adaptive,
            "uniform" => Uniform,
            other => return Err(Error::InvalidParameter(format!("unknown role {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diversity {
    Low,
    Medium,
    High,
}

impl Diversity {
    pub const ALL: [Diversity; 3] = [Diversity::Low, Diversity::Medium, Diversity::High];
}

impl std::fmt::Display for Diversity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        })
    }
}

impl std::str::FromStr for Diversity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "medium" | "moderate" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            other => Err(Error::InvalidParameter(format!("unknown diversity {other:?}"))),
        }
    }
}

/// Role assignment for a team of `n`: `(role, contrarian)` per agent.
///
/// Low: everyone shares the uniform role. Medium: two or three cooperative
/// roles in rotation. High: every scenario role in rotation, and the last
/// agent inverts its trust in reports.
pub fn team_roles(scenario: Scenario, diversity: Diversity, n: usize) -> Vec<(RoleKind, bool)> {
    use RoleKind::*;
    let pool: &[RoleKind] = match (diversity, scenario) {
        (Diversity::Low, _) => &[Uniform],
        (Diversity::Medium, Scenario::Disaster) => &[Medical, Infrastructure, Logistics],
        (Diversity::Medium, Scenario::InfoSpread) => &[Reactive, Proactive, Rapid],
        (Diversity::Medium, Scenario::PublicGoods) => &[Altruistic, Conservative, Strategic],
        (Diversity::High, s) => RoleKind::roles_for(s),
    };
    (0..n)
        .map(|i| (pool[i % pool.len()], diversity == Diversity::High && n > 1 && i == n - 1))
        .collect()
}
