//! The three scenario worlds.

pub mod disaster;
pub mod infospread;
pub mod network;
pub mod publicgoods;

use serde::{Deserialize, Serialize};

use crate::model::{ActionKind, DeviationKind};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Volatility {
    Low,
    #[serde(alias = "medium")]
    Moderate,
    High,
}

impl Volatility {
    pub const ALL: [Volatility; 3] = [Volatility::Low, Volatility::Moderate, Volatility::High];
}

impl std::fmt::Display for Volatility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Low => "low",
            Self::Moderate => "moderate",
            Self::High => "high",
        })
    }
}

impl std::str::FromStr for Volatility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "moderate" | "medium" => Ok(Self::Moderate),
            "high" => Ok(Self::High),
            other => Err(Error::InvalidParameter(format!("unknown volatility {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Disaster,
    InfoSpread,
    PublicGoods,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Disaster, Scenario::InfoSpread, Scenario::PublicGoods];

    pub fn number(self) -> u8 {
        match self {
            Self::Disaster => 1,
            Self::InfoSpread => 2,
            Self::PublicGoods => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self, Error> {
        match n {
            1 => Ok(Self::Disaster),
            2 => Ok(Self::InfoSpread),
            3 => Ok(Self::PublicGoods),
            _ => Err(Error::InvalidParameter(format!("scenario must be 1, 2 or 3, got {n}"))),
        }
    }

    pub fn action_kind(self) -> ActionKind {
        match self {
            Self::Disaster => ActionKind::Cell,
            Self::InfoSpread => ActionKind::Nodes,
            Self::PublicGoods => ActionKind::Contribution,
        }
    }

    pub fn deviation_kind(self, c_max: f64) -> DeviationKind {
        match self {
            Self::Disaster => DeviationKind::Manhattan,
            Self::InfoSpread => DeviationKind::Jaccard,
            Self::PublicGoods => DeviationKind::NormalizedAbs { c_max },
        }
    }
}
