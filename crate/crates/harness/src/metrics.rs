//! Scenario metrics for one run, computed from round-level statistics only.

use std::collections::BTreeMap;

use cdsim_core::env::disaster::{disaster_metrics, DisasterRoundStats};
use cdsim_core::env::infospread::{infospread_metrics, InfoRoundStats};
use cdsim_core::env::publicgoods::{publicgoods_metrics, Settlement};

use crate::runner::{RoundDetail, RoundRecord};
use crate::HarnessError;

pub type MetricMap = BTreeMap<String, f64>;

/// Per-round statistics for one run, in whichever shape the scenario uses.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundSeries {
    Disaster { rounds: Vec<DisasterRoundStats>, high_severity: u8, misallocation_unit: f64 },
    Info(Vec<InfoRoundStats>),
    Public(Vec<Settlement>),
}

impl RoundSeries {
    pub fn from_records(records: &[RoundRecord], high_severity: u8, misallocation_unit: f64) -> Result<Self, HarnessError> {
        let first = records.first().ok_or(cdsim_core::Error::EmptyRecords)?;
        Ok(match &first.detail {
            RoundDetail::Disaster { .. } => RoundSeries::Disaster {
                rounds: records
                    .iter()
                    .filter_map(|r| match &r.detail {
                        RoundDetail::Disaster { stats, .. } => Some(stats.clone()),
                        _ => None,
                    })
                    .collect(),
                high_severity,
                misallocation_unit,
            },
            RoundDetail::Info { .. } => RoundSeries::Info(
                records
                    .iter()
                    .filter_map(|r| match &r.detail {
                        RoundDetail::Info { stats, .. } => Some(stats.clone()),
                        _ => None,
                    })
                    .collect(),
            ),
            RoundDetail::Public { .. } => RoundSeries::Public(
                records
                    .iter()
                    .filter_map(|r| match &r.detail {
                        RoundDetail::Public { settlement, .. } => Some(settlement.clone()),
                        _ => None,
                    })
                    .collect(),
            ),
        })
    }
}

/// Scenario metrics plus `mean_d_bar` and `rounds`.
pub fn run_metrics(series: &RoundSeries, d_bars: &[f64]) -> Result<MetricMap, HarnessError> {
    let mut m = MetricMap::new();
    let mut put = |k: &str, v: f64| {
        m.insert(k.to_string(), v);
    };
    match series {
        RoundSeries::Disaster { rounds, high_severity, misallocation_unit } => {
            let d = disaster_metrics(rounds, *high_severity, *misallocation_unit)?;
            put("coverage_rate", d.coverage_rate);
            put("misallocation", d.misallocation);
            put("misallocation_raw", d.misallocation_raw);
            put("response_delay", d.response_delay);
            put("contained_within_two", d.contained_within_two);
            put("net_reward", d.net_reward);
        }
        RoundSeries::Info(rounds) => {
            let d = infospread_metrics(rounds)?;
            put("spread", d.spread);
            put("containment_time", d.containment_time);
            put("coverage_diversity", d.coverage_diversity);
        }
        RoundSeries::Public(rounds) => {
            let d = publicgoods_metrics(rounds)?;
            put("provision_rate", d.provision_rate);
            put("total_welfare", d.total_welfare);
            put("free_rider_disparity", d.free_rider_disparity);
            put("contribution_std", d.contribution_std);
        }
    }
    if d_bars.is_empty() {
        return Err(cdsim_core::Error::EmptyRecords.into());
    }
    put("mean_d_bar", d_bars.iter().sum::<f64>() / d_bars.len() as f64);
    put("rounds", d_bars.len() as f64);
    Ok(m)
}
