//! Threshold public-goods game with threshold and benefit shocks.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Volatility;
use crate::rng::SimRng;
use crate::stats::{gini, pop_std_dev};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PublicGoodsParams {
    pub initial_threshold: f64,
    pub benefit: f64,
    pub cost_rate: f64,
    pub c_max: f64,
    pub benefit_fluctuation: bool,
    pub rumor_truth: f64,
    pub threshold_floor: f64,
}

impl Default for PublicGoodsParams {
    fn default() -> Self {
        Self {
            initial_threshold: 30.0,
            benefit: 100.0,
            cost_rate: 1.0,
            c_max: 20.0,
            benefit_fluctuation: false,
            rumor_truth: 0.7,
            threshold_floor: 5.0,
        }
    }
}

pub fn shock_probability(v: Volatility) -> f64 {
    match v {
        Volatility::Low => 0.1,
        Volatility::Moderate => 0.25,
        Volatility::High => 0.5,
    }
}

const SHIFTS: [f64; 4] = [-10.0, -5.0, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRumor {
    pub claimed_threshold: f64,
    pub text: String,
    #[serde(skip)]
    truthful: bool,
}

impl ThresholdRumor {
    pub fn is_truthful(&self) -> bool {
        self.truthful
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub round: u32,
    pub theta: f64,
    pub benefit: f64,
    pub contributions: Vec<f64>,
    pub funded: bool,
    pub payoffs: Vec<f64>,
    /// Agents whose contribution had to be clamped into `[0, c_max]`.
    pub clamped: Vec<usize>,
}

impl Settlement {
    pub fn total(&self) -> f64 {
        self.contributions.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicGoodsState {
    pub round: u32,
    pub n: usize,
    pub theta: f64,
    pub benefit: f64,
    pub params: PublicGoodsParams,
    pub history: Vec<Settlement>,
    pub rumor: Option<ThresholdRumor>,
}

impl PublicGoodsState {
    pub fn new(n: usize, params: PublicGoodsParams) -> Result<Self> {
        if n == 0 || params.c_max.is_nan() || params.c_max <= 0.0 || params.initial_threshold.is_nan() || params.initial_threshold <= 0.0 {
            return Err(Error::InvalidParameter("public goods needs N >= 1, c_max > 0, theta > 0".into()));
        }
        Ok(Self {
            round: 0,
            n,
            theta: params.initial_threshold,
            benefit: params.benefit,
            params,
            history: Vec::new(),
            rumor: None,
        })
    }

    pub fn threshold_ceiling(&self) -> f64 {
        self.n as f64 * self.params.c_max
    }

    /// Starts a round. The first round keeps the initial threshold; later
    /// rounds shift it by ±5 or ±10 with the volatility's shock probability.
    /// Emits a rumor about the threshold now in force, truthful w.p. 0.7.
    pub fn step_environment(&mut self, volatility: Volatility, rng: &mut SimRng) -> Option<f64> {
        self.round += 1;
        let mut shock = None;
        let draw: f64 = rng.random();
        let shift = *SHIFTS.choose(rng).expect("shifts");
        if self.round > 1 && draw < shock_probability(volatility) {
            let floor = self.params.threshold_floor.min(self.threshold_ceiling());
            self.theta = (self.theta + shift).clamp(floor, self.threshold_ceiling());
            shock = Some(shift);
        }
        if self.params.benefit_fluctuation {
            self.benefit = rng.random_range(80.0..=120.0);
        }
        let truthful = rng.random_bool(self.params.rumor_truth);
        let offset = *SHIFTS.choose(rng).expect("shifts");
        let claimed = if truthful { self.theta } else { (self.theta + offset).max(0.0) };
        let text = if truthful {
            format!("Analyst reports the threshold now stands at {claimed}.")
        } else {
            format!("Analyst warns the threshold could be {claimed} this round; another says it has not changed.")
        };
        self.rumor = Some(ThresholdRumor { claimed_threshold: claimed, text, truthful });
        shock
    }

    /// Funds the good iff the clamped contributions reach the threshold.
    pub fn settle_round(&mut self, contributions: &[f64]) -> Result<Settlement> {
        if contributions.len() != self.n {
            return Err(Error::ActionCount { expected: self.n, got: contributions.len() });
        }
        let c_max = self.params.c_max;
        let mut clamped = Vec::new();
        let xs: Vec<f64> = contributions
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = if x.is_nan() { 0.0 } else { x.clamp(0.0, c_max) };
                if y != x {
                    clamped.push(i);
                }
                y
            })
            .collect();
        let total: f64 = xs.iter().sum();
        let funded = total >= self.theta;
        let share = if funded { self.benefit / self.n as f64 } else { 0.0 };
        let payoffs = xs.iter().map(|x| share - self.params.cost_rate * x).collect();
        let s = Settlement {
            round: self.round,
            theta: self.theta,
            benefit: self.benefit,
            contributions: xs,
            funded,
            payoffs,
            clamped,
        };
        self.history.push(s.clone());
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublicGoodsMetrics {
    pub provision_rate: f64,
    pub total_welfare: f64,
    /// Gini coefficient of per-agent total contributions.
    pub free_rider_disparity: f64,
    pub contribution_std: f64,
}

pub fn publicgoods_metrics(rounds: &[Settlement]) -> Result<PublicGoodsMetrics> {
    let first = rounds.first().ok_or(Error::EmptyRecords)?;
    let n = first.contributions.len();
    let provision_rate = rounds.iter().filter(|s| s.funded).count() as f64 / rounds.len() as f64;
    let mut total_welfare = 0.0;
    let mut totals = vec![0.0; n];
    for s in rounds {
        for p in &s.payoffs {
            total_welfare += p;
        }
        for (t, x) in totals.iter_mut().zip(&s.contributions) {
            *t += x;
        }
    }
    Ok(PublicGoodsMetrics {
        provision_rate,
        total_welfare,
        free_rider_disparity: gini(&totals),
        contribution_std: pop_std_dev(&totals),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn first_round_keeps_initial_threshold() {
        let mut s = PublicGoodsState::new(5, PublicGoodsParams::default()).unwrap();
        s.step_environment(Volatility::High, &mut rng::stream(0, 1));
        assert_eq!(s.theta, 30.0);
        assert!(s.rumor.is_some());
    }

    #[test]
    fn shocks_are_discrete_and_clamped() {
        let mut s = PublicGoodsState::new(5, PublicGoodsParams::default()).unwrap();
        let mut r = rng::stream(4, 1);
        let mut prev = s.theta;
        for _ in 0..100 {
            match s.step_environment(Volatility::High, &mut r) {
                None => assert_eq!(s.theta, prev),
                Some(d) => assert!(SHIFTS.contains(&d)),
            }
            assert!((5.0..=100.0).contains(&s.theta));
            prev = s.theta;
        }
        // Repeated +10 shocks from 30 stop at N·c_max = 100.
        let mut up = PublicGoodsState::new(5, PublicGoodsParams::default()).unwrap();
        for _ in 0..20 {
            up.theta = (up.theta + 10.0).clamp(5.0, up.threshold_ceiling());
        }
        assert_eq!(up.theta, 100.0);
    }

    #[test]
    fn shock_from_thirty() {
        let mut s = PublicGoodsState::new(5, PublicGoodsParams::default()).unwrap();
        s.round = 1;
        // Scan seeds for a -10 shock and check the arithmetic.
        for seed in 0..200 {
            let mut t = s.clone();
            if t.step_environment(Volatility::High, &mut rng::stream(seed, 1)) == Some(-10.0) {
                assert_eq!(t.theta, 20.0);
                return;
            }
        }
        panic!("no -10 shock in 200 seeds");
    }

    #[test]
    fn settlement_examples() {
        let mut s = PublicGoodsState::new(5, PublicGoodsParams::default()).unwrap();
        s.theta = 25.0;
        let out = s.settle_round(&[5.0; 5]).unwrap();
        assert!(out.funded);
        assert_eq!(out.payoffs, vec![15.0; 5]);

        let out = s.settle_round(&[5.0, 5.0, 5.0, 5.0, 2.0]).unwrap();
        assert_eq!(out.total(), 22.0);
        assert!(!out.funded);
        assert_eq!(out.payoffs, vec![-5.0, -5.0, -5.0, -5.0, -2.0]);

        let out = s.settle_round(&[0.0; 5]).unwrap();
        assert!(!out.funded);
        assert!(out.payoffs.iter().all(|&p| p == 0.0));

        let out = s.settle_round(&[25.0, -1.0, f64::NAN, 0.0, 0.0]).unwrap();
        assert_eq!(out.contributions, vec![20.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(out.clamped, vec![0, 1, 2]);
        assert!(s.settle_round(&[1.0]).is_err());
    }

    #[test]
    fn metrics() {
        let mut s = PublicGoodsState::new(3, PublicGoodsParams::default()).unwrap();
        s.theta = 5.0;
        for _ in 0..20 {
            s.settle_round(&[0.0, 0.0, 10.0]).unwrap();
        }
        let m = publicgoods_metrics(&s.history).unwrap();
        assert_eq!(m.provision_rate, 1.0);
        assert!((m.free_rider_disparity - 2.0 / 3.0).abs() < 1e-12);
        let tw: f64 = s.history.iter().flat_map(|h| h.payoffs.iter()).sum();
        assert_eq!(m.total_welfare, tw);

        let mut e = PublicGoodsState::new(4, PublicGoodsParams::default()).unwrap();
        e.settle_round(&[6.0; 4]).unwrap();
        assert_eq!(publicgoods_metrics(&e.history).unwrap().free_rider_disparity, 0.0);
        assert!(publicgoods_metrics(&[]).is_err());
    }
}
