//! Scalar random-iteration consensus model.
//!
//! Each agent holds a scalar opinion `x_i`. Per round:
//!
//! ```text
//! x_i ← (1 − α) x_i + α μ + γ (a* − x_i) + β ε_i      ε_i ~ N(0, 1)
//! with probability shock_freq:  a* ← a* + Δ,          Δ ~ U(shock_range)
//! ```
//!
//! `μ` is the pre-update group mean. The shock is applied after the opinion
//! update, so agents always react to the optimum with a one-round lag.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::rng::{self, SimRng};
use crate::stats::MeanStd;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub shock_freq: f64,
    pub shock_range: (f64, f64),
    pub rounds: usize,
    /// Initial opinions are drawn from `U[-init_spread, init_spread]`.
    pub init_spread: f64,
}

impl Default for TheoryParams {
    fn default() -> Self {
        Self {
            n: 20,
            alpha: 0.5,
            beta: 0.0,
            gamma: 0.0,
            shock_freq: 0.1,
            shock_range: (-1.0, 1.0),
            rounds: 100,
            init_spread: 1.0,
        }
    }
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n == 0 {
            return bad("N must be >= 1");
        }
        if self.rounds == 0 {
            return bad("T must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return bad("beta and gamma must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.shock_freq) {
            return bad("shock_freq must lie in [0, 1]");
        }
        let (lo, hi) = self.shock_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad("shock_range must be a finite interval");
        }
        if !(self.init_spread >= 0.0 && self.init_spread.is_finite()) {
            return bad("init_spread must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryState {
    pub x: Vec<f64>,
    pub a_star: f64,
    pub round: usize,
}

impl TheoryState {
    /// `a*(0) = 0`, opinions uniform in `[-init_spread, init_spread]`.
    pub fn initial(params: &TheoryParams, rng: &mut SimRng) -> Self {
        let s = params.init_spread;
        let x = (0..params.n)
            .map(|_| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 })
            .collect();
        Self { x, a_star: 0.0, round: 0 }
    }

    pub fn mean(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }
}

/// One synchronous update. Draws exactly `N + 2` values from `rng` regardless
/// of parameters, so runs that differ only in β see identical shock traces.
pub fn theory_step(state: &TheoryState, params: &TheoryParams, rng: &mut SimRng) -> TheoryState {
    let mu = state.mean();
    let a = state.a_star;
    let x = state
        .x
        .iter()
        .map(|&xi| {
            let eps: f64 = rng.sample(StandardNormal);
            (1.0 - params.alpha) * xi + params.alpha * mu + params.gamma * (a - xi) + params.beta * eps
        })
        .collect();
    let shock_draw: f64 = rng.random();
    let (lo, hi) = params.shock_range;
    let delta = lo + (hi - lo) * rng.random::<f64>();
    let a_star = if shock_draw < params.shock_freq { a + delta } else { a };
    TheoryState { x, a_star, round: state.round + 1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryRound {
    pub round: usize,
    pub mean: f64,
    pub a_star: f64,
    pub dist_to_opt: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryOutcome {
    pub d_opt_bar: f64,
    pub d_bar: f64,
    pub perf_score: f64,
    pub trajectory: Vec<TheoryRound>,
}

fn measure(state: &TheoryState) -> TheoryRound {
    let n = state.x.len() as f64;
    let mu = state.mean();
    TheoryRound {
        round: state.round,
        mean: mu,
        a_star: state.a_star,
        dist_to_opt: state.x.iter().map(|x| (x - state.a_star).abs()).sum::<f64>() / n,
        deviation: state.x.iter().map(|x| (x - mu).abs()).sum::<f64>() / n,
    }
}

/// Runs `T` steps and averages the per-round metrics over rounds `1..=T`.
pub fn theory_run(params: &TheoryParams, seed: u64) -> Result<TheoryOutcome> {
    params.validate()?;
    let mut rng = rng::stream(seed, rng::ENV_STREAM);
    let mut state = TheoryState::initial(params, &mut rng);
    let mut trajectory = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        state = theory_step(&state, params, &mut rng);
        trajectory.push(measure(&state));
    }
    let t = params.rounds as f64;
    let d_opt_bar = trajectory.iter().map(|r| r.dist_to_opt).sum::<f64>() / t;
    let d_bar = trajectory.iter().map(|r| r.deviation).sum::<f64>() / t;
    Ok(TheoryOutcome { d_opt_bar, d_bar, perf_score: 1.0 - d_opt_bar, trajectory })
}

/// Cartesian parameter grid. Iteration order: N, shock_freq, alpha, gamma, beta
/// (beta fastest), matching the facets of a perf-vs-beta plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryGrid {
    pub n: Vec<usize>,
    pub shock_freq: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub shock_range: (f64, f64),
    pub rounds: usize,
    pub init_spread: f64,
}

impl Default for TheoryGrid {
    fn default() -> Self {
        Self {
            n: vec![5, 20, 50],
            shock_freq: vec![0.1, 0.3],
            alpha: vec![0.2, 0.5, 0.8],
            gamma: vec![0.0, 0.3, 0.7],
            beta: (0..=10).map(|i| i as f64 / 10.0).collect(),
            shock_range: (-1.0, 1.0),
            rounds: 100,
            init_spread: 1.0,
        }
    }
}

impl TheoryGrid {
    pub fn cells(&self) -> Vec<TheoryParams> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &shock_freq in &self.shock_freq {
                for &alpha in &self.alpha {
                    for &gamma in &self.gamma {
                        for &beta in &self.beta {
                            out.push(TheoryParams {
                                n,
                                alpha,
                                beta,
                                gamma,
                                shock_freq,
                                shock_range: self.shock_range,
                                rounds: self.rounds,
                                init_spread: self.init_spread,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: TheoryParams,
    pub perf: MeanStd,
    pub d_bar: MeanStd,
    pub d_opt: MeanStd,
    /// Per-seed perf scores in seed order, kept for paired comparisons.
    pub perf_by_seed: Vec<f64>,
}

/// Runs every cell over the same seed list (common random numbers across
/// cells). Rows come back in cell order.
pub fn theory_sweep(cells: &[TheoryParams], seeds: &[u64], exec: Exec) -> Result<Vec<SweepRow>> {
    if cells.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("no seeds".into()));
    }
    for c in cells {
        c.validate()?;
    }
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let outcomes = exec.map(&jobs, |&(c, s)| {
        theory_run(&cells[c], s).map(|o| (o.perf_score, o.d_bar, o.d_opt_bar))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(cells
        .iter()
        .zip(outcomes.chunks(seeds.len()))
        .map(|(p, chunk)| {
            let perf: Vec<f64> = chunk.iter().map(|o| o.0).collect();
            let d: Vec<f64> = chunk.iter().map(|o| o.1).collect();
            let dopt: Vec<f64> = chunk.iter().map(|o| o.2).collect();
            SweepRow {
                params: *p,
                perf: MeanStd::of(&perf),
                d_bar: MeanStd::of(&d),
                d_opt: MeanStd::of(&dopt),
                perf_by_seed: perf,
            }
        })
        .collect())
}

pub const SWEEP_CSV_HEADER: &str =
    "N,alpha,beta,gamma,shock_freq,seed_count,mean_perf,std_perf,mean_d_bar,mean_D_opt";

pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        let p = &r.params;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            p.n,
            p.alpha,
            p.beta,
            p.gamma,
            p.shock_freq,
            r.perf.n,
            r.perf.mean,
            r.perf.std,
            r.d_bar.mean,
            r.d_opt.mean
        )?;
    }
    Ok(())
}
