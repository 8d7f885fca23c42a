//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use cdsim_core::agents::Diversity;
use cdsim_core::consensus::ConsensusMode;
use cdsim_core::env::Volatility;
use cdsim_core::exec::Exec;
use cdsim_core::theory::{theory_sweep, write_sweep_csv, TheoryGrid};
use clap::{Args, Parser, Subcommand};

use crate::analysis::inverted_u;
use crate::config::{parse_seeds, Baseline, ExperimentConfig, LlmSection};
use crate::experiment::{read_summary, run_experiment, write_artifacts, SummaryRecord, SUMMARY_FILE};
use crate::record::CsvRun;

#[derive(Parser, Debug)]
#[command(name = "cdsim", version, about = "Consensus and diversity experiments for multi-agent teams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one configuration over its seeds.
    Simulate(ConfigArgs),
    /// Run the cartesian product of comma-separated axis values.
    Grid(ConfigArgs),
    /// Sweep the scalar theory model.
    Theory(TheoryArgs),
    /// Inverted-U table and metric summary from existing artifacts.
    Analyze(AnalyzeArgs),
    /// Re-run a config echo and compare against its summary.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<u8>,
    /// explicit | implicit (grid: comma list)
    #[arg(long)]
    pub consensus: Option<String>,
    /// low | medium | high (grid: comma list)
    #[arg(long)]
    pub diversity: Option<String>,
    /// low | moderate | high (grid: comma list)
    #[arg(long)]
    pub volatility: Option<String>,
    /// Seed count (`5` runs seeds 0..5) or list (`3,7,9`).
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub rounds: Option<u32>,
    #[arg(long)]
    pub agents: Option<usize>,
    /// none | no_interaction | random | single_agent | no_diversity (grid: comma list)
    #[arg(long)]
    pub baseline: Option<String>,
    /// Exploration probability (grid: comma list)
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Switches every agent to the language-model policy.
    #[arg(long)]
    pub llm_base_url: Option<String>,
    #[arg(long)]
    pub llm_model: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run seeds one after another instead of on the thread pool.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TheoryArgs {
    #[arg(long, default_value = "20")]
    pub n: String,
    #[arg(long, default_value = "0.5")]
    pub alpha: String,
    #[arg(long, default_value = "0,0.25,0.5,1")]
    pub beta: String,
    #[arg(long, default_value = "0")]
    pub gamma: String,
    #[arg(long, default_value = "0.3")]
    pub shock_freq: String,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub shock_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub shock_hi: f64,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    #[arg(long, default_value = "200")]
    pub seeds: String,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct AnalyzeArgs {
    /// Output directory of `simulate` or `grid`.
    pub dir: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    /// A `config.toml` written by an earlier run.
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sequential: bool,
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| anyhow::anyhow!("{p:?}: {e}")))
        .collect()
}

fn single<T: FromStr>(s: &str, flag: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let mut v = list::<T>(s).with_context(|| format!("--{flag}"))?;
    if v.len() != 1 {
        bail!("--{flag} takes one value here; use `grid` for sweeps");
    }
    Ok(v.remove(0))
}

/// Base config from `--config` plus scalar overrides.
fn base_config(a: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.scenario {
        c.scenario = s;
    }
    if let Some(s) = &a.seeds {
        c.seeds = parse_seeds(s)?;
    }
    if let Some(r) = a.rounds {
        c.rounds = r;
    }
    if let Some(n) = a.agents {
        c.agents = n;
        c.team.clear();
    }
    if let Some(url) = &a.llm_base_url {
        let mut llm = c.llm.take().unwrap_or_default();
        llm.endpoint.base_url = url.clone();
        c.llm = Some(llm);
        c.policy = cdsim_core::agents::PolicyKind::Llm;
    }
    if let Some(m) = &a.llm_model {
        let llm = c.llm.get_or_insert_with(LlmSection::default);
        llm.endpoint.model = m.clone();
    }
    if let Some(o) = &a.out {
        c.output_dir = o.clone();
    }
    Ok(c)
}

fn apply_single_axes(c: &mut ExperimentConfig, a: &ConfigArgs) -> Result<()> {
    if let Some(s) = &a.consensus {
        c.consensus = single(s, "consensus")?;
    }
    if let Some(s) = &a.diversity {
        c.diversity = single(s, "diversity")?;
        c.team.clear();
    }
    if let Some(s) = &a.volatility {
        c.volatility = single(s, "volatility")?;
    }
    if let Some(s) = &a.baseline {
        c.baseline = single(s, "baseline")?;
    }
    if let Some(s) = &a.epsilon {
        c.epsilon = single(s, "epsilon")?;
    }
    Ok(())
}

pub fn simulate(a: &ConfigArgs) -> Result<PathBuf> {
    let mut c = base_config(a)?;
    apply_single_axes(&mut c, a)?;
    let result = run_experiment(c, exec(a.sequential))?;
    let dir = result.config.output_dir.clone();
    write_artifacts(&dir, &result)?;
    for (k, v) in &result.aggregate {
        println!("{k:>22}  {:.4} ± {:.4}", v.mean, v.std);
    }
    println!("artifacts in {}", dir.display());
    Ok(dir)
}

/// Cell configs for `grid`. With no axis flags the grid is the full
/// condition matrix: diversity × volatility × consensus × baseline.
pub fn grid_cells(a: &ConfigArgs) -> Result<Vec<ExperimentConfig>> {
    let base = base_config(a)?;
    let any_axis = a.consensus.is_some()
        || a.diversity.is_some()
        || a.volatility.is_some()
        || a.baseline.is_some()
        || a.epsilon.is_some();
    let axis = |flag: &Option<String>| flag.as_deref().map(str::to_string);
    let diversity: Vec<Diversity> = match axis(&a.diversity) {
        Some(s) => list(&s)?,
        None if !any_axis => Diversity::ALL.to_vec(),
        None => vec![base.diversity],
    };
    let volatility: Vec<Volatility> = match axis(&a.volatility) {
        Some(s) => list(&s)?,
        None if !any_axis => Volatility::ALL.to_vec(),
        None => vec![base.volatility],
    };
    let consensus: Vec<ConsensusMode> = match axis(&a.consensus) {
        Some(s) => list(&s)?,
        None if !any_axis => vec![ConsensusMode::Explicit, ConsensusMode::Implicit],
        None => vec![base.consensus],
    };
    let baseline: Vec<Baseline> = match axis(&a.baseline) {
        Some(s) => list(&s)?,
        None if !any_axis => Baseline::ALL.to_vec(),
        None => vec![base.baseline],
    };
    let epsilon: Vec<f64> = match axis(&a.epsilon) {
        Some(s) => list(&s)?,
        None => vec![base.epsilon],
    };
    let root = base.output_dir.clone();
    let mut cells = Vec::new();
    for &d in &diversity {
        for &v in &volatility {
            for &m in &consensus {
                for &b in &baseline {
                    for &e in &epsilon {
                        let mut c = base.clone();
                        if d != base.diversity {
                            c.team.clear();
                        }
                        c.diversity = d;
                        c.volatility = v;
                        c.consensus = m;
                        c.baseline = b;
                        c.epsilon = e;
                        c.output_dir = root.join(format!("s{}-{m}-{d}-{v}-{b}-e{e}", c.scenario));
                        cells.push(c);
                    }
                }
            }
        }
    }
    Ok(cells)
}

pub const GRID_SUMMARY: &str = "grid_summary.jsonl";

pub fn grid(a: &ConfigArgs) -> Result<PathBuf> {
    let cells = grid_cells(a)?;
    // Validate everything before running anything.
    for c in &cells {
        c.clone().resolve().with_context(|| format!("cell {}", c.output_dir.display()))?;
    }
    let root = base_config(a)?.output_dir;
    fs::create_dir_all(&root)?;
    let mut rows = Vec::new();
    for c in cells {
        let dir = c.output_dir.clone();
        let result = run_experiment(c, exec(a.sequential))?;
        write_artifacts(&dir, &result)?;
        if let Some(agg) = result.summary_records().pop() {
            println!("{}", serde_json::to_string(&agg)?);
            rows.push(agg);
        }
    }
    let mut text = String::new();
    for r in &rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(root.join(GRID_SUMMARY), text)?;
    println!("{} cells, summary in {}", rows.len(), root.join(GRID_SUMMARY).display());
    Ok(root)
}

pub fn theory(a: &TheoryArgs) -> Result<()> {
    let grid = TheoryGrid {
        n: list(&a.n)?,
        shock_freq: list(&a.shock_freq)?,
        alpha: list(&a.alpha)?,
        gamma: list(&a.gamma)?,
        beta: list(&a.beta)?,
        shock_range: (a.shock_lo, a.shock_hi),
        rounds: a.rounds,
        init_spread: TheoryGrid::default().init_spread,
    };
    let seeds = parse_seeds(&a.seeds)?;
    let rows = theory_sweep(&grid.cells(), &seeds, exec(a.sequential))?;
    match &a.out {
        Some(p) => write_sweep_csv(&rows, fs::File::create(p)?)?,
        None => write_sweep_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn collect_files(dir: &Path, name_ok: &dyn Fn(&Path) -> bool, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, name_ok, out)?;
        } else if name_ok(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(())
}

pub fn run_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    collect_files(dir, &|p| p.extension().is_some_and(|e| e == "csv") && p.parent().is_some_and(|d| d.ends_with("runs")), &mut files)?;
    Ok(files)
}

pub fn analyze(a: &AnalyzeArgs) -> Result<String> {
    if !a.dir.is_dir() {
        bail!("{} is not a directory", a.dir.display());
    }
    let files = run_files(&a.dir)?;
    if files.is_empty() {
        bail!("no per-round run files under {}", a.dir.display());
    }
    let mut points = Vec::new();
    for f in &files {
        let run = CsvRun::read(fs::File::open(f)?).with_context(|| f.display().to_string())?;
        points.extend(run.performance_pairs()?);
    }
    let table = inverted_u(&points, a.bins)?;
    let mut out = format!("# {} runs, {} rounds\n{}", files.len(), points.len(), table.to_table());
    if table.degenerate {
        out.push_str("# warning: all rounds share one d_bar value\n");
    }
    let mut summaries = Vec::new();
    collect_files(&a.dir, &|p| p.file_name().is_some_and(|n| n == SUMMARY_FILE), &mut summaries)?;
    for s in summaries {
        for rec in read_summary(&s)? {
            if let SummaryRecord::Aggregate { config_hash, metrics, scenario, consensus, diversity, volatility, baseline, .. } = rec {
                out.push_str(&format!(
                    "\n[{config_hash}] scenario {scenario} {consensus} diversity={diversity} volatility={volatility} baseline={baseline}\n"
                ));
                for (k, v) in metrics {
                    out.push_str(&format!("  {k:>22}  {:.4} ± {:.4} (n={})\n", v.mean, v.std, v.n));
                }
            }
        }
    }
    Ok(out)
}

/// Re-runs a config echo. Returns whether the new summary equals the old one.
pub fn replay(a: &ReplayArgs) -> Result<bool> {
    let mut c = ExperimentConfig::load(&a.config)?;
    let original_dir = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = a.out.clone().unwrap_or_else(|| original_dir.join("replay"));
    c.output_dir = out.clone();
    let result = run_experiment(c, exec(a.sequential))?;
    write_artifacts(&out, &result)?;
    let original = original_dir.join(SUMMARY_FILE);
    if !original.exists() {
        log::warn!("no {SUMMARY_FILE} next to {}; replay written to {}", a.config.display(), out.display());
        return Ok(true);
    }
    Ok(read_summary(&original)? == read_summary(&out.join(SUMMARY_FILE))?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            simulate(&a)?;
        }
        Command::Grid(a) => {
            grid(&a)?;
        }
        Command::Theory(a) => theory(&a)?,
        Command::Analyze(a) => print!("{}", analyze(&a)?),
        Command::Replay(a) => {
            if !replay(&a)? {
                bail!("replayed summary differs from {}", a.config.with_file_name(SUMMARY_FILE).display());
            }
            println!("replay matches the original summary");
        }
    }
    Ok(())
}
