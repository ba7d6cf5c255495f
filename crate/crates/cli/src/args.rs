use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "anticipation",
    version,
    about = "Learning-anticipation laboratory for common-interest games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Classify every rule's fixed point over an (η, g) grid against the predicted regions.
    CheckTheorems,
    /// Emit the rate field on a grid, or one integrated trajectory with --theta0.
    Phase,
    /// Train from every point of a grid and emit the outcome lattice.
    Basin,
    /// One seeded training run.
    Train,
    /// A seeded (rule × g × run) campaign.
    Sweep,
    /// The preset three-action regret campaign.
    Fig2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GameArg {
    Two,
    Three,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Box,
    Simplex,
}

/// Hierarchy from the command line: 1-based agents, lowest level first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HierarchyArg {
    Random,
    Fixed(Vec<usize>),
}

impl FromStr for HierarchyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "random" {
            return Ok(HierarchyArg::Random);
        }
        s.split(',')
            .map(|p| match p.trim().parse::<usize>() {
                Ok(0) | Err(_) => Err(format!(
                    "expected `random` or 1-based agents like `2,1`, got `{s}`"
                )),
                Ok(i) => Ok(i - 1),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(HierarchyArg::Fixed)
    }
}

fn list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

fn f64_list(s: &str) -> Result<Vec<f64>, String> {
    list(s)
}

fn string_list(s: &str) -> Result<Vec<String>, String> {
    list(s)
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to per-command defaults.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Options {
    /// Flat `key = value` file; keys are flag names without dashes.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Rule name, or a comma list for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub rule: Option<Vec<String>>,
    /// Miscoordination regret, or a comma list for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    pub g: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Learning rate λ.
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Coordination reward of the two-action game.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Miscoordination payoff.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub game: Option<GameArg>,
    /// Runs per (rule, g) cell.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `random`, or 1-based agents from lowest level to highest (`1,2`: agent 2 leads).
    #[arg(long, global = true)]
    pub hierarchy: Option<HierarchyArg>,
    /// Output file, or directory for sweeps.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Initial parameters, comma separated (reduced θ per agent, or full
    /// probability vectors concatenated).
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub theta0: Option<Vec<f64>>,
    /// Grid points per axis.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Lower edge of the phase-field box.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lo: Option<f64>,
    /// Upper edge of the phase-field box.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub hi: Option<f64>,
    /// Integration step.
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Integration horizon.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Clip trajectories to the unit square.
    #[arg(long, global = true)]
    pub constrained: Option<bool>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Convergence tolerance on the per-step parameter change.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub init: Option<InitArg>,
    /// η grid for check-theorems.
    #[arg(long, global = true, value_delimiter = ',')]
    pub etas: Option<Vec<f64>>,
}

fn parse_value<T, E>(key: &str, value: &str, parse: impl Fn(&str) -> Result<T, E>) -> Result<T>
where
    E: std::fmt::Display,
{
    parse(value).map_err(|e| anyhow!("config key `{key}`: {e}"))
}

fn enum_value<T: ValueEnum>(s: &str) -> Result<T, String> {
    T::from_str(s, true)
}

impl Options {
    /// Fills unset fields from the config file, if one was given.
    pub fn merge_config(&mut self) -> Result<()> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        let map = read_config(&path)?;
        for (key, value) in &map {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "rule" => fill(&mut self.rule, || parse_value(k, v, string_list))?,
                "g" => fill(&mut self.g, || parse_value(k, v, f64_list))?,
                "eta" => fill(&mut self.eta, || parse_value(k, v, f64::from_str))?,
                "lr" => fill(&mut self.lr, || parse_value(k, v, f64::from_str))?,
                "alpha" => fill(&mut self.alpha, || parse_value(k, v, f64::from_str))?,
                "k" => fill(&mut self.k, || parse_value(k, v, f64::from_str))?,
                "game" | "variant" => {
                    fill(&mut self.game, || parse_value(k, v, enum_value::<GameArg>))?
                }
                "runs" => fill(&mut self.runs, || parse_value(k, v, usize::from_str))?,
                "seed" => fill(&mut self.seed, || parse_value(k, v, u64::from_str))?,
                "hierarchy" => fill(&mut self.hierarchy, || {
                    parse_value(k, v, HierarchyArg::from_str)
                })?,
                "out" => fill(&mut self.out, || Ok(PathBuf::from(v)))?,
                "format" => fill(&mut self.format, || parse_value(k, v, enum_value::<Format>))?,
                "jobs" => fill(&mut self.jobs, || parse_value(k, v, usize::from_str))?,
                "theta0" => fill(&mut self.theta0, || parse_value(k, v, f64_list))?,
                "resolution" => fill(&mut self.resolution, || parse_value(k, v, usize::from_str))?,
                "lo" => fill(&mut self.lo, || parse_value(k, v, f64::from_str))?,
                "hi" => fill(&mut self.hi, || parse_value(k, v, f64::from_str))?,
                "step" => fill(&mut self.step, || parse_value(k, v, f64::from_str))?,
                "horizon" => fill(&mut self.horizon, || parse_value(k, v, f64::from_str))?,
                "constrained" => fill(&mut self.constrained, || parse_value(k, v, bool::from_str))?,
                "max-iter" | "max_iter" => {
                    fill(&mut self.max_iter, || parse_value(k, v, usize::from_str))?
                }
                "tol" => fill(&mut self.tol, || parse_value(k, v, f64::from_str))?,
                "init" => fill(&mut self.init, || parse_value(k, v, enum_value::<InitArg>))?,
                "etas" => fill(&mut self.etas, || parse_value(k, v, f64_list))?,
                _ => bail!("unknown config key `{k}` in {}", path.display()),
            }
        }
        Ok(())
    }
}

fn fill<T>(slot: &mut Option<T>, value: impl FnOnce() -> Result<T>) -> Result<()> {
    // parse even when the flag wins, so a bad file is always reported
    let parsed = value()?;
    if slot.is_none() {
        *slot = Some(parsed);
    }
    Ok(())
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim().trim_start_matches("--").to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("line {}: duplicate key `{key}`", n + 1);
        }
    }
    Ok(map)
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}
