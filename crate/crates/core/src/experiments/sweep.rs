use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dynamics::{train, Outcome, TrainConfig};
use crate::game::{CoordinationGame, JointPolicy, PolicyMode};
use crate::learners::{RuleParams, RuleRegistry};

use super::ExperimentError;

/// Which coordination game a sweep runs, parameterized by regret `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GameFamily {
    /// `α` fixed when given, otherwise `α = g/2`; `k = α − g`.
    TwoAction { alpha: Option<f64> },
    /// `k = 10 − g`.
    ThreeAction,
}

impl GameFamily {
    pub fn game(&self, g: f64) -> Result<CoordinationGame, ExperimentError> {
        Ok(match *self {
            GameFamily::TwoAction { alpha } => CoordinationGame::two_action_with_regret(g, alpha)?,
            GameFamily::ThreeAction => CoordinationGame::three_action_with_regret(g)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitDistribution {
    /// `θ_i ~ U[0, 1]`, reduced parameterization only.
    UniformBox,
    /// Flat Dirichlet per agent.
    UniformSimplex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HierarchyPolicy {
    /// Agents from lowest level to highest; `None` is agent order.
    Fixed(Option<Vec<usize>>),
    /// A fresh uniform permutation for every run.
    RandomPerRun,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub game: GameFamily,
    pub rules: Vec<String>,
    pub regrets: Vec<f64>,
    pub eta: f64,
    pub train: TrainConfig,
    pub runs: usize,
    pub seed: u64,
    pub init: InitDistribution,
    pub hierarchy: HierarchyPolicy,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

pub const FIGURE2_REGRETS: [f64; 5] = [10.0, 15.0, 20.0, 30.0, 50.0];
pub const FIGURE2_ETA: f64 = 0.1;
pub const FIGURE2_LR: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 1;

impl SweepConfig {
    /// The three-action regret sweep with this crate's default
    /// hyperparameters: `η = 0.1`, `λ = 0.05`, flat Dirichlet starts and a
    /// random hierarchy per HLA run.
    pub fn figure2(runs: usize, seed: u64) -> Self {
        Self {
            game: GameFamily::ThreeAction,
            rules: ["naive", "la", "lola", "hla"].map(String::from).to_vec(),
            regrets: FIGURE2_REGRETS.to_vec(),
            eta: FIGURE2_ETA,
            train: TrainConfig {
                lr: FIGURE2_LR,
                ..TrainConfig::default()
            },
            runs,
            seed,
            init: InitDistribution::UniformSimplex,
            hierarchy: HierarchyPolicy::RandomPerRun,
            jobs: None,
        }
    }

    pub fn validate(&self, registry: &RuleRegistry) -> Result<(), ExperimentError> {
        if self.runs == 0 {
            return Err(ExperimentError::Config(
                "runs per cell must be at least 1".into(),
            ));
        }
        if self.rules.is_empty() || self.regrets.is_empty() {
            return Err(ExperimentError::Config(
                "need at least one rule and one regret".into(),
            ));
        }
        for rule in &self.rules {
            // builds once to surface unknown names and bad η up front
            registry.build(rule, &RuleParams::with_eta(self.eta))?;
        }
        for &g in &self.regrets {
            let game = self.game.game(g)?;
            if self.init == InitDistribution::UniformBox && game.mode() != PolicyMode::Reduced {
                return Err(ExperimentError::Config(
                    "uniform-box initialization needs the two-action game".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Seed for one run, a function of the cell and run index only, so adding
/// rules or regrets leaves every other run's randomness untouched.
pub fn derive_seed(master: u64, rule: &str, g: f64, run: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((rule.len() as u64).to_le_bytes());
    h.update(rule.as_bytes());
    h.update(g.to_bits().to_le_bytes());
    h.update((run as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub type ExperimentRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ExperimentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random hierarchy over `agents` agents, lowest level first.
pub fn random_hierarchy<R: Rng + ?Sized>(agents: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..agents).collect();
    order.shuffle(rng);
    order
}

/// Random initial policy for `game`.
pub fn draw_policy<R: Rng + ?Sized>(
    game: &CoordinationGame,
    init: InitDistribution,
    rng: &mut R,
) -> Result<JointPolicy, ExperimentError> {
    let tensor = game.tensor()?;
    let mode = game.mode();
    let blocks = tensor
        .shape()
        .iter()
        .map(|&m| match (init, mode) {
            (InitDistribution::UniformBox, PolicyMode::Reduced) => Ok(vec![rng.random::<f64>()]),
            (InitDistribution::UniformBox, PolicyMode::Simplex) => Err(ExperimentError::Config(
                "uniform-box initialization needs the reduced parameterization".into(),
            )),
            (InitDistribution::UniformSimplex, _) => {
                let w: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let s: f64 = w.iter().sum();
                let p: Vec<f64> = w.iter().map(|x| x / s).collect();
                Ok(match mode {
                    PolicyMode::Reduced => vec![p[0]],
                    PolicyMode::Simplex => p,
                })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(JointPolicy::new(mode, blocks)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub rule: String,
    pub g: f64,
    pub eta: f64,
    pub run: usize,
    pub seed: u64,
    pub theta0: Vec<f64>,
    /// Levels from lowest to highest, for hierarchical rules.
    pub hierarchy: Option<Vec<usize>>,
    pub outcome: Outcome,
    pub final_value: f64,
    pub iters: usize,
}

/// Statistics of one `(rule, g)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellStats {
    pub runs: usize,
    pub mean_value: f64,
    pub std_value: f64,
    pub frac_global: f64,
    pub frac_local: f64,
    pub frac_miscoord: f64,
    pub frac_other: f64,
}

impl CellStats {
    pub fn fraction(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::GlobalEquilibrium => self.frac_global,
            Outcome::LocalEquilibrium => self.frac_local,
            Outcome::Miscoordination => self.frac_miscoord,
            Outcome::Other => self.frac_other,
        }
    }
}

/// Running mean/variance (Welford) and outcome counts.
#[derive(Clone, Debug, Default)]
struct CellAccumulator {
    n: usize,
    mean: f64,
    m2: f64,
    counts: [usize; 4],
}

impl CellAccumulator {
    fn push(&mut self, record: &SweepRecord) {
        self.n += 1;
        let d = record.final_value - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (record.final_value - self.mean);
        let slot = Outcome::ALL
            .iter()
            .position(|&o| o == record.outcome)
            .expect("known outcome");
        self.counts[slot] += 1;
    }

    fn finish(&self) -> CellStats {
        let n = self.n as f64;
        let frac = |i: usize| self.counts[i] as f64 / n;
        CellStats {
            runs: self.n,
            mean_value: self.mean,
            // population standard deviation over the cell's runs
            std_value: (self.m2 / n).sqrt(),
            frac_global: frac(0),
            frac_local: frac(1),
            frac_miscoord: frac(2),
            frac_other: frac(3),
        }
    }
}

/// Per-cell statistics in canonical order: rules and regrets in the order
/// they first appear in the record stream.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct AggregateStats {
    pub cells: Vec<(String, f64, CellStats)>,
}

impl AggregateStats {
    pub fn get(&self, rule: &str, g: f64) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|(r, x, _)| r == rule && *x == g)
            .map(|(_, _, s)| s)
    }

    /// Nested map `rule -> g -> stats` for JSON emission.
    pub fn to_json_map(&self) -> BTreeMap<String, BTreeMap<String, CellStats>> {
        let mut out: BTreeMap<String, BTreeMap<String, CellStats>> = BTreeMap::new();
        for (rule, g, stats) in &self.cells {
            out.entry(rule.clone())
                .or_default()
                .insert(format!("{g}"), stats.clone());
        }
        out
    }
}

/// Folds records, in order, into per-cell statistics.
pub fn aggregate<'a, I>(records: I) -> AggregateStats
where
    I: IntoIterator<Item = &'a SweepRecord>,
{
    let mut cells: Vec<(String, f64, CellAccumulator)> = Vec::new();
    for r in records {
        let idx = match cells
            .iter()
            .position(|(rule, g, _)| *rule == r.rule && *g == r.g)
        {
            Some(i) => i,
            None => {
                cells.push((r.rule.clone(), r.g, CellAccumulator::default()));
                cells.len() - 1
            }
        };
        cells[idx].2.push(r);
    }
    AggregateStats {
        cells: cells
            .into_iter()
            .map(|(r, g, acc)| (r, g, acc.finish()))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub stats: AggregateStats,
}

struct Task<'a> {
    rule: &'a str,
    g: f64,
    run: usize,
}

fn run_one(
    cfg: &SweepConfig,
    registry: &RuleRegistry,
    task: &Task<'_>,
) -> Result<SweepRecord, ExperimentError> {
    let seed = derive_seed(cfg.seed, task.rule, task.g, task.run);
    let mut rng = seeded_rng(seed);
    let game = cfg.game.game(task.g)?;
    let tensor = game.tensor()?;
    let theta0 = draw_policy(&game, cfg.init, &mut rng)?;
    let hierarchy = if task.rule == "hla" {
        match &cfg.hierarchy {
            HierarchyPolicy::Fixed(h) => h.clone(),
            HierarchyPolicy::RandomPerRun => Some(random_hierarchy(tensor.agents(), &mut rng)),
        }
    } else {
        None
    };
    let params = RuleParams {
        eta: cfg.eta,
        hierarchy: hierarchy.clone(),
    };
    let rule = registry.build(task.rule, &params)?;
    let result = train(rule.as_ref(), &tensor, &theta0, &cfg.train)?;
    Ok(SweepRecord {
        rule: task.rule.to_string(),
        g: task.g,
        eta: cfg.eta,
        run: task.run,
        seed,
        theta0: theta0.flat(),
        hierarchy,
        outcome: result.outcome,
        final_value: result.final_value,
        iters: result.iterations,
    })
}

/// Runs every `(rule, g, run)` of the sweep. Records come back sorted by
/// rule (config order), regret (config order) and run index regardless of
/// scheduling, and the statistics are folded over that order.
pub fn run_sweep(
    cfg: &SweepConfig,
    registry: &RuleRegistry,
) -> Result<SweepResult, ExperimentError> {
    cfg.validate(registry)?;
    let tasks: Vec<Task<'_>> = cfg
        .rules
        .iter()
        .flat_map(|rule| {
            cfg.regrets.iter().flat_map(move |&g| {
                (0..cfg.runs).map(move |run| Task {
                    rule: rule.as_str(),
                    g,
                    run,
                })
            })
        })
        .collect();
    let work = || -> Result<Vec<SweepRecord>, ExperimentError> {
        tasks
            .par_iter()
            .map(|t| run_one(cfg, registry, t))
            .collect()
    };
    let records = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ExperimentError::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let stats = aggregate(&records);
    Ok(SweepResult { records, stats })
}
