use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anticipation::dynamics::{integrate_phase, PhaseOptions, DEFAULT_HORIZON, DEFAULT_STEP};
use anticipation::experiments::{
    basin_map, default_theorem_etas, default_theorem_regrets, draw_policy, phase_field,
    random_hierarchy, run_sweep, seeded_rng, theorem_grid, write_aggregates_json, write_basin_csv,
    write_field_csv, write_records_csv, write_theorem_csv, write_trajectory_csv, GameFamily,
    HierarchyPolicy, InitDistribution, SweepConfig, SweepResult, DEFAULT_SEED, FIGURE2_ETA,
    FIGURE2_LR,
};
use anticipation::{
    CoordinationGame, JointPolicy, RuleParams, RuleRegistry, TrainConfig, UpdateRule,
};
use anyhow::{anyhow, Context};
use serde::Serialize;

use crate::args::{Command, Format, GameArg, HierarchyArg, InitArg, Options};

/// How a command ended, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or values that violate a precondition (exit 2).
    Usage(anyhow::Error),
    /// A check reported inconsistencies (exit 1).
    Checks(String),
    /// I/O and other runtime failures (exit 1).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Checks(_) | Failure::Runtime(_) => 1,
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

/// Experiment errors split by cause: invalid inputs are usage errors.
fn classify(e: anticipation::experiments::ExperimentError) -> Failure {
    use anticipation::experiments::ExperimentError as E;
    match e {
        E::Io(_) | E::Csv(_) | E::Json(_) => runtime(e),
        _ => usage(e),
    }
}

pub fn dispatch(command: Command, opts: &Options) -> Outcome<()> {
    match command {
        Command::CheckTheorems => check_theorems(opts),
        Command::Phase => phase(opts),
        Command::Basin => basin(opts),
        Command::Train => train(opts),
        Command::Sweep => sweep(opts, false),
        Command::Fig2 => sweep(opts, true),
    }
}

fn positive(name: &str, x: f64) -> Outcome<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(usage(anyhow!("--{name} must be positive, got {x}")))
    }
}

fn single<T: Clone>(name: &str, values: Option<&Vec<T>>) -> Outcome<Option<T>> {
    match values.map(Vec::as_slice) {
        None => Ok(None),
        Some([x]) => Ok(Some(x.clone())),
        Some(_) => Err(usage(anyhow!(
            "--{name} takes a single value for this command"
        ))),
    }
}

fn rule(
    opts: &Options,
    registry: &RuleRegistry,
    eta: f64,
    hierarchy: Option<Vec<usize>>,
) -> Outcome<Box<dyn UpdateRule>> {
    let name = single("rule", opts.rule.as_ref())?.unwrap_or_else(|| "hla".into());
    let params = RuleParams { eta, hierarchy };
    registry.build(&name, &params).map_err(usage)
}

/// One game from `--game`, `--g`, `--alpha` and `--k`.
fn single_game(opts: &Options, default: GameArg) -> Outcome<CoordinationGame> {
    let g = single("g", opts.g.as_ref())?;
    let game = match opts.game.unwrap_or(default) {
        GameArg::Two => match (opts.alpha, opts.k) {
            (Some(alpha), Some(k)) => {
                if let Some(g) = g {
                    if g != alpha - k {
                        return Err(usage(anyhow!(
                            "--g {g} contradicts --alpha {alpha} --k {k}"
                        )));
                    }
                }
                CoordinationGame::two_action(alpha, k)
            }
            (_, Some(_)) => {
                return Err(usage(anyhow!("--k needs --alpha for the two-action game")))
            }
            (alpha, None) => CoordinationGame::two_action_with_regret(g.unwrap_or(1.0), alpha),
        },
        GameArg::Three => {
            if opts.alpha.is_some() {
                return Err(usage(anyhow!(
                    "--alpha applies only to the two-action game"
                )));
            }
            match (opts.k, g) {
                (Some(k), Some(g)) if g != 10.0 - k => {
                    return Err(usage(anyhow!("--g {g} contradicts --k {k}")));
                }
                (Some(k), _) => CoordinationGame::three_action(k),
                (None, g) => CoordinationGame::three_action_with_regret(g.unwrap_or(10.0)),
            }
        }
    };
    game.map_err(usage)
}

fn train_config(opts: &Options, default_lr: f64) -> Outcome<TrainConfig> {
    let base = TrainConfig::default();
    let cfg = TrainConfig {
        lr: positive("lr", opts.lr.unwrap_or(default_lr))?,
        max_iter: opts.max_iter.unwrap_or(base.max_iter),
        tol: positive("tol", opts.tol.unwrap_or(base.tol))?,
        outcome_tol: base.outcome_tol,
    };
    if cfg.max_iter == 0 {
        return Err(usage(anyhow!("--max-iter must be at least 1")));
    }
    Ok(cfg)
}

fn fixed_hierarchy(opts: &Options) -> Option<Vec<usize>> {
    match &opts.hierarchy {
        Some(HierarchyArg::Fixed(h)) => Some(h.clone()),
        _ => None,
    }
}

/// Writes through `emit` to `--out`, or to stdout.
fn emit_to(opts: &Options, emit: impl FnOnce(&mut dyn Write) -> Outcome<()>) -> Outcome<()> {
    match &opts.out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .map_err(runtime)?;
            let mut w = BufWriter::new(file);
            emit(&mut w)?;
            w.flush().map_err(runtime)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            emit(&mut w)?;
            w.flush().map_err(runtime)
        }
    }
}

fn json_to(w: &mut dyn Write, value: &impl Serialize) -> Outcome<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(runtime)?;
    writeln!(w).map_err(runtime)
}

fn check_theorems(opts: &Options) -> Outcome<()> {
    let etas = opts.etas.clone().unwrap_or_else(default_theorem_etas);
    let gs = opts.g.clone().unwrap_or_else(default_theorem_regrets);
    for &x in etas.iter().chain(&gs) {
        positive("eta/--g", x)?;
    }
    let rows = theorem_grid(&etas, &gs).map_err(classify)?;
    if let Some(path) = &opts.out {
        let file = File::create(path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(runtime)?;
        write_theorem_csv(BufWriter::new(file), &rows).map_err(classify)?;
    }
    let mut out = io::stdout().lock();
    let mut table = String::new();
    table.push_str(&format!(
        "{:<6} {:>6} {:>10} {:>28} {:<14} {:<14} {}\n",
        "rule", "eta", "g", "eigenvalues", "class", "expected", "check"
    ));
    for r in &rows {
        table.push_str(&format!(
            "{:<6} {:>6} {:>10.6} {:>28} {:<14} {:<14} {}\n",
            r.rule,
            r.eta,
            r.g,
            r.eigenvalues.to_string(),
            r.class.as_str(),
            r.expected.as_str(),
            if r.consistent { "PASS" } else { "FAIL" }
        ));
    }
    for &eta in &etas {
        table.push_str(&format!(
            "eta {eta}: la flips saddle -> source at g = {}, lola at g = {}\n",
            1.0 / (2.0 * eta),
            1.0 / (4.0 * eta)
        ));
    }
    let failed = rows.iter().filter(|r| !r.consistent).count();
    table.push_str(&format!(
        "{} of {} cells consistent\n",
        rows.len() - failed,
        rows.len()
    ));
    out.write_all(table.as_bytes()).map_err(runtime)?;
    if failed > 0 {
        return Err(Failure::Checks(format!("{failed} inconsistent cells")));
    }
    Ok(())
}

fn phase(opts: &Options) -> Outcome<()> {
    let eta = positive("eta", opts.eta.unwrap_or(1.0))?;
    let registry = RuleRegistry::builtin();
    let rule = rule(opts, &registry, eta, fixed_hierarchy(opts))?;
    let game = single_game(opts, GameArg::Two)?;
    let tensor = game.tensor().map_err(usage)?;
    let format = opts.format.unwrap_or(Format::Csv);
    if let Some(theta0) = &opts.theta0 {
        let theta0: [f64; 2] = theta0
            .as_slice()
            .try_into()
            .map_err(|_| usage(anyhow!("--theta0 needs two values for a phase trajectory")))?;
        let popts = PhaseOptions {
            step: opts.step.unwrap_or(DEFAULT_STEP),
            horizon: opts.horizon.unwrap_or(DEFAULT_HORIZON),
            constrained: opts.constrained.unwrap_or(false),
        };
        let traj = integrate_phase(rule.as_ref(), &tensor, theta0, &popts).map_err(usage)?;
        if traj.diverged {
            eprintln!(
                "trajectory left |theta| <= 1e6 at t = {}",
                traj.points.last().map_or(0.0, |p| p.t)
            );
        }
        return emit_to(opts, |w| match format {
            Format::Csv => write_trajectory_csv(w, &traj.points).map_err(classify),
            Format::Json => json_to(w, &traj.points),
        });
    }
    let field = phase_field(
        rule.as_ref(),
        &game,
        opts.resolution.unwrap_or(21),
        opts.lo.unwrap_or(0.0),
        opts.hi.unwrap_or(1.0),
    )
    .map_err(classify)?;
    emit_to(opts, |w| match format {
        Format::Csv => write_field_csv(w, &field).map_err(classify),
        Format::Json => json_to(w, &field),
    })
}

fn with_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Outcome<T> {
    match jobs {
        Some(0) => Err(usage(anyhow!("--jobs must be at least 1"))),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(runtime)?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

fn basin(opts: &Options) -> Outcome<()> {
    let eta = positive("eta", opts.eta.unwrap_or(1.0))?;
    let registry = RuleRegistry::builtin();
    let rule = rule(opts, &registry, eta, fixed_hierarchy(opts))?;
    let game = single_game(opts, GameArg::Two)?;
    let cfg = train_config(opts, FIGURE2_LR)?;
    let resolution = opts.resolution.unwrap_or(41);
    let map = with_pool(opts.jobs, || {
        basin_map(rule.as_ref(), &game, &cfg, resolution)
    })?
    .map_err(classify)?;
    let format = opts.format.unwrap_or(Format::Csv);
    emit_to(opts, |w| match format {
        Format::Csv => write_basin_csv(w, &map).map_err(classify),
        Format::Json => json_to(w, &map.points),
    })?;
    eprintln!(
        "{} on {game}: miscoordination fraction {} over {} starts ({} excluded)",
        rule.name(),
        map.miscoordination_fraction(),
        map.points.len() - map.excluded_count(),
        map.excluded_count()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    rule: String,
    game: String,
    eta: f64,
    lr: f64,
    seed: u64,
    hierarchy: Option<Vec<usize>>,
    theta0: Vec<f64>,
    final_theta: Vec<f64>,
    iterations: usize,
    converged: bool,
    outcome: String,
    final_value: f64,
}

fn train(opts: &Options) -> Outcome<()> {
    let eta = positive("eta", opts.eta.unwrap_or(1.0))?;
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let game = single_game(opts, GameArg::Two)?;
    let tensor = game.tensor().map_err(usage)?;
    let cfg = train_config(opts, FIGURE2_LR)?;
    let mut rng = seeded_rng(seed);
    let theta0 = match &opts.theta0 {
        Some(flat) => {
            let mode = game.mode();
            let mut rest = flat.as_slice();
            let mut blocks = Vec::new();
            for &m in tensor.shape() {
                let len = mode.block_len(m);
                if rest.len() < len {
                    return Err(usage(anyhow!("--theta0 has too few values for {game}")));
                }
                blocks.push(rest[..len].to_vec());
                rest = &rest[len..];
            }
            if !rest.is_empty() {
                return Err(usage(anyhow!("--theta0 has too many values for {game}")));
            }
            JointPolicy::new(mode, blocks).map_err(usage)?
        }
        None => {
            let init = match opts.init {
                Some(InitArg::Box) => InitDistribution::UniformBox,
                _ => InitDistribution::UniformSimplex,
            };
            draw_policy(&game, init, &mut rng).map_err(classify)?
        }
    };
    let hierarchy = match &opts.hierarchy {
        Some(HierarchyArg::Random) => Some(random_hierarchy(tensor.agents(), &mut rng)),
        Some(HierarchyArg::Fixed(h)) => Some(h.clone()),
        None => None,
    };
    let registry = RuleRegistry::builtin();
    let rule = rule(opts, &registry, eta, hierarchy.clone())?;
    let run =
        anticipation::dynamics::train(rule.as_ref(), &tensor, &theta0, &cfg).map_err(usage)?;
    let summary = TrainSummary {
        rule: rule.name().to_string(),
        game: game.to_string(),
        eta,
        lr: cfg.lr,
        seed,
        hierarchy: hierarchy.map(|h| h.iter().map(|i| i + 1).collect()),
        theta0: theta0.flat(),
        final_theta: run.final_policy.flat(),
        iterations: run.iterations,
        converged: run.converged,
        outcome: run.outcome.as_str().to_string(),
        final_value: run.final_value,
    };
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    emit_to(opts, |w| match opts.format {
        Some(Format::Json) => json_to(w, &summary),
        _ => {
            let mut text = format!(
                "rule {}\ngame {}\neta {}\nlr {}\nseed {}\n",
                summary.rule, summary.game, summary.eta, summary.lr, summary.seed
            );
            if let Some(h) = &summary.hierarchy {
                let h: Vec<String> = h.iter().map(|i| i.to_string()).collect();
                text.push_str(&format!("hierarchy {}\n", h.join(",")));
            }
            text.push_str(&format!(
                "theta0 {}\nfinal_theta {}\niterations {}\nconverged {}\noutcome {}\nfinal_value {}\n",
                join(&summary.theta0),
                join(&summary.final_theta),
                summary.iterations,
                summary.converged,
                summary.outcome,
                summary.final_value
            ));
            w.write_all(text.as_bytes()).map_err(runtime)
        }
    })
}

fn sweep_config(opts: &Options, preset: bool) -> Outcome<SweepConfig> {
    let runs = opts.runs.unwrap_or(500);
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let mut cfg = SweepConfig::figure2(runs, seed);
    let game = opts.game.unwrap_or(GameArg::Three);
    if preset && (game != GameArg::Three || opts.alpha.is_some() || opts.k.is_some()) {
        return Err(usage(anyhow!(
            "fig2 runs the three-action game; use `sweep` for other games"
        )));
    }
    let explicit_k = match (game, opts.alpha, opts.k) {
        (GameArg::Two, Some(alpha), Some(k)) => Some(alpha - k),
        (GameArg::Two, None, Some(_)) => {
            return Err(usage(anyhow!("--k needs --alpha for the two-action game")))
        }
        (GameArg::Three, Some(_), _) => {
            return Err(usage(anyhow!(
                "--alpha applies only to the two-action game"
            )));
        }
        (GameArg::Three, None, Some(k)) => Some(10.0 - k),
        _ => None,
    };
    cfg.game = match game {
        GameArg::Two => GameFamily::TwoAction { alpha: opts.alpha },
        GameArg::Three => GameFamily::ThreeAction,
    };
    cfg.regrets = match (explicit_k, &opts.g) {
        (Some(g), Some(gs)) if gs.as_slice() != [g] => {
            return Err(usage(anyhow!("--g contradicts --alpha/--k")));
        }
        (Some(g), _) => vec![g],
        (None, Some(gs)) => gs.clone(),
        (None, None) if game == GameArg::Two => vec![0.2, 1.0, 5.0],
        (None, None) => cfg.regrets,
    };
    if let Some(rules) = &opts.rule {
        cfg.rules = rules.clone();
    }
    cfg.eta = positive("eta", opts.eta.unwrap_or(FIGURE2_ETA))?;
    cfg.train = train_config(opts, FIGURE2_LR)?;
    cfg.init = match opts.init {
        Some(InitArg::Box) => InitDistribution::UniformBox,
        Some(InitArg::Simplex) | None => InitDistribution::UniformSimplex,
    };
    cfg.hierarchy = match &opts.hierarchy {
        Some(HierarchyArg::Fixed(h)) => HierarchyPolicy::Fixed(Some(h.clone())),
        Some(HierarchyArg::Random) | None => HierarchyPolicy::RandomPerRun,
    };
    if opts.jobs == Some(0) {
        return Err(usage(anyhow!("--jobs must be at least 1")));
    }
    cfg.jobs = opts.jobs;
    Ok(cfg)
}

fn write_sweep(dir: &Path, result: &SweepResult) -> Outcome<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(runtime)?;
    let create = |name: &str| {
        let path = dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(runtime)
    };
    write_records_csv(create("records.csv")?, &result.records).map_err(classify)?;
    write_aggregates_json(create("aggregates.json")?, &result.stats).map_err(classify)
}

fn sweep(opts: &Options, preset: bool) -> Outcome<()> {
    let cfg = sweep_config(opts, preset)?;
    let registry = RuleRegistry::builtin();
    let result = run_sweep(&cfg, &registry).map_err(classify)?;
    match &opts.out {
        Some(dir) => {
            write_sweep(dir, &result)?;
            let mut text = format!(
                "{:<6} {:>6} {:>10} {:>10} {:>8} {:>8} {:>8} {:>8}\n",
                "rule", "g", "mean", "std", "global", "local", "miscoord", "other"
            );
            for (rule, g, s) in &result.stats.cells {
                text.push_str(&format!(
                    "{:<6} {:>6} {:>10.4} {:>10.4} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
                    rule,
                    g,
                    s.mean_value,
                    s.std_value,
                    s.frac_global,
                    s.frac_local,
                    s.frac_miscoord,
                    s.frac_other
                ));
            }
            text.push_str(&format!(
                "wrote {} and {}\n",
                dir.join("records.csv").display(),
                dir.join("aggregates.json").display()
            ));
            io::stdout()
                .lock()
                .write_all(text.as_bytes())
                .map_err(runtime)
        }
        None => emit_to(opts, |w| match opts.format {
            Some(Format::Csv) => write_records_csv(w, &result.records).map_err(classify),
            _ => write_aggregates_json(w, &result.stats).map_err(classify),
        }),
    }
}
