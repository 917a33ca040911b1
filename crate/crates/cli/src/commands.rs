//! Subcommand definitions and their implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use molforge_core::molgraph::{canonical_key, Molecule};
use molforge_core::properties::{heavy_atom_count, logp, long_cycle_count, molecular_weight, penalized_logp, Properties};
use molforge_core::rewards::similarity;

use crate::config::{Preset, RunConfig};
use crate::run::{self, Policy};
use crate::runlog::Ledger;
use crate::{parse_molecule, CliError};

/// Restarts launched by `train --restart-from`.
pub const RESTARTS: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "molforge", version, about = "Molecule optimization with deep Q-learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a Q-network and log every episode.
    Train(TrainArgs),
    /// Roll out a trained network without learning.
    Eval(EvalArgs),
    /// Roll out a fixed policy that does not learn.
    Baseline(BaselineArgs),
    /// List the valid actions from one molecule.
    Inspect(InspectArgs),
    /// Print properties of molecules.
    Props {
        smiles: Vec<String>,
    },
    /// Print the radius-2 Tanimoto similarity of two molecules.
    Sim {
        a: String,
        b: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// File of SMILES, one per line; each episode starts at one of them.
    #[arg(long)]
    pub origins: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Start from these parameters instead of a fresh network.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Ledger of an earlier run; trains once from each of its best molecules.
    #[arg(long)]
    pub restart_from: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Add one summary line per origin molecule.
    #[arg(long)]
    pub per_origin: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Random,
    Greedy,
    EpsGreedy,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    pub kind: BaselineKind,
    #[command(flatten)]
    pub run: RunArgs,
    /// Exploration rate for eps-greedy.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub per_origin: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    pub smiles: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Step index of the state (Q-values depend on the steps left).
    #[arg(long, default_value_t = 0)]
    pub step: usize,
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Baseline(a) => cmd_baseline(&a, out),
        Command::Inspect(a) => cmd_inspect(&a, out),
        Command::Props { smiles } => cmd_props(&smiles, out),
        Command::Sim { a, b } => cmd_sim(&a, &b, out),
    }
}

/// Config file plus command-line overrides, and the origin molecules.
pub fn resolve(args: &RunArgs) -> Result<(RunConfig, Vec<Molecule>), CliError> {
    let mut cfg = RunConfig::load(args.config.as_deref(), args.preset)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.episodes {
        cfg.set_episodes(n);
        cfg.eval_episodes = n;
        cfg.validate()?;
    }
    if let Some(dir) = &args.out_dir {
        cfg.out_dir = dir.clone();
    }
    let from_file = match &args.origins {
        Some(p) => run::read_origins(p)?,
        None => Vec::new(),
    };
    let origins = run::effective_origins(&cfg, from_file);
    Ok((cfg, origins))
}

fn check_epsilon(eps: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&eps) {
        Ok(eps)
    } else {
        Err(CliError::Usage(format!("epsilon {eps} outside [0, 1]")))
    }
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, origins) = resolve(&args.run)?;
    let init = match &args.checkpoint {
        None => None,
        Some(p) => Some(run::load_network(&cfg, &run::build_env(&cfg, &origins)?, p)?),
    };
    let Some(ledger_path) = &args.restart_from else {
        return train_once(&cfg, &origins, init, &cfg.out_dir, out);
    };
    let ledger = Ledger::parse(&std::fs::read_to_string(ledger_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", ledger_path.display())))?;
    if ledger.is_empty() {
        return Err(CliError::Data(format!("{} is empty", ledger_path.display())));
    }
    for (k, entry) in ledger.top(RESTARTS).iter().enumerate() {
        let mut restart = cfg.clone();
        restart.mdp.initial_molecule = parse_molecule(&entry.smiles)?;
        writeln!(out, "# restart {k} from {}", entry.smiles)?;
        train_once(&restart, &[], init.clone(), &cfg.out_dir.join(format!("restart-{k}")), out)?;
    }
    Ok(())
}

fn train_once(
    cfg: &RunConfig,
    origins: &[Molecule],
    init: Option<(molforge_core::qlearn::ValueNetwork, molforge_core::qlearn::Adam)>,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut outcome = run::train(cfg, origins, init, Some(dir), true)?;
    writeln!(out, "rank\tsmiles\treward\tfirst_episode")?;
    for (i, e) in outcome.ledger.top(3).iter().enumerate() {
        writeln!(out, "{}\t{}\t{}\t{}", i + 1, e.smiles, e.best_reward, e.first_episode)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let path = run::run_policy(&mut outcome.env, Policy::Learned(&outcome.agent.online), 0, 0.0, &mut rng)?;
    let last = path.last().expect("start state present");
    let reward = outcome.env.raw_reward_of(last)?;
    let greedy = format!("policy\tsmiles\treward\ngreedy\t{}\t{reward}\n", last.key);
    std::fs::write(dir.join("greedy.tsv"), &greedy)?;
    writeln!(out)?;
    write!(out, "{greedy}")?;
    Ok(())
}

fn report(
    cfg: &RunConfig,
    rows: &[run::EvalRow],
    per_origin: bool,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let table = run::eval_table(rows);
    let summary = run::summary_table(&run::summarize(rows, per_origin));
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("eval.tsv"), &table)?;
        std::fs::write(dir.join("summary.tsv"), &summary)?;
        std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    }
    write!(out, "{table}\n{summary}")?;
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, origins) = resolve(&args.run)?;
    let env = run::build_env(&cfg, &origins)?;
    let (net, _) = run::load_network(&cfg, &env, &args.checkpoint)?;
    let eps = check_epsilon(args.epsilon.unwrap_or(cfg.eval_epsilon))?;
    let rows = run::evaluate(&cfg, &env, Policy::Learned(&net), cfg.eval_episodes, eps, cfg.seed)?;
    report(&cfg, &rows, args.per_origin, args.run.out_dir.as_deref(), out)
}

pub fn cmd_baseline(args: &BaselineArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, origins) = resolve(&args.run)?;
    let env = run::build_env(&cfg, &origins)?;
    let eps = match args.kind {
        BaselineKind::Random => 1.0,
        BaselineKind::Greedy => 0.0,
        BaselineKind::EpsGreedy => check_epsilon(args.epsilon.unwrap_or(cfg.eval_epsilon))?,
    };
    let rows = run::evaluate(&cfg, &env, Policy::Greedy, cfg.eval_episodes, eps, cfg.seed)?;
    report(&cfg, &rows, args.per_origin, args.run.out_dir.as_deref(), out)
}

pub fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref(), args.preset)?;
    let mol = parse_molecule(&args.smiles)?;
    let net = match &args.checkpoint {
        None => None,
        Some(p) => {
            let env = run::build_env(&cfg, std::slice::from_ref(&mol))?;
            Some(run::load_network(&cfg, &env, p)?.0)
        }
    };
    let rows = run::inspect(&cfg, mol, args.step, net.as_ref())?;
    if net.is_some() {
        writeln!(out, "action\tsmiles\treward\tq")?;
    } else {
        writeln!(out, "action\tsmiles\treward")?;
    }
    for r in rows {
        match r.q {
            Some(q) => writeln!(out, "{}\t{}\t{}\t{q}", r.action, r.smiles, r.reward)?,
            None => writeln!(out, "{}\t{}\t{}", r.action, r.smiles, r.reward)?,
        }
    }
    Ok(())
}

pub fn cmd_props(smiles: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    if smiles.is_empty() || smiles.iter().any(|s| s.trim().is_empty()) {
        return Err(CliError::Usage("props needs one or more non-empty SMILES".into()));
    }
    let props = Properties::default();
    writeln!(out, "smiles\tmw\tlogp\tpenalized_logp\theavy_atoms\trings\tring_sizes\tlong_cycles")?;
    for s in smiles {
        let m = parse_molecule(s)?;
        let sizes: Vec<String> = m.ring_info().ring_sizes.iter().map(|r| r.to_string()).collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            canonical_key(&m),
            molecular_weight(&m),
            logp(&m, &props.logp_table)?,
            penalized_logp(&m, &props.logp_table, props.sa_proxy)?,
            heavy_atom_count(&m),
            sizes.len(),
            if sizes.is_empty() { "-".to_string() } else { sizes.join(",") },
            long_cycle_count(&m),
        )?;
    }
    Ok(())
}

pub fn cmd_sim(a: &str, b: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let (x, y) = (parse_molecule(a)?, parse_molecule(b)?);
    writeln!(out, "{}", similarity(&x, &y))?;
    Ok(())
}
