//! Training runs, policy rollouts and their reports.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use molforge_core::actions::ActionKind;
use molforge_core::env::{MolEnv, MolState};
use molforge_core::molgraph::{canonical_key, Molecule};
use molforge_core::properties::{logp, molecular_weight, penalized_logp, Properties};
use molforge_core::qlearn::{
    argmax, explore, head_mean_values, load_checkpoint, save_checkpoint, Adam, Agent, Environment, QError, ValueNetwork,
};
use molforge_core::rewards::RewardFn;

use crate::config::{RewardKind, RunConfig};
use crate::runlog::{EpisodeRow, Ledger, RunLog};
use crate::{parse_molecule, CliError};

/// One SMILES per line; blank lines and `#` comments are skipped.
pub fn read_origins(path: &Path) -> Result<Vec<Molecule>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let origins: Vec<Molecule> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_molecule)
        .collect::<Result<_, _>>()?;
    if origins.is_empty() {
        return Err(CliError::Usage(format!("{} lists no molecules", path.display())));
    }
    Ok(origins)
}

/// Episode start molecules: the origins file if given, else `reward.origin`.
pub fn effective_origins(cfg: &RunConfig, from_file: Vec<Molecule>) -> Vec<Molecule> {
    if from_file.is_empty() {
        cfg.reward.origin.iter().cloned().collect()
    } else {
        from_file
    }
}

pub fn build_env(cfg: &RunConfig, origins: &[Molecule]) -> Result<MolEnv, CliError> {
    build_env_with(cfg, origins, cfg.reward.properties()?)
}

/// Like [`build_env`] with caller-supplied calculators, e.g. ones carrying
/// registered `custom:` properties.
pub fn build_env_with(cfg: &RunConfig, origins: &[Molecule], properties: Properties) -> Result<MolEnv, CliError> {
    let spec = cfg.reward.spec(origins.first())?;
    let reward = RewardFn::new(spec, properties)?;
    let env = if origins.is_empty() {
        MolEnv::new(cfg.mdp.clone(), reward)
    } else {
        MolEnv::with_origins(cfg.mdp.clone(), reward, origins.to_vec())
    };
    env.map_err(|e| CliError::Usage(e.to_string()))
}

/// Loads a checkpoint and checks it against the configured architecture.
pub fn load_network(cfg: &RunConfig, env: &MolEnv, path: &Path) -> Result<(ValueNetwork, Adam), CliError> {
    let (net, adam) = load_checkpoint(path)?;
    let expected = cfg.train.layer_dims(env.feature_dim());
    if net.dims() != expected.as_slice() {
        return Err(QError::ArchitectureMismatch {
            expected,
            found: net.dims().to_vec(),
        }
        .into());
    }
    Ok((net, adam))
}

pub struct TrainOutcome {
    pub agent: Agent<MolState>,
    pub env: MolEnv,
    pub ledger: Ledger,
}

/// Runs the configured number of training episodes.
///
/// With `out_dir`, writes `config.txt`, `runlog.tsv` (row by row),
/// `ledger.tsv`, `checkpoint.bin` and any intermediate checkpoints.
pub fn train(
    cfg: &RunConfig,
    origins: &[Molecule],
    init: Option<(ValueNetwork, Adam)>,
    out_dir: Option<&Path>,
    progress: bool,
) -> Result<TrainOutcome, CliError> {
    train_env(cfg, build_env(cfg, origins)?, init, out_dir, progress)
}

/// Trains in an environment built by the caller.
pub fn train_env(
    cfg: &RunConfig,
    mut env: MolEnv,
    init: Option<(ValueNetwork, Adam)>,
    out_dir: Option<&Path>,
    progress: bool,
) -> Result<TrainOutcome, CliError> {
    let mut agent = match init {
        None => Agent::new(cfg.train.clone(), env.feature_dim(), cfg.seed)?,
        Some((net, adam)) => Agent::from_parts(cfg.train.clone(), net, adam, cfg.seed)?,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    }
    let mut log = RunLog::create(out_dir.map(|d| d.join("runlog.tsv")).as_deref())?;
    let episodes = cfg.train.episodes;
    let report_every = (episodes / 20).max(1);
    for ep in 0..episodes {
        let rec = agent.run_episode(&mut env, ep)?;
        let terminal = rec.terminal().clone();
        let reward = env.raw_reward_of(&terminal)?;
        log.push_losses(&rec.losses);
        log.append(&EpisodeRow {
            episode: ep,
            epsilon: rec.epsilon,
            head: rec.head,
            smiles: terminal.key.to_string(),
            reward,
            discounted_return: rec.discounted_return(),
            loss_avg: log.loss_avg(),
        })?;
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && (ep + 1) % cfg.checkpoint_every == 0 {
                save_checkpoint(&agent.online, &agent.adam, &dir.join(format!("checkpoint-{:06}.bin", ep + 1)))?;
                log.ledger.save(&dir.join("ledger.tsv"))?;
            }
        }
        if progress && (ep + 1) % report_every == 0 {
            eprintln!(
                "episode {}/{episodes}  epsilon {:.3}  reward {reward:.4}  {}",
                ep + 1,
                rec.epsilon,
                terminal.key
            );
        }
    }
    if let Some(dir) = out_dir {
        save_checkpoint(&agent.online, &agent.adam, &dir.join("checkpoint.bin"))?;
        log.ledger.save(&dir.join("ledger.tsv"))?;
    }
    Ok(TrainOutcome {
        agent,
        env,
        ledger: log.ledger,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Highest head-mean Q-value.
    Learned(&'a ValueNetwork),
    /// Highest immediate reward of the successor molecule.
    Greedy,
}

/// States visited by one rollout from `origin`, start state first.
pub fn run_policy(
    env: &mut MolEnv,
    policy: Policy<'_>,
    origin: u32,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<MolState>, CliError> {
    let mut state = env.start_state(origin);
    let mut path = vec![state.clone()];
    while state.step < env.horizon() {
        let values = match policy {
            Policy::Learned(net) => head_mean_values(net, &env.candidates(&state)?)?,
            Policy::Greedy => env.successors(&state)?.iter().map(|s| s.raw_reward).collect(),
        };
        let idx = match explore(values.len(), epsilon, rng) {
            Some(i) => i,
            None => argmax(&values).ok_or(QError::EmptyActionSet)?,
        };
        state = env.step(&state, idx)?;
        path.push(state.clone());
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub episode: usize,
    pub origin: Option<String>,
    pub smiles: String,
    pub steps: usize,
    pub reward: f64,
    /// The configured reward property (absent for the constrained reward).
    pub property: Option<f64>,
    pub mw: f64,
    pub logp: f64,
    pub penalized_logp: f64,
    pub similarity: Option<f64>,
    /// Penalized logP gain over the origin (constrained reward only).
    pub improvement: Option<f64>,
    pub success: Option<bool>,
}

pub const EVAL_HEADER: &str =
    "episode\torigin\tsmiles\tsteps\treward\tproperty\tmw\tlogp\tpenalized_logp\tsimilarity\timprovement\tsuccess";

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or("na".to_string(), |x| x.to_string())
}

impl EvalRow {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.episode,
            self.origin.as_deref().unwrap_or("na"),
            self.smiles,
            self.steps,
            self.reward,
            opt(&self.property),
            self.mw,
            self.logp,
            self.penalized_logp,
            opt(&self.similarity),
            opt(&self.improvement),
            opt(&self.success),
        )
    }
}

fn describe(cfg: &RunConfig, props: &Properties, env: &mut MolEnv, episode: usize, path: &[MolState]) -> Result<EvalRow, CliError> {
    let last = path.last().expect("start state present");
    let mol = &*last.molecule;
    let origin = env.origins().get(last.origin as usize).cloned();
    let reward_fn = env.reward_fn(last.origin);
    let similarity = reward_fn.origin_similarity(mol);
    let r = &cfg.reward;
    let property = match r.kind {
        RewardKind::Constrained => None,
        _ => Some(props.evaluate(&r.property, mol)?),
    };
    let plogp = penalized_logp(mol, &props.logp_table, props.sa_proxy)?;
    let improvement = match (r.kind, &origin) {
        (RewardKind::Constrained, Some(o)) => Some(plogp - penalized_logp(o, &props.logp_table, props.sa_proxy)?),
        _ => None,
    };
    let success = match r.kind {
        RewardKind::Range => property.map(|p| p >= r.lower && p <= r.upper),
        RewardKind::Constrained => similarity.map(|s| s >= r.delta),
        _ => None,
    };
    Ok(EvalRow {
        episode,
        origin: origin.map(|o| canonical_key(&o).to_string()),
        smiles: last.key.to_string(),
        steps: last.step,
        reward: env.raw_reward_of(last)?,
        property,
        mw: molecular_weight(mol),
        logp: logp(mol, &props.logp_table)?,
        penalized_logp: plogp,
        similarity,
        improvement,
        success,
    })
}

/// Thread pool capped by `MOLFORGE_THREADS` when set.
fn eval_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MOLFORGE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("MOLFORGE_THREADS={v:?} is not a thread count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Data(e.to_string()))
}

/// Rolls `episodes` episodes without learning. Episode `i` starts at origin
/// `i mod n` and draws from its own random stream, so results do not depend
/// on the thread count.
pub fn evaluate(
    cfg: &RunConfig,
    env: &MolEnv,
    policy: Policy<'_>,
    episodes: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<EvalRow>, CliError> {
    let props = cfg.reward.properties()?;
    let n_origins = env.origins().len().max(1);
    let mut proto = env.clone();
    proto.clear_caches();
    eval_pool()?.install(|| {
        (0..episodes)
            .into_par_iter()
            .map_init(
                || proto.clone(),
                |env, i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    let path = run_policy(env, policy, (i % n_origins) as u32, epsilon, &mut rng)?;
                    describe(cfg, &props, env, i, &path)
                },
            )
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub episodes: usize,
    pub unique: usize,
    pub mean_reward: f64,
    pub success_rate: Option<f64>,
    pub mean_similarity: Option<f64>,
    pub mean_improvement: Option<f64>,
    pub sd_improvement: Option<f64>,
}

pub const SUMMARY_HEADER: &str =
    "group\tepisodes\tunique\tmean_reward\tsuccess_rate\tmean_similarity\tmean_improvement\tsd_improvement";

impl Summary {
    pub fn of(label: &str, rows: &[&EvalRow]) -> Summary {
        let n = rows.len();
        let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let flags: Vec<f64> = rows.iter().filter_map(|r| r.success).map(|s| s as u8 as f64).collect();
        let sims: Vec<f64> = rows.iter().filter_map(|r| r.similarity).collect();
        let gains: Vec<f64> = rows.iter().filter_map(|r| r.improvement).collect();
        let mean_gain = mean(&gains);
        let sd = mean_gain.map(|m| (gains.iter().map(|g| (g - m).powi(2)).sum::<f64>() / gains.len() as f64).sqrt());
        let mut unique: Vec<&str> = rows.iter().map(|r| r.smiles.as_str()).collect();
        unique.sort_unstable();
        unique.dedup();
        Summary {
            label: label.to_string(),
            episodes: n,
            unique: unique.len(),
            mean_reward: mean(&rows.iter().map(|r| r.reward).collect::<Vec<_>>()).unwrap_or(f64::NAN),
            success_rate: mean(&flags),
            mean_similarity: mean(&sims),
            mean_improvement: mean_gain,
            sd_improvement: sd,
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.label,
            self.episodes,
            self.unique,
            self.mean_reward,
            opt(&self.success_rate),
            opt(&self.mean_similarity),
            opt(&self.mean_improvement),
            opt(&self.sd_improvement),
        )
    }
}

/// Overall summary first, then one line per origin when `per_origin` is set.
pub fn summarize(rows: &[EvalRow], per_origin: bool) -> Vec<Summary> {
    let mut out = vec![Summary::of("all", &rows.iter().collect::<Vec<_>>())];
    if per_origin {
        let mut origins: Vec<&str> = Vec::new();
        for r in rows {
            let o = r.origin.as_deref().unwrap_or("na");
            if !origins.contains(&o) {
                origins.push(o);
            }
        }
        for o in origins {
            let group: Vec<&EvalRow> = rows.iter().filter(|r| r.origin.as_deref().unwrap_or("na") == o).collect();
            out.push(Summary::of(o, &group));
        }
    }
    out
}

pub fn eval_table(rows: &[EvalRow]) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn summary_table(summaries: &[Summary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in summaries {
        out.push_str(&s.to_line());
        out.push('\n');
    }
    out
}

/// Short text form of an edit, e.g. `atom O 2 =1`, `bond 0-3 1>2`, `none`.
pub fn action_label(kind: &ActionKind) -> String {
    match *kind {
        ActionKind::AtomAddition { element, anchor, order } => match anchor {
            None => format!("atom {element}"),
            Some(a) => format!("atom {element} {a} ={order}"),
        },
        ActionKind::BondChange { a, b, old, new, .. } => format!("bond {a}-{b} {old}>{new}"),
        ActionKind::NoModification => "none".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectRow {
    pub action: String,
    pub smiles: String,
    pub reward: f64,
    /// Head-mean Q rescaled to `[0, 1]` over the action set.
    pub q: Option<f64>,
}

/// Every valid action from `mol` at `step`, with successor rewards and,
/// given a network, rescaled Q-values.
pub fn inspect(cfg: &RunConfig, mol: Molecule, step: usize, net: Option<&ValueNetwork>) -> Result<Vec<InspectRow>, CliError> {
    if step >= cfg.mdp.max_steps {
        return Err(CliError::Usage(format!("step {step} is at or past the horizon {}", cfg.mdp.max_steps)));
    }
    let mut env = build_env(cfg, std::slice::from_ref(&mol))?;
    let state = env.state_for(mol, step, 0);
    let succ = env.successors(&state)?;
    let q = match net {
        None => None,
        Some(net) => Some(rescale(&head_mean_values(net, &env.candidates(&state)?)?)),
    };
    Ok(succ
        .iter()
        .enumerate()
        .map(|(i, s)| InspectRow {
            action: action_label(&s.kind),
            smiles: s.key.to_string(),
            reward: s.raw_reward,
            q: q.as_ref().map(|q| q[i]),
        })
        .collect())
}

/// Min-max scaling; a constant vector maps to all ones.
pub fn rescale(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![1.0; values.len()]
    }
}
