//! Flat `section.key=value` run configuration.
//!
//! Lines are `key=value`; blank lines and lines starting with `#` are
//! skipped. A preset supplies every default, then the file's keys are
//! applied in order. Unknown and repeated keys are errors.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use molforge_core::actions::MdpConfig;
use molforge_core::molgraph::{canonical_key, parse_smiles, Element, Molecule};
use molforge_core::properties::{LogPTable, Properties, PropertyKind, SaProxy};
use molforge_core::qlearn::{EpsilonSchedule, TrainConfig};
use molforge_core::rewards::{RewardSpec, RewardVariant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown config key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: bad value {value:?} for {key}: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Full-size network and episode budget; `paper` is accepted as an alias.
    Full,
    /// Smaller network, 2,000 episodes, sparser updates.
    Desk,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" | "paper" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            other => Err(format!("unknown preset {other:?} (full or desk)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Full => "full",
            Preset::Desk => "desk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    Maximize,
    Range,
    Constrained,
    Multi,
}

impl FromStr for RewardKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maximize" => Ok(RewardKind::Maximize),
            "range" => Ok(RewardKind::Range),
            "constrained" => Ok(RewardKind::Constrained),
            "multi" => Ok(RewardKind::Multi),
            other => Err(format!("unknown reward kind {other:?}")),
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardKind::Maximize => "maximize",
            RewardKind::Range => "range",
            RewardKind::Constrained => "constrained",
            RewardKind::Multi => "multi",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSettings {
    pub kind: RewardKind,
    pub property: PropertyKind,
    pub lower: f64,
    pub upper: f64,
    pub origin: Option<Molecule>,
    pub delta: f64,
    pub lambda: f64,
    pub weight: f64,
    pub gamma: f64,
    pub per_step: bool,
    pub sa_proxy: SaProxy,
    pub logp_table: Option<PathBuf>,
}

impl Default for RewardSettings {
    fn default() -> Self {
        RewardSettings {
            kind: RewardKind::Maximize,
            property: PropertyKind::PenalizedLogP,
            lower: 0.0,
            upper: 0.0,
            origin: None,
            delta: 0.4,
            lambda: 100.0,
            weight: 0.5,
            gamma: 0.9,
            per_step: true,
            sa_proxy: SaProxy::Zero,
            logp_table: None,
        }
    }
}

impl RewardSettings {
    /// Reward spec; `fallback_origin` stands in when no `reward.origin` is set.
    pub fn spec(&self, fallback_origin: Option<&Molecule>) -> Result<RewardSpec, ConfigError> {
        let origin = || {
            self.origin
                .clone()
                .or_else(|| fallback_origin.cloned())
                .ok_or_else(|| ConfigError::Invalid(format!("reward.kind={} needs reward.origin or an origins file", self.kind)))
        };
        let variant = match self.kind {
            RewardKind::Maximize => RewardVariant::Maximize {
                property: self.property.clone(),
            },
            RewardKind::Range => RewardVariant::TargetRange {
                property: self.property.clone(),
                lower: self.lower,
                upper: self.upper,
            },
            RewardKind::Constrained => RewardVariant::ConstrainedLogP {
                origin: origin()?,
                delta: self.delta,
                lambda: self.lambda,
            },
            RewardKind::Multi => RewardVariant::MultiObjective {
                origin: origin()?,
                weight: self.weight,
                property: self.property.clone(),
            },
        };
        let spec = RewardSpec {
            variant,
            gamma: self.gamma,
            per_step: self.per_step,
        };
        spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(spec)
    }

    pub fn properties(&self) -> Result<Properties, ConfigError> {
        let table = match &self.logp_table {
            None => LogPTable::bundled().clone(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                LogPTable::parse(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?
            }
        };
        Ok(Properties::new(table, self.sa_proxy))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mdp: MdpConfig,
    pub reward: RewardSettings,
    pub train: TrainConfig,
    /// Episodes between intermediate checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    pub eval_episodes: usize,
    pub eval_epsilon: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub preset: Preset,
    schedule_set: bool,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut train = TrainConfig::default();
        if preset == Preset::Desk {
            train.hidden = vec![256, 128, 32];
            train.episodes = 2000;
            train.batch_size = 32;
            train.train_every = 4;
        }
        train.schedule = EpsilonSchedule::linear(train.episodes / 2);
        RunConfig {
            mdp: MdpConfig::default(),
            reward: RewardSettings::default(),
            train,
            checkpoint_every: 0,
            eval_episodes: 100,
            eval_epsilon: 0.0,
            out_dir: PathBuf::from("runs"),
            seed: 0,
            preset,
            schedule_set: false,
        }
    }

    /// Parses config text. `preset` overrides any `io.preset` in the text.
    pub fn parse(text: &str, preset: Option<Preset>) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (k, v) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: trimmed.to_string(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey { line, key: k.to_string() });
            }
            if !seen.insert(k) {
                return Err(ConfigError::DuplicateKey { line, key: k.to_string() });
            }
            entries.push((line, k, v));
        }
        let chosen = match preset {
            Some(p) => p,
            None => match entries.iter().find(|e| e.1 == "io.preset") {
                Some(&(line, key, value)) => value.parse().map_err(|reason| ConfigError::BadValue {
                    line,
                    key: key.into(),
                    value: value.into(),
                    reason,
                })?,
                None => Preset::Full,
            },
        };
        let mut cfg = RunConfig::preset(chosen);
        for (line, key, value) in entries {
            if key == "io.preset" {
                continue;
            }
            cfg.set(key, value).map_err(|reason| ConfigError::BadValue {
                line,
                key: key.into(),
                value: value.into(),
                reason,
            })?;
        }
        cfg.finish()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&std::path::Path>, preset: Option<Preset>) -> Result<Self, ConfigError> {
        let text = match path {
            None => String::new(),
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?,
        };
        RunConfig::parse(&text, preset)
    }

    /// Applies one key. Errors carry only the reason; the caller adds context.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        let r = &mut self.reward;
        match key {
            "mdp.elements" => {
                self.mdp.elements = list(value, |s| s.parse::<Element>().map_err(|e| e.to_string()))?;
            }
            "mdp.max_steps" => self.mdp.max_steps = num(value)?,
            "mdp.ring_sizes" => self.mdp.allowed_ring_sizes = list(value, num)?.into_iter().collect(),
            "mdp.allow_bond_removal" => self.mdp.allow_bond_removal = flag(value)?,
            "mdp.allow_no_modification" => self.mdp.allow_no_modification = flag(value)?,
            "mdp.initial_molecule" => self.mdp.initial_molecule = molecule(value)?,
            "reward.kind" => r.kind = value.parse()?,
            "reward.property" => r.property = value.parse().map_err(|e: molforge_core::properties::PropertyError| e.to_string())?,
            "reward.lower" => r.lower = num(value)?,
            "reward.upper" => r.upper = num(value)?,
            "reward.origin" => r.origin = if value.is_empty() { None } else { Some(molecule(value)?) },
            "reward.delta" => r.delta = num(value)?,
            "reward.lambda" => r.lambda = num(value)?,
            "reward.weight" => r.weight = num(value)?,
            "reward.gamma" => r.gamma = num(value)?,
            "reward.per_step" => r.per_step = flag(value)?,
            "reward.sa_proxy" => r.sa_proxy = value.parse().map_err(|e: molforge_core::properties::PropertyError| e.to_string())?,
            "reward.logp_table" => r.logp_table = if value.is_empty() { None } else { Some(value.into()) },
            "train.episodes" => t.episodes = num(value)?,
            "train.hidden" => t.hidden = list(value, num)?,
            "train.heads" => t.heads = num(value)?,
            "train.learning_rate" => t.learning_rate = num(value)?,
            "train.batch_size" => t.batch_size = num(value)?,
            "train.replay_capacity" => t.replay_capacity = num(value)?,
            "train.warmup" => t.warmup = num(value)?,
            "train.train_every" => t.train_every = num(value)?,
            "train.target_sync" => t.target_sync = num(value)?,
            "train.grad_clip" => t.grad_clip = num(value)?,
            "train.bootstrap_prob" => t.bootstrap_prob = num(value)?,
            "train.schedule" => {
                t.schedule = value.parse().map_err(|e: molforge_core::qlearn::QError| e.to_string())?;
                self.schedule_set = true;
            }
            "train.checkpoint_every" => self.checkpoint_every = num(value)?,
            "eval.episodes" => self.eval_episodes = num(value)?,
            "eval.epsilon" => self.eval_epsilon = num(value)?,
            "io.out_dir" => self.out_dir = value.into(),
            "io.seed" => self.seed = num(value)?,
            "io.preset" => {
                let p: Preset = value.parse()?;
                if p != self.preset {
                    return Err("presets apply before other keys; pass it to the parser instead".into());
                }
            }
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    /// Overrides the episode budget, keeping a derived schedule in step.
    pub fn set_episodes(&mut self, episodes: usize) {
        self.train.episodes = episodes;
        if !self.schedule_set {
            self.train.schedule = EpsilonSchedule::linear(episodes / 2);
        }
    }

    fn finish(&mut self) -> Result<(), ConfigError> {
        if !self.schedule_set {
            self.train.schedule = EpsilonSchedule::linear(self.train.episodes / 2);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.mdp.validate().map_err(|e| invalid(e.to_string()))?;
        self.train.validate().map_err(|e| invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.eval_epsilon) {
            return Err(invalid(format!("eval.epsilon {} outside [0, 1]", self.eval_epsilon)));
        }
        // Origin-free checks only; origins may still come from a file.
        let probe = Molecule::new();
        self.reward.spec(Some(&probe))?;
        Ok(())
    }

    /// Every key with its resolved value, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mol = |m: &Molecule| canonical_key(m).to_string();
        let r = &self.reward;
        let t = &self.train;
        let sa = match r.sa_proxy {
            SaProxy::Zero => "zero",
            SaProxy::RingProxy => "ring",
        };
        let lines = [
            format!("io.preset={}", self.preset),
            format!("io.seed={}", self.seed),
            format!("io.out_dir={}", self.out_dir.display()),
            format!("mdp.elements={}", join(self.mdp.elements.iter().map(|e| e.to_string()).collect())),
            format!("mdp.max_steps={}", self.mdp.max_steps),
            format!("mdp.ring_sizes={}", join(self.mdp.allowed_ring_sizes.iter().map(|s| s.to_string()).collect())),
            format!("mdp.allow_bond_removal={}", self.mdp.allow_bond_removal),
            format!("mdp.allow_no_modification={}", self.mdp.allow_no_modification),
            format!("mdp.initial_molecule={}", mol(&self.mdp.initial_molecule)),
            format!("reward.kind={}", r.kind),
            format!("reward.property={}", r.property),
            format!("reward.lower={}", r.lower),
            format!("reward.upper={}", r.upper),
            format!("reward.origin={}", r.origin.as_ref().map(mol).unwrap_or_default()),
            format!("reward.delta={}", r.delta),
            format!("reward.lambda={}", r.lambda),
            format!("reward.weight={}", r.weight),
            format!("reward.gamma={}", r.gamma),
            format!("reward.per_step={}", r.per_step),
            format!("reward.sa_proxy={sa}"),
            format!(
                "reward.logp_table={}",
                r.logp_table.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
            ),
            format!("train.episodes={}", t.episodes),
            format!("train.hidden={}", join(t.hidden.iter().map(|h| h.to_string()).collect())),
            format!("train.heads={}", t.heads),
            format!("train.learning_rate={}", t.learning_rate),
            format!("train.batch_size={}", t.batch_size),
            format!("train.replay_capacity={}", t.replay_capacity),
            format!("train.warmup={}", t.warmup),
            format!("train.train_every={}", t.train_every),
            format!("train.target_sync={}", t.target_sync),
            format!("train.grad_clip={}", t.grad_clip),
            format!("train.bootstrap_prob={}", t.bootstrap_prob),
            format!("train.schedule={}", t.schedule),
            format!("train.checkpoint_every={}", self.checkpoint_every),
            format!("eval.episodes={}", self.eval_episodes),
            format!("eval.epsilon={}", self.eval_epsilon),
        ];
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

pub const KEYS: &[&str] = &[
    "mdp.elements",
    "mdp.max_steps",
    "mdp.ring_sizes",
    "mdp.allow_bond_removal",
    "mdp.allow_no_modification",
    "mdp.initial_molecule",
    "reward.kind",
    "reward.property",
    "reward.lower",
    "reward.upper",
    "reward.origin",
    "reward.delta",
    "reward.lambda",
    "reward.weight",
    "reward.gamma",
    "reward.per_step",
    "reward.sa_proxy",
    "reward.logp_table",
    "train.episodes",
    "train.hidden",
    "train.heads",
    "train.learning_rate",
    "train.batch_size",
    "train.replay_capacity",
    "train.warmup",
    "train.train_every",
    "train.target_sync",
    "train.grad_clip",
    "train.bootstrap_prob",
    "train.schedule",
    "train.checkpoint_every",
    "eval.episodes",
    "eval.epsilon",
    "io.out_dir",
    "io.seed",
    "io.preset",
];

fn num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn flag(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("{other:?} is not a boolean")),
    }
}

fn list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| item(p.trim())).collect()
}

fn molecule(s: &str) -> Result<Molecule, String> {
    parse_smiles(s).map_err(|e| e.to_string())
}
