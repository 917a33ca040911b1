//! The molecule MDP as a learning environment.
//!
//! Expansions (the deduplicated successor set of a molecule) depend only on
//! the molecule, so they are cached by canonical key together with each
//! successor's fingerprint bits. Successor molecules are not stored; they are
//! rebuilt from the edit when a step is taken.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::actions::{valid_actions, ActionError, ActionKind, MdpConfig, State};
use crate::fingerprint::{morgan_fingerprint, steps_remaining_fraction, DEFAULT_LENGTH, DEFAULT_RADIUS};
use crate::molgraph::{canonical_key, canonical_labels, CanonicalKey, Molecule};
use crate::qlearn::{Candidate, Environment, Features, QError};
use crate::rewards::{RewardError, RewardFn};

#[derive(Debug, Clone, PartialEq)]
pub struct MolState {
    pub molecule: Arc<Molecule>,
    pub key: CanonicalKey,
    pub step: usize,
    /// Index into the environment's origin list (0 when there is none).
    pub origin: u32,
}

impl MolState {
    pub fn as_state(&self) -> State {
        State::new((*self.molecule).clone(), self.step)
    }
}

#[derive(Debug)]
struct Node {
    key: CanonicalKey,
    bits: Arc<[u32]>,
}

#[derive(Debug)]
struct Successor {
    kind: ActionKind,
    node: Arc<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheLimits {
    pub expansions: usize,
    pub nodes: usize,
}

impl Default for CacheLimits {
    fn default() -> Self {
        CacheLimits {
            expansions: 100_000,
            nodes: 1_000_000,
        }
    }
}

/// One successor as reported by [`MolEnv::successors`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorInfo {
    pub kind: ActionKind,
    pub key: CanonicalKey,
    pub raw_reward: f64,
}

#[derive(Debug, Clone)]
pub struct MolEnv {
    cfg: MdpConfig,
    rewards: Vec<RewardFn>,
    origins: Vec<Arc<Molecule>>,
    radius: usize,
    length: usize,
    limits: CacheLimits,
    expansions: HashMap<CanonicalKey, Arc<[Successor]>>,
    nodes: HashMap<CanonicalKey, Arc<Node>>,
    raw: HashMap<(u32, CanonicalKey), f64>,
}

fn canonical_order(mol: &Molecule) -> Molecule {
    mol.permuted(&canonical_labels(mol)).expect("labels are a permutation")
}

fn env_err(e: impl std::error::Error + Send + Sync + 'static) -> QError {
    QError::Environment(Box::new(e))
}

impl MolEnv {
    /// Episodes start from `cfg.initial_molecule`.
    pub fn new(cfg: MdpConfig, reward: RewardFn) -> Result<Self, ActionError> {
        cfg.validate()?;
        Ok(MolEnv {
            cfg,
            rewards: vec![reward],
            origins: Vec::new(),
            radius: DEFAULT_RADIUS,
            length: DEFAULT_LENGTH,
            limits: CacheLimits::default(),
            expansions: HashMap::new(),
            nodes: HashMap::new(),
            raw: HashMap::new(),
        })
    }

    /// Each episode starts from an origin drawn uniformly from `origins`; the
    /// reward's similarity terms refer to that origin.
    pub fn with_origins(cfg: MdpConfig, reward: RewardFn, origins: Vec<Molecule>) -> Result<Self, ActionError> {
        if origins.is_empty() {
            return Err(ActionError::InvalidConfig("origin list is empty".into()));
        }
        let mut env = MolEnv::new(cfg, reward.clone())?;
        env.rewards = origins.iter().map(|m| reward.with_origin(m.clone())).collect();
        env.origins = origins.into_iter().map(Arc::new).collect();
        Ok(env)
    }

    pub fn with_fingerprint(mut self, radius: usize, length: usize) -> Self {
        assert!(length.is_power_of_two(), "fingerprint length must be a power of two");
        self.radius = radius;
        self.length = length;
        self.clear_caches();
        self
    }

    pub fn with_cache_limits(mut self, limits: CacheLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn config(&self) -> &MdpConfig {
        &self.cfg
    }

    pub fn reward_fn(&self, origin: u32) -> &RewardFn {
        &self.rewards[origin as usize]
    }

    pub fn origins(&self) -> &[Arc<Molecule>] {
        &self.origins
    }

    /// Network input width: fingerprint bits plus the steps-remaining entry.
    pub fn feature_dim(&self) -> usize {
        self.length + 1
    }

    pub fn clear_caches(&mut self) {
        self.expansions.clear();
        self.nodes.clear();
        self.raw.clear();
    }

    /// Builds a state, storing the molecule in canonical atom order so that
    /// cached edits (which name atoms by index) apply to every molecule with
    /// the same key.
    pub fn state_for(&self, molecule: Molecule, step: usize, origin: u32) -> MolState {
        let molecule = canonical_order(&molecule);
        MolState {
            key: canonical_key(&molecule),
            molecule: Arc::new(molecule),
            step,
            origin,
        }
    }

    pub fn start_state(&self, origin: u32) -> MolState {
        match self.origins.get(origin as usize) {
            Some(m) => self.state_for((**m).clone(), 0, origin),
            None => self.state_for(self.cfg.initial_molecule.clone(), 0, 0),
        }
    }

    fn node(&mut self, key: CanonicalKey, mol: &Molecule) -> Arc<Node> {
        if let Some(n) = self.nodes.get(&key) {
            return n.clone();
        }
        let bits: Arc<[u32]> = morgan_fingerprint(mol, self.radius, self.length).on_bits().into();
        let n = Arc::new(Node { key: key.clone(), bits });
        self.nodes.insert(key, n.clone());
        n
    }

    fn expansion(&mut self, state: &MolState) -> Result<Arc<[Successor]>, QError> {
        if let Some(e) = self.expansions.get(&state.key) {
            return Ok(e.clone());
        }
        if self.expansions.len() >= self.limits.expansions || self.nodes.len() >= self.limits.nodes {
            self.expansions.clear();
            self.nodes.clear();
        }
        let actions = valid_actions(&State::new((*state.molecule).clone(), 0), &self.cfg).map_err(env_err)?;
        let succ: Arc<[Successor]> = actions
            .into_iter()
            .map(|a| Successor {
                kind: a.kind,
                node: self.node(a.successor_key, &a.successor),
            })
            .collect();
        self.expansions.insert(state.key.clone(), succ.clone());
        Ok(succ)
    }

    fn raw_reward(&mut self, origin: u32, key: &CanonicalKey, mol: impl FnOnce() -> Molecule) -> Result<f64, RewardError> {
        if let Some(&r) = self.raw.get(&(origin, key.clone())) {
            return Ok(r);
        }
        if self.raw.len() >= self.limits.nodes {
            self.raw.clear();
        }
        let r = self.rewards[origin as usize].raw(&mol())?;
        self.raw.insert((origin, key.clone()), r);
        Ok(r)
    }

    fn check_live(&self, state: &MolState) -> Result<(), QError> {
        if state.step >= self.cfg.max_steps {
            return Err(env_err(ActionError::TerminalState {
                step: state.step,
                max_steps: self.cfg.max_steps,
            }));
        }
        Ok(())
    }

    /// Successor edits, keys and undiscounted rewards, in action order.
    pub fn successors(&mut self, state: &MolState) -> Result<Vec<SuccessorInfo>, QError> {
        self.check_live(state)?;
        let exp = self.expansion(state)?;
        exp.iter()
            .map(|s| {
                let raw = self
                    .raw_reward(state.origin, &s.node.key, || {
                        s.kind.realize(&state.molecule).expect("cached edit re-applies")
                    })
                    .map_err(env_err)?;
                Ok(SuccessorInfo {
                    kind: s.kind,
                    key: s.node.key.clone(),
                    raw_reward: raw,
                })
            })
            .collect()
    }

    /// Undiscounted reward of an arbitrary state's molecule.
    pub fn raw_reward_of(&mut self, state: &MolState) -> Result<f64, QError> {
        let key = state.key.clone();
        self.raw_reward(state.origin, &key, || (*state.molecule).clone())
            .map_err(env_err)
    }
}

impl Environment for MolEnv {
    type State = MolState;

    fn horizon(&self) -> usize {
        self.cfg.max_steps
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<MolState, QError> {
        let origin = match self.origins.len() {
            0 | 1 => 0,
            n => rng.gen_range(0..n) as u32,
        };
        Ok(self.start_state(origin))
    }

    fn candidates(&mut self, state: &MolState) -> Result<Vec<Candidate>, QError> {
        self.check_live(state)?;
        let exp = self.expansion(state)?;
        let next = state.step + 1;
        let t = self.cfg.max_steps;
        let discount = self.rewards[state.origin as usize].discount(next, t);
        let remaining = steps_remaining_fraction(next, t);
        let mut out = Vec::with_capacity(exp.len());
        for s in exp.iter() {
            let reward = if discount == 0.0 {
                0.0
            } else {
                let raw = self
                    .raw_reward(state.origin, &s.node.key, || {
                        s.kind.realize(&state.molecule).expect("cached edit re-applies")
                    })
                    .map_err(env_err)?;
                raw * discount
            };
            out.push(Candidate {
                features: Features::new(s.node.bits.clone(), [(self.length as u32, remaining)]),
                reward,
                terminal: next == t,
            });
        }
        Ok(out)
    }

    fn step(&mut self, state: &MolState, index: usize) -> Result<MolState, QError> {
        self.check_live(state)?;
        let exp = self.expansion(state)?;
        let s = exp.get(index).ok_or_else(|| env_err(ActionError::ForeignAction))?;
        let molecule = canonical_order(&s.kind.realize(&state.molecule).map_err(env_err)?);
        Ok(MolState {
            molecule: Arc::new(molecule),
            key: s.node.key.clone(),
            step: state.step + 1,
            origin: state.origin,
        })
    }
}
