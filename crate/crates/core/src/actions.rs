//! Legal edit enumeration and deterministic transitions.
//!
//! Three edit families are supported (atom addition, bond addition, bond
//! removal) plus "no modification". Actions are deduplicated by the
//! canonical key of their successor, so symmetric sites collapse into one
//! action.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::molgraph::{canonical_key, CanonicalKey, Element, MolError, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("state at step {step} is terminal (max {max_steps})")]
    TerminalState { step: usize, max_steps: usize },
    #[error("action was not generated for this molecule")]
    ForeignAction,
    #[error("invalid MDP configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Molecule(#[from] MolError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpConfig {
    pub elements: Vec<Element>,
    pub max_steps: usize,
    pub allowed_ring_sizes: BTreeSet<usize>,
    pub allow_bond_removal: bool,
    pub allow_no_modification: bool,
    pub initial_molecule: Molecule,
}

impl Default for MdpConfig {
    fn default() -> Self {
        MdpConfig {
            elements: vec![Element::C, Element::N, Element::O],
            max_steps: 40,
            allowed_ring_sizes: (3..=6).collect(),
            allow_bond_removal: true,
            allow_no_modification: true,
            initial_molecule: Molecule::new(),
        }
    }
}

impl MdpConfig {
    pub fn with_elements(elements: &[Element]) -> Self {
        MdpConfig {
            elements: elements.to_vec(),
            ..MdpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ActionError> {
        if self.max_steps == 0 {
            return Err(ActionError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.elements.is_empty() {
            return Err(ActionError::InvalidConfig("element set is empty".into()));
        }
        if self.elements.contains(&Element::H) {
            return Err(ActionError::InvalidConfig(
                "hydrogen is implicit and cannot be an edit element".into(),
            ));
        }
        if let Some(bad) = self.allowed_ring_sizes.iter().find(|s| !(3..=8).contains(*s)) {
            return Err(ActionError::InvalidConfig(format!("ring size {bad} outside 3..=8")));
        }
        self.initial_molecule.check_invariants()?;
        Ok(())
    }

    pub fn initial_state(&self) -> State {
        State {
            molecule: self.initial_molecule.clone(),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub molecule: Molecule,
    pub step: usize,
}

impl State {
    pub fn new(molecule: Molecule, step: usize) -> Self {
        State { molecule, step }
    }

    pub fn is_terminal(&self, cfg: &MdpConfig) -> bool {
        self.step >= cfg.max_steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    /// Adds `element`; `anchor` is `None` only on the empty molecule.
    AtomAddition {
        element: Element,
        anchor: Option<usize>,
        order: u8,
    },
    /// Changes the `a`–`b` bond order. A full removal that isolates an atom
    /// names it in `dropped`; that atom is deleted from the successor.
    BondChange {
        a: usize,
        b: usize,
        old: u8,
        new: u8,
        dropped: Option<usize>,
    },
    NoModification,
}

impl ActionKind {
    /// Re-applies this edit to `mol`.
    pub fn realize(&self, mol: &Molecule) -> Result<Molecule, MolError> {
        match *self {
            ActionKind::AtomAddition { element, anchor: None, .. } => mol.with_lone_atom(element),
            ActionKind::AtomAddition {
                element,
                anchor: Some(anchor),
                order,
            } => mol.with_atom_bonded(element, anchor, order),
            ActionKind::BondChange { a, b, new: 0, dropped, .. } => mol.remove_bond_dropping(a, b, dropped),
            ActionKind::BondChange { a, b, new, .. } => mol.set_bond(a, b, new),
            ActionKind::NoModification => Ok(mol.clone()),
        }
    }

    pub fn is_bond_addition(&self) -> bool {
        matches!(self, ActionKind::BondChange { old, new, .. } if new > old)
    }

    pub fn is_bond_removal(&self) -> bool {
        matches!(self, ActionKind::BondChange { old, new, .. } if new < old)
    }
}

#[derive(Debug, Clone)]
pub struct Action {
    pub kind: ActionKind,
    pub successor: Molecule,
    pub successor_key: CanonicalKey,
    source_key: CanonicalKey,
}

impl Action {
    pub fn source_key(&self) -> &CanonicalKey {
        &self.source_key
    }
}

/// Collects actions, keeping the first one seen per successor key.
struct Collector {
    source_key: CanonicalKey,
    seen: HashSet<CanonicalKey>,
    actions: Vec<Action>,
}

impl Collector {
    fn new(mol: &Molecule) -> Self {
        Collector {
            source_key: canonical_key(mol),
            seen: HashSet::new(),
            actions: Vec::new(),
        }
    }

    fn push(&mut self, kind: ActionKind, successor: Molecule) {
        let key = canonical_key(&successor);
        if self.seen.insert(key.clone()) {
            self.actions.push(Action {
                kind,
                successor,
                successor_key: key,
                source_key: self.source_key.clone(),
            });
        }
    }
}

pub fn enumerate_atom_additions(mol: &Molecule, cfg: &MdpConfig) -> Vec<Action> {
    let mut c = Collector::new(mol);
    atom_additions(mol, cfg, &mut c);
    c.actions
}

pub fn enumerate_bond_additions(mol: &Molecule, cfg: &MdpConfig) -> Vec<Action> {
    let mut c = Collector::new(mol);
    bond_additions(mol, cfg, &mut c);
    c.actions
}

pub fn enumerate_bond_removals(mol: &Molecule, _cfg: &MdpConfig) -> Vec<Action> {
    let mut c = Collector::new(mol);
    bond_removals(mol, &mut c);
    c.actions
}

fn atom_additions(mol: &Molecule, cfg: &MdpConfig, c: &mut Collector) {
    if mol.is_empty() {
        for &element in &cfg.elements {
            if let Ok(next) = mol.with_lone_atom(element) {
                c.push(
                    ActionKind::AtomAddition {
                        element,
                        anchor: None,
                        order: 0,
                    },
                    next,
                );
            }
        }
        return;
    }
    for &element in &cfg.elements {
        let max_new = mol.valences().get(element);
        for anchor in 0..mol.atom_count() {
            let free = mol.free_valence_of(anchor);
            for order in 1..=free.min(max_new).min(3) {
                let next = mol
                    .with_atom_bonded(element, anchor, order)
                    .expect("valence checked");
                c.push(
                    ActionKind::AtomAddition {
                        element,
                        anchor: Some(anchor),
                        order,
                    },
                    next,
                );
            }
        }
    }
}

fn bond_additions(mol: &Molecule, cfg: &MdpConfig, c: &mut Collector) {
    let n = mol.atom_count();
    if n < 2 {
        return;
    }
    let in_ring = mol.atoms_in_ring();
    let free: Vec<u8> = (0..n).map(|a| mol.free_valence_of(a)).collect();
    let max_ring = cfg.allowed_ring_sizes.iter().copied().max().unwrap_or(0);
    for a in 0..n {
        if free[a] == 0 {
            continue;
        }
        let dist = mol.distances_from(a);
        for b in a + 1..n {
            if free[b] == 0 {
                continue;
            }
            let old = mol.bond_order(a, b);
            if old == 0 {
                if in_ring[a] && in_ring[b] {
                    continue;
                }
                // the smallest ring a new bond closes is the shortest path plus one
                let ring = dist[b].saturating_add(1);
                if ring > max_ring || !cfg.allowed_ring_sizes.contains(&ring) {
                    continue;
                }
            }
            let room = free[a].min(free[b]);
            for new in old + 1..=3 {
                if new - old > room {
                    break;
                }
                let next = mol.set_bond(a, b, new).expect("valence checked");
                c.push(
                    ActionKind::BondChange {
                        a,
                        b,
                        old,
                        new,
                        dropped: None,
                    },
                    next,
                );
            }
        }
    }
}

fn bond_removals(mol: &Molecule, c: &mut Collector) {
    for (a, b, old) in mol.bonds() {
        for new in (1..old).rev() {
            let next = mol.set_bond(a, b, new).expect("lowering never violates valence");
            c.push(
                ActionKind::BondChange {
                    a,
                    b,
                    old,
                    new,
                    dropped: None,
                },
                next,
            );
        }
        if let Ok(outcomes) = mol.remove_bond(a, b) {
            for (dropped, next) in outcomes {
                c.push(
                    ActionKind::BondChange {
                        a,
                        b,
                        old,
                        new: 0,
                        dropped,
                    },
                    next,
                );
            }
        }
    }
}

/// All legal actions of a non-terminal state, sorted by successor key.
pub fn valid_actions(state: &State, cfg: &MdpConfig) -> Result<Vec<Action>, ActionError> {
    if state.is_terminal(cfg) {
        return Err(ActionError::TerminalState {
            step: state.step,
            max_steps: cfg.max_steps,
        });
    }
    let mol = &state.molecule;
    let mut c = Collector::new(mol);
    if cfg.allow_no_modification {
        c.push(ActionKind::NoModification, mol.clone());
    }
    atom_additions(mol, cfg, &mut c);
    bond_additions(mol, cfg, &mut c);
    if cfg.allow_bond_removal {
        bond_removals(mol, &mut c);
    }
    let mut actions = c.actions;
    actions.sort_by(|x, y| x.successor_key.cmp(&y.successor_key));
    Ok(actions)
}

/// Deterministic transition `(m, t) -> (successor, t + 1)`.
pub fn apply(state: &State, action: &Action, cfg: &MdpConfig) -> Result<State, ActionError> {
    if state.is_terminal(cfg) {
        return Err(ActionError::TerminalState {
            step: state.step,
            max_steps: cfg.max_steps,
        });
    }
    if canonical_key(&state.molecule) != action.source_key {
        return Err(ActionError::ForeignAction);
    }
    Ok(State {
        molecule: action.successor.clone(),
        step: state.step + 1,
    })
}
