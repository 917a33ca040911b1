//! Property calculators used as reward ingredients.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::molgraph::{Element, Molecule};

const BUNDLED_LOGP: &str = include_str!("../data/logp_contrib.txt");
const HYDROGEN_WEIGHT: f64 = 1.008;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error("no logP contribution for {element} (in_ring={in_ring}, hetero={hetero}, max_order={max_order})")]
    UncoveredAtomType {
        element: Element,
        in_ring: bool,
        hetero: u8,
        max_order: u8,
    },
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
    #[error("logP table line {line}: {message}")]
    Table { line: usize, message: String },
}

pub fn molecular_weight(mol: &Molecule) -> f64 {
    let heavy: f64 = mol.atoms().iter().map(|e| e.atomic_weight()).sum();
    heavy + HYDROGEN_WEIGHT * mol.total_implicit_hydrogens() as f64
}

pub fn heavy_atom_count(mol: &Molecule) -> usize {
    mol.atom_count()
}

/// Rings larger than six atoms in the smallest set of smallest rings.
pub fn long_cycle_count(mol: &Molecule) -> usize {
    mol.ring_info().ring_sizes.iter().filter(|&&s| s > 6).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Rule {
    element: Element,
    in_ring: Option<bool>,
    hetero: Option<u8>,
    max_order: Option<u8>,
    value: f64,
}

impl Rule {
    fn matches(&self, element: Element, in_ring: bool, hetero: u8, max_order: u8) -> bool {
        self.element == element
            && self.in_ring.is_none_or(|r| r == in_ring)
            && self.hetero.is_none_or(|h| h == hetero)
            && self.max_order.is_none_or(|o| o == max_order)
    }

    fn is_fallback(&self) -> bool {
        self.in_ring.is_none() && self.hetero.is_none() && self.max_order.is_none()
    }
}

/// Atom-type contribution table; see `data/logp_contrib.txt` for the format.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPTable {
    rules: Vec<Rule>,
}

impl Default for LogPTable {
    fn default() -> Self {
        LogPTable::bundled().clone()
    }
}

impl LogPTable {
    pub fn bundled() -> &'static LogPTable {
        static TABLE: OnceLock<LogPTable> = OnceLock::new();
        TABLE.get_or_init(|| LogPTable::parse(BUNDLED_LOGP).expect("bundled logP table is well formed"))
    }

    pub fn parse(text: &str) -> Result<LogPTable, PropertyError> {
        let mut rules = Vec::new();
        let mut saw_version = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| PropertyError::Table { line: line_no, message };
            if !saw_version {
                match line.strip_prefix("version=") {
                    Some("1") => {
                        saw_version = true;
                        continue;
                    }
                    Some(v) => return Err(err(format!("unsupported version {v}"))),
                    None => return Err(err("missing version=1 header".into())),
                }
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", fields.len())));
            }
            let element = Element::from_symbol(fields[0]).ok_or_else(|| err(format!("unknown element {}", fields[0])))?;
            let in_ring = match fields[1] {
                "*" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => return Err(err(format!("in_ring must be 0, 1 or *, found {other}"))),
            };
            let small = |s: &str, max: u8, name: &str| -> Result<Option<u8>, PropertyError> {
                if s == "*" {
                    return Ok(None);
                }
                match s.parse::<u8>() {
                    Ok(v) if v <= max => Ok(Some(v)),
                    _ => Err(err(format!("{name} must be 0..={max} or *, found {s}"))),
                }
            };
            let hetero = small(fields[2], 2, "hetero_bucket")?;
            let max_order = small(fields[3], 3, "max_bond_order")?;
            let value: f64 = fields[4]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(format!("bad contribution {}", fields[4])))?;
            rules.push(Rule {
                element,
                in_ring,
                hetero,
                max_order,
                value,
            });
        }
        if !saw_version {
            return Err(PropertyError::Table {
                line: 0,
                message: "missing version=1 header".into(),
            });
        }
        Ok(LogPTable { rules })
    }

    /// Elements lacking an all-wildcard fallback row.
    pub fn missing_fallbacks(&self) -> Vec<Element> {
        Element::ALL
            .iter()
            .copied()
            .filter(|&e| !self.rules.iter().any(|r| r.element == e && r.is_fallback()))
            .collect()
    }

    pub fn lookup(&self, element: Element, in_ring: bool, hetero: u8, max_order: u8) -> Result<f64, PropertyError> {
        self.rules
            .iter()
            .find(|r| r.matches(element, in_ring, hetero, max_order))
            .map(|r| r.value)
            .ok_or(PropertyError::UncoveredAtomType {
                element,
                in_ring,
                hetero,
                max_order,
            })
    }
}

pub fn logp(mol: &Molecule, table: &LogPTable) -> Result<f64, PropertyError> {
    let in_ring = mol.atoms_in_ring();
    let mut total = 0.0;
    for a in 0..mol.atom_count() {
        let element = mol.element(a);
        let neighbors = mol.neighbors(a);
        let hetero = neighbors
            .iter()
            .filter(|nb| mol.element(nb.atom).is_hetero())
            .count()
            .min(2) as u8;
        let max_order = neighbors.iter().map(|nb| nb.order).max().unwrap_or(0);
        total += table.lookup(element, in_ring[a], hetero, max_order)?;
        let h = mol.implicit_hydrogens(a);
        if h > 0 {
            let parent_hetero = element.is_hetero() as u8;
            total += h as f64 * table.lookup(Element::H, in_ring[a], parent_hetero, max_order)?;
        }
    }
    Ok(total)
}

/// Stand-in for a synthetic accessibility score. Neither variant is the
/// published SA score; `Zero` drops the term entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaProxy {
    #[default]
    Zero,
    /// 0.1 per ring plus 0.5 per ring larger than six atoms.
    RingProxy,
}

impl SaProxy {
    pub fn value(&self, mol: &Molecule) -> f64 {
        match self {
            SaProxy::Zero => 0.0,
            SaProxy::RingProxy => {
                let rings = mol.ring_info().ring_sizes;
                0.1 * rings.len() as f64 + 0.5 * rings.iter().filter(|&&s| s > 6).count() as f64
            }
        }
    }
}

impl FromStr for SaProxy {
    type Err = PropertyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(SaProxy::Zero),
            "ring" => Ok(SaProxy::RingProxy),
            other => Err(PropertyError::UnknownProperty(format!("sa proxy {other}"))),
        }
    }
}

pub fn penalized_logp(mol: &Molecule, table: &LogPTable, sa: SaProxy) -> Result<f64, PropertyError> {
    Ok(logp(mol, table)? - sa.value(mol) - long_cycle_count(mol) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PropertyKind {
    MolecularWeight,
    LogP,
    PenalizedLogP,
    HeavyAtomCount,
    Custom(String),
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyKind::MolecularWeight => f.write_str("mw"),
            PropertyKind::LogP => f.write_str("logp"),
            PropertyKind::PenalizedLogP => f.write_str("penalized_logp"),
            PropertyKind::HeavyAtomCount => f.write_str("heavy_atoms"),
            PropertyKind::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for PropertyKind {
    type Err = PropertyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mw" | "molecular_weight" => Ok(PropertyKind::MolecularWeight),
            "logp" => Ok(PropertyKind::LogP),
            "penalized_logp" | "plogp" => Ok(PropertyKind::PenalizedLogP),
            "heavy_atoms" | "heavy_atom_count" => Ok(PropertyKind::HeavyAtomCount),
            _ => match s.strip_prefix("custom:") {
                Some(name) if !name.is_empty() => Ok(PropertyKind::Custom(name.to_string())),
                _ => Err(PropertyError::UnknownProperty(s.to_string())),
            },
        }
    }
}

pub type PropertyFn = Arc<dyn Fn(&Molecule) -> f64 + Send + Sync>;

/// Dispatches [`PropertyKind`]s; custom calculators are registered up front.
#[derive(Clone, Default)]
pub struct Properties {
    pub logp_table: Arc<LogPTable>,
    pub sa_proxy: SaProxy,
    custom: HashMap<String, PropertyFn>,
}

impl fmt::Debug for Properties {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.custom.keys().collect();
        names.sort();
        f.debug_struct("Properties")
            .field("sa_proxy", &self.sa_proxy)
            .field("custom", &names)
            .finish()
    }
}

impl Properties {
    pub fn new(logp_table: LogPTable, sa_proxy: SaProxy) -> Self {
        Properties {
            logp_table: Arc::new(logp_table),
            sa_proxy,
            custom: HashMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, f: impl Fn(&Molecule) -> f64 + Send + Sync + 'static) {
        self.custom.insert(name.to_string(), Arc::new(f));
    }

    pub fn evaluate(&self, kind: &PropertyKind, mol: &Molecule) -> Result<f64, PropertyError> {
        match kind {
            PropertyKind::MolecularWeight => Ok(molecular_weight(mol)),
            PropertyKind::LogP => logp(mol, &self.logp_table),
            PropertyKind::PenalizedLogP => penalized_logp(mol, &self.logp_table, self.sa_proxy),
            PropertyKind::HeavyAtomCount => Ok(heavy_atom_count(mol) as f64),
            PropertyKind::Custom(name) => self
                .custom
                .get(name)
                .map(|f| f(mol))
                .ok_or_else(|| PropertyError::UnknownProperty(name.clone())),
        }
    }
}
