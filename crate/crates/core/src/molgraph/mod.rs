//! Molecular graphs with valence bookkeeping, ring perception, canonical
//! identity and a restricted Kekulé SMILES reader/writer.

mod canon;
mod element;
mod molecule;
mod rings;
mod smiles;

use thiserror::Error;

pub use canon::{canonical_key, canonical_labels, write_smiles, CanonicalKey};
pub use element::{Element, ValenceTable};
pub use molecule::{Molecule, Neighbor};
pub use rings::RingInfo;
pub use smiles::{parse_smiles, parse_smiles_with, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MolError {
    #[error("atom index {index} out of range for {len} atoms")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("bond from atom {0} to itself")]
    SelfBond(usize),
    #[error("valence violation on atom {atom}: {used} > {max}")]
    ValenceViolation { atom: usize, used: u8, max: u8 },
    #[error("invalid bond order {0}")]
    InvalidBondOrder(u8),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("no bond between atoms {0} and {1}")]
    NoSuchBond(usize, usize),
    #[error("edit would leave disconnected fragments")]
    Disconnected,
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("invalid max valence {value} for {element}")]
    InvalidValence { element: Element, value: u8 },
}
