use std::fmt;
use std::str::FromStr;

use super::MolError;

/// Elements supported by the editing alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    H,
    C,
    N,
    O,
    F,
    P,
    S,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::H,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    /// Default maximum valence (sum of bond orders including implicit hydrogens).
    pub fn default_max_valence(self) -> u8 {
        match self {
            Element::C => 4,
            Element::N | Element::P => 3,
            Element::O | Element::S => 2,
            Element::H | Element::F | Element::Cl | Element::Br | Element::I => 1,
        }
    }

    /// Standard atomic weight in daltons.
    pub fn atomic_weight(self) -> f64 {
        match self {
            Element::H => 1.008,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::P => 30.974,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::Br => 79.904,
            Element::I => 126.904,
        }
    }

    pub fn is_hetero(self) -> bool {
        !matches!(self, Element::C | Element::H)
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == symbol)
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = MolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::from_symbol(s.trim()).ok_or_else(|| MolError::UnknownElement(s.to_string()))
    }
}

/// Per-element maximum valence, overridable for multi-valent S/P.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValenceTable([u8; 10]);

impl Default for ValenceTable {
    fn default() -> Self {
        let mut table = [0u8; 10];
        for e in Element::ALL {
            table[e.index()] = e.default_max_valence();
        }
        ValenceTable(table)
    }
}

impl ValenceTable {
    pub fn get(&self, element: Element) -> u8 {
        self.0[element.index()]
    }

    pub fn with_override(mut self, element: Element, max_valence: u8) -> Result<Self, MolError> {
        if max_valence == 0 || max_valence > 8 {
            return Err(MolError::InvalidValence {
                element,
                value: max_valence,
            });
        }
        self.0[element.index()] = max_valence;
        Ok(self)
    }
}
