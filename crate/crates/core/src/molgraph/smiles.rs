//! Restricted SMILES reader.
//!
//! Grammar: organic-subset atoms `C N O F P S Cl Br I`, bonds `- = #`,
//! branches `( ... )`, ring closures `1`-`9` and `%nn`. Structures must be
//! written in Kekulé form; aromatic atoms, bracket atoms, charges, isotopes,
//! stereo marks and dot-separated fragments are rejected.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Element, Molecule, ValenceTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SMILES parse error at position {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        ParseError {
            position,
            message: message.into(),
        }
    }
}

pub fn parse_smiles(text: &str) -> Result<Molecule, ParseError> {
    parse_smiles_with(text.as_bytes(), ValenceTable::default())
}

/// Parses raw bytes with a custom valence table. Never panics.
pub fn parse_smiles_with(input: &[u8], valences: ValenceTable) -> Result<Molecule, ParseError> {
    Parser {
        input,
        pos: 0,
        mol: Molecule::with_valences(valences),
        atom_pos: Vec::new(),
    }
    .parse()
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    mol: Molecule,
    atom_pos: Vec<usize>,
}

impl Parser<'_> {
    fn parse(mut self) -> Result<Molecule, ParseError> {
        let mut prev: Option<usize> = None;
        let mut pending_bond: Option<(u8, usize)> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();
        let mut rings: BTreeMap<u8, (usize, Option<u8>, usize)> = BTreeMap::new();

        while self.pos < self.input.len() {
            let start = self.pos;
            let c = self.input[self.pos];
            match c {
                b'C' | b'N' | b'O' | b'F' | b'P' | b'S' | b'I' | b'B' => {
                    let element = self.atom_symbol()?;
                    let idx = self.mol.push_atom_raw(element);
                    self.atom_pos.push(start);
                    if let Some(p) = prev {
                        let order = pending_bond.take().map_or(1, |(o, _)| o);
                        self.mol.put_bond(p, idx, order);
                    } else if idx != 0 {
                        return Err(ParseError::new(start, "atom without connection"));
                    }
                    prev = Some(idx);
                }
                b'-' | b'=' | b'#' => {
                    if prev.is_none() {
                        return Err(ParseError::new(start, "bond without a preceding atom"));
                    }
                    if pending_bond.is_some() {
                        return Err(ParseError::new(start, "consecutive bond symbols"));
                    }
                    let order = match c {
                        b'-' => 1,
                        b'=' => 2,
                        _ => 3,
                    };
                    pending_bond = Some((order, start));
                    self.pos += 1;
                }
                b'(' => {
                    let Some(p) = prev else {
                        return Err(ParseError::new(start, "branch without a preceding atom"));
                    };
                    if pending_bond.is_some() {
                        return Err(ParseError::new(start, "bond symbol before branch"));
                    }
                    branches.push((p, start));
                    self.pos += 1;
                    if self.input.get(self.pos) == Some(&b')') {
                        return Err(ParseError::new(start, "empty branch"));
                    }
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return Err(ParseError::new(start, "unbalanced ')'"));
                    };
                    if let Some((_, at)) = pending_bond {
                        return Err(ParseError::new(at, "dangling bond"));
                    }
                    prev = Some(p);
                    self.pos += 1;
                }
                b'1'..=b'9' | b'%' => {
                    let number = self.ring_number()?;
                    let Some(p) = prev else {
                        return Err(ParseError::new(start, "ring closure without a preceding atom"));
                    };
                    let bond = pending_bond.take().map(|(o, _)| o);
                    match rings.remove(&number) {
                        None => {
                            rings.insert(number, (p, bond, start));
                        }
                        Some((partner, open_bond, _)) => {
                            let order = match (open_bond, bond) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(ParseError::new(start, "conflicting ring-closure bond orders"));
                                }
                                (a, b) => a.or(b).unwrap_or(1),
                            };
                            if partner == p {
                                return Err(ParseError::new(start, "ring closure onto the same atom"));
                            }
                            if self.mol.bond_order(partner, p) != 0 {
                                return Err(ParseError::new(start, "duplicate bond from ring closure"));
                            }
                            self.mol.put_bond(partner, p, order);
                        }
                    }
                }
                b'0' => return Err(ParseError::new(start, "ring closure 0 unsupported")),
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                    return Err(ParseError::new(start, "aromatic atoms unsupported; supply Kekulé form"));
                }
                b'[' => {
                    return Err(ParseError::new(
                        start,
                        "bracket atoms unsupported (charges, isotopes, explicit hydrogens)",
                    ));
                }
                b'/' | b'\\' | b'@' => return Err(ParseError::new(start, "stereo markers unsupported")),
                b'.' => return Err(ParseError::new(start, "disconnected fragments unsupported")),
                b':' => return Err(ParseError::new(start, "aromatic bonds unsupported")),
                b'$' => return Err(ParseError::new(start, "quadruple bonds unsupported")),
                b'+' => return Err(ParseError::new(start, "charges unsupported")),
                _ => return Err(ParseError::new(start, format!("unexpected character 0x{c:02x}"))),
            }
        }

        if let Some((_, at)) = pending_bond {
            return Err(ParseError::new(at, "dangling bond"));
        }
        if let Some((_, at)) = branches.pop() {
            return Err(ParseError::new(at, "unclosed branch"));
        }
        if let Some((number, (_, _, at))) = rings.into_iter().next() {
            return Err(ParseError::new(at, format!("unclosed ring {number}")));
        }
        for a in 0..self.mol.atom_count() {
            let used = self.mol.bond_order_sum(a);
            let max = self.mol.max_valence(a);
            if used > max {
                return Err(ParseError::new(
                    self.atom_pos[a],
                    format!("valence violation on {}: {used} > {max}", self.mol.element(a)),
                ));
            }
        }
        Ok(self.mol)
    }

    fn atom_symbol(&mut self) -> Result<Element, ParseError> {
        let start = self.pos;
        let c = self.input[start];
        let next = self.input.get(start + 1).copied();
        let (element, width) = match (c, next) {
            (b'C', Some(b'l')) => (Element::Cl, 2),
            (b'B', Some(b'r')) => (Element::Br, 2),
            (b'B', _) => return Err(ParseError::new(start, "boron unsupported")),
            (b'C', _) => (Element::C, 1),
            (b'N', _) => (Element::N, 1),
            (b'O', _) => (Element::O, 1),
            (b'F', _) => (Element::F, 1),
            (b'P', _) => (Element::P, 1),
            (b'S', _) => (Element::S, 1),
            (b'I', _) => (Element::I, 1),
            _ => return Err(ParseError::new(start, "unknown atom")),
        };
        self.pos += width;
        Ok(element)
    }

    fn ring_number(&mut self) -> Result<u8, ParseError> {
        let start = self.pos;
        if self.input[start] == b'%' {
            let digits = self.input.get(start + 1..start + 3);
            match digits {
                Some([a, b]) if a.is_ascii_digit() && b.is_ascii_digit() => {
                    self.pos += 3;
                    Ok((a - b'0') * 10 + (b - b'0'))
                }
                _ => Err(ParseError::new(start, "expected two digits after '%'")),
            }
        } else {
            self.pos += 1;
            Ok(self.input[start] - b'0')
        }
    }
}
