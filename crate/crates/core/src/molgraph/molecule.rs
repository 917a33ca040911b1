use std::collections::VecDeque;

use smallvec::SmallVec;

use super::{Element, MolError, ValenceTable};

/// One entry of an atom's adjacency list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Neighbor {
    pub atom: usize,
    pub order: u8,
}

pub(crate) type NeighborList = SmallVec<[Neighbor; 4]>;

/// Undirected multigraph of heavy atoms; hydrogens are implicit.
///
/// Every mutation returns a new value. Mutations keep three invariants:
/// no self bonds, valence sums within the table maximum, and a single
/// connected component for non-empty molecules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    atoms: Vec<Element>,
    adjacency: Vec<NeighborList>,
    valences: ValenceTable,
}

impl Default for Molecule {
    fn default() -> Self {
        Molecule::new()
    }
}

impl Molecule {
    /// The empty molecule (no atoms, no bonds).
    pub fn new() -> Self {
        Molecule::with_valences(ValenceTable::default())
    }

    pub fn with_valences(valences: ValenceTable) -> Self {
        Molecule {
            atoms: Vec::new(),
            adjacency: Vec::new(),
            valences,
        }
    }

    /// Build a molecule from an atom list and `(a, b, order)` bond triples,
    /// validating every invariant.
    pub fn from_parts(
        atoms: &[Element],
        bonds: &[(usize, usize, u8)],
        valences: ValenceTable,
    ) -> Result<Self, MolError> {
        let mut mol = Molecule {
            atoms: atoms.to_vec(),
            adjacency: vec![NeighborList::new(); atoms.len()],
            valences,
        };
        for &(a, b, order) in bonds {
            mol.check_index(a)?;
            mol.check_index(b)?;
            if a == b {
                return Err(MolError::SelfBond(a));
            }
            if !(1..=3).contains(&order) {
                return Err(MolError::InvalidBondOrder(order));
            }
            if mol.bond_order(a, b) != 0 {
                return Err(MolError::DuplicateBond(a.min(b), a.max(b)));
            }
            mol.put_bond(a, b, order);
        }
        mol.check_invariants()?;
        Ok(mol)
    }

    pub fn valences(&self) -> ValenceTable {
        self.valences
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn bond_count(&self) -> usize {
        self.adjacency.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn atoms(&self) -> &[Element] {
        &self.atoms
    }

    pub fn element(&self, atom: usize) -> Element {
        self.atoms[atom]
    }

    pub fn neighbors(&self, atom: usize) -> &[Neighbor] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    /// Order of the bond between `a` and `b`, 0 when unbonded.
    pub fn bond_order(&self, a: usize, b: usize) -> u8 {
        self.adjacency[a]
            .iter()
            .find(|n| n.atom == b)
            .map_or(0, |n| n.order)
    }

    /// Bonds as `(a, b, order)` with `a < b`, sorted.
    pub fn bonds(&self) -> Vec<(usize, usize, u8)> {
        let mut out = Vec::with_capacity(self.bond_count());
        for (a, list) in self.adjacency.iter().enumerate() {
            for n in list {
                if a < n.atom {
                    out.push((a, n.atom, n.order));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn bond_order_sum(&self, atom: usize) -> u8 {
        self.adjacency[atom].iter().map(|n| n.order).sum()
    }

    pub fn max_valence(&self, atom: usize) -> u8 {
        self.valences.get(self.atoms[atom])
    }

    /// Unused valence of `atom`, which equals its implicit hydrogen count.
    pub fn free_valence(&self, atom: usize) -> Result<u8, MolError> {
        self.check_index(atom)?;
        Ok(self.free_valence_of(atom))
    }

    pub(crate) fn free_valence_of(&self, atom: usize) -> u8 {
        self.max_valence(atom).saturating_sub(self.bond_order_sum(atom))
    }

    pub fn implicit_hydrogens(&self, atom: usize) -> u8 {
        self.free_valence_of(atom)
    }

    pub fn total_implicit_hydrogens(&self) -> usize {
        (0..self.atom_count())
            .map(|a| self.free_valence_of(a) as usize)
            .sum()
    }

    /// Adds a lone atom; only legal on the empty molecule.
    pub fn with_lone_atom(&self, element: Element) -> Result<Molecule, MolError> {
        if !self.is_empty() {
            return Err(MolError::Disconnected);
        }
        let mut mol = self.clone();
        mol.atoms.push(element);
        mol.adjacency.push(NeighborList::new());
        Ok(mol)
    }

    /// Adds `element` bonded to `anchor` by a bond of `order`, replacing
    /// implicit hydrogens on both atoms.
    pub fn with_atom_bonded(
        &self,
        element: Element,
        anchor: usize,
        order: u8,
    ) -> Result<Molecule, MolError> {
        self.check_index(anchor)?;
        if !(1..=3).contains(&order) {
            return Err(MolError::InvalidBondOrder(order));
        }
        if self.free_valence_of(anchor) < order {
            return Err(MolError::ValenceViolation {
                atom: anchor,
                used: self.bond_order_sum(anchor) + order,
                max: self.max_valence(anchor),
            });
        }
        let max_new = self.valences.get(element);
        if max_new < order {
            return Err(MolError::ValenceViolation {
                atom: self.atom_count(),
                used: order,
                max: max_new,
            });
        }
        let mut mol = self.clone();
        let idx = mol.atoms.len();
        mol.atoms.push(element);
        mol.adjacency.push(NeighborList::new());
        mol.put_bond(anchor, idx, order);
        mol.debug_check();
        Ok(mol)
    }

    /// Replaces the order of the `a`–`b` bond. Order 0 deletes the bond,
    /// which fails with `Disconnected` if the molecule would fall apart.
    pub fn set_bond(&self, a: usize, b: usize, order: u8) -> Result<Molecule, MolError> {
        self.check_index(a)?;
        self.check_index(b)?;
        if a == b {
            return Err(MolError::SelfBond(a));
        }
        if order > 3 {
            return Err(MolError::InvalidBondOrder(order));
        }
        let old = self.bond_order(a, b);
        for atom in [a, b] {
            let used = self.bond_order_sum(atom) - old + order;
            if used > self.max_valence(atom) {
                return Err(MolError::ValenceViolation {
                    atom,
                    used,
                    max: self.max_valence(atom),
                });
            }
        }
        let mut mol = self.clone();
        mol.remove_bond_raw(a, b);
        if order > 0 {
            mol.put_bond(a, b, order);
        } else if old > 0 && !mol.is_connected() {
            return Err(MolError::Disconnected);
        }
        mol.debug_check();
        Ok(mol)
    }

    /// Outcomes of deleting the `a`–`b` bond entirely.
    ///
    /// Returns `(dropped_atom, molecule)` pairs: one pair with `None` when the
    /// molecule stays connected, one pair when a single atom is cut off (that
    /// atom is deleted), and two pairs when both endpoints end up isolated.
    /// Larger fragments are rejected with `Disconnected`.
    pub fn remove_bond(&self, a: usize, b: usize) -> Result<Vec<(Option<usize>, Molecule)>, MolError> {
        self.check_index(a)?;
        self.check_index(b)?;
        if self.bond_order(a, b) == 0 {
            return Err(MolError::NoSuchBond(a, b));
        }
        let mut cut = self.clone();
        cut.remove_bond_raw(a, b);
        let side_a = cut.component_size(a);
        if side_a == cut.atom_count() {
            cut.debug_check();
            return Ok(vec![(None, cut)]);
        }
        let side_b = cut.atom_count() - side_a;
        let mut out = Vec::new();
        if side_a == 1 {
            out.push((Some(a), cut.without_atom(a)));
        }
        if side_b == 1 {
            out.push((Some(b), cut.without_atom(b)));
        }
        if out.is_empty() {
            return Err(MolError::Disconnected);
        }
        Ok(out)
    }

    /// Deletes the `a`–`b` bond and the named isolated atom, as produced by
    /// [`Molecule::remove_bond`].
    pub fn remove_bond_dropping(
        &self,
        a: usize,
        b: usize,
        dropped: Option<usize>,
    ) -> Result<Molecule, MolError> {
        self.remove_bond(a, b)?
            .into_iter()
            .find(|(d, _)| *d == dropped)
            .map(|(_, m)| m)
            .ok_or(MolError::Disconnected)
    }

    /// Relabels atoms so old atom `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Molecule, MolError> {
        let n = self.atom_count();
        let mut seen = vec![false; n];
        if perm.len() != n {
            return Err(MolError::IndexOutOfRange { index: perm.len(), len: n });
        }
        for &p in perm {
            if p >= n || seen[p] {
                return Err(MolError::IndexOutOfRange { index: p, len: n });
            }
            seen[p] = true;
        }
        let mut atoms = vec![Element::C; n];
        for (i, &e) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = e;
        }
        let bonds: Vec<_> = self
            .bonds()
            .into_iter()
            .map(|(a, b, o)| (perm[a], perm[b], o))
            .collect();
        Molecule::from_parts(&atoms, &bonds, self.valences)
    }

    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.component_size(0) == self.atom_count()
    }

    /// Number of bonds on the shortest path between `a` and `b`.
    pub fn shortest_path_len(&self, a: usize, b: usize) -> Option<usize> {
        if a == b {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.atom_count()];
        let mut queue = VecDeque::new();
        dist[a] = 0;
        queue.push_back(a);
        while let Some(u) = queue.pop_front() {
            for n in &self.adjacency[u] {
                if dist[n.atom] == usize::MAX {
                    dist[n.atom] = dist[u] + 1;
                    if n.atom == b {
                        return Some(dist[n.atom]);
                    }
                    queue.push_back(n.atom);
                }
            }
        }
        None
    }

    /// Breadth-first distances from `source` (usize::MAX when unreachable).
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.atom_count()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for n in &self.adjacency[u] {
                if dist[n.atom] == usize::MAX {
                    dist[n.atom] = dist[u] + 1;
                    queue.push_back(n.atom);
                }
            }
        }
        dist
    }

    /// Validates all structural invariants.
    pub fn check_invariants(&self) -> Result<(), MolError> {
        for a in 0..self.atom_count() {
            let mut seen: SmallVec<[usize; 4]> = SmallVec::new();
            for n in &self.adjacency[a] {
                if n.atom == a {
                    return Err(MolError::SelfBond(a));
                }
                if seen.contains(&n.atom) {
                    return Err(MolError::DuplicateBond(a.min(n.atom), a.max(n.atom)));
                }
                seen.push(n.atom);
                if self.bond_order(n.atom, a) != n.order {
                    return Err(MolError::DuplicateBond(a.min(n.atom), a.max(n.atom)));
                }
            }
            let used = self.bond_order_sum(a);
            if used > self.max_valence(a) {
                return Err(MolError::ValenceViolation {
                    atom: a,
                    used,
                    max: self.max_valence(a),
                });
            }
        }
        if !self.is_connected() {
            return Err(MolError::Disconnected);
        }
        Ok(())
    }

    /// Invariant check on every edit in debug builds and unit tests.
    #[cfg(any(test, debug_assertions))]
    fn debug_check(&self) {
        assert!(self.check_invariants().is_ok(), "{:?}", self.check_invariants());
    }

    #[cfg(not(any(test, debug_assertions)))]
    #[inline(always)]
    fn debug_check(&self) {}

    fn check_index(&self, atom: usize) -> Result<(), MolError> {
        if atom >= self.atom_count() {
            Err(MolError::IndexOutOfRange {
                index: atom,
                len: self.atom_count(),
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn put_bond(&mut self, a: usize, b: usize, order: u8) {
        self.adjacency[a].push(Neighbor { atom: b, order });
        self.adjacency[b].push(Neighbor { atom: a, order });
    }

    pub(crate) fn push_atom_raw(&mut self, element: Element) -> usize {
        self.atoms.push(element);
        self.adjacency.push(NeighborList::new());
        self.atoms.len() - 1
    }

    fn remove_bond_raw(&mut self, a: usize, b: usize) {
        self.adjacency[a].retain(|n| n.atom != b);
        self.adjacency[b].retain(|n| n.atom != a);
    }

    fn component_size(&self, start: usize) -> usize {
        let mut seen = vec![false; self.atom_count()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(u) = stack.pop() {
            count += 1;
            for n in &self.adjacency[u] {
                if !seen[n.atom] {
                    seen[n.atom] = true;
                    stack.push(n.atom);
                }
            }
        }
        count
    }

    /// Removes an isolated atom and renumbers the ones after it.
    fn without_atom(&self, atom: usize) -> Molecule {
        debug_assert!(self.adjacency[atom].is_empty());
        let shift = |i: usize| if i > atom { i - 1 } else { i };
        let mut atoms = self.atoms.clone();
        atoms.remove(atom);
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != atom)
            .map(|(_, list)| {
                list.iter()
                    .map(|n| Neighbor {
                        atom: shift(n.atom),
                        order: n.order,
                    })
                    .collect()
            })
            .collect();
        let mol = Molecule {
            atoms,
            adjacency,
            valences: self.valences,
        };
        mol.debug_check();
        mol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn mol(s: &str) -> Molecule {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn empty_molecule() {
        let m = Molecule::new();
        assert_eq!(m.atom_count(), 0);
        assert_eq!(m.bond_count(), 0);
        assert!(m.is_connected());
    }

    #[test]
    fn free_valence_examples() {
        assert_eq!(mol("C").free_valence(0).unwrap(), 4);
        let ethane = mol("CC");
        assert_eq!(ethane.free_valence(0).unwrap(), 3);
        assert_eq!(ethane.free_valence(1).unwrap(), 3);
        let hexane = mol("C1CCCCC1");
        for a in 0..6 {
            assert_eq!(hexane.free_valence(a).unwrap(), 2);
        }
        assert!(matches!(
            hexane.free_valence(6),
            Err(MolError::IndexOutOfRange { index: 6, len: 6 })
        ));
    }

    #[test]
    fn set_bond_examples() {
        let ethane = mol("CC");
        let ethene = ethane.set_bond(0, 1, 2).unwrap();
        assert_eq!(ethene.bond_order(0, 1), 2);
        assert_eq!(ethane.bond_order(0, 1), 1, "input unchanged");
        let ethyne = mol("C#C");
        let same = ethyne.set_bond(0, 1, 3).unwrap();
        assert_eq!(same, ethyne);
        assert!(matches!(ethane.set_bond(0, 0, 1), Err(MolError::SelfBond(0))));
        assert!(matches!(
            mol("CC(C)(C)C").set_bond(0, 1, 2),
            Err(MolError::ValenceViolation { atom: 1, .. })
        ));
        assert!(matches!(ethane.set_bond(0, 2, 1), Err(MolError::IndexOutOfRange { .. })));
        assert!(matches!(mol("CCC").set_bond(0, 1, 0), Err(MolError::Disconnected)));
        let opened = mol("C1CC1").set_bond(0, 2, 0).unwrap();
        assert_eq!(opened.bond_count(), 2);
    }

    #[test]
    fn remove_bond_prunes_singletons() {
        let propane = mol("CCC");
        let out = propane.remove_bond(0, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, Some(0));
        assert_eq!(out[0].1.atom_count(), 2);
        let ethane = mol("CO");
        let out = ethane.remove_bond(0, 1).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].1.element(0), Element::O);
        assert_eq!(out[1].1.element(0), Element::C);
        assert!(matches!(mol("CCCC").remove_bond(1, 2), Err(MolError::Disconnected)));
    }

    #[test]
    fn from_parts_validates() {
        let v = ValenceTable::default();
        assert!(Molecule::from_parts(&[Element::C, Element::C], &[], v).is_err());
        assert!(Molecule::from_parts(&[Element::O, Element::O], &[(0, 1, 3)], v).is_err());
        assert!(Molecule::from_parts(&[Element::C, Element::C], &[(0, 1, 1), (1, 0, 2)], v).is_err());
        assert!(Molecule::from_parts(&[Element::C, Element::C], &[(0, 1, 4)], v).is_err());
        let m = Molecule::from_parts(&[Element::C, Element::O], &[(0, 1, 2)], v).unwrap();
        assert_eq!(m.free_valence(0).unwrap(), 2);
    }

    #[test]
    fn shortest_path() {
        let heptane = mol("CCCCCCC");
        assert_eq!(heptane.shortest_path_len(0, 6), Some(6));
        assert_eq!(mol("C1CCCCC1").shortest_path_len(0, 3), Some(3));
    }
}
