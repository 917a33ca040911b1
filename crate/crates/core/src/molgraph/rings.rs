//! Ring perception.
//!
//! Membership comes from bridge detection: a bond lies on a cycle iff it is
//! not a bridge. Ring sizes come from a minimum cycle basis built from
//! Horton candidate cycles and greedy GF(2) elimination, which is the usual
//! smallest-set-of-smallest-rings for molecular graphs.

use super::Molecule;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingInfo {
    pub atom_in_ring: Vec<bool>,
    /// Indexed like [`Molecule::bonds`].
    pub bond_in_ring: Vec<bool>,
    /// Sorted ring sizes of the minimum cycle basis.
    pub ring_sizes: Vec<usize>,
}

impl RingInfo {
    pub fn ring_count(&self) -> usize {
        self.ring_sizes.len()
    }
}

impl Molecule {
    /// Per-atom and per-bond ring membership plus SSSR ring sizes.
    pub fn ring_info(&self) -> RingInfo {
        let bonds = self.bonds();
        let bond_in_ring = bridge_free_bonds(self, &bonds);
        let mut atom_in_ring = vec![false; self.atom_count()];
        for (&(a, b, _), &ring) in bonds.iter().zip(&bond_in_ring) {
            if ring {
                atom_in_ring[a] = true;
                atom_in_ring[b] = true;
            }
        }
        let ring_sizes = minimum_cycle_basis_sizes(self, &bonds);
        RingInfo {
            atom_in_ring,
            bond_in_ring,
            ring_sizes,
        }
    }

    /// Ring membership only; cheaper than [`Molecule::ring_info`].
    pub fn atoms_in_ring(&self) -> Vec<bool> {
        let bonds = self.bonds();
        let in_ring = bridge_free_bonds(self, &bonds);
        let mut atoms = vec![false; self.atom_count()];
        for (&(a, b, _), &ring) in bonds.iter().zip(&in_ring) {
            if ring {
                atoms[a] = true;
                atoms[b] = true;
            }
        }
        atoms
    }

    /// Cyclomatic number |bonds| - |atoms| + |components|.
    pub fn cyclomatic_number(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        self.bond_count() + 1 - self.atom_count()
    }
}

/// Marks every bond that is not a bridge (iterative Tarjan low-link).
fn bridge_free_bonds(mol: &Molecule, bonds: &[(usize, usize, u8)]) -> Vec<bool> {
    let n = mol.atom_count();
    let mut in_ring = vec![true; bonds.len()];
    if n == 0 {
        return in_ring;
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    // (atom, parent, next neighbor position)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(top) = stack.last_mut() {
            let (u, parent) = (top.0, top.1);
            let neighbors = mol.neighbors(u);
            if top.2 < neighbors.len() {
                let v = neighbors[top.2].atom;
                top.2 += 1;
                if v == parent {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, u, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        let key = (parent.min(u), parent.max(u));
                        if let Ok(i) = bonds.binary_search_by(|&(a, b, _)| (a, b).cmp(&key)) {
                            in_ring[i] = false;
                        }
                    }
                }
            }
        }
    }
    in_ring
}

fn minimum_cycle_basis_sizes(mol: &Molecule, bonds: &[(usize, usize, u8)]) -> Vec<usize> {
    let target = mol.cyclomatic_number();
    if target == 0 {
        return Vec::new();
    }
    let n = mol.atom_count();
    let m = bonds.len();
    let words = m.div_ceil(64);
    let bond_index = |a: usize, b: usize| -> usize {
        let key = (a.min(b), a.max(b));
        bonds
            .binary_search_by(|&(x, y, _)| (x, y).cmp(&key))
            .expect("bond present")
    };

    // Horton candidates: for each root, BFS tree paths to both ends of an edge.
    let mut candidates: Vec<(usize, Vec<u64>)> = Vec::new();
    for root in 0..n {
        let mut parent = vec![usize::MAX; n];
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[root] = 0;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for nb in mol.neighbors(u) {
                if dist[nb.atom] == usize::MAX {
                    dist[nb.atom] = dist[u] + 1;
                    parent[nb.atom] = u;
                    queue.push_back(nb.atom);
                }
            }
        }
        let path_to_root = |mut v: usize| {
            let mut path = vec![v];
            while v != root {
                v = parent[v];
                path.push(v);
            }
            path
        };
        for &(a, b, _) in bonds {
            if parent[a] == b || parent[b] == a {
                continue;
            }
            let pa = path_to_root(a);
            let pb = path_to_root(b);
            // paths may only share the root
            if pa.iter().filter(|x| pb.contains(x)).count() != 1 {
                continue;
            }
            let mut bits = vec![0u64; words];
            let mut set = |x: usize, y: usize| {
                let i = bond_index(x, y);
                bits[i / 64] ^= 1 << (i % 64);
            };
            for w in pa.windows(2) {
                set(w[0], w[1]);
            }
            for w in pb.windows(2) {
                set(w[0], w[1]);
            }
            set(a, b);
            let len = pa.len() + pb.len() - 1;
            candidates.push((len, bits));
        }
    }
    candidates.sort();
    candidates.dedup();

    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    let mut sizes = Vec::new();
    for (len, bits) in candidates {
        let mut v = bits.clone();
        for (row, &p) in basis.iter().zip(&pivots) {
            if v[p / 64] >> (p % 64) & 1 == 1 {
                for (x, y) in v.iter_mut().zip(row) {
                    *x ^= y;
                }
            }
        }
        if let Some(p) = first_bit(&v) {
            basis.push(v);
            pivots.push(p);
            sizes.push(len);
            if sizes.len() == target {
                break;
            }
        }
    }
    sizes.sort_unstable();
    sizes
}

fn first_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}
