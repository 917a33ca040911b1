//! Canonical labeling and canonical SMILES output.
//!
//! Atom colors start from (element, degree, bond-order multiset) and are
//! refined by neighborhood until stable. Remaining ties are broken by
//! individualizing each member of the first non-singleton cell in turn and
//! keeping the labeling with the smallest certificate. Automorphisms found
//! along the way prune branches that lie in an already-explored orbit.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use super::Molecule;

/// Deterministic string identity of a molecule, equal for isomorphic graphs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(Arc<str>);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for CanonicalKey {
    fn from(s: String) -> Self {
        CanonicalKey(s.into())
    }
}

pub fn canonical_key(mol: &Molecule) -> CanonicalKey {
    CanonicalKey::from(write_smiles(mol))
}

/// Canonical SMILES; identical for isomorphic inputs, `""` for the empty molecule.
pub fn write_smiles(mol: &Molecule) -> String {
    if mol.is_empty() {
        return String::new();
    }
    let labels = canonical_labels(mol);
    emit(mol, &labels)
}

/// Canonical label of every atom (a permutation of `0..n`).
pub fn canonical_labels(mol: &Molecule) -> Vec<usize> {
    let n = mol.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let mut search = Search {
        mol,
        best: None,
        automorphisms: Vec::new(),
    };
    search.run(initial_colors(mol), &mut Vec::new());
    let (_, labels) = search.best.expect("at least one leaf");
    labels
}

fn initial_colors(mol: &Molecule) -> Vec<u32> {
    let keys: Vec<u64> = (0..mol.atom_count())
        .map(|a| {
            let mut counts = [0u64; 4];
            for n in mol.neighbors(a) {
                counts[n.order as usize] += 1;
            }
            (mol.element(a).atomic_number() as u64) << 32
                | (mol.degree(a) as u64) << 24
                | counts[1] << 16
                | counts[2] << 8
                | counts[3]
        })
        .collect();
    dense_ranks(&keys)
}

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0u32; keys.len()];
    let mut rank = 0u32;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            rank += 1;
        }
        ranks[idx[w]] = rank;
    }
    ranks
}

fn class_count(colors: &[u32]) -> usize {
    colors.iter().copied().max().map_or(0, |m| m as usize + 1)
}

/// Own color followed by sorted `(neighbor color, bond order)` codes; the
/// padding value sorts after every real code. Degree never exceeds 8.
type Signature = [u32; 9];

fn refine(mol: &Molecule, mut colors: Vec<u32>) -> Vec<u32> {
    let n = colors.len();
    let mut classes = class_count(&colors);
    let mut sigs: Vec<Signature> = vec![[u32::MAX; 9]; n];
    let mut order: Vec<usize> = (0..n).collect();
    while classes < n {
        for (a, sig) in sigs.iter_mut().enumerate() {
            sig[0] = colors[a];
            let nbrs = mol.neighbors(a);
            for (slot, nb) in sig[1..].iter_mut().zip(nbrs) {
                *slot = colors[nb.atom] << 2 | nb.order as u32;
            }
            sig[1..=nbrs.len()].sort_unstable();
        }
        order.sort_unstable_by(|&x, &y| sigs[x].cmp(&sigs[y]));
        let mut rank = 0u32;
        for w in 0..n {
            if w > 0 && sigs[order[w]] != sigs[order[w - 1]] {
                rank += 1;
            }
            colors[order[w]] = rank;
        }
        let next_classes = rank as usize + 1;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
    colors
}

fn individualize(colors: &[u32], v: usize) -> Vec<u32> {
    let keys: Vec<(u32, bool)> = colors
        .iter()
        .enumerate()
        .map(|(a, &c)| (c, a != v))
        .collect();
    dense_ranks(&keys)
}

/// Labeled-graph encoding; equal certificates mean equal labeled graphs.
fn certificate(mol: &Molecule, labels: &[usize]) -> Vec<u32> {
    let n = mol.atom_count();
    let mut atom_of = vec![0usize; n];
    for (a, &l) in labels.iter().enumerate() {
        atom_of[l] = a;
    }
    let mut cert = Vec::with_capacity(2 * n + 2 * mol.bond_count());
    for &a in &atom_of {
        cert.push(mol.element(a).atomic_number() as u32);
        let mut lower: SmallVec<[u32; 4]> = mol
            .neighbors(a)
            .iter()
            .filter(|nb| labels[nb.atom] < labels[a])
            .map(|nb| (labels[nb.atom] as u32) << 2 | nb.order as u32)
            .collect();
        lower.sort_unstable();
        cert.push(lower.len() as u32);
        cert.extend_from_slice(&lower);
    }
    cert
}

struct Search<'a> {
    mol: &'a Molecule,
    best: Option<(Vec<u32>, Vec<usize>)>,
    automorphisms: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn run(&mut self, colors: Vec<u32>, prefix: &mut Vec<usize>) {
        let colors = refine(self.mol, colors);
        let n = colors.len();
        if class_count(&colors) == n {
            let labels = colors.iter().map(|&c| c as usize).collect();
            if prefix.is_empty() {
                // sole leaf; nothing to compare against
                self.best = Some((Vec::new(), labels));
            } else {
                self.leaf(labels);
            }
            return;
        }
        let mut sizes = vec![0usize; class_count(&colors)];
        for &c in &colors {
            sizes[c as usize] += 1;
        }
        let target = sizes.iter().position(|&s| s > 1).expect("non-discrete") as u32;
        let cell: Vec<usize> = (0..n).filter(|&a| colors[a] == target).collect();
        let mut explored: Vec<usize> = Vec::new();
        for v in cell {
            if !explored.is_empty() && self.in_explored_orbit(v, &explored, prefix) {
                continue;
            }
            prefix.push(v);
            self.run(individualize(&colors, v), prefix);
            prefix.pop();
            explored.push(v);
        }
    }

    fn leaf(&mut self, labels: Vec<usize>) {
        let cert = certificate(self.mol, &labels);
        match &self.best {
            None => self.best = Some((cert, labels)),
            Some((best_cert, best_labels)) => match cert.cmp(best_cert) {
                Ordering::Less => self.best = Some((cert, labels)),
                Ordering::Greater => {}
                Ordering::Equal => {
                    let mut best_atom_of = vec![0usize; labels.len()];
                    for (a, &l) in best_labels.iter().enumerate() {
                        best_atom_of[l] = a;
                    }
                    let gamma: Vec<usize> = labels.iter().map(|&l| best_atom_of[l]).collect();
                    if gamma.iter().enumerate().any(|(i, &g)| i != g) {
                        self.automorphisms.push(gamma);
                    }
                }
            },
        }
    }

    /// Whether `v` shares an orbit with an explored vertex under the
    /// automorphisms found so far that fix `prefix` pointwise.
    fn in_explored_orbit(&self, v: usize, explored: &[usize], prefix: &[usize]) -> bool {
        let n = self.mol.atom_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut any = false;
        for gamma in &self.automorphisms {
            if prefix.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            any = true;
            for (i, &g) in gamma.iter().enumerate() {
                let (ri, rg) = (find(&mut parent, i), find(&mut parent, g));
                if ri != rg {
                    parent[ri] = rg;
                }
            }
        }
        if !any {
            return false;
        }
        let rv = find(&mut parent, v);
        explored.iter().any(|&u| find(&mut parent, u) == rv)
    }
}

/// Depth-first SMILES emission following label order.
fn emit(mol: &Molecule, labels: &[usize]) -> String {
    let n = mol.atom_count();
    let mut atom_of = vec![0usize; n];
    for (a, &l) in labels.iter().enumerate() {
        atom_of[l] = a;
    }
    let start = atom_of[0];
    let sorted: Vec<SmallVec<[(usize, u8); 4]>> = (0..n)
        .map(|a| {
            let mut nb: SmallVec<[(usize, u8); 4]> = mol.neighbors(a).iter().map(|x| (x.atom, x.order)).collect();
            nb.sort_unstable_by_key(|&(x, _)| labels[x]);
            nb
        })
        .collect();

    // Pass 1: DFS tree, preorder and ring-closure bonds.
    let mut preorder_pos = vec![usize::MAX; n];
    let mut children: Vec<SmallVec<[(usize, u8); 4]>> = vec![SmallVec::new(); n];
    let mut ring_bonds: Vec<SmallVec<[(usize, u8); 2]>> = vec![SmallVec::new(); n];
    let mut counter = 1;
    preorder_pos[start] = 0;
    // (atom, parent, next neighbor position)
    let mut stack: Vec<(usize, usize, usize)> = Vec::with_capacity(n);
    stack.push((start, usize::MAX, 0));
    while let Some(top) = stack.last_mut() {
        let (u, parent, i) = *top;
        if i == sorted[u].len() {
            stack.pop();
            continue;
        }
        top.2 += 1;
        let (v, order) = sorted[u][i];
        if v == parent {
            continue;
        }
        if preorder_pos[v] == usize::MAX {
            preorder_pos[v] = counter;
            counter += 1;
            children[u].push((v, order));
            stack.push((v, u, 0));
        } else if preorder_pos[v] < preorder_pos[u] && !ring_bonds[u].iter().any(|&(x, _)| x == v) {
            // back edge from descendant u to ancestor v
            ring_bonds[u].push((v, order));
            ring_bonds[v].push((u, order));
        }
    }

    // Pass 2: emission, children in DFS order, all but the last branched.
    let mut out = String::with_capacity(4 * n + 8);
    let mut open_digit: Vec<Option<(usize, usize)>> = Vec::with_capacity(4);
    emit_atom(mol, start, &preorder_pos, &ring_bonds, &mut open_digit, &mut out);
    let mut frames: Vec<(usize, usize)> = Vec::with_capacity(n);
    frames.push((start, 0));
    while let Some(&(u, i)) = frames.last() {
        let kids = &children[u];
        if i == kids.len() {
            frames.pop();
            if let Some(&(p, pi)) = frames.last() {
                if pi < children[p].len() {
                    out.push(')');
                }
            }
            continue;
        }
        if let Some(top) = frames.last_mut() {
            top.1 += 1;
        }
        let (v, order) = kids[i];
        if i + 1 < kids.len() {
            out.push('(');
        }
        push_bond(&mut out, order);
        emit_atom(mol, v, &preorder_pos, &ring_bonds, &mut open_digit, &mut out);
        frames.push((v, 0));
    }
    out
}

fn push_bond(out: &mut String, order: u8) {
    match order {
        2 => out.push('='),
        3 => out.push('#'),
        _ => {}
    }
}

fn emit_atom(
    mol: &Molecule,
    atom: usize,
    preorder_pos: &[usize],
    ring_bonds: &[SmallVec<[(usize, u8); 2]>],
    open_digit: &mut Vec<Option<(usize, usize)>>,
    out: &mut String,
) {
    let symbol = mol.element(atom).symbol();
    if symbol == "H" {
        out.push_str("[H]");
    } else {
        out.push_str(symbol);
    }
    if ring_bonds[atom].is_empty() {
        return;
    }
    let mut closings: SmallVec<[(usize, u8); 4]> = SmallVec::new();
    let mut openings: SmallVec<[(usize, u8); 4]> = SmallVec::new();
    for &(other, order) in &ring_bonds[atom] {
        if preorder_pos[other] < preorder_pos[atom] {
            closings.push((other, order));
        } else {
            openings.push((other, order));
        }
    }
    closings.sort_by_key(|&(x, _)| preorder_pos[x]);
    openings.sort_by_key(|&(x, _)| preorder_pos[x]);
    for (other, _) in closings {
        let digit = open_digit
            .iter()
            .position(|d| *d == Some((other, atom)))
            .expect("ring opened earlier");
        open_digit[digit] = None;
        push_ring_digit(out, digit + 1);
    }
    for (other, order) in openings {
        let digit = match open_digit.iter().position(|d| d.is_none()) {
            Some(d) => d,
            None => {
                open_digit.push(None);
                open_digit.len() - 1
            }
        };
        open_digit[digit] = Some((atom, other));
        push_bond(out, order);
        push_ring_digit(out, digit + 1);
    }
}

fn push_ring_digit(out: &mut String, digit: usize) {
    assert!(digit < 100, "more than 99 simultaneously open rings");
    if digit < 10 {
        out.push(char::from(b'0' + digit as u8));
    } else {
        out.push('%');
        out.push_str(&format!("{digit:02}"));
    }
}
