//! Helpers shared by the integration tests: random molecule generation and a
//! brute-force isomorphism oracle that does not touch the canonicalizer.

#![allow(dead_code)]

use molforge_core::molgraph::{Element, Molecule};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random connected molecule built by valence-respecting edits.
pub fn random_molecule(rng: &mut impl Rng, max_atoms: usize, elements: &[Element]) -> Molecule {
    let n = rng.gen_range(1..=max_atoms);
    let mut mol = Molecule::new()
        .with_lone_atom(*elements.choose(rng).unwrap())
        .unwrap();
    while mol.atom_count() < n {
        let anchors: Vec<usize> = (0..mol.atom_count())
            .filter(|&a| mol.free_valence(a).unwrap() > 0)
            .collect();
        let Some(&anchor) = anchors.choose(rng) else { break };
        let e = *elements.choose(rng).unwrap();
        let cap = mol.free_valence(anchor).unwrap().min(e.default_max_valence());
        let order = rng.gen_range(1..=cap.min(3));
        mol = mol.with_atom_bonded(e, anchor, order).unwrap();
    }
    for _ in 0..rng.gen_range(0..4) {
        if mol.atom_count() < 3 {
            break;
        }
        let a = rng.gen_range(0..mol.atom_count());
        let b = rng.gen_range(0..mol.atom_count());
        if a == b || mol.bond_order(a, b) > 0 {
            continue;
        }
        let order = rng.gen_range(1..=2);
        if let Ok(m) = mol.set_bond(a, b, order) {
            mol = m;
        }
    }
    mol
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn bond_matrix(mol: &Molecule) -> Vec<Vec<u8>> {
    let n = mol.atom_count();
    let mut m = vec![vec![0u8; n]; n];
    for (a, b, o) in mol.bonds() {
        m[a][b] = o;
        m[b][a] = o;
    }
    m
}

/// Exhaustive search for an element- and bond-order-preserving bijection.
pub fn isomorphic(x: &Molecule, y: &Molecule) -> bool {
    let n = x.atom_count();
    if n != y.atom_count() || x.bond_count() != y.bond_count() {
        return false;
    }
    let (mx, my) = (bond_matrix(x), bond_matrix(y));
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn extend(
        i: usize,
        x: &Molecule,
        y: &Molecule,
        mx: &[Vec<u8>],
        my: &[Vec<u8>],
        map: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        let n = map.len();
        if i == n {
            return true;
        }
        for j in 0..n {
            if used[j] || x.element(i) != y.element(j) || x.degree(i) != y.degree(j) {
                continue;
            }
            if (0..i).any(|k| mx[i][k] != my[j][map[k]]) {
                continue;
            }
            map[i] = j;
            used[j] = true;
            if extend(i + 1, x, y, mx, my, map, used) {
                return true;
            }
            used[j] = false;
        }
        map[i] = usize::MAX;
        false
    }

    extend(0, x, y, &mx, &my, &mut map, &mut used)
}
