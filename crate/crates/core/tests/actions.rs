mod common;

use std::collections::{BTreeSet, HashSet, VecDeque};

use molforge_core::actions::*;
use molforge_core::molgraph::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn key(m: &Molecule) -> String {
    canonical_key(m).to_string()
}

/// Molecule with `atom` deleted (it must have no bonds left).
fn drop_atom(atoms: &[Element], bonds: &[(usize, usize, u8)], atom: usize, v: ValenceTable) -> Option<Molecule> {
    let shift = |i: usize| if i > atom { i - 1 } else { i };
    let kept: Vec<Element> = atoms.iter().enumerate().filter(|&(i, _)| i != atom).map(|(_, &e)| e).collect();
    let bonds: Vec<_> = bonds.iter().map(|&(a, b, o)| (shift(a), shift(b), o)).collect();
    Molecule::from_parts(&kept, &bonds, v).ok()
}

fn is_isolated(bonds: &[(usize, usize, u8)], atom: usize) -> bool {
    !bonds.iter().any(|&(a, b, _)| a == atom || b == atom)
}

/// Every single edit of `m`, built from raw parts and kept only if the
/// result passes the molecule invariants and the stated heuristics.
fn oracle(m: &Molecule, cfg: &MdpConfig) -> BTreeSet<String> {
    let v = m.valences();
    let atoms = m.atoms().to_vec();
    let bonds = m.bonds();
    let n = atoms.len();
    let mut out = BTreeSet::new();
    let keep = |out: &mut BTreeSet<String>, r: Result<Molecule, MolError>| {
        if let Ok(x) = r {
            out.insert(key(&x));
        }
    };
    if cfg.allow_no_modification {
        keep(&mut out, Ok(m.clone()));
    }
    for &e in &cfg.elements {
        if n == 0 {
            keep(&mut out, Molecule::from_parts(&[e], &[], v));
        }
        for anchor in 0..n {
            for k in 1..=3 {
                let mut a2 = atoms.clone();
                a2.push(e);
                let mut b2 = bonds.clone();
                b2.push((anchor, n, k));
                keep(&mut out, Molecule::from_parts(&a2, &b2, v));
            }
        }
    }
    let in_ring = m.ring_info().atom_in_ring;
    for a in 0..n {
        for b in a + 1..n {
            let old = m.bond_order(a, b);
            if old == 0 {
                if in_ring[a] && in_ring[b] {
                    continue;
                }
                // Smallest ring through the new bond, by plain BFS.
                let mut dist = vec![usize::MAX; n];
                let mut q = VecDeque::from([a]);
                dist[a] = 0;
                while let Some(u) = q.pop_front() {
                    for &(x, y, _) in &bonds {
                        let w = if x == u { y } else if y == u { x } else { continue };
                        if dist[w] == usize::MAX {
                            dist[w] = dist[u] + 1;
                            q.push_back(w);
                        }
                    }
                }
                if !cfg.allowed_ring_sizes.contains(&(dist[b] + 1)) {
                    continue;
                }
            }
            for new in old + 1..=3 {
                let mut b2: Vec<_> = bonds.iter().copied().filter(|&(x, y, _)| (x, y) != (a, b)).collect();
                b2.push((a, b, new));
                keep(&mut out, Molecule::from_parts(&atoms, &b2, v));
            }
        }
    }
    if cfg.allow_bond_removal {
        for &(a, b, old) in &bonds {
            for new in 0..old {
                let mut b2: Vec<_> = bonds.iter().copied().filter(|&(x, y, _)| (x, y) != (a, b)).collect();
                if new > 0 {
                    b2.push((a, b, new));
                    keep(&mut out, Molecule::from_parts(&atoms, &b2, v));
                    continue;
                }
                let whole = Molecule::from_parts(&atoms, &b2, v);
                if whole.is_ok() {
                    keep(&mut out, whole);
                    continue;
                }
                for end in [a, b] {
                    if is_isolated(&b2, end) {
                        if let Some(x) = drop_atom(&atoms, &b2, end, v) {
                            out.insert(key(&x));
                        }
                    }
                }
            }
        }
    }
    out
}

fn enumerated(m: &Molecule, cfg: &MdpConfig) -> BTreeSet<String> {
    let acts = valid_actions(&State::new(m.clone(), 0), cfg).unwrap();
    let keys: BTreeSet<String> = acts.iter().map(|a| a.successor_key.to_string()).collect();
    assert_eq!(keys.len(), acts.len(), "duplicate successors for {}", key(m));
    keys
}

fn reachable(cfg: &MdpConfig, depth: usize) -> Vec<Molecule> {
    let mut seen = HashSet::from([String::new()]);
    let mut frontier = vec![Molecule::new()];
    let mut all = vec![Molecule::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for m in &frontier {
            for a in valid_actions(&State::new(m.clone(), 0), cfg).unwrap() {
                if seen.insert(a.successor_key.to_string()) {
                    next.push(a.successor.clone());
                    all.push(a.successor);
                }
            }
        }
        frontier = next;
    }
    all
}

#[test]
fn enumeration_matches_edit_and_filter_oracle() {
    let cfg = MdpConfig::with_elements(&[Element::C, Element::O]);
    let mols = reachable(&cfg, 4);
    assert!(mols.len() > 50, "{}", mols.len());
    for m in &mols {
        assert_eq!(enumerated(m, &cfg), oracle(m, &cfg), "state {}", key(m));
    }
    // Also with every optional family switched off.
    let bare = MdpConfig {
        allow_bond_removal: false,
        allow_no_modification: false,
        ..cfg.clone()
    };
    for m in &mols {
        assert_eq!(enumerated(m, &bare), oracle(m, &bare), "state {}", key(m));
    }
}

#[test]
fn oracle_matches_on_ring_heavy_molecules() {
    let cfg = MdpConfig::with_elements(&[Element::C, Element::N, Element::O]);
    for s in ["C1CCCCC1", "C12CCC1CC2", "C1CC1C=C", "CCCCCCC", "C1=CC=CC=C1", "C1CC2CC12", "OC1CCO1"] {
        let m = parse_smiles(s).unwrap();
        assert_eq!(enumerated(&m, &cfg), oracle(&m, &cfg), "{s}");
    }
}

#[test]
fn every_reachable_molecule_is_valid() {
    let methane = MdpConfig {
        initial_molecule: parse_smiles("C").unwrap(),
        ..MdpConfig::default()
    };
    let mut seen = HashSet::new();
    let mut frontier = vec![methane.initial_molecule.clone()];
    for _ in 0..3 {
        let mut next = Vec::new();
        for m in &frontier {
            for a in valid_actions(&State::new(m.clone(), 0), &methane).unwrap() {
                assert!(a.successor.check_invariants().is_ok());
                assert!(a.successor.is_connected());
                if seen.insert(a.successor_key.clone()) {
                    next.push(a.successor);
                }
            }
        }
        frontier = next;
    }

    let cfg = MdpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut s = cfg.initial_state();
        while !s.is_terminal(&cfg) {
            let acts = valid_actions(&s, &cfg).unwrap();
            s = apply(&s, &acts[rng.gen_range(0..acts.len())], &cfg).unwrap();
            assert!(s.molecule.check_invariants().is_ok());
            assert!(s.molecule.is_connected());
        }
        assert_eq!(s.step, cfg.max_steps);
    }
}

#[test]
fn bond_additions_are_reversible() {
    let cfg = MdpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for _ in 0..100 {
        let mut s = cfg.initial_state();
        for _ in 0..15 {
            let acts = valid_actions(&s, &cfg).unwrap();
            let here = key(&s.molecule);
            for a in acts.iter().filter(|a| a.kind.is_bond_addition()) {
                let back = enumerate_bond_removals(&a.successor, &cfg);
                assert!(back.iter().any(|b| b.successor_key.as_str() == here), "{here} -> {}", a.successor_key);
                checked += 1;
            }
            s = apply(&s, &acts[rng.gen_range(0..acts.len())], &cfg).unwrap();
        }
    }
    assert!(checked > 1000);
}

#[test]
fn enumeration_is_deterministic() {
    let cfg = MdpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let m = common::random_molecule(&mut rng, 9, &[Element::C, Element::N, Element::O]);
        let s = State::new(m.clone(), 3);
        let first: Vec<String> = valid_actions(&s, &cfg).unwrap().iter().map(|a| a.successor_key.to_string()).collect();
        let again: Vec<String> = valid_actions(&s, &cfg).unwrap().iter().map(|a| a.successor_key.to_string()).collect();
        assert_eq!(first, again);
        let mut sorted = first.clone();
        sorted.sort();
        assert_eq!(first, sorted);
        // A relabeled copy of the same molecule yields the same list.
        let p = common::random_permutation(&mut rng, m.atom_count());
        let relabeled = State::new(m.permuted(&p).unwrap(), 3);
        let other: Vec<String> = valid_actions(&relabeled, &cfg).unwrap().iter().map(|a| a.successor_key.to_string()).collect();
        assert_eq!(first, other);
    }
}

#[test]
fn family_counts() {
    let co = MdpConfig::with_elements(&[Element::C, Element::O]);
    let c = MdpConfig::with_elements(&[Element::C]);
    let count = |v: Vec<Action>| v.len();
    let m = |s: &str| parse_smiles(s).unwrap();
    assert_eq!(count(enumerate_atom_additions(&m("C1CCCCC1"), &co)), 4);
    assert_eq!(count(enumerate_atom_additions(&Molecule::new(), &c)), 1);
    assert_eq!(count(enumerate_atom_additions(&m("C"), &c)), 3);
    assert_eq!(count(enumerate_bond_additions(&m("CC"), &c)), 2);
    assert_eq!(count(enumerate_bond_additions(&m("C=C"), &c)), 1);
    assert!(enumerate_bond_additions(&m("CCCCCCC"), &c)
        .iter()
        .all(|a| a.successor.ring_info().ring_sizes.iter().all(|&r| r <= 6)));
    assert_eq!(count(enumerate_bond_removals(&m("C1CCCCC1"), &c)), 1);
    assert_eq!(count(enumerate_bond_removals(&m("C#C"), &c)), 3);
    let from_propane: BTreeSet<String> = enumerate_bond_removals(&m("CCC"), &c).iter().map(|a| a.successor_key.to_string()).collect();
    assert_eq!(from_propane, BTreeSet::from([key(&m("CC"))]));
    assert_eq!(enumerate_bond_removals(&m("CC"), &c)[0].successor_key.as_str(), "C");
    // Heteroatomic two-atom molecule: either end may be the survivor.
    let co_cut: BTreeSet<String> = enumerate_bond_removals(&m("CO"), &co).iter().map(|a| a.successor_key.to_string()).collect();
    assert_eq!(co_cut, BTreeSet::from(["C".to_string(), "O".to_string()]));
}
