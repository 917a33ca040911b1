//! Morgan-style circular fingerprints and Tanimoto similarity.

use std::fmt::Write as _;

use thiserror::Error;

use crate::actions::{MdpConfig, State};
use crate::molgraph::Molecule;

pub const DEFAULT_RADIUS: usize = 3;
pub const DEFAULT_LENGTH: usize = 2048;
pub const SIMILARITY_RADIUS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitFingerprint {
    words: Vec<u64>,
    length: usize,
    radius: usize,
}

impl BitFingerprint {
    pub fn zeros(length: usize, radius: usize) -> Self {
        BitFingerprint {
            words: vec![0; length.div_ceil(64)],
            length,
            radius,
        }
    }

    pub fn from_on_bits(length: usize, radius: usize, bits: impl IntoIterator<Item = usize>) -> Self {
        let mut fp = BitFingerprint::zeros(length, radius);
        for b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.length, "bit {bit} out of range");
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.length && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn on_bits(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.count_ones());
        for (i, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                out.push((i * 64) as u32 + w.trailing_zeros());
                w &= w - 1;
            }
        }
        out
    }

    /// Lowercase hex, bit 0 in the low nibble of the first byte.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.length / 4);
        for w in &self.words {
            for byte in w.to_le_bytes() {
                let _ = write!(s, "{byte:02x}");
            }
        }
        s.truncate(self.length.div_ceil(4));
        s
    }

    fn intersection_count(&self, other: &BitFingerprint) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

/// Seedless 64-bit mixing (splitmix64 finalizer).
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_words(words: &[u64]) -> u64 {
    let mut h = 0x6a09_e667_f3bc_c908_u64 ^ words.len() as u64;
    for &w in words {
        h = mix(h ^ w);
    }
    h
}

/// Per-atom identifiers for every iteration, `radius + 1` rows.
pub fn atom_invariants(mol: &Molecule, radius: usize) -> Vec<Vec<u64>> {
    let n = mol.atom_count();
    let in_ring = mol.atoms_in_ring();
    let mut rows = Vec::with_capacity(radius + 1);
    let initial: Vec<u64> = (0..n)
        .map(|a| {
            hash_words(&[
                mol.element(a).atomic_number() as u64,
                mol.degree(a) as u64,
                mol.bond_order_sum(a) as u64,
                mol.implicit_hydrogens(a) as u64,
                in_ring[a] as u64,
            ])
        })
        .collect();
    rows.push(initial);
    let mut buf = Vec::new();
    let mut env: Vec<(u8, u64)> = Vec::new();
    for iteration in 1..=radius {
        let prev = &rows[iteration - 1];
        let next: Vec<u64> = (0..n)
            .map(|a| {
                env.clear();
                env.extend(mol.neighbors(a).iter().map(|nb| (nb.order, prev[nb.atom])));
                env.sort_unstable();
                buf.clear();
                buf.push(iteration as u64);
                buf.push(prev[a]);
                for &(order, inv) in &env {
                    buf.push(order as u64);
                    buf.push(inv);
                }
                hash_words(&buf)
            })
            .collect();
        rows.push(next);
    }
    rows
}

/// # Panics
/// If `length` is not a power of two.
pub fn morgan_fingerprint(mol: &Molecule, radius: usize, length: usize) -> BitFingerprint {
    assert!(length.is_power_of_two(), "fingerprint length {length} is not a power of two");
    let mut fp = BitFingerprint::zeros(length, radius);
    for row in atom_invariants(mol, radius) {
        for inv in row {
            fp.set((inv % length as u64) as usize);
        }
    }
    fp
}

/// `N_c / (N_a + N_b - N_c)`; two empty fingerprints are identical (1.0).
pub fn tanimoto(a: &BitFingerprint, b: &BitFingerprint) -> Result<f64, FingerprintError> {
    if a.length != b.length {
        return Err(FingerprintError::LengthMismatch(a.length, b.length));
    }
    let na = a.count_ones();
    let nb = b.count_ones();
    let nc = a.intersection_count(b);
    let union = na + nb - nc;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(nc as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateFeatures {
    pub vector: Vec<f64>,
}

impl StateFeatures {
    pub fn steps_remaining(&self) -> f64 {
        *self.vector.last().expect("features are never empty")
    }
}

pub fn steps_remaining_fraction(step: usize, max_steps: usize) -> f64 {
    max_steps.saturating_sub(step) as f64 / max_steps as f64
}

pub fn featurize(state: &State, cfg: &MdpConfig) -> StateFeatures {
    featurize_with(state, cfg, DEFAULT_RADIUS, DEFAULT_LENGTH)
}

pub fn featurize_with(state: &State, cfg: &MdpConfig, radius: usize, length: usize) -> StateFeatures {
    let fp = morgan_fingerprint(&state.molecule, radius, length);
    let mut vector = vec![0.0; length + 1];
    for b in fp.on_bits() {
        vector[b as usize] = 1.0;
    }
    vector[length] = steps_remaining_fraction(state.step, cfg.max_steps);
    StateFeatures { vector }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn fp(s: &str, radius: usize) -> BitFingerprint {
        morgan_fingerprint(&parse_smiles(s).unwrap(), radius, 2048)
    }

    #[test]
    fn empty_molecule_has_no_bits() {
        assert_eq!(fp("", 3).count_ones(), 0);
    }

    #[test]
    fn isomorphic_constructions_agree() {
        assert_eq!(fp("CCO", 3), fp("OCC", 3));
        assert_eq!(fp("C1CCCCC1O", 3), fp("OC1CCCCC1", 3));
    }

    #[test]
    fn ethanol_vs_dimethyl_ether() {
        assert_ne!(fp("CCO", 2).on_bits(), fp("COC", 2).on_bits());
    }

    #[test]
    fn tanimoto_examples() {
        let a = BitFingerprint::from_on_bits(64, 0, 0..8);
        let b = BitFingerprint::from_on_bits(64, 0, 4..10);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.4);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let c = BitFingerprint::from_on_bits(64, 0, 20..30);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        let z = BitFingerprint::zeros(64, 0);
        assert_eq!(tanimoto(&z, &z).unwrap(), 1.0);
        let other = BitFingerprint::zeros(128, 0);
        assert_eq!(tanimoto(&a, &other), Err(FingerprintError::LengthMismatch(64, 128)));
    }

    #[test]
    fn featurize_steps_entry() {
        let cfg = MdpConfig::default();
        let f0 = featurize(&State::new(parse_smiles("CC").unwrap(), 0), &cfg);
        assert_eq!(f0.vector.len(), 2049);
        assert_eq!(f0.steps_remaining(), 1.0);
        let ft = featurize(&State::new(parse_smiles("CC").unwrap(), cfg.max_steps), &cfg);
        assert_eq!(ft.steps_remaining(), 0.0);
        assert!(f0.vector[..2048].iter().all(|&x| x == 0.0 || x == 1.0));
    }

    #[test]
    fn hex_encoding() {
        let fp = BitFingerprint::from_on_bits(16, 0, [0, 5, 12]);
        assert_eq!(fp.to_hex(), "2110");
        assert_eq!(fp.on_bits(), vec![0, 5, 12]);
    }
}
