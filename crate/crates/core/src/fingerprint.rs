//! Circular (ECFP-style) fingerprints and Tanimoto similarity.
//!
//! Every atom contributes one identifier per iteration `0..=radius`. The
//! radius-0 identifier hashes the atom's element, formal charge, degree and
//! aromatic flag; iteration `r` hashes the previous identifier together with
//! the sorted `(bond order, neighbor identifier)` pairs. Identifiers are
//! folded into the bit vector modulo its length. Hashing is XXH3-64 with
//! [`FINGERPRINT_SEED`], over little-endian encodings, so bitsets are
//! identical across runs and platforms.

use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::chem::{BondOrder, Molecule};

pub const FINGERPRINT_SEED: u64 = 0x5EED_EC4F_0000_2048;
pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_LENGTH: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("fingerprint length {0} must be a power of two >= 64")]
    BadLength(usize),
    #[error("cannot fingerprint an empty molecule")]
    EmptyMolecule,
    #[error("fingerprints differ in parameters ({0}/{1} vs {2}/{3})")]
    Mismatch(usize, u32, usize, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FingerprintBitset {
    words: Vec<u64>,
    length: usize,
    radius: u32,
}

impl FingerprintBitset {
    pub fn new(length: usize, radius: u32) -> Result<Self, FingerprintError> {
        if length < 64 || !length.is_power_of_two() {
            return Err(FingerprintError::BadLength(length));
        }
        Ok(FingerprintBitset { words: vec![0; length / 64], length, radius })
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.count_ones() == 0
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        let bit = bit % self.length;
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        let bit = bit % self.length;
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.length).filter(|&b| self.get(b))
    }

    /// Bitwise OR; both sides must share length and radius.
    pub fn union(&self, other: &Self) -> Result<Self, FingerprintError> {
        self.check(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect();
        Ok(FingerprintBitset { words, ..self.clone() })
    }

    fn check(&self, other: &Self) -> Result<(), FingerprintError> {
        if self.length != other.length || self.radius != other.radius {
            return Err(FingerprintError::Mismatch(self.length, self.radius, other.length, other.radius));
        }
        Ok(())
    }
}

fn bond_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Radius-0 identifier of an atom environment.
pub fn atom_identifier(atomic_number: u8, charge: i8, degree: usize, aromatic: bool) -> u64 {
    let mut bytes = Vec::with_capacity(12);
    bytes.push(0u8);
    bytes.push(atomic_number);
    bytes.push(charge as u8);
    bytes.extend_from_slice(&(degree as u32).to_le_bytes());
    bytes.push(aromatic as u8);
    xxh3_64_with_seed(&bytes, FINGERPRINT_SEED)
}

pub fn fingerprint(mol: &Molecule, radius: u32, length: usize) -> Result<FingerprintBitset, FingerprintError> {
    let mut fp = FingerprintBitset::new(length, radius)?;
    if mol.is_empty() {
        return Err(FingerprintError::EmptyMolecule);
    }
    let n = mol.atom_count();
    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let a = mol.atom(i);
            atom_identifier(a.element.atomic_number(), a.charge, mol.degree(i), a.aromatic)
        })
        .collect();
    for &id in &ids {
        fp.set((id % length as u64) as usize);
    }
    for iteration in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut env: Vec<(u8, u64)> =
                    mol.neighbors(i).iter().map(|&(nb, bi)| (bond_code(mol.bonds()[bi].order), ids[nb])).collect();
                env.sort_unstable();
                let mut bytes = Vec::with_capacity(16 + env.len() * 9);
                bytes.extend_from_slice(&iteration.to_le_bytes());
                bytes.extend_from_slice(&ids[i].to_le_bytes());
                for (code, id) in env {
                    bytes.push(code);
                    bytes.extend_from_slice(&id.to_le_bytes());
                }
                xxh3_64_with_seed(&bytes, FINGERPRINT_SEED)
            })
            .collect();
        ids = next;
        for &id in &ids {
            fp.set((id % length as u64) as usize);
        }
    }
    Ok(fp)
}

/// Fingerprint of a molecule set as the union over its members.
pub fn fingerprint_set(mols: &[Molecule], radius: u32, length: usize) -> Result<FingerprintBitset, FingerprintError> {
    let mut acc = FingerprintBitset::new(length, radius)?;
    if mols.iter().all(|m| m.is_empty()) {
        return Err(FingerprintError::EmptyMolecule);
    }
    for mol in mols.iter().filter(|m| !m.is_empty()) {
        acc = acc.union(&fingerprint(mol, radius, length)?)?;
    }
    Ok(acc)
}

/// `|a AND b| / |a OR b|`, defined as 1 when both are empty.
pub fn tanimoto(a: &FingerprintBitset, b: &FingerprintBitset) -> Result<f64, FingerprintError> {
    a.check(b)?;
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn fp(s: &str) -> FingerprintBitset {
        fingerprint(&parse_smiles(s).unwrap(), DEFAULT_RADIUS, DEFAULT_LENGTH).unwrap()
    }

    fn bits(length: usize, on: &[usize]) -> FingerprintBitset {
        let mut f = FingerprintBitset::new(length, 2).unwrap();
        for &b in on {
            f.set(b);
        }
        f
    }

    #[test]
    fn traversal_invariant() {
        assert_eq!(fp("OCC"), fp("CCO"));
        assert_eq!(fp("c1ccccc1C(=O)O"), fp("OC(=O)c1ccccc1"));
    }

    #[test]
    fn radius_zero_ethanol_matches_hand_enumeration() {
        // Environments: C with one neighbor, C with two, O with one.
        let expected: std::collections::BTreeSet<usize> = [(6u8, 1usize), (6, 2), (8, 1)]
            .iter()
            .map(|&(z, d)| {
                let mut bytes = vec![0u8, z, 0u8];
                bytes.extend_from_slice(&(d as u32).to_le_bytes());
                bytes.push(0);
                (xxh3_64_with_seed(&bytes, FINGERPRINT_SEED) % 2048) as usize
            })
            .collect();
        let got = fingerprint(&parse_smiles("CCO").unwrap(), 0, 2048).unwrap();
        assert_eq!(got.ones().collect::<std::collections::BTreeSet<_>>(), expected);
        assert_eq!(got.count_ones(), 3);
    }

    #[test]
    fn union_over_components() {
        let both = fp("CCO.Cl");
        assert_eq!(both, fp("CCO").union(&fp("Cl")).unwrap());
    }

    #[test]
    fn tanimoto_values() {
        let f = fp("CC(=O)Nc1ccccc1");
        assert_eq!(tanimoto(&f, &f).unwrap(), 1.0);
        assert_eq!(tanimoto(&bits(64, &[1, 2]), &bits(64, &[3])).unwrap(), 0.0);
        let a = bits(64, &[0, 1, 2, 3, 4]);
        let b = bits(64, &[0, 1, 2, 10, 11]);
        assert!((tanimoto(&a, &b).unwrap() - 3.0 / 7.0).abs() < 1e-12);
        assert_eq!(tanimoto(&bits(64, &[]), &bits(64, &[])).unwrap(), 1.0);
    }

    #[test]
    fn parameter_checks() {
        assert_eq!(FingerprintBitset::new(100, 2), Err(FingerprintError::BadLength(100)));
        assert_eq!(FingerprintBitset::new(32, 2), Err(FingerprintError::BadLength(32)));
        let a = FingerprintBitset::new(64, 2).unwrap();
        let b = FingerprintBitset::new(128, 2).unwrap();
        assert!(matches!(tanimoto(&a, &b), Err(FingerprintError::Mismatch(..))));
        assert_eq!(fingerprint(&crate::chem::Molecule::empty(), 2, 2048), Err(FingerprintError::EmptyMolecule));
    }
}
