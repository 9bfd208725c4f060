//! Molecular graphs, SMILES reading/writing and canonical forms.

mod canon;
mod element;
mod iso;
mod smiles;
mod writer;

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

pub use canon::{canonical_smiles, canonicalize, canonicalize_set, CANON_LEAF_BUDGET, EXHAUSTIVE_ATOMS};
pub use element::Element;
pub use iso::is_isomorphic;
pub use smiles::{parse_smiles, parse_smiles_lenient, SmilesError, SmilesErrorKind};
pub use writer::{write_smiles, write_smiles_with_order};

/// Tetrahedral chirality tag, carried through verbatim and never interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Chirality {
    /// `@`
    Anticlockwise,
    /// `@@`
    Clockwise,
}

impl Chirality {
    pub fn symbol(self) -> &'static str {
        match self {
            Chirality::Anticlockwise => "@",
            Chirality::Clockwise => "@@",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    pub isotope: Option<u16>,
    /// Hydrogen count written inside a bracket atom. `None` for organic-subset
    /// atoms, whose hydrogens are implied by valence.
    pub hydrogens: Option<u8>,
    pub map: Option<u32>,
    pub chirality: Option<Chirality>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom { element, aromatic: false, charge: 0, isotope: None, hydrogens: None, map: None, chirality: None }
    }

    pub fn aromatic(element: Element) -> Self {
        Atom { aromatic: true, ..Atom::new(element) }
    }

    pub fn is_heavy(&self) -> bool {
        self.element != Element::H
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Valence contribution; aromatic bonds count one here and the
    /// aromatic atom correction lives in [`Molecule::bond_valence`].
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn code(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

/// Direction of a `/` or `\` single bond, relative to the bond's stored
/// `(a, b)` orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondDirection {
    Up,
    Down,
}

impl BondDirection {
    pub fn flipped(self) -> Self {
        match self {
            BondDirection::Up => BondDirection::Down,
            BondDirection::Down => BondDirection::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub direction: Option<BondDirection>,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond { a, b, order, direction: None }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    /// Direction tag as seen when walking the bond from `from`.
    pub fn direction_from(&self, from: usize) -> Option<BondDirection> {
        self.direction.map(|d| if from == self.a { d } else { d.flipped() })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("bond {0}-{1} references a missing atom")]
    BadBondIndex(usize, usize),
    #[error("self bond on atom {0}")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("atom map {0} is used more than once")]
    DuplicateMap(u32),
    #[error("atom map 0 is not allowed")]
    ZeroMap,
    #[error("aromatic bond {0}-{1} joins a non-aromatic atom")]
    AromaticBond(usize, usize),
    #[error("empty molecule")]
    Empty,
    #[error("atom index {0} out of range")]
    AtomIndex(usize),
}

/// Undirected attributed molecular graph. Dot-separated parts of a SMILES
/// string become separate connected components of one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut seen = HashSet::new();
        for bond in &bonds {
            if bond.a >= n || bond.b >= n {
                return Err(GraphError::BadBondIndex(bond.a, bond.b));
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfBond(bond.a));
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateBond(key.0, key.1));
            }
            if bond.order == BondOrder::Aromatic && !(atoms[bond.a].aromatic && atoms[bond.b].aromatic) {
                return Err(GraphError::AromaticBond(bond.a, bond.b));
            }
        }
        let mut maps = HashSet::new();
        for atom in &atoms {
            match atom.map {
                Some(0) => return Err(GraphError::ZeroMap),
                Some(m) if !maps.insert(m) => return Err(GraphError::DuplicateMap(m)),
                _ => {}
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        Ok(Molecule { atoms, bonds, adjacency })
    }

    pub fn empty() -> Self {
        Molecule { atoms: Vec::new(), bonds: Vec::new(), adjacency: Vec::new() }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, idx: usize) -> &Atom {
        &self.atoms[idx]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_heavy()).count()
    }

    /// `(neighbor, bond index)` pairs.
    pub fn neighbors(&self, idx: usize) -> &[(usize, usize)] {
        &self.adjacency[idx]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a].iter().find(|(nb, _)| *nb == b).map(|&(_, bi)| &self.bonds[bi])
    }

    /// Sum of bond orders, with one extra unit for aromatic atoms of elements
    /// that donate one pi electron (C, B, N, P).
    pub fn bond_valence(&self, idx: usize) -> u32 {
        let atom = &self.atoms[idx];
        let mut sum: u32 = self.adjacency[idx].iter().map(|&(_, bi)| self.bonds[bi].order.valence()).sum();
        let has_aromatic = self.adjacency[idx].iter().any(|&(_, bi)| self.bonds[bi].order == BondOrder::Aromatic);
        if atom.aromatic && has_aromatic && atom.element.aromatic_adds_valence() {
            sum += 1;
        }
        sum
    }

    /// Implicit hydrogen count of an organic-subset atom. Negative when the
    /// bonds exceed every allowed valence. Bracket atoms report their
    /// explicit count.
    pub fn implicit_hydrogens(&self, idx: usize) -> i32 {
        let atom = &self.atoms[idx];
        if let Some(h) = atom.hydrogens {
            return h as i32;
        }
        let used = self.bond_valence(idx) as i32;
        let valences = atom.element.default_valences();
        if valences.is_empty() {
            return 0;
        }
        for &v in valences {
            if v as i32 >= used {
                return v as i32 - used;
            }
        }
        *valences.last().unwrap() as i32 - used
    }

    /// Total attached hydrogens, explicit or implied, clamped at zero.
    pub fn total_hydrogens(&self, idx: usize) -> u32 {
        self.implicit_hydrogens(idx).max(0) as u32
    }

    /// True when some organic-subset atom carries more bonds than any of its
    /// allowed valences.
    pub fn has_valence_violation(&self) -> bool {
        (0..self.atoms.len()).any(|i| {
            let atom = &self.atoms[i];
            if atom.hydrogens.is_none() {
                return self.implicit_hydrogens(i) < 0;
            }
            if atom.charge != 0 || !atom.element.is_organic() {
                return false;
            }
            let max = *atom.element.default_valences().last().unwrap_or(&u8::MAX) as u32;
            self.bond_valence(i) + atom.hydrogens.unwrap_or(0) as u32 > max
        })
    }

    /// Connected components as sorted atom index lists, ordered by their
    /// smallest atom index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            label[start] = id;
            let mut stack = vec![start];
            while let Some(a) = stack.pop() {
                for &(nb, _) in &self.adjacency[a] {
                    if label[nb] == usize::MAX {
                        label[nb] = id;
                        members.push(nb);
                        stack.push(nb);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Induced subgraph on `indices`, in the given order.
    pub fn subgraph(&self, indices: &[usize]) -> Molecule {
        let mut position = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in indices.iter().enumerate() {
            position[old] = new;
        }
        let atoms = indices.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| position[b.a] != usize::MAX && position[b.b] != usize::MAX)
            .map(|b| Bond { a: position[b.a], b: position[b.b], ..b.clone() })
            .collect();
        Molecule::new(atoms, bonds).expect("induced subgraph of a valid graph")
    }

    /// Splits into one graph per connected component.
    pub fn split_components(&self) -> Vec<Molecule> {
        self.components().iter().map(|c| self.subgraph(c)).collect()
    }

    /// Disjoint union; atom maps must stay unique.
    pub fn combine<'a, I>(parts: I) -> Result<Molecule, GraphError>
    where
        I: IntoIterator<Item = &'a Molecule>,
    {
        let mut atoms = Vec::new();
        let mut bonds = Vec::new();
        for part in parts {
            let offset = atoms.len();
            atoms.extend(part.atoms.iter().cloned());
            bonds.extend(part.bonds.iter().map(|b| Bond { a: b.a + offset, b: b.b + offset, ..b.clone() }));
        }
        Molecule::new(atoms, bonds)
    }

    pub fn has_maps(&self) -> bool {
        self.atoms.iter().any(|a| a.map.is_some())
    }

    pub fn atom_with_map(&self, map: u32) -> Option<usize> {
        self.atoms.iter().position(|a| a.map == Some(map))
    }

    pub fn without_maps(&self) -> Molecule {
        let mut out = self.clone();
        for atom in &mut out.atoms {
            atom.map = None;
        }
        out
    }

    /// Drops atom maps and rewrites bracket atoms that an organic-subset
    /// token would express identically (`[CH3:1]` becomes `C`).
    pub fn normalized(&self) -> Molecule {
        self.without_maps().normalized_hydrogens()
    }

    /// Like [`Molecule::normalized`] but keeps atom maps.
    pub fn normalized_hydrogens(&self) -> Molecule {
        let mut out = self.clone();
        for i in 0..out.atoms.len() {
            let atom = &out.atoms[i];
            let Some(h) = atom.hydrogens else { continue };
            if atom.charge != 0
                || atom.map.is_some()
                || atom.isotope.is_some()
                || atom.chirality.is_some()
                || !atom.element.is_organic()
                || (atom.aromatic && !atom.element.is_organic_aromatic())
            {
                continue;
            }
            out.atoms[i].hydrogens = None;
            if out.implicit_hydrogens(i) != h as i32 {
                out.atoms[i].hydrogens = Some(h);
            }
        }
        out
    }

    /// Every atom written with an explicit hydrogen count equal to its
    /// current total, so later bond edits do not change hydrogen counts.
    pub fn with_explicit_hydrogens(&self) -> Molecule {
        let mut out = self.clone();
        for i in 0..out.atoms.len() {
            out.atoms[i].hydrogens = Some(self.total_hydrogens(i) as u8);
        }
        out
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match write_smiles(self, None) {
            Ok(s) => f.write_str(&s),
            Err(_) => f.write_str("<invalid>"),
        }
    }
}

/// Largest connected component by heavy-atom count; ties go to the
/// smallest canonical string.
pub fn largest_fragment(mol: &Molecule) -> Result<Molecule, GraphError> {
    if mol.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut best: Option<(usize, String, Molecule)> = None;
    for part in mol.split_components() {
        let heavy = part.heavy_atom_count();
        let canon = canonicalize(&part);
        let better = match &best {
            None => true,
            Some((h, c, _)) => heavy > *h || (heavy == *h && canon < *c),
        };
        if better {
            best = Some((heavy, canon, part));
        }
    }
    Ok(best.unwrap().2)
}
