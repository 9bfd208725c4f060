use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{Atom, Bond, BondDirection, BondOrder, Chirality, Element, GraphError, Molecule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    Empty,
    UnbalancedParenthesis,
    EmptyBranch,
    UnclosedRing(u32),
    ConflictingRingBond(u32),
    UnknownElement(String),
    InvalidBracketAtom(String),
    MisplacedBond,
    UnexpectedCharacter(char),
    Graph(GraphError),
}

impl fmt::Display for SmilesErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmilesErrorKind::Empty => write!(f, "empty input"),
            SmilesErrorKind::UnbalancedParenthesis => write!(f, "unbalanced parenthesis"),
            SmilesErrorKind::EmptyBranch => write!(f, "empty branch"),
            SmilesErrorKind::UnclosedRing(n) => write!(f, "unclosed ring bond {n}"),
            SmilesErrorKind::ConflictingRingBond(n) => {
                write!(f, "conflicting bond symbols on ring bond {n}")
            }
            SmilesErrorKind::UnknownElement(s) => write!(f, "unknown element '{s}'"),
            SmilesErrorKind::InvalidBracketAtom(s) => write!(f, "invalid bracket atom '[{s}]'"),
            SmilesErrorKind::MisplacedBond => write!(f, "bond symbol without two atoms"),
            SmilesErrorKind::UnexpectedCharacter(c) => write!(f, "unexpected character '{c}'"),
            SmilesErrorKind::Graph(e) => write!(f, "{e}"),
        }
    }
}

/// Parse failure with the character offset (into the trimmed input) where
/// it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    pub position: usize,
}

impl SmilesError {
    fn new(kind: SmilesErrorKind, position: usize) -> Self {
        SmilesError { kind, position }
    }
}

pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    Parser::new(text.trim(), false).run()
}

/// Like [`parse_smiles`] but discards atom maps, so inputs with duplicated
/// maps still yield a graph.
pub fn parse_smiles_lenient(text: &str) -> Result<Molecule, SmilesError> {
    Parser::new(text.trim(), true).run()
}

type BondSymbol = (BondOrder, Option<BondDirection>);

struct RingOpen {
    atom: usize,
    bond: Option<BondSymbol>,
    position: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    strip_maps: bool,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending: Option<(BondSymbol, usize)>,
    branches: Vec<(Option<usize>, usize, usize)>,
    rings: BTreeMap<u32, RingOpen>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, strip_maps: bool) -> Self {
        Parser {
            text: text.as_bytes(),
            pos: 0,
            strip_maps,
            atoms: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: BTreeMap::new(),
        }
    }

    fn err<T>(&self, kind: SmilesErrorKind, position: usize) -> Result<T, SmilesError> {
        Err(SmilesError::new(kind, position))
    }

    fn peek(&self, offset: usize) -> Option<u8> {
        self.text.get(self.pos + offset).copied()
    }

    fn run(mut self) -> Result<Molecule, SmilesError> {
        if self.text.is_empty() {
            return self.err(SmilesErrorKind::Empty, 0);
        }
        while let Some(c) = self.peek(0) {
            let start = self.pos;
            match c {
                b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                    let two = match (c, self.peek(1)) {
                        (b'C', Some(b'l')) => Some(Element::CL),
                        (b'B', Some(b'r')) => Some(Element::BR),
                        _ => None,
                    };
                    let element = match two {
                        Some(e) => {
                            self.pos += 2;
                            e
                        }
                        None => {
                            self.pos += 1;
                            Element::from_symbol(&(c as char).to_string()).unwrap()
                        }
                    };
                    self.add_atom(Atom::new(element), start)?;
                }
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                    self.pos += 1;
                    let symbol = (c.to_ascii_uppercase() as char).to_string();
                    let element = Element::from_symbol(&symbol).unwrap();
                    self.add_atom(Atom::aromatic(element), start)?;
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, start)?;
                }
                b'(' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return self.err(SmilesErrorKind::UnbalancedParenthesis, start);
                    }
                    self.branches.push((self.prev, start, self.atoms.len()));
                    self.pos += 1;
                }
                b')' => {
                    let Some((prev, _, atoms_before)) = self.branches.pop() else {
                        return self.err(SmilesErrorKind::UnbalancedParenthesis, start);
                    };
                    if self.pending.is_some() {
                        return self.err(SmilesErrorKind::MisplacedBond, start);
                    }
                    if self.atoms.len() == atoms_before {
                        return self.err(SmilesErrorKind::EmptyBranch, start);
                    }
                    self.prev = prev;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return self.err(SmilesErrorKind::MisplacedBond, start);
                    }
                    let symbol = match c {
                        b'-' => (BondOrder::Single, None),
                        b'=' => (BondOrder::Double, None),
                        b'#' => (BondOrder::Triple, None),
                        b':' => (BondOrder::Aromatic, None),
                        b'/' => (BondOrder::Single, Some(BondDirection::Up)),
                        _ => (BondOrder::Single, Some(BondDirection::Down)),
                    };
                    self.pending = Some((symbol, start));
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return self.err(SmilesErrorKind::MisplacedBond, start);
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let number = self.ring_number()?;
                    self.ring_bond(number, start)?;
                }
                b'A'..=b'Z' | b'a'..=b'z' => {
                    return self.err(SmilesErrorKind::UnknownElement((c as char).to_string()), start);
                }
                other => {
                    let ch = std::str::from_utf8(&self.text[start..])
                        .ok()
                        .and_then(|s| s.chars().next())
                        .unwrap_or(other as char);
                    return self.err(SmilesErrorKind::UnexpectedCharacter(ch), start);
                }
            }
        }
        let end = self.text.len();
        if let Some((_, pos)) = self.pending {
            return self.err(SmilesErrorKind::MisplacedBond, pos);
        }
        if !self.branches.is_empty() {
            return self.err(SmilesErrorKind::UnbalancedParenthesis, end);
        }
        if let Some((&n, open)) = self.rings.iter().min_by_key(|(_, r)| r.position) {
            return self.err(SmilesErrorKind::UnclosedRing(n), open.position);
        }
        if self.atoms.is_empty() {
            return self.err(SmilesErrorKind::Empty, 0);
        }
        if self.strip_maps {
            for atom in &mut self.atoms {
                atom.map = None;
            }
        }
        Molecule::new(self.atoms, self.bonds).map_err(|e| SmilesError::new(SmilesErrorKind::Graph(e), end))
    }

    fn add_atom(&mut self, atom: Atom, position: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        match (self.prev, self.pending.take()) {
            (Some(p), pending) => {
                let symbol = pending.map(|(s, _)| s);
                self.push_bond(p, idx, symbol, position)?;
            }
            (None, Some((_, pos))) => return self.err(SmilesErrorKind::MisplacedBond, pos),
            (None, None) => {}
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn push_bond(
        &mut self,
        a: usize,
        b: usize,
        symbol: Option<BondSymbol>,
        position: usize,
    ) -> Result<(), SmilesError> {
        let (order, direction) = symbol.unwrap_or_else(|| {
            if self.atoms[a].aromatic && self.atoms[b].aromatic {
                (BondOrder::Aromatic, None)
            } else {
                (BondOrder::Single, None)
            }
        });
        if a == b {
            return self.err(SmilesErrorKind::Graph(GraphError::SelfBond(a)), position);
        }
        if self.bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a)) {
            return self.err(SmilesErrorKind::Graph(GraphError::DuplicateBond(a.min(b), a.max(b))), position);
        }
        self.bonds.push(Bond { a, b, order, direction });
        Ok(())
    }

    fn ring_number(&mut self) -> Result<u32, SmilesError> {
        let start = self.pos;
        let c = self.peek(0).unwrap();
        if c == b'%' {
            match (self.peek(1), self.peek(2)) {
                (Some(d1), Some(d2)) if d1.is_ascii_digit() && d2.is_ascii_digit() => {
                    self.pos += 3;
                    Ok(((d1 - b'0') * 10 + (d2 - b'0')) as u32)
                }
                _ => self.err(SmilesErrorKind::UnexpectedCharacter('%'), start),
            }
        } else {
            self.pos += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn ring_bond(&mut self, number: u32, position: usize) -> Result<(), SmilesError> {
        let Some(current) = self.prev else {
            return self.err(SmilesErrorKind::MisplacedBond, position);
        };
        let here = self.pending.take().map(|(s, _)| s);
        match self.rings.remove(&number) {
            Some(open) => {
                let (a, b, symbol) = match (open.bond, here) {
                    (Some(x), Some(y)) => {
                        let y_seen_from_open = (y.0, y.1.map(BondDirection::flipped));
                        if x != y_seen_from_open && !(x.0 == y.0 && x.1.is_none() && y.1.is_none()) {
                            return self.err(SmilesErrorKind::ConflictingRingBond(number), position);
                        }
                        (open.atom, current, Some(x))
                    }
                    (Some(x), None) => (open.atom, current, Some(x)),
                    (None, Some(y)) => (current, open.atom, Some(y)),
                    (None, None) => (open.atom, current, None),
                };
                self.push_bond(a, b, symbol, position)
            }
            None => {
                self.rings.insert(number, RingOpen { atom: current, bond: here, position });
                Ok(())
            }
        }
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        let Some(len) = self.text[open..].iter().position(|&c| c == b']') else {
            return self.err(SmilesErrorKind::UnbalancedParenthesis, self.text.len());
        };
        let body = &self.text[open + 1..open + len];
        self.pos = open + len + 1;
        let body_str = String::from_utf8_lossy(body).into_owned();
        let invalid = || SmilesError::new(SmilesErrorKind::InvalidBracketAtom(body_str.clone()), open);

        let mut i = 0;
        let number = |i: &mut usize| -> Option<u32> {
            let start = *i;
            while *i < body.len() && body[*i].is_ascii_digit() {
                *i += 1;
            }
            if *i == start {
                None
            } else {
                std::str::from_utf8(&body[start..*i]).ok()?.parse().ok()
            }
        };

        let isotope = match number(&mut i) {
            Some(v) if v == 0 || v > u16::MAX as u32 => return Err(invalid()),
            Some(v) => Some(v as u16),
            None => None,
        };

        let (element, aromatic) = match body.get(i) {
            Some(c) if c.is_ascii_uppercase() => {
                let two = body
                    .get(i + 1)
                    .filter(|c| c.is_ascii_lowercase())
                    .and_then(|&l| Element::from_symbol(&format!("{}{}", *c as char, l as char)));
                match two {
                    Some(e) => {
                        i += 2;
                        (e, false)
                    }
                    None => {
                        let sym = (*c as char).to_string();
                        let e = Element::from_symbol(&sym).ok_or_else(|| {
                            SmilesError::new(SmilesErrorKind::UnknownElement(sym.clone()), open + 1 + i)
                        })?;
                        i += 1;
                        (e, false)
                    }
                }
            }
            Some(c) if c.is_ascii_lowercase() => {
                let pair = body.get(i + 1).map(|&l| format!("{}{}", c.to_ascii_uppercase() as char, l as char));
                let two = pair.as_deref().and_then(Element::from_symbol).filter(|e| e.may_be_aromatic());
                match two {
                    Some(e) => {
                        i += 2;
                        (e, true)
                    }
                    None => {
                        let sym = (c.to_ascii_uppercase() as char).to_string();
                        let e = Element::from_symbol(&sym).filter(|e| e.may_be_aromatic()).ok_or_else(|| {
                            SmilesError::new(SmilesErrorKind::UnknownElement((*c as char).to_string()), open + 1 + i)
                        })?;
                        i += 1;
                        (e, true)
                    }
                }
            }
            _ => return Err(invalid()),
        };

        let mut chirality = None;
        if body.get(i) == Some(&b'@') {
            if body.get(i + 1) == Some(&b'@') {
                chirality = Some(Chirality::Clockwise);
                i += 2;
            } else {
                chirality = Some(Chirality::Anticlockwise);
                i += 1;
            }
        }

        let mut hydrogens = 0u8;
        if body.get(i) == Some(&b'H') {
            i += 1;
            hydrogens = match number(&mut i) {
                Some(v) if v > 9 => return Err(invalid()),
                Some(v) => v as u8,
                None => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(&sign) = body.get(i).filter(|c| **c == b'+' || **c == b'-') {
            let unit = if sign == b'+' { 1 } else { -1 };
            i += 1;
            if let Some(v) = number(&mut i) {
                charge = unit * v as i32;
            } else {
                charge = unit;
                while body.get(i) == Some(&sign) {
                    charge += unit;
                    i += 1;
                }
            }
            if charge.abs() > 15 {
                return Err(invalid());
            }
        }

        let mut map = None;
        if body.get(i) == Some(&b':') {
            i += 1;
            match number(&mut i) {
                Some(0) => return Err(SmilesError::new(SmilesErrorKind::Graph(GraphError::ZeroMap), open)),
                Some(v) => map = Some(v),
                None => return Err(invalid()),
            }
        }

        if i != body.len() {
            return Err(invalid());
        }

        Ok(Atom { element, aromatic, charge: charge as i8, isotope, hydrogens: Some(hydrogens), map, chirality })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(s: &str) -> SmilesErrorKind {
        parse_smiles(s).unwrap_err().kind
    }

    #[test]
    fn benzene_is_six_aromatic_carbons() {
        let mol = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(mol.atom_count(), 6);
        assert!(mol.atoms().iter().all(|a| a.aromatic && a.element == Element::C));
        assert_eq!(mol.bonds().len(), 6);
        assert!(mol.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(mol.components().len(), 1);
    }

    #[test]
    fn acetic_acid_shape() {
        let mol = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(mol.heavy_atom_count(), 4);
        let doubles: Vec<_> = mol.bonds().iter().filter(|b| b.order == BondOrder::Double).collect();
        assert_eq!(doubles.len(), 1);
        assert_eq!(mol.atom(doubles[0].b).element, Element::O);
        assert_eq!(mol.components().len(), 1);
    }

    #[test]
    fn unbalanced_branch_reports_position() {
        let err = parse_smiles("C(").unwrap_err();
        assert_eq!(err.kind, SmilesErrorKind::UnbalancedParenthesis);
        assert_eq!(err.position, 2);
        assert_eq!(parse_smiles("CC)C").unwrap_err().position, 2);
    }

    #[test]
    fn error_kinds() {
        assert_eq!(kind(""), SmilesErrorKind::Empty);
        assert_eq!(kind("   "), SmilesErrorKind::Empty);
        assert_eq!(kind("C1CC"), SmilesErrorKind::UnclosedRing(1));
        assert_eq!(kind("CXC"), SmilesErrorKind::UnknownElement("X".into()));
        assert_eq!(kind("C[Xx]"), SmilesErrorKind::UnknownElement("X".into()));
        assert!(matches!(kind("C[C+H]"), SmilesErrorKind::InvalidBracketAtom(_)));
        assert_eq!(kind("C()C"), SmilesErrorKind::EmptyBranch);
        assert_eq!(kind("=CC"), SmilesErrorKind::MisplacedBond);
        assert_eq!(kind("CC="), SmilesErrorKind::MisplacedBond);
        assert_eq!(kind("C=1CC-1"), SmilesErrorKind::ConflictingRingBond(1));
        assert!(matches!(kind("C11"), SmilesErrorKind::Graph(GraphError::SelfBond(0))));
        assert!(matches!(kind("[CH3:1][CH3:1]"), SmilesErrorKind::Graph(GraphError::DuplicateMap(1))));
        assert!(matches!(kind("C:C"), SmilesErrorKind::Graph(GraphError::AromaticBond(0, 1))));
        assert_eq!(kind("C$"), SmilesErrorKind::UnexpectedCharacter('$'));
    }

    #[test]
    fn bracket_atoms() {
        let mol = parse_smiles("[13CH3:7][N@@H+]([O-])[Fe++].[se]1cccc1").unwrap();
        let c = mol.atom(0);
        assert_eq!((c.isotope, c.hydrogens, c.map), (Some(13), Some(3), Some(7)));
        let n = mol.atom(1);
        assert_eq!((n.chirality, n.hydrogens, n.charge), (Some(Chirality::Clockwise), Some(1), 1));
        assert_eq!(mol.atom(2).charge, -1);
        assert_eq!(mol.atom(3).charge, 2);
        assert!(mol.atom(4).aromatic);
        assert_eq!(mol.atom(4).element.symbol(), "Se");
        assert_eq!(mol.components().len(), 2);
    }

    #[test]
    fn percent_ring_closures_and_dots() {
        let mol = parse_smiles("C%12CC%12.O").unwrap();
        assert_eq!(mol.bonds().len(), 3);
        assert_eq!(mol.components().len(), 2);
    }

    #[test]
    fn directional_bonds_keep_orientation() {
        let mol = parse_smiles("F/C=C/F").unwrap();
        let first = &mol.bonds()[0];
        assert_eq!((first.a, first.b, first.direction), (0, 1, Some(BondDirection::Up)));
        let last = &mol.bonds()[2];
        assert_eq!(last.direction_from(3), Some(BondDirection::Down));
    }

    #[test]
    fn lenient_parse_drops_duplicate_maps() {
        let mol = parse_smiles_lenient("[CH3:1][CH3:1]").unwrap();
        assert!(!mol.has_maps());
    }
}
