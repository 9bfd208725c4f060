use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use super::canon::min_writeout;
use super::{BondDirection, BondOrder, GraphError, Molecule};

/// Writes `mol` as SMILES. With a root, the root's component is written
/// first starting from that atom and the remaining components follow in
/// canonical order; without one every component starts at its canonical
/// root. Atom maps are kept.
pub fn write_smiles(mol: &Molecule, root: Option<usize>) -> Result<String, GraphError> {
    if let Some(r) = root {
        if r >= mol.atom_count() {
            return Err(GraphError::AtomIndex(r));
        }
    }
    let mut first = None;
    let mut rest = Vec::new();
    for comp in mol.components() {
        match root {
            Some(r) if comp.binary_search(&r).is_ok() => {
                first = Some(min_writeout(mol, &comp, Some(r)));
            }
            _ => rest.push(min_writeout(mol, &comp, None)),
        }
    }
    rest.sort();
    Ok(first.into_iter().chain(rest).collect::<Vec<_>>().join("."))
}

/// Writes the component containing `root` with an explicit neighbor visiting
/// order for every atom. `orders[i]` must be a permutation of atom `i`'s
/// neighbors; entries for atoms outside the component are ignored.
pub fn write_smiles_with_order(mol: &Molecule, root: usize, orders: &[Vec<usize>]) -> Result<String, GraphError> {
    if root >= mol.atom_count() {
        return Err(GraphError::AtomIndex(root));
    }
    if orders.len() != mol.atom_count() {
        return Err(GraphError::AtomIndex(orders.len()));
    }
    for (i, order) in orders.iter().enumerate() {
        let mut given: Vec<usize> = order.clone();
        let mut actual: Vec<usize> = mol.neighbors(i).iter().map(|&(nb, _)| nb).collect();
        given.sort_unstable();
        actual.sort_unstable();
        if given != actual {
            return Err(GraphError::AtomIndex(i));
        }
    }
    Ok(emit_with_order(mol, root, orders))
}

/// Depth-first write-out driven by per-atom neighbor orders. Ring bond
/// digits at an atom follow that atom's order; each opening takes the
/// lowest free digit and the bond symbol is written at the opening end.
pub(crate) fn emit_with_order(mol: &Molecule, root: usize, orders: &[Vec<usize>]) -> String {
    let n = mol.atom_count();
    let mut visited = vec![false; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut ring_edges: HashSet<(usize, usize)> = HashSet::new();

    // (atom, parent, next index into orders[atom])
    let mut stack = vec![(root, usize::MAX, 0usize)];
    visited[root] = true;
    while let Some(frame) = stack.last_mut() {
        let (atom, parent, idx) = *frame;
        if idx >= orders[atom].len() {
            stack.pop();
            continue;
        }
        frame.2 += 1;
        let nb = orders[atom][idx];
        if nb == parent {
            continue;
        }
        if !visited[nb] {
            visited[nb] = true;
            children[atom].push(nb);
            stack.push((nb, atom, 0));
        } else {
            ring_edges.insert((atom.min(nb), atom.max(nb)));
        }
    }

    let mut out = String::new();
    let mut emitted = vec![false; n];
    let mut free = DigitPool::default();
    let mut open: HashMap<(usize, usize), u32> = HashMap::new();

    enum Step {
        Atom(usize, Option<usize>),
        Open,
        Close,
    }
    let mut todo = vec![Step::Atom(root, None)];
    while let Some(step) = todo.pop() {
        let (atom, from) = match step {
            Step::Open => {
                out.push('(');
                continue;
            }
            Step::Close => {
                out.push(')');
                continue;
            }
            Step::Atom(a, f) => (a, f),
        };
        if let Some(p) = from {
            out.push_str(bond_symbol(mol, p, atom));
        }
        out.push_str(&atom_token(mol, atom));
        emitted[atom] = true;
        for &nb in &orders[atom] {
            let key = (atom.min(nb), atom.max(nb));
            if !ring_edges.contains(&key) {
                continue;
            }
            if emitted[nb] {
                let digit = open.remove(&key).expect("ring opened before closing");
                push_digit(&mut out, digit);
                free.release(digit);
            } else {
                let digit = free.take();
                out.push_str(bond_symbol(mol, atom, nb));
                push_digit(&mut out, digit);
                open.insert(key, digit);
            }
        }
        let kids = &children[atom];
        if let Some((&last, branches)) = kids.split_last() {
            todo.push(Step::Atom(last, Some(atom)));
            for &child in branches.iter().rev() {
                todo.push(Step::Close);
                todo.push(Step::Atom(child, Some(atom)));
                todo.push(Step::Open);
            }
        }
    }
    out
}

#[derive(Default)]
struct DigitPool {
    used: BTreeSet<u32>,
}

impl DigitPool {
    fn take(&mut self) -> u32 {
        let mut d = 1;
        while self.used.contains(&d) {
            d += 1;
        }
        self.used.insert(d);
        d
    }

    fn release(&mut self, d: u32) {
        self.used.remove(&d);
    }
}

fn push_digit(out: &mut String, digit: u32) {
    if digit < 10 {
        out.push(char::from(b'0' + digit as u8));
    } else {
        let _ = write!(out, "%{digit:02}");
    }
}

pub(crate) fn bond_symbol(mol: &Molecule, from: usize, to: usize) -> &'static str {
    let bond = mol.bond_between(from, to).expect("bonded atoms");
    let both_aromatic = mol.atom(from).aromatic && mol.atom(to).aromatic;
    match bond.order {
        BondOrder::Aromatic => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Single => match bond.direction_from(from) {
            Some(BondDirection::Up) => "/",
            Some(BondDirection::Down) => "\\",
            None if both_aromatic => "-",
            None => "",
        },
    }
}

pub(crate) fn atom_token(mol: &Molecule, idx: usize) -> String {
    let atom = mol.atom(idx);
    let symbol = atom.element.symbol();
    let bare_ok = atom.hydrogens.is_none()
        && atom.charge == 0
        && atom.isotope.is_none()
        && atom.map.is_none()
        && atom.chirality.is_none()
        && if atom.aromatic { atom.element.is_organic_aromatic() } else { atom.element.is_organic() };
    if bare_ok {
        return if atom.aromatic { symbol.to_ascii_lowercase() } else { symbol.to_string() };
    }
    let mut s = String::from("[");
    if let Some(iso) = atom.isotope {
        let _ = write!(s, "{iso}");
    }
    if atom.aromatic {
        s.push_str(&symbol.to_ascii_lowercase());
    } else {
        s.push_str(symbol);
    }
    if let Some(ch) = atom.chirality {
        s.push_str(ch.symbol());
    }
    let h = atom.hydrogens.map(u32::from).unwrap_or_else(|| mol.total_hydrogens(idx));
    match h {
        0 => {}
        1 => s.push('H'),
        _ => {
            let _ = write!(s, "H{h}");
        }
    }
    match atom.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => {
            let _ = write!(s, "+{c}");
        }
        c => {
            let _ = write!(s, "-{}", -c);
        }
    }
    if let Some(m) = atom.map {
        let _ = write!(s, ":{m}");
    }
    s.push(']');
    s
}
