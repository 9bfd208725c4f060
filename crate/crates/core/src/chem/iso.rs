use super::{BondDirection, BondOrder, Molecule};

fn atom_key(mol: &Molecule, i: usize) -> impl PartialEq + '_ {
    let a = mol.atom(i);
    (a.element, a.aromatic, a.charge, a.isotope, mol.total_hydrogens(i), a.map, a.chirality, mol.degree(i))
}

fn bond_key(mol: &Molecule, from: usize, to: usize) -> Option<(BondOrder, Option<BondDirection>)> {
    mol.bond_between(from, to).map(|b| (b.order, b.direction_from(from)))
}

/// Attribute-preserving graph isomorphism: element, aromaticity, charge,
/// isotope, total hydrogens, atom map, chirality tag, bond order and bond
/// direction (relative to walking order) must all correspond.
pub fn is_isomorphic(a: &Molecule, b: &Molecule) -> bool {
    if a.atom_count() != b.atom_count() || a.bonds().len() != b.bonds().len() {
        return false;
    }
    let n = a.atom_count();
    // BFS order over a so each new atom (after the first of a component)
    // has an already-mapped neighbor.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for comp in a.components() {
        let start = comp[0];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for &(nb, _) in a.neighbors(x) {
                if !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; n];
    extend(a, b, &order, 0, &mut mapping, &mut used)
}

fn extend(a: &Molecule, b: &Molecule, order: &[usize], depth: usize, mapping: &mut [usize], used: &mut [bool]) -> bool {
    if depth == order.len() {
        return true;
    }
    let x = order[depth];
    let anchor = a.neighbors(x).iter().map(|&(nb, _)| nb).find(|&nb| mapping[nb] != usize::MAX);
    let candidates: Vec<usize> = match anchor {
        Some(nb) => b.neighbors(mapping[nb]).iter().map(|&(y, _)| y).collect(),
        None => (0..b.atom_count()).collect(),
    };
    for y in candidates {
        if used[y] || atom_key(a, x) != atom_key(b, y) {
            continue;
        }
        let consistent = a.neighbors(x).iter().all(|&(nb, _)| {
            let m = mapping[nb];
            m == usize::MAX || bond_key(a, x, nb) == bond_key(b, y, m)
        });
        if !consistent {
            continue;
        }
        // every mapped b-neighbor of y must come from a mapped a-neighbor of x
        let mapped_b_neighbors = b.neighbors(y).iter().filter(|&&(nb, _)| used[nb]).count();
        let mapped_a_neighbors = a.neighbors(x).iter().filter(|&&(nb, _)| mapping[nb] != usize::MAX).count();
        if mapped_a_neighbors != mapped_b_neighbors {
            continue;
        }
        mapping[x] = y;
        used[y] = true;
        if extend(a, b, order, depth + 1, mapping, used) {
            return true;
        }
        mapping[x] = usize::MAX;
        used[y] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn iso(x: &str, y: &str) -> bool {
        is_isomorphic(&parse_smiles(x).unwrap(), &parse_smiles(y).unwrap())
    }

    #[test]
    fn isomorphism_basics() {
        assert!(iso("CCO", "OCC"));
        assert!(iso("c1ccccc1C", "Cc1ccccc1"));
        assert!(!iso("CCO", "CCN"));
        assert!(!iso("C1CC1C", "CCCC"));
        assert!(!iso("[CH3:1]O", "[CH3:2]O"));
        assert!(iso("F/C=C/F", "F\\C=C\\F"));
        assert!(!iso("F/C=C/F", "F/C=C\\F"));
        assert!(iso("F/C=C/F", "C(\\F)=C/F"));
        assert!(!iso("C1CCCCC1.C1CCCCC1", "C1CCCCCCCCCCC1"));
    }
}
