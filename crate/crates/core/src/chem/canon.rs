//! Canonical SMILES: the lexicographically smallest write-out of a component
//! over every root atom and every depth-first neighbor ordering.
//!
//! The search enumerates depth-first spanning trees lazily (at each step any
//! unvisited neighbor of the deepest open atom may be descended into) and,
//! per tree, every ordering of each atom's ring-closure partners. That set of
//! strings is exactly the set produced by [`write_smiles_with_order`] over all
//! neighbor permutations. Roots whose token cannot start the minimum are
//! skipped. Components with more than [`EXHAUSTIVE_ATOMS`] atoms, or with
//! more than [`CANON_LEAF_BUDGET`] write-outs and more than eight heavy
//! atoms, are searched with choices
//! restricted to refined-rank minima instead, which is still invariant under
//! atom relabeling.
//!
//! [`write_smiles_with_order`]: super::write_smiles_with_order

use super::writer::{atom_token, emit_with_order};
use super::{Molecule, SmilesError};

/// Upper bound on exhaustive write-outs per component.
pub const CANON_LEAF_BUDGET: usize = 200_000;

/// Largest component searched exhaustively.
pub const EXHAUSTIVE_ATOMS: usize = 10;

/// Components with at most this many heavy atoms ignore the leaf budget, so
/// their canonical string is always the true minimum.
const ALWAYS_EXACT_HEAVY: usize = 8;

/// Canonical string of a molecule: maps stripped, hydrogens normalized,
/// components written canonically, sorted and dot-joined.
pub fn canonicalize(mol: &Molecule) -> String {
    let norm = mol.normalized();
    let mut parts: Vec<String> = norm.components().iter().map(|c| min_writeout(&norm, c, None)).collect();
    parts.sort();
    parts.join(".")
}

/// Parses and canonicalizes in one step.
pub fn canonical_smiles(text: &str) -> Result<String, SmilesError> {
    super::parse_smiles(text).map(|m| canonicalize(&m))
}

/// Canonical form of a set of molecules: every component of every member,
/// sorted and dot-joined, so member order and grouping do not matter.
pub fn canonicalize_set(mols: &[Molecule]) -> String {
    let mut parts: Vec<String> = Vec::new();
    for mol in mols {
        let c = canonicalize(mol);
        if !c.is_empty() {
            parts.extend(c.split('.').map(str::to_string));
        }
    }
    parts.sort();
    parts.join(".")
}

pub(crate) fn min_writeout(mol: &Molecule, comp: &[usize], root: Option<usize>) -> String {
    let tokens: Vec<String> = (0..mol.atom_count())
        .map(|i| if comp.binary_search(&i).is_ok() { atom_token(mol, i) } else { String::new() })
        .collect();
    let roots = match root {
        Some(r) => vec![r],
        None => candidate_roots(comp, &tokens),
    };
    let heavy = comp.iter().filter(|&&i| mol.atom(i).is_heavy()).count();
    if heavy <= ALWAYS_EXACT_HEAVY || comp.len() <= EXHAUSTIVE_ATOMS {
        let budget = if heavy <= ALWAYS_EXACT_HEAVY { usize::MAX } else { CANON_LEAF_BUDGET };
        let mut search = Search::new(mol, comp, None, budget);
        for &r in &roots {
            search.run_from(r);
            if search.aborted {
                break;
            }
        }
        if !search.aborted {
            return search.best.expect("non-empty component");
        }
    }
    let ranks = refined_ranks(mol, comp, &tokens);
    let min_rank = roots.iter().map(|&r| ranks[r]).min().unwrap();
    let mut ranked = Search::new(mol, comp, Some(ranks.clone()), usize::MAX);
    for &r in roots.iter().filter(|&&r| ranks[r] == min_rank) {
        ranked.run_from(r);
    }
    ranked.best.expect("non-empty component")
}

/// Atoms whose token is the minimum token or extends it. Any other token
/// differs from the minimum at a position inside the minimum and is larger
/// there, so strings starting with it cannot be minimal.
fn candidate_roots(comp: &[usize], tokens: &[String]) -> Vec<usize> {
    let min = comp.iter().map(|&i| &tokens[i]).min().unwrap();
    comp.iter().copied().filter(|&i| tokens[i].starts_with(min.as_str())).collect()
}

/// Iterative neighborhood refinement of atom classes, starting from the atom
/// token, degree and hydrogen count.
fn refined_ranks(mol: &Molecule, comp: &[usize], tokens: &[String]) -> Vec<usize> {
    let n = mol.atom_count();
    let mut ranks = vec![usize::MAX; n];
    let initial: Vec<(String, usize, u32)> =
        comp.iter().map(|&i| (tokens[i].clone(), mol.degree(i), mol.total_hydrogens(i))).collect();
    assign_ranks(comp, &initial, &mut ranks);
    let mut classes = count_classes(comp, &ranks);
    loop {
        let keys: Vec<(usize, Vec<(char, usize)>)> = comp
            .iter()
            .map(|&i| {
                let mut nbrs: Vec<(char, usize)> =
                    mol.neighbors(i).iter().map(|&(nb, bi)| (mol.bonds()[bi].order.code(), ranks[nb])).collect();
                nbrs.sort_unstable();
                (ranks[i], nbrs)
            })
            .collect();
        let mut next = ranks.clone();
        assign_ranks(comp, &keys, &mut next);
        let next_classes = count_classes(comp, &next);
        ranks = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
    ranks
}

fn assign_ranks<K: Ord + Clone>(comp: &[usize], keys: &[K], ranks: &mut [usize]) {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    for (pos, &atom) in comp.iter().enumerate() {
        ranks[atom] = sorted.binary_search(&keys[pos]).unwrap();
    }
}

fn count_classes(comp: &[usize], ranks: &[usize]) -> usize {
    let mut v: Vec<usize> = comp.iter().map(|&i| ranks[i]).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

struct Search<'a> {
    mol: &'a Molecule,
    comp: &'a [usize],
    ranks: Option<Vec<usize>>,
    budget: usize,
    visited: Vec<bool>,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    stack: Vec<usize>,
    leaves: usize,
    aborted: bool,
    best: Option<String>,
}

impl<'a> Search<'a> {
    fn new(mol: &'a Molecule, comp: &'a [usize], ranks: Option<Vec<usize>>, budget: usize) -> Self {
        let n = mol.atom_count();
        Search {
            mol,
            comp,
            ranks,
            budget,
            visited: vec![false; n],
            parent: vec![usize::MAX; n],
            children: vec![Vec::new(); n],
            stack: Vec::new(),
            leaves: 0,
            aborted: false,
            best: None,
        }
    }

    fn run_from(&mut self, root: usize) {
        self.visited[root] = true;
        self.parent[root] = usize::MAX;
        self.stack.push(root);
        self.step();
        self.stack.clear();
        self.visited[root] = false;
    }

    fn step(&mut self) {
        if self.aborted {
            return;
        }
        let saved = self.stack.clone();
        while let Some(&top) = self.stack.last() {
            if self.mol.neighbors(top).iter().any(|&(nb, _)| !self.visited[nb]) {
                break;
            }
            self.stack.pop();
        }
        let Some(&top) = self.stack.last() else {
            self.leaf();
            self.stack = saved;
            return;
        };
        let mut candidates: Vec<usize> =
            self.mol.neighbors(top).iter().map(|&(nb, _)| nb).filter(|&nb| !self.visited[nb]).collect();
        if let Some(ranks) = &self.ranks {
            let key = |nb: usize| {
                let order = self.mol.bond_between(top, nb).unwrap().order.code();
                (ranks[nb], order)
            };
            let min = candidates.iter().map(|&c| key(c)).min().unwrap();
            candidates.retain(|&c| key(c) == min);
        }
        for c in candidates {
            self.visited[c] = true;
            self.parent[c] = top;
            self.children[top].push(c);
            self.stack.push(c);
            self.step();
            self.stack.pop();
            self.children[top].pop();
            self.visited[c] = false;
            if self.aborted {
                break;
            }
        }
        self.stack = saved;
    }

    fn leaf(&mut self) {
        let n = self.mol.atom_count();
        let mut ring: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &a in self.comp {
            for &(nb, _) in self.mol.neighbors(a) {
                let tree = self.parent[nb] == a || self.parent[a] == nb;
                if !tree {
                    ring[a].push(nb);
                }
            }
        }
        let mut orders: Vec<Vec<usize>> = vec![Vec::new(); n];
        let permutable: Vec<usize> = self.comp.iter().copied().filter(|&a| ring[a].len() > 1).collect();
        let mut perms: Vec<Vec<Vec<usize>>> = permutable.iter().map(|&a| permutations(&ring[a])).collect();
        let mut choice = vec![0usize; permutable.len()];
        loop {
            for &a in self.comp {
                let order = &mut orders[a];
                order.clear();
                if self.parent[a] != usize::MAX {
                    order.push(self.parent[a]);
                }
                order.extend(self.children[a].iter().copied());
                match permutable.iter().position(|&p| p == a) {
                    Some(k) => order.extend(perms[k][choice[k]].iter().copied()),
                    None => order.extend(ring[a].iter().copied()),
                }
            }
            let root = self.comp.iter().copied().find(|&a| self.parent[a] == usize::MAX && self.visited[a]);
            let root = root.expect("traversal root");
            let s = emit_with_order(self.mol, root, &orders);
            if self.best.as_ref().is_none_or(|b| s < *b) {
                self.best = Some(s);
            }
            self.leaves += 1;
            if self.leaves > self.budget {
                self.aborted = true;
                return;
            }
            // odometer over ring-partner permutations
            let mut k = 0;
            loop {
                if k == choice.len() {
                    perms.clear();
                    return;
                }
                choice[k] += 1;
                if choice[k] < perms[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
        }
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn canon(s: &str) -> String {
        canonicalize(&parse_smiles(s).unwrap())
    }

    #[test]
    fn traversal_order_does_not_matter() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("C(C)(C)O"), canon("OC(C)C"));
        assert_eq!(canon("c1ccccc1O"), canon("Oc1ccccc1"));
    }

    #[test]
    fn canonical_form_is_a_fixed_point() {
        for s in ["CC(=O)O", "c1ccc2ccccc2c1", "C1CC1.Cl", "F/C=C/F", "[NH4+].[Cl-]", "N[C@@H](C)C(=O)O"] {
            let c = canon(s);
            assert_eq!(canon(&c), c, "{s}");
        }
    }

    #[test]
    fn maps_are_ignored() {
        assert_eq!(canon("[CH3:1][CH2:2][OH:3]"), canon("CCO"));
    }

    #[test]
    fn components_sorted() {
        assert_eq!(canon("O.CC"), canon("CC.O"));
        assert_eq!(canon("O.CC"), "CC.O");
    }

    #[test]
    fn kekule_and_aromatic_forms_stay_distinct() {
        assert_ne!(canon("C1=CC=CC=C1"), canon("c1ccccc1"));
    }

    #[test]
    fn set_canonical_ignores_grouping() {
        let a = vec![parse_smiles("CCO").unwrap(), parse_smiles("Cl").unwrap()];
        let b = vec![parse_smiles("Cl.OCC").unwrap()];
        assert_eq!(canonicalize_set(&a), canonicalize_set(&b));
    }

    #[test]
    fn ranked_fallback_is_relabel_invariant() {
        // Cubane-like cage forces many write-outs; compare two labelings
        // through the ranked path directly.
        let a = parse_smiles("C12C3C4C1C5C2C3C45").unwrap();
        let perm = [5usize, 2, 7, 0, 3, 6, 1, 4];
        let mut atoms = vec![a.atom(0).clone(); 8];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = a.atom(old).clone();
        }
        let bonds = a.bonds().iter().map(|bd| crate::chem::Bond::new(perm[bd.b], perm[bd.a], bd.order)).collect();
        let b = Molecule::new(atoms, bonds).unwrap();
        assert_eq!(canonicalize(&a), canonicalize(&b));
        let comp_a: Vec<usize> = (0..a.atom_count()).collect();
        let comp_b: Vec<usize> = (0..b.atom_count()).collect();
        let ta: Vec<String> = comp_a.iter().map(|&i| atom_token(&a, i)).collect();
        let tb: Vec<String> = comp_b.iter().map(|&i| atom_token(&b, i)).collect();
        let mut sa = Search::new(&a, &comp_a, Some(refined_ranks(&a, &comp_a, &ta)), usize::MAX);
        let mut sb = Search::new(&b, &comp_b, Some(refined_ranks(&b, &comp_b, &tb)), usize::MAX);
        for r in 0..8 {
            sa.run_from(r);
            sb.run_from(r);
        }
        assert_eq!(sa.best, sb.best);
    }
}
