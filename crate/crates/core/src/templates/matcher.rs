//! Induced subgraph matching of a pattern graph into a target graph.

use std::collections::VecDeque;

use crate::chem::Molecule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetExhausted;

/// Default number of candidate expansions allowed per match call.
pub const MATCH_BUDGET: usize = 200_000;

/// All injective maps `phi` from pattern atoms to target atoms such that
/// `atom_ok(p, phi[p])` holds and, for every pattern atom pair, the bond
/// orders agree (both absent or both present with equal order). Embeddings
/// are returned in lexicographic order of `phi` along the search order.
pub fn find_embeddings<F>(
    pattern: &Molecule,
    target: &Molecule,
    atom_ok: F,
    budget: usize,
) -> Result<Vec<Vec<usize>>, BudgetExhausted>
where
    F: Fn(usize, usize) -> bool,
{
    let n = pattern.atom_count();
    if n == 0 || n > target.atom_count() {
        return Ok(Vec::new());
    }
    let order = search_order(pattern);
    let mut state = State {
        pattern,
        target,
        atom_ok: &atom_ok,
        order: &order,
        phi: vec![usize::MAX; n],
        used: vec![false; target.atom_count()],
        budget,
        found: Vec::new(),
    };
    state.extend(0)?;
    Ok(state.found)
}

/// Components in index order, each walked breadth first from its
/// highest-degree atom so later atoms have a placed neighbour.
fn search_order(pattern: &Molecule) -> Vec<usize> {
    let mut order = Vec::with_capacity(pattern.atom_count());
    let mut seen = vec![false; pattern.atom_count()];
    for comp in pattern.components() {
        let start = *comp.iter().max_by_key(|&&i| (pattern.degree(i), std::cmp::Reverse(i))).unwrap();
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for &(nb, _) in pattern.neighbors(x) {
                if !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    order
}

struct State<'a, F> {
    pattern: &'a Molecule,
    target: &'a Molecule,
    atom_ok: &'a F,
    order: &'a [usize],
    phi: Vec<usize>,
    used: Vec<bool>,
    budget: usize,
    found: Vec<Vec<usize>>,
}

impl<F: Fn(usize, usize) -> bool> State<'_, F> {
    fn extend(&mut self, depth: usize) -> Result<(), BudgetExhausted> {
        if depth == self.order.len() {
            self.found.push(self.phi.clone());
            return Ok(());
        }
        let p = self.order[depth];
        let anchor = self.pattern.neighbors(p).iter().map(|&(nb, _)| nb).find(|&nb| self.phi[nb] != usize::MAX);
        let candidates: Vec<usize> = match anchor {
            Some(nb) => self.target.neighbors(self.phi[nb]).iter().map(|&(t, _)| t).collect(),
            None => (0..self.target.atom_count()).collect(),
        };
        for t in candidates {
            if self.budget == 0 {
                return Err(BudgetExhausted);
            }
            self.budget -= 1;
            if self.used[t] || !(self.atom_ok)(p, t) || !self.bonds_agree(p, t) {
                continue;
            }
            self.phi[p] = t;
            self.used[t] = true;
            self.extend(depth + 1)?;
            self.phi[p] = usize::MAX;
            self.used[t] = false;
        }
        Ok(())
    }

    fn bonds_agree(&self, p: usize, t: usize) -> bool {
        self.order.iter().all(|&q| {
            let u = self.phi[q];
            if u == usize::MAX {
                return true;
            }
            let pb = self.pattern.bond_between(p, q).map(|b| b.order);
            let tb = self.target.bond_between(t, u).map(|b| b.order);
            pb == tb
        })
    }
}
