//! Canonical ordering of small labelled graphs by colour refinement with
//! individualization. Every leaf of the search tree is scored by the
//! relabelled graph encoding and the smallest encoding wins, so the result
//! does not depend on input node order.

use std::collections::BTreeMap;

pub(crate) struct LabelledGraph {
    pub labels: Vec<String>,
    /// `(u, v, label)`, undirected.
    pub edges: Vec<(usize, usize, String)>,
}

const LEAF_LIMIT: usize = 50_000;

impl LabelledGraph {
    /// Node order: `order[k]` is the node placed at canonical position `k`.
    pub fn canonical_order(&self) -> Vec<usize> {
        let n = self.labels.len();
        if n == 0 {
            return Vec::new();
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut edge_labels: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, _, l) in &self.edges {
            edge_labels.insert(l, 0);
        }
        for (rank, v) in edge_labels.values_mut().enumerate() {
            *v = rank;
        }
        for (u, v, l) in &self.edges {
            let code = edge_labels[l.as_str()];
            adj[*u].push((*v, code));
            adj[*v].push((*u, code));
        }
        let initial = rank_by(&self.labels.iter().collect::<Vec<_>>());
        let mut search = Search { graph: self, adj: &adj, best: None, leaves: 0 };
        search.descend(initial);
        search.best.expect("at least one leaf").1
    }

    fn encode(&self, order: &[usize]) -> Vec<String> {
        let mut position = vec![0; order.len()];
        for (k, &v) in order.iter().enumerate() {
            position[v] = k;
        }
        let mut out: Vec<String> = order.iter().map(|&v| self.labels[v].clone()).collect();
        let mut edges: Vec<(usize, usize, &str)> = self
            .edges
            .iter()
            .map(|(u, v, l)| {
                let (a, b) = (position[*u], position[*v]);
                (a.min(b), a.max(b), l.as_str())
            })
            .collect();
        edges.sort_unstable();
        out.extend(edges.into_iter().map(|(a, b, l)| format!("{a:04}-{b:04}:{l}")));
        out
    }
}

struct Search<'a> {
    graph: &'a LabelledGraph,
    adj: &'a [Vec<(usize, usize)>],
    best: Option<(Vec<String>, Vec<usize>)>,
    leaves: usize,
}

impl Search<'_> {
    fn descend(&mut self, colours: Vec<usize>) {
        let colours = refine(self.adj, colours);
        let n = colours.len();
        let mut counts = vec![0usize; n];
        for &c in &colours {
            counts[c] += 1;
        }
        let target = (0..n).find(|&c| counts[c] > 1);
        let Some(cell) = target else {
            let mut order = vec![0; n];
            for (v, &c) in colours.iter().enumerate() {
                order[c] = v;
            }
            let code = self.graph.encode(&order);
            if self.best.as_ref().is_none_or(|(b, _)| code < *b) {
                self.best = Some((code, order));
            }
            self.leaves += 1;
            return;
        };
        let members: Vec<usize> = (0..n).filter(|&v| colours[v] == cell).collect();
        for (i, &v) in members.iter().enumerate() {
            if i > 0 && self.leaves >= LEAF_LIMIT && self.best.is_some() {
                break;
            }
            let keys: Vec<(usize, bool)> = colours.iter().enumerate().map(|(u, &c)| (c, u != v)).collect();
            self.descend(rank_by(&keys.iter().collect::<Vec<_>>()));
        }
    }
}

/// Dense ranks `0..k` of `keys` in sorted order.
fn rank_by<T: Ord>(keys: &[T]) -> Vec<usize> {
    let mut sorted: Vec<&T> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter().map(|k| sorted.binary_search(&k).unwrap()).collect()
}

/// Equitable refinement: a node's next colour is its current colour plus
/// the multiset of `(edge label, neighbour colour)`.
fn refine(adj: &[Vec<(usize, usize)>], mut colours: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<(usize, Vec<(usize, usize)>)> = (0..colours.len())
            .map(|v| {
                let mut env: Vec<(usize, usize)> = adj[v].iter().map(|&(nb, l)| (l, colours[nb])).collect();
                env.sort_unstable();
                (colours[v], env)
            })
            .collect();
        let next = rank_by(&keys);
        let before = colours.iter().max().copied().unwrap_or(0);
        let after = next.iter().max().copied().unwrap_or(0);
        colours = next;
        if after == before {
            return colours;
        }
    }
}
