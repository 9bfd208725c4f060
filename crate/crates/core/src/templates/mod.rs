//! Reaction template extraction, canonical signatures, libraries and
//! template application in both directions.
//!
//! A template is a pair of mapped pattern graphs. Its reaction center is
//! the set of mapped atoms whose bonds to other mapped atoms, charge or
//! hydrogen count differ between reactants and product, together with any
//! mapped atom bonded to a leaving atom. Leaving atoms are reactant atoms
//! without a counterpart in the product and are kept in full. The pattern
//! extends `radius` bonds around the center. Pattern atom maps are replaced
//! by labels `1..` taken from a canonical ordering of the combined graph,
//! so equal templates extracted from different reactions print the same
//! signature.

mod apply;
mod labeling;
mod library;
mod matcher;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::augment::ReactionRecord;
use crate::chem::{parse_smiles, write_smiles, Atom, Bond, BondOrder, GraphError, Molecule};
use labeling::LabelledGraph;

pub use apply::{apply_template, apply_template_detailed, Application, ApplyResult, Direction};
pub use library::{
    build_library, match_template, BuildReport, FrozenLibrary, LibraryEntry, LibraryError, TemplateLibrary,
};
pub use matcher::{find_embeddings, BudgetExhausted, MATCH_BUDGET};

pub const DEFAULT_RADIUS: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("product atom {0} has no atom map")]
    UnmappedProductAtom(usize),
    #[error("product map {0} does not occur among the reactants")]
    MissingMap(u32),
    #[error("map {0} changes element between reactants and product")]
    ElementMismatch(u32),
    #[error("no atom changes between reactants and product")]
    NoCenter,
    #[error("reactants share atom maps: {0}")]
    Graph(#[from] GraphError),
    #[error("malformed template signature: {0}")]
    BadSignature(String),
}

impl TemplateError {
    /// Short stable name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            TemplateError::UnmappedProductAtom(_) => "unmapped_product_atom",
            TemplateError::MissingMap(_) => "missing_map",
            TemplateError::ElementMismatch(_) => "element_mismatch",
            TemplateError::NoCenter => "no_center",
            TemplateError::Graph(_) => "duplicate_map",
            TemplateError::BadSignature(_) => "bad_signature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CenterAtom {
    pub label: u32,
    pub product_degree: u8,
    pub reactant_degree: u8,
}

#[derive(Debug, Clone)]
pub struct Template {
    product: Molecule,
    reactants: Molecule,
    center: Vec<CenterAtom>,
    radius: u32,
    signature: String,
    product_label: HashMap<u32, usize>,
    reactant_label: HashMap<u32, usize>,
}

impl PartialEq for Template {
    fn eq(&self, other: &Self) -> bool {
        self.signature == other.signature
    }
}

impl Eq for Template {}

impl Template {
    fn from_parts(
        product: Molecule,
        reactants: Molecule,
        mut center: Vec<CenterAtom>,
        radius: u32,
    ) -> Result<Self, TemplateError> {
        center.sort();
        let labels = |m: &Molecule| -> Result<HashMap<u32, usize>, TemplateError> {
            m.atoms()
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    a.map.map(|l| (l, i)).ok_or_else(|| TemplateError::BadSignature("unlabelled pattern atom".into()))
                })
                .collect()
        };
        let product_label = labels(&product)?;
        let reactant_label = labels(&reactants)?;
        if product.is_empty() || center.is_empty() {
            return Err(TemplateError::BadSignature("empty pattern".into()));
        }
        for (&l, &pi) in &product_label {
            let ri = *reactant_label
                .get(&l)
                .ok_or_else(|| TemplateError::BadSignature(format!("label {l} missing on reactant side")))?;
            if product.atom(pi).element != reactants.atom(ri).element {
                return Err(TemplateError::BadSignature(format!("label {l} changes element")));
            }
        }
        if let Some(c) = center.iter().find(|c| !product_label.contains_key(&c.label)) {
            return Err(TemplateError::BadSignature(format!("center label {} not in product", c.label)));
        }
        let centers: Vec<String> =
            center.iter().map(|c| format!("{}:{}:{}", c.label, c.product_degree, c.reactant_degree)).collect();
        let signature = format!(
            "{}>>{}|r={}|c={}",
            write_smiles(&reactants, None)?,
            write_smiles(&product, None)?,
            radius,
            centers.join(",")
        );
        Ok(Template { product, reactants, center, radius, signature, product_label, reactant_label })
    }

    /// Product-side pattern; atom maps are template labels.
    pub fn product_pattern(&self) -> &Molecule {
        &self.product
    }

    /// Reactant-side pattern including leaving atoms.
    pub fn reactant_pattern(&self) -> &Molecule {
        &self.reactants
    }

    pub fn center(&self) -> &[CenterAtom] {
        &self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn signature(&self) -> &str {
        &self.signature
    }

    fn center_atom(&self, label: u32) -> Option<&CenterAtom> {
        self.center.binary_search_by_key(&label, |c| c.label).ok().map(|i| &self.center[i])
    }

    fn is_leaving(&self, label: u32) -> bool {
        !self.product_label.contains_key(&label)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.signature)
    }
}

impl FromStr for Template {
    type Err = TemplateError;

    /// Parses `reactants>>product|r=<radius>|c=<label:pdeg:rdeg,...>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| TemplateError::BadSignature(format!("{why} in '{s}'"));
        let mut parts = s.trim().split('|');
        let reaction = parts.next().ok_or_else(|| bad("missing reaction"))?;
        let radius = parts
            .next()
            .and_then(|p| p.strip_prefix("r="))
            .and_then(|r| r.parse::<u32>().ok())
            .ok_or_else(|| bad("missing radius"))?;
        let centers = parts.next().and_then(|p| p.strip_prefix("c=")).ok_or_else(|| bad("missing center list"))?;
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        let (left, right) = reaction.split_once(">>").ok_or_else(|| bad("missing '>>'"))?;
        let reactants = parse_smiles(left).map_err(|e| bad(&e.to_string()))?;
        let product = parse_smiles(right).map_err(|e| bad(&e.to_string()))?;
        let mut center = Vec::new();
        for entry in centers.split(',') {
            let fields: Vec<&str> = entry.split(':').collect();
            let nums: Option<Vec<u32>> = fields.iter().map(|f| f.parse().ok()).collect();
            match nums.as_deref() {
                Some(&[label, p, r]) => center.push(CenterAtom {
                    label,
                    product_degree: p.try_into().map_err(|_| bad("degree"))?,
                    reactant_degree: r.try_into().map_err(|_| bad("degree"))?,
                }),
                _ => return Err(bad("bad center entry")),
            }
        }
        Template::from_parts(product, reactants, center, radius)
    }
}

fn atom_label(mol: &Molecule, i: usize) -> String {
    let a = mol.atom(i);
    format!(
        "{}{}{:+}i{}h{}",
        a.element.symbol(),
        if a.aromatic { "a" } else { "_" },
        a.charge,
        a.isotope.unwrap_or(0),
        mol.total_hydrogens(i)
    )
}

fn pattern_atom(mol: &Molecule, i: usize, label: u32) -> Atom {
    let a = mol.atom(i);
    Atom {
        element: a.element,
        aromatic: a.aromatic,
        charge: a.charge,
        isotope: a.isotope,
        hydrogens: Some(mol.total_hydrogens(i) as u8),
        map: Some(label),
        chirality: None,
    }
}

fn mapped_environment(mol: &Molecule, i: usize, keep: impl Fn(usize) -> bool) -> BTreeSet<(u32, BondOrder)> {
    mol.neighbors(i)
        .iter()
        .filter(|&&(nb, _)| keep(nb))
        .map(|&(nb, bi)| (mol.atom(nb).map.unwrap(), mol.bonds()[bi].order))
        .collect()
}

/// Extracts the template of one mapped reaction.
pub fn extract_template(record: &ReactionRecord, radius: u32) -> Result<Template, TemplateError> {
    let reactants = Molecule::combine(&record.reactants)?;
    extract_from_graphs(&reactants, &record.product, radius)
}

pub fn extract_from_graphs(reactants: &Molecule, product: &Molecule, radius: u32) -> Result<Template, TemplateError> {
    let mut p_of: BTreeMap<u32, usize> = BTreeMap::new();
    let mut r_of: HashMap<u32, usize> = HashMap::new();
    for (i, a) in reactants.atoms().iter().enumerate() {
        if let Some(m) = a.map {
            r_of.insert(m, i);
        }
    }
    for (i, a) in product.atoms().iter().enumerate() {
        let m = a.map.ok_or(TemplateError::UnmappedProductAtom(i))?;
        let ri = *r_of.get(&m).ok_or(TemplateError::MissingMap(m))?;
        if reactants.atom(ri).element != a.element {
            return Err(TemplateError::ElementMismatch(m));
        }
        p_of.insert(m, i);
    }
    let kept = |ri: usize| reactants.atom(ri).map.is_some_and(|m| p_of.contains_key(&m));

    let mut center = BTreeSet::new();
    for (&m, &pi) in &p_of {
        let ri = r_of[&m];
        let (pa, ra) = (product.atom(pi), reactants.atom(ri));
        let changed = pa.charge != ra.charge
            || pa.aromatic != ra.aromatic
            || pa.isotope != ra.isotope
            || product.total_hydrogens(pi) != reactants.total_hydrogens(ri)
            || mapped_environment(product, pi, |_| true) != mapped_environment(reactants, ri, kept)
            || reactants.neighbors(ri).iter().any(|&(nb, _)| !kept(nb));
        if changed {
            center.insert(m);
        }
    }
    if center.is_empty() {
        return Err(TemplateError::NoCenter);
    }

    let mut selected = center.clone();
    for (mol, start, keep) in [
        (product, center.iter().map(|m| p_of[m]).collect::<Vec<_>>(), None),
        (reactants, center.iter().map(|m| r_of[m]).collect(), Some(&kept)),
    ] {
        let mut dist = vec![u32::MAX; mol.atom_count()];
        let mut queue = VecDeque::new();
        for s in start {
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(x) = queue.pop_front() {
            selected.insert(mol.atom(x).map.unwrap());
            if dist[x] == radius {
                continue;
            }
            for &(nb, _) in mol.neighbors(x) {
                if dist[nb] == u32::MAX && keep.is_none_or(|k| k(nb)) {
                    dist[nb] = dist[x] + 1;
                    queue.push_back(nb);
                }
            }
        }
    }
    let leaving: Vec<usize> = (0..reactants.atom_count()).filter(|&ri| !kept(ri)).collect();

    // Combined graph: selected mapped atoms first, then leaving atoms.
    let mapped: Vec<u32> = selected.iter().copied().collect();
    let node_r: Vec<usize> = mapped.iter().map(|m| r_of[m]).chain(leaving.iter().copied()).collect();
    let node_p: Vec<Option<usize>> = mapped.iter().map(|m| Some(p_of[m])).chain(leaving.iter().map(|_| None)).collect();
    let mut labels = Vec::with_capacity(node_r.len());
    for (k, &ri) in node_r.iter().enumerate() {
        labels.push(match node_p[k] {
            Some(pi) => {
                let m = mapped[k];
                let role = if center.contains(&m) {
                    format!("c{}.{}", product.degree(pi), reactants.degree(ri))
                } else {
                    "n".to_string()
                };
                format!("M|{}|{}|{role}", atom_label(product, pi), atom_label(reactants, ri))
            }
            None => format!("L|{}|d{}", atom_label(reactants, ri), reactants.degree(ri)),
        });
    }
    let mut r_node = vec![usize::MAX; reactants.atom_count()];
    for (k, &ri) in node_r.iter().enumerate() {
        r_node[ri] = k;
    }
    let mut p_node = vec![usize::MAX; product.atom_count()];
    for (k, pi) in node_p.iter().enumerate() {
        if let Some(pi) = pi {
            p_node[*pi] = k;
        }
    }
    let mut pairs: BTreeMap<(usize, usize), (Option<BondOrder>, Option<BondOrder>)> = BTreeMap::new();
    for b in product.bonds() {
        let (u, v) = (p_node[b.a], p_node[b.b]);
        if u != usize::MAX && v != usize::MAX {
            pairs.entry((u.min(v), u.max(v))).or_default().0 = Some(b.order);
        }
    }
    for b in reactants.bonds() {
        let (u, v) = (r_node[b.a], r_node[b.b]);
        if u != usize::MAX && v != usize::MAX {
            pairs.entry((u.min(v), u.max(v))).or_default().1 = Some(b.order);
        }
    }
    let code = |o: Option<BondOrder>| o.map_or('_', BondOrder::code);
    let graph = LabelledGraph {
        labels,
        edges: pairs.iter().map(|(&(u, v), &(p, r))| (u, v, format!("{}{}", code(p), code(r)))).collect(),
    };
    let order = graph.canonical_order();
    let mut label_of = vec![0u32; order.len()];
    for (pos, &node) in order.iter().enumerate() {
        label_of[node] = pos as u32 + 1;
    }

    let r_atoms: Vec<Atom> = order.iter().map(|&k| pattern_atom(reactants, node_r[k], label_of[k])).collect();
    let p_order: Vec<usize> = order.iter().copied().filter(|&k| node_p[k].is_some()).collect();
    let p_atoms: Vec<Atom> = p_order.iter().map(|&k| pattern_atom(product, node_p[k].unwrap(), label_of[k])).collect();
    let mut r_pos = vec![0; order.len()];
    for (i, &k) in order.iter().enumerate() {
        r_pos[k] = i;
    }
    let mut p_pos = vec![usize::MAX; order.len()];
    for (i, &k) in p_order.iter().enumerate() {
        p_pos[k] = i;
    }
    let mut r_bonds = Vec::new();
    let mut p_bonds = Vec::new();
    for (&(u, v), &(p, r)) in &pairs {
        if let Some(o) = r {
            r_bonds.push(Bond::new(r_pos[u], r_pos[v], o));
        }
        if let Some(o) = p {
            p_bonds.push(Bond::new(p_pos[u], p_pos[v], o));
        }
    }
    let centers: Vec<CenterAtom> = mapped
        .iter()
        .enumerate()
        .filter(|(_, m)| center.contains(m))
        .map(|(k, m)| CenterAtom {
            label: label_of[k],
            product_degree: product.degree(p_of[m]) as u8,
            reactant_degree: reactants.degree(r_of[m]) as u8,
        })
        .collect();
    Template::from_parts(Molecule::new(p_atoms, p_bonds)?, Molecule::new(r_atoms, r_bonds)?, centers, radius)
}
