use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::matcher::{find_embeddings, MATCH_BUDGET};
use super::Template;
use crate::chem::{canonicalize, Atom, Bond, Element, Molecule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Product to reactant sets.
    Retro,
    /// Reactant set to products.
    Forward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Retro => "retro",
            Direction::Forward => "forward",
        }
    }

    pub fn inverse(self) -> Direction {
        match self {
            Direction::Retro => Direction::Forward,
            Direction::Forward => Direction::Retro,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "retro" => Ok(Direction::Retro),
            "forward" => Ok(Direction::Forward),
            other => Err(format!("unknown direction '{other}' (expected retro or forward)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Application {
    /// Rewritten graph. Atoms carried over from the input keep their maps;
    /// atoms added by the template have none.
    pub molecule: Molecule,
    pub canonical: String,
}

#[derive(Debug, Clone, Default)]
pub struct ApplyResult {
    /// Distinct outcomes in embedding order.
    pub outputs: Vec<Application>,
    pub valence_rejects: usize,
    pub budget_exhausted: bool,
}

/// Applies a template and returns the distinct canonical outcomes: reactant
/// sets for [`Direction::Retro`] and single products for
/// [`Direction::Forward`].
pub fn apply_template(template: &Template, input: &Molecule, direction: Direction) -> Vec<String> {
    apply_template_detailed(template, input, direction, MATCH_BUDGET).outputs.into_iter().map(|a| a.canonical).collect()
}

pub fn apply_template_detailed(
    template: &Template,
    input: &Molecule,
    direction: Direction,
    budget: usize,
) -> ApplyResult {
    let mut result = ApplyResult::default();
    let pattern = match direction {
        Direction::Retro => &template.product,
        Direction::Forward => &template.reactants,
    };
    if !composition_fits(pattern, input) {
        return result;
    }
    let atom_ok = |p: usize, t: usize| {
        let pa = pattern.atom(p);
        if !same_attributes(pa, input, t) {
            return false;
        }
        let label = pa.map.unwrap();
        match (direction, template.center_atom(label)) {
            (Direction::Retro, Some(c)) => input.degree(t) == c.product_degree as usize,
            (Direction::Forward, Some(c)) => input.degree(t) == c.reactant_degree as usize,
            (Direction::Forward, None) if template.is_leaving(label) => input.degree(t) == pattern.degree(p),
            _ => true,
        }
    };
    let embeddings = match find_embeddings(pattern, input, atom_ok, budget) {
        Ok(e) => e,
        Err(_) => {
            log::warn!("template match budget exhausted for {} on {}", template.signature(), input);
            result.budget_exhausted = true;
            return result;
        }
    };
    let mut seen = HashSet::new();
    for phi in embeddings {
        let rewritten = match direction {
            Direction::Retro => rewrite_retro(template, input, &phi),
            Direction::Forward => rewrite_forward(template, input, &phi),
        };
        let Some(molecule) = rewritten else { continue };
        if molecule.has_valence_violation() {
            result.valence_rejects += 1;
            continue;
        }
        let molecule = molecule.normalized_hydrogens();
        let canonical = canonicalize(&molecule);
        if seen.insert(canonical.clone()) {
            result.outputs.push(Application { molecule, canonical });
        }
    }
    result
}

fn same_attributes(pattern_atom: &Atom, target: &Molecule, t: usize) -> bool {
    let ta = target.atom(t);
    pattern_atom.element == ta.element
        && pattern_atom.aromatic == ta.aromatic
        && pattern_atom.charge == ta.charge
        && pattern_atom.isotope == ta.isotope
        && pattern_atom.hydrogens.map(u32::from) == Some(target.total_hydrogens(t))
}

fn composition_fits(pattern: &Molecule, target: &Molecule) -> bool {
    let mut need: HashMap<Element, usize> = HashMap::new();
    for a in pattern.atoms() {
        *need.entry(a.element).or_default() += 1;
    }
    for a in target.atoms() {
        if let Some(n) = need.get_mut(&a.element) {
            *n = n.saturating_sub(1);
        }
    }
    need.values().all(|&n| n == 0)
}

fn take_attributes(atom: &mut Atom, from: &Atom) {
    atom.aromatic = from.aromatic;
    atom.charge = from.charge;
    atom.isotope = from.isotope;
    atom.hydrogens = from.hydrogens;
}

/// Replaces the bonds among `image` atoms with the bonds of `to` and sets
/// the center atoms' attributes from `to`. Bonds whose order is unchanged
/// keep their direction tag.
fn rewire(
    template: &Template,
    input: &Molecule,
    image: &HashMap<u32, usize>,
    to: &Molecule,
    to_labels: &HashMap<u32, usize>,
    atoms: &mut [Atom],
    bonds: &mut Vec<Bond>,
) {
    let in_image: HashSet<usize> = image.values().copied().collect();
    let old: HashMap<(usize, usize), &Bond> = input
        .bonds()
        .iter()
        .filter(|b| in_image.contains(&b.a) && in_image.contains(&b.b))
        .map(|b| ((b.a.min(b.b), b.a.max(b.b)), b))
        .collect();
    bonds.retain(|b| !(in_image.contains(&b.a) && in_image.contains(&b.b)));
    for b in to.bonds() {
        let (la, lb) = (to.atom(b.a).map.unwrap(), to.atom(b.b).map.unwrap());
        let (Some(&ta), Some(&tb)) = (image.get(&la), image.get(&lb)) else { continue };
        match old.get(&(ta.min(tb), ta.max(tb))) {
            Some(prev) if prev.order == b.order => bonds.push((*prev).clone()),
            _ => bonds.push(Bond::new(ta, tb, b.order)),
        }
    }
    for c in template.center() {
        let source = to.atom(to_labels[&c.label]);
        take_attributes(&mut atoms[image[&c.label]], source);
    }
}

fn rewrite_retro(template: &Template, input: &Molecule, phi: &[usize]) -> Option<Molecule> {
    let product = &template.product;
    let reactants = &template.reactants;
    let mut image: HashMap<u32, usize> =
        phi.iter().enumerate().map(|(p, &t)| (product.atom(p).map.unwrap(), t)).collect();
    let mut atoms = input.atoms().to_vec();
    let mut bonds = input.bonds().to_vec();
    for (i, a) in reactants.atoms().iter().enumerate() {
        let label = a.map.unwrap();
        if template.is_leaving(label) {
            image.insert(label, atoms.len());
            let mut atom = reactants.atom(i).clone();
            atom.map = None;
            atoms.push(atom);
        }
    }
    rewire(template, input, &image, reactants, &template.reactant_label, &mut atoms, &mut bonds);
    Molecule::new(atoms, bonds).ok()
}

fn rewrite_forward(template: &Template, input: &Molecule, phi: &[usize]) -> Option<Molecule> {
    let reactants = &template.reactants;
    let mut covered = vec![false; input.atom_count()];
    for &t in phi {
        covered[t] = true;
    }
    if !input.components().iter().all(|c| c.iter().any(|&t| covered[t])) {
        return None;
    }
    let mut image = HashMap::new();
    let mut removed = HashSet::new();
    for (p, &t) in phi.iter().enumerate() {
        let label = reactants.atom(p).map.unwrap();
        if template.is_leaving(label) {
            removed.insert(t);
        } else {
            image.insert(label, t);
        }
    }
    let mut atoms = input.atoms().to_vec();
    let mut bonds: Vec<Bond> =
        input.bonds().iter().filter(|b| !removed.contains(&b.a) && !removed.contains(&b.b)).cloned().collect();
    rewire(template, input, &image, &template.product, &template.product_label, &mut atoms, &mut bonds);
    let keep: Vec<usize> = (0..atoms.len()).filter(|i| !removed.contains(i)).collect();
    let full = Molecule::new(atoms, bonds).ok()?;
    let product = full.subgraph(&keep);
    (product.components().len() == 1).then_some(product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use crate::templates::extract_from_graphs;

    fn amide(radius: u32) -> Template {
        extract_from_graphs(
            &parse_smiles("[CH3:1][C:2](=[O:3])[Cl:4].[NH2:5][CH3:6]").unwrap(),
            &parse_smiles("[CH3:1][C:2](=[O:3])[NH:5][CH3:6]").unwrap(),
            radius,
        )
        .unwrap()
    }

    fn canon(s: &str) -> String {
        canonicalize(&parse_smiles(s).unwrap())
    }

    #[test]
    fn retro_recovers_reactants() {
        let t = amide(1);
        let out = apply_template(&t, &parse_smiles("CNC(C)=O").unwrap(), Direction::Retro);
        assert_eq!(out, vec![canon("CC(=O)Cl.CN")]);
    }

    #[test]
    fn retro_generalizes_at_radius_zero() {
        let t = amide(0);
        let out = apply_template(&t, &parse_smiles("CCNC(=O)c1ccccc1").unwrap(), Direction::Retro);
        assert_eq!(out, vec![canon("O=C(Cl)c1ccccc1.CCN")]);
    }

    #[test]
    fn forward_builds_product() {
        let t = amide(1);
        let out = apply_template(&t, &parse_smiles("CC(=O)Cl.CN").unwrap(), Direction::Forward);
        assert_eq!(out, vec![canon("CNC(C)=O")]);
        // both reactants must take part
        assert!(apply_template(&t, &parse_smiles("CC(=O)Cl.CCCC").unwrap(), Direction::Forward).is_empty());
    }

    #[test]
    fn forward_and_retro_are_inverse() {
        let t = amide(0);
        let reactants = parse_smiles("O=C(Cl)C1CCCCC1.NCc1ccccc1").unwrap();
        let products = apply_template(&t, &reactants, Direction::Forward);
        assert_eq!(products.len(), 1);
        let back = apply_template(&t, &parse_smiles(&products[0]).unwrap(), Direction::Retro);
        assert!(back.contains(&canonicalize(&reactants)));
    }

    #[test]
    fn non_matching_input() {
        let t = amide(1);
        assert!(apply_template(&t, &parse_smiles("CCO").unwrap(), Direction::Retro).is_empty());
    }

    #[test]
    fn mapped_input_keeps_maps() {
        let t = amide(1);
        let input = parse_smiles("[CH3:1][C:2](=[O:3])[Cl:4].[NH2:5][CH3:6]").unwrap();
        let res = apply_template_detailed(&t, &input, Direction::Forward, MATCH_BUDGET);
        assert_eq!(res.outputs.len(), 1);
        let mol = &res.outputs[0].molecule;
        assert_eq!(mol.atom_count(), 5);
        assert!(mol.atoms().iter().all(|a| a.map.is_some()));
    }
}
