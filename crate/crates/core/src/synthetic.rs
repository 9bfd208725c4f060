//! A small deterministic reaction space for tests, benchmarks and demos.
//!
//! Every reaction couples an electrophile unit (carrying a leaving atom)
//! with a nucleophile unit (carrying an N-H, O-H or S-H) through one new
//! single bond. Units hang off interchangeable inert cores, so many
//! distinct reactions share one template. Reactions come out fully mapped
//! except for the leaving atom.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::augment::ReactionRecord;
use crate::chem::{canonicalize, parse_smiles, Atom, Bond, BondOrder, Element, Molecule};

/// `(smiles, electrophilic atom, leaving atom)`; atom 0 attaches to a core.
pub const ELECTROPHILES: [(&str, usize, usize); 8] = [
    ("CCCl", 1, 2),
    ("CC(C)Br", 1, 3),
    ("CC(=O)Cl", 1, 3),
    ("C(C)C(=O)O", 2, 4),
    ("c1ccc(Br)cc1", 3, 4),
    ("c1ccc(Cl)nc1", 3, 4),
    ("C(C)(C)CBr", 3, 4),
    ("C=CCBr", 2, 3),
];

/// `(smiles, nucleophilic atom)`; atom 0 attaches to a core.
pub const NUCLEOPHILES: [(&str, usize); 7] =
    [("CN", 1), ("CNC", 1), ("CO", 1), ("c1ccc(O)cc1", 4), ("CS", 1), ("c1ccc(N)cc1", 4), ("C1CCNCC1", 3)];

/// Inert substituents; atom 0 bonds to the unit.
pub const CORES: [&str; 10] =
    ["C", "CC", "CCC", "C(C)C", "C1CCC1", "C1CCCCC1", "c1ccccc1", "c1ccc(C)cc1", "c1ccc(F)cc1", "C(F)(F)F"];

/// One reaction class: electrophile index and nucleophile index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReactionType {
    pub electrophile: usize,
    pub nucleophile: usize,
}

/// All electrophile/nucleophile combinations in a fixed order.
pub fn reaction_types() -> Vec<ReactionType> {
    let mut out = Vec::new();
    for electrophile in 0..ELECTROPHILES.len() {
        for nucleophile in 0..NUCLEOPHILES.len() {
            out.push(ReactionType { electrophile, nucleophile });
        }
    }
    out
}

/// Concrete reaction: a type plus the two cores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instance {
    pub kind: ReactionType,
    pub core_a: usize,
    pub core_b: usize,
}

impl Instance {
    pub fn random<R: Rng>(kind: ReactionType, rng: &mut R) -> Self {
        Instance { kind, core_a: rng.gen_range(0..CORES.len()), core_b: rng.gen_range(0..CORES.len()) }
    }

    pub fn id(&self) -> String {
        format!("e{}n{}-c{}c{}", self.kind.electrophile, self.kind.nucleophile, self.core_a, self.core_b)
    }
}

fn attach(core: &str, unit: &str) -> (Molecule, usize) {
    let core = parse_smiles(core).expect("core parses");
    let unit = parse_smiles(unit).expect("unit parses");
    let offset = core.atom_count();
    let joined = Molecule::combine([&core, &unit]).expect("disjoint parts");
    let mut bonds = joined.bonds().to_vec();
    bonds.push(Bond::new(0, offset, BondOrder::Single));
    (Molecule::new(joined.atoms().to_vec(), bonds).expect("valid attachment"), offset)
}

fn with_maps(mol: &Molecule, first: u32, skip: Option<usize>) -> Molecule {
    let mut atoms = mol.atoms().to_vec();
    let mut next = first;
    for (i, atom) in atoms.iter_mut().enumerate() {
        if Some(i) != skip {
            atom.map = Some(next);
            next += 1;
        }
    }
    Molecule::new(atoms, mol.bonds().to_vec()).expect("fresh maps are unique")
}

/// The two reactants, unmapped.
pub fn reactants(inst: &Instance) -> (Molecule, Molecule) {
    let (a_smiles, _, _) = ELECTROPHILES[inst.kind.electrophile];
    let (b_smiles, _) = NUCLEOPHILES[inst.kind.nucleophile];
    (attach(CORES[inst.core_a], a_smiles).0, attach(CORES[inst.core_b], b_smiles).0)
}

/// Canonical dot-joined reactant set.
pub fn reactant_set(inst: &Instance) -> String {
    let (a, b) = reactants(inst);
    canonicalize(&Molecule::combine([&a, &b]).expect("disjoint"))
}

/// Mapped reaction record; the leaving atom is the only unmapped atom.
pub fn reaction(inst: &Instance) -> ReactionRecord {
    let (a_smiles, e, leave) = ELECTROPHILES[inst.kind.electrophile];
    let (b_smiles, n) = NUCLEOPHILES[inst.kind.nucleophile];
    let (a, a_off) = attach(CORES[inst.core_a], a_smiles);
    let (b, b_off) = attach(CORES[inst.core_b], b_smiles);
    let (e, leave, n) = (a_off + e, a_off + leave, b_off + n);
    let a = with_maps(&a, 1, Some(leave));
    let b = with_maps(&b, a.atom_count() as u32, None);

    let both = Molecule::combine([&a, &b]).expect("disjoint maps");
    let keep: Vec<usize> = (0..both.atom_count()).filter(|&i| i != leave).collect();
    let mut bonds = both.bonds().to_vec();
    bonds.push(Bond::new(e, a.atom_count() + n, BondOrder::Single));
    let joined = Molecule::new(both.atoms().to_vec(), bonds).expect("new bond is valid");
    let product = joined.subgraph(&keep);

    let mut record = ReactionRecord::new(product, &both, inst.id());
    record.atom_mapped = true;
    record
}

/// `count` mapped reactions of the given types, cycling through the types
/// and drawing cores at random.
pub fn sample_reactions<R: Rng>(types: &[ReactionType], count: usize, rng: &mut R) -> Vec<ReactionRecord> {
    (0..count)
        .map(|i| {
            let inst = Instance::random(types[i % types.len()], rng);
            let mut r = reaction(&inst);
            r.source_id = format!("{}-{i}", r.source_id);
            r
        })
        .collect()
}

/// `count` random reactant sets drawn from `types`.
pub fn sample_reactant_sets<R: Rng>(types: &[ReactionType], count: usize, rng: &mut R) -> Vec<String> {
    (0..count)
        .map(|_| {
            let kind = *types.choose(rng).expect("non-empty types");
            reactant_set(&Instance::random(kind, rng))
        })
        .collect()
}

/// Layout of a toy boost experiment: a training split that sees only some
/// reaction types (a few of them once), held-out reactions of every type,
/// and unpaired reactant sets.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub types: usize,
    pub frequent: usize,
    pub singletons: usize,
    pub per_frequent: usize,
    pub heldout_per_type: usize,
    pub unpaired: usize,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            types: 50,
            frequent: 20,
            singletons: 10,
            per_frequent: 12,
            heldout_per_type: 4,
            unpaired: 5000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub train: Vec<ReactionRecord>,
    pub heldout: Vec<ReactionRecord>,
    pub unpaired: Vec<String>,
    /// Types in use, shuffled: frequent first, then singletons, then unseen.
    pub types: Vec<ReactionType>,
}

impl ScenarioData {
    pub fn singleton_types(&self, s: &Scenario) -> &[ReactionType] {
        &self.types[s.frequent..s.frequent + s.singletons]
    }
}

impl Scenario {
    pub fn build(&self) -> ScenarioData {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        let mut types = reaction_types();
        types.shuffle(&mut rng);
        types.truncate(self.types);
        assert!(self.frequent + self.singletons <= types.len(), "scenario needs more types");

        let mut seen = std::collections::HashSet::new();
        let mut draw = |kind: ReactionType, tag: &str, n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let mut out = Vec::new();
            // cores give 100 instances per type; give up quietly if exhausted
            for _ in 0..n * 50 {
                if out.len() == n {
                    break;
                }
                let inst = Instance::random(kind, rng);
                if seen.insert(inst) {
                    let mut r = reaction(&inst);
                    r.source_id = format!("{tag}-{}", r.source_id);
                    out.push(r);
                }
            }
            out
        };
        let mut train = Vec::new();
        for (i, &kind) in types[..self.frequent + self.singletons].iter().enumerate() {
            let n = if i < self.frequent { self.per_frequent } else { 1 };
            train.extend(draw(kind, "train", n, &mut rng));
        }
        let mut heldout = Vec::new();
        for &kind in &types {
            heldout.extend(draw(kind, "test", self.heldout_per_type, &mut rng));
        }
        let unpaired = sample_reactant_sets(&types, self.unpaired, &mut rng);
        ScenarioData { train, heldout, unpaired, types }
    }
}

/// Writes `train.rsmi`, `heldout.rsmi`, `unpaired.smi` and a `boost.toml`
/// that wires them together with `workdir` as the output directory.
pub fn write_scenario(data: &ScenarioData, dir: &std::path::Path, workdir: &str) -> std::io::Result<()> {
    use crate::augment::write_reaction_file;
    std::fs::create_dir_all(dir)?;
    write_reaction_file(&dir.join("train.rsmi"), &data.train)?;
    write_reaction_file(&dir.join("heldout.rsmi"), &data.heldout)?;
    let mut unpaired = data.unpaired.join("\n");
    unpaired.push('\n');
    std::fs::write(dir.join("unpaired.smi"), unpaired)?;
    let config = format!(
        "[paths]\nreal_corpus = \"train.rsmi\"\nunpaired_reactants = \"unpaired.smi\"\n\
         holdout = [\"heldout.rsmi\"]\nworkdir = \"{workdir}\"\n\n[run]\nseed = 11\n"
    );
    std::fs::write(dir.join("boost.toml"), config)
}

fn max_valence(e: Element) -> u32 {
    *e.default_valences().iter().max().unwrap_or(&1) as u32
}

/// Random connected graph of up to `max_atoms` heavy atoms with occasional
/// double bonds, ring closures, charges and isotopes.
pub fn random_molecule<R: Rng>(rng: &mut R, max_atoms: usize) -> Molecule {
    const POOL: [&str; 8] = ["C", "C", "C", "C", "N", "O", "S", "Cl"];
    let n = rng.gen_range(1..=max_atoms);
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut used = vec![0u32; n];
    for i in 0..n {
        let e = Element::from_symbol(POOL[rng.gen_range(0..POOL.len())]).unwrap();
        let mut atom = Atom::new(e);
        if e == Element::from_symbol("N").unwrap() && rng.gen_bool(0.1) {
            atom.charge = 1;
            atom.hydrogens = Some(0);
        }
        if e == Element::from_symbol("C").unwrap() && rng.gen_bool(0.05) {
            atom.isotope = Some(13);
            atom.hydrogens = Some(0);
        }
        atoms.push(atom);
        if i == 0 {
            continue;
        }
        let open: Vec<usize> = (0..i).filter(|&j| used[j] < max_valence(atoms[j].element)).collect();
        if open.is_empty() || max_valence(atoms[i].element) == 0 {
            atoms.pop();
            break;
        }
        let j = open[rng.gen_range(0..open.len())];
        let room = (max_valence(atoms[i].element)).min(max_valence(atoms[j].element) - used[j]);
        let order = if room >= 2 && rng.gen_bool(0.15) { BondOrder::Double } else { BondOrder::Single };
        let v = if order == BondOrder::Double { 2 } else { 1 };
        used[i] += v;
        used[j] += v;
        bonds.push(Bond::new(j, i, order));
    }
    let n = atoms.len();
    for _ in 0..rng.gen_range(0..=2) {
        if n < 3 {
            break;
        }
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let bonded = bonds.iter().any(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a));
        if a != b && !bonded && used[a] < max_valence(atoms[a].element) && used[b] < max_valence(atoms[b].element) {
            used[a] += 1;
            used[b] += 1;
            bonds.push(Bond::new(a, b, BondOrder::Single));
        }
    }
    Molecule::new(atoms, bonds).unwrap()
}
