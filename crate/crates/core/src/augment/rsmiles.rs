use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::ReactionRecord;
use crate::chem::{write_smiles, Molecule};

/// One training example: product as source, reactants as target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePair {
    pub source: String,
    pub target: String,
    pub variant_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedPairs {
    pub pairs: Vec<SequencePair>,
    pub requested: usize,
    /// Number of distinct product roots that exist.
    pub available: usize,
}

impl RootedPairs {
    pub fn is_short(&self) -> bool {
        self.pairs.len() < self.requested
    }
}

fn record_rng(record: &ReactionRecord, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(xxh3_64_with_seed(record.source_id.as_bytes(), seed))
}

fn heavy_atoms(mol: &Molecule) -> Vec<usize> {
    (0..mol.atom_count()).filter(|&i| mol.atom(i).is_heavy()).collect()
}

fn write_rooted(mol: &Molecule, root: usize) -> String {
    write_smiles(mol, Some(root)).expect("root index in range")
}

/// Writes `n_variants` product/reactant string pairs. For mapped records
/// the product roots are distinct heavy atoms sampled without replacement,
/// and the reactant holding the same map is written first from that atom.
/// Unmapped records get independent random roots on each side. Output
/// strings carry no atom maps.
pub fn rsmiles_pairs(record: &ReactionRecord, n_variants: usize, seed: u64) -> RootedPairs {
    let mut rng = record_rng(record, seed);
    let product = record.product.normalized();
    let reactants: Vec<Molecule> = record.reactants.iter().map(Molecule::normalized).collect();
    let roots = heavy_atoms(&product);
    let available = roots.len();
    let n = n_variants.min(available);
    let chosen: Vec<usize> = sample(&mut rng, available, n).into_iter().map(|i| roots[i]).collect();
    let canonical: Vec<String> = reactants.iter().map(|r| write_smiles(r, None).expect("valid graph")).collect();

    let pairs = chosen
        .into_iter()
        .enumerate()
        .map(|(variant_index, root)| {
            let source = write_rooted(&product, root);
            let anchor = if record.atom_mapped {
                record.product.atom(root).map.and_then(|m| {
                    record.reactants.iter().enumerate().find_map(|(k, r)| r.atom_with_map(m).map(|a| (k, a)))
                })
            } else {
                let k = rng.gen_range(0..reactants.len());
                let atoms = heavy_atoms(&reactants[k]);
                let a = if atoms.is_empty() { 0 } else { atoms[rng.gen_range(0..atoms.len())] };
                Some((k, a))
            };
            let target = match anchor {
                Some((k, a)) => {
                    let mut rest: Vec<&str> =
                        canonical.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, s)| s.as_str()).collect();
                    rest.sort_unstable();
                    std::iter::once(write_rooted(&reactants[k], a))
                        .chain(rest.into_iter().map(String::from))
                        .collect::<Vec<_>>()
                        .join(".")
                }
                None => {
                    let mut all = canonical.clone();
                    all.sort();
                    all.join(".")
                }
            };
            SequencePair { source, target, variant_index }
        })
        .collect();
    RootedPairs { pairs, requested: n_variants, available }
}
