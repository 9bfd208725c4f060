//! Reaction records, reaction-SMILES ingestion, root-aligned sequence pairs
//! and augmented corpus assembly.

mod corpus;
mod ingest;
mod rsmiles;

use std::fmt;
use std::str::FromStr;

use crate::chem::{canonicalize, canonicalize_set, write_smiles, Molecule};

pub use corpus::{assemble_corpus, CorpusError, CorpusManifest, CorpusOptions};
pub use ingest::{
    exclude_overlap, ingest_reaction_smiles, parse_reaction_line, read_reaction_file, write_reaction_file, IngestError,
    IngestOptions, IngestReport,
};
pub use rsmiles::{rsmiles_pairs, RootedPairs, SequencePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Real,
    /// Unpaired reactants with a generated product.
    InSilicoFromReactants,
    /// Unpaired product with generated reactants.
    InSilicoFromProducts,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::InSilicoFromReactants => "in_silico_from_reactants",
            Provenance::InSilicoFromProducts => "in_silico_from_products",
        }
    }

    pub fn is_in_silico(self) -> bool {
        self != Provenance::Real
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Provenance::Real),
            "in_silico_from_reactants" => Ok(Provenance::InSilicoFromReactants),
            "in_silico_from_products" => Ok(Provenance::InSilicoFromProducts),
            other => Err(format!("unknown provenance '{other}'")),
        }
    }
}

/// One product with its reactant set. Reactants are stored one connected
/// molecule per entry.
#[derive(Debug, Clone)]
pub struct ReactionRecord {
    pub product: Molecule,
    pub reactants: Vec<Molecule>,
    pub provenance: Provenance,
    pub atom_mapped: bool,
    pub class_label: Option<u32>,
    pub source_id: String,
}

impl ReactionRecord {
    pub fn new(product: Molecule, reactants: &Molecule, source_id: impl Into<String>) -> Self {
        ReactionRecord {
            product,
            reactants: reactants.split_components(),
            provenance: Provenance::Real,
            atom_mapped: false,
            class_label: None,
            source_id: source_id.into(),
        }
    }

    pub fn canonical_product(&self) -> String {
        canonicalize(&self.product)
    }

    pub fn canonical_reactants(&self) -> String {
        canonicalize_set(&self.reactants)
    }

    /// Identity used for deduplication and overlap checks.
    pub fn key(&self) -> (String, String) {
        (self.canonical_product(), self.canonical_reactants())
    }

    pub fn reactant_graph(&self) -> Molecule {
        Molecule::combine(&self.reactants).expect("reactants with unique maps")
    }

    /// `reactants>>product`, keeping atom maps when present.
    pub fn reaction_smiles(&self) -> String {
        let reactants = write_smiles(&self.reactant_graph(), None).unwrap_or_default();
        let product = write_smiles(&self.product, None).unwrap_or_default();
        format!("{reactants}>>{product}")
    }

    /// `reactants>>product` in canonical form, maps removed.
    pub fn canonical_reaction_smiles(&self) -> String {
        format!("{}>>{}", self.canonical_reactants(), self.canonical_product())
    }
}

/// True when every product atom carries a map, maps are unique on each side,
/// and every product map occurs among the reactants.
pub fn maps_consistent(reactants: &Molecule, product: &Molecule) -> bool {
    if product.is_empty() || product.atoms().iter().any(|a| a.map.is_none()) {
        return false;
    }
    product.atoms().iter().all(|a| a.map.and_then(|m| reactants.atom_with_map(m)).is_some())
}
