//! Reaction data augmentation toolkit.
//!
//! Builds in-silico reactions from unpaired molecules with a pluggable
//! generator, filters them by template matching and round-trip fingerprint
//! similarity, assembles augmented training corpora and scores
//! retrosynthesis predictions with top-k exact and largest-fragment accuracy.

pub mod augment;
pub mod chem;
pub mod evalkit;
pub mod filter;
pub mod fingerprint;
pub mod generator;
pub mod pipeline;
pub mod synthetic;
pub mod templates;

pub use augment::{Provenance, ReactionRecord};
pub use chem::{canonicalize, parse_smiles, write_smiles, Atom, Bond, BondOrder, Element, Molecule};
pub use fingerprint::{fingerprint, tanimoto, FingerprintBitset};
pub use templates::{Direction, Template, TemplateLibrary};
