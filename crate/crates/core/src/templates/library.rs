use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use super::{apply_template, extract_template, Direction, Template, TemplateError};
use crate::augment::ReactionRecord;
use crate::chem::Molecule;

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("cannot build a template library from an empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("frozen library is empty (no template has count > {0})")]
    EmptyFrozen(u64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Signature counts. Counts are kept for every template; `min_count` only
/// applies when freezing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateLibrary {
    entries: BTreeMap<String, u64>,
    min_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub reactions: usize,
    pub extracted: usize,
    /// Skipped reactions by error kind.
    pub errors: BTreeMap<String, usize>,
}

impl BuildReport {
    pub fn skipped(&self) -> usize {
        self.errors.values().sum()
    }
}

impl TemplateLibrary {
    pub fn new(min_count: u64) -> Self {
        TemplateLibrary { entries: BTreeMap::new(), min_count }
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn with_min_count(mut self, min_count: u64) -> Self {
        self.min_count = min_count;
        self
    }

    pub fn add(&mut self, signature: &str, count: u64) {
        *self.entries.entry(signature.to_string()).or_default() += count;
    }

    pub fn merge(&mut self, other: &TemplateLibrary) {
        for (sig, &n) in &other.entries {
            self.add(sig, n);
        }
    }

    pub fn count(&self, signature: &str) -> u64 {
        self.entries.get(signature).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries by descending count, then signature.
    pub fn sorted_entries(&self) -> Vec<(&str, u64)> {
        let mut out: Vec<(&str, u64)> = self.entries.iter().map(|(s, &n)| (s.as_str(), n)).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out
    }

    /// Signatures that survive freezing.
    pub fn retained(&self) -> BTreeSet<&str> {
        self.entries.iter().filter(|(_, &n)| n > self.min_count).map(|(s, _)| s.as_str()).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (sig, n) in self.sorted_entries() {
            out.push_str(sig);
            out.push('\t');
            out.push_str(&n.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str, min_count: u64) -> Result<Self, LibraryError> {
        let mut lib = TemplateLibrary::new(min_count);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| LibraryError::BadLine { line: i + 1, reason: reason.into() };
            let (sig, count) = line.split_once('\t').ok_or_else(|| bad("expected signature<TAB>count"))?;
            let count: u64 = count.trim().parse().map_err(|_| bad("count is not an integer"))?;
            sig.parse::<Template>().map_err(|e| bad(&e.to_string()))?;
            lib.add(sig, count);
        }
        Ok(lib)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), LibraryError> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn read_file(path: &Path, min_count: u64) -> Result<Self, LibraryError> {
        Self::from_tsv(&fs::read_to_string(path)?, min_count)
    }

    /// Parsed templates with count strictly greater than `min_count`.
    pub fn freeze(&self) -> Result<FrozenLibrary, LibraryError> {
        let entries: Vec<LibraryEntry> = self
            .sorted_entries()
            .into_iter()
            .filter(|&(_, n)| n > self.min_count)
            .map(|(sig, count)| {
                let template = sig.parse().expect("library holds valid signatures");
                LibraryEntry { template, count }
            })
            .collect();
        if entries.is_empty() {
            return Err(LibraryError::EmptyFrozen(self.min_count));
        }
        Ok(FrozenLibrary { entries, min_count: self.min_count })
    }

    /// Like [`freeze`](Self::freeze) but an empty result is not an error.
    pub fn freeze_or_empty(&self) -> FrozenLibrary {
        self.freeze().unwrap_or(FrozenLibrary { entries: Vec::new(), min_count: self.min_count })
    }
}

#[derive(Debug, Clone)]
pub struct LibraryEntry {
    pub template: Template,
    pub count: u64,
}

/// Immutable, parsed view of a library used for matching and generation,
/// ordered by descending count then signature.
#[derive(Debug, Clone)]
pub struct FrozenLibrary {
    entries: Vec<LibraryEntry>,
    min_count: u64,
}

impl FrozenLibrary {
    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn contains(&self, signature: &str) -> bool {
        self.entries.iter().any(|e| e.template.signature() == signature)
    }

    pub fn signatures(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.template.signature()).collect()
    }

    /// First entry, in library order, under which `product` yields the
    /// reactant set `canonical_reactants`.
    pub fn first_match(&self, product: &Molecule, canonical_reactants: &str) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| matches_canonical(&e.template, product, canonical_reactants))
    }
}

fn matches_canonical(template: &Template, product: &Molecule, canonical_reactants: &str) -> bool {
    apply_template(template, product, Direction::Retro).iter().any(|r| r == canonical_reactants)
}

/// True iff applying `template` backwards to the reaction's product can
/// yield exactly its reactant set.
pub fn match_template(record: &ReactionRecord, template: &Template) -> bool {
    matches_canonical(template, &record.product, &record.canonical_reactants())
}

/// Counts the templates of every extractable reaction.
pub fn build_library(
    corpus: &[ReactionRecord],
    radius: u32,
    min_count: u64,
) -> Result<(TemplateLibrary, BuildReport), LibraryError> {
    if corpus.is_empty() {
        return Err(LibraryError::EmptyCorpus);
    }
    let results: Vec<Result<Template, TemplateError>> =
        corpus.par_iter().map(|r| extract_template(r, radius)).collect();
    let mut lib = TemplateLibrary::new(min_count);
    let mut report = BuildReport { reactions: corpus.len(), ..Default::default() };
    for (record, result) in corpus.iter().zip(results) {
        match result {
            Ok(t) => {
                lib.add(t.signature(), 1);
                report.extracted += 1;
            }
            Err(e) => {
                log::debug!("template extraction skipped {}: {e}", record.source_id);
                *report.errors.entry(e.kind().to_string()).or_default() += 1;
            }
        }
    }
    Ok((lib, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn record(rxn: &str) -> ReactionRecord {
        let (r, p) = rxn.split_once(">>").unwrap();
        let mut rec = ReactionRecord::new(parse_smiles(p).unwrap(), &parse_smiles(r).unwrap(), "t");
        rec.atom_mapped = true;
        rec
    }

    const AMIDE: &str = "[CH3:1][C:2](=[O:3])[Cl:4].[NH2:5][CH3:6]>>[CH3:1][C:2](=[O:3])[NH:5][CH3:6]";
    const ETHER: &str = "[CH3:1][Br:2].[OH:3][CH3:4]>>[CH3:1][O:3][CH3:4]";

    #[test]
    fn counts_and_threshold() {
        let corpus: Vec<_> =
            std::iter::repeat_n(record(AMIDE), 10).chain(std::iter::repeat_n(record(ETHER), 5)).collect();
        let (lib, report) = build_library(&corpus, 1, 5).unwrap();
        assert_eq!(report.extracted, 15);
        assert_eq!(lib.len(), 2);
        let frozen = lib.freeze().unwrap();
        assert_eq!(frozen.len(), 1);
        assert_eq!(frozen.entries()[0].count, 10);
        assert_eq!(lib.clone().with_min_count(0).freeze().unwrap().len(), 2);
    }

    #[test]
    fn extraction_failures_are_tallied() {
        let corpus = vec![record(AMIDE), record("[CH3:1][OH:2]>>[CH3:1][OH:2]")];
        let (lib, report) = build_library(&corpus, 1, 0).unwrap();
        assert_eq!(lib.len(), 1);
        assert_eq!(report.errors.get("no_center"), Some(&1));
        assert!(matches!(build_library(&[], 1, 0), Err(LibraryError::EmptyCorpus)));
    }

    #[test]
    fn tsv_round_trip_is_sorted() {
        let corpus = vec![record(ETHER), record(AMIDE), record(AMIDE)];
        let (lib, _) = build_library(&corpus, 1, 0).unwrap();
        let text = lib.to_tsv();
        assert!(text.lines().next().unwrap().ends_with("\t2"));
        assert_eq!(TemplateLibrary::from_tsv(&text, 0).unwrap(), lib);
        assert!(TemplateLibrary::from_tsv("garbage\t1\n", 0).is_err());
    }

    #[test]
    fn match_template_checks_leaving_group() {
        let (lib, _) = build_library(&[record(AMIDE)], 1, 0).unwrap();
        let frozen = lib.freeze().unwrap();
        let tpl = &frozen.entries()[0].template;
        let ok = ReactionRecord::new(parse_smiles("CNC(C)=O").unwrap(), &parse_smiles("CC(=O)Cl.CN").unwrap(), "a");
        assert!(match_template(&ok, tpl));
        let wrong = ReactionRecord::new(parse_smiles("CNC(C)=O").unwrap(), &parse_smiles("CC(=O)Br.CN").unwrap(), "b");
        assert!(!match_template(&wrong, tpl));
    }
}
