//! Three-stage screening of in-silico reactions: SMILES validity, template
//! matching against a frozen library, and round-trip similarity.
//!
//! The similarity stage regenerates the original side from the generated
//! side with the inverse generator (top-1) and compares the regenerated
//! molecules with the original unpaired molecules by Tanimoto similarity.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{Provenance, ReactionRecord};
use crate::chem::{parse_smiles, Molecule};
use crate::fingerprint::{fingerprint_set, tanimoto, FingerprintError, DEFAULT_LENGTH, DEFAULT_RADIUS};
use crate::generator::{Direction, Generator, GeneratorError};
use crate::templates::FrozenLibrary;

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.55;
pub const DEFAULT_TEMPLATE_MIN_COUNT: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub similarity_threshold: f64,
    pub template_min_count: u64,
    pub fingerprint_radius: u32,
    pub fingerprint_length: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            template_min_count: DEFAULT_TEMPLATE_MIN_COUNT,
            fingerprint_radius: DEFAULT_RADIUS,
            fingerprint_length: DEFAULT_LENGTH,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(FilterError::Threshold(self.similarity_threshold));
        }
        crate::fingerprint::FingerprintBitset::new(self.fingerprint_length, self.fingerprint_radius)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("similarity threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error("candidate {0} is not marked as in-silico")]
    NotInSilico(String),
    #[error("inverse generator failed after {} decisions: {error}", partial.len())]
    Inverse { error: GeneratorError, partial: Vec<FilterDecision> },
}

/// An in-silico reaction as text; `provenance` says which side was
/// generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterCandidate {
    pub id: String,
    pub reactants: String,
    pub product: String,
    pub provenance: Provenance,
}

/// `id<TAB>provenance<TAB>reactants<TAB>product` lines.
pub fn candidates_to_tsv(candidates: &[FilterCandidate]) -> String {
    let mut out = String::new();
    for c in candidates {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", c.id, c.provenance, c.reactants, c.product));
    }
    out
}

pub fn parse_candidates(text: &str) -> Result<Vec<FilterCandidate>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(format!("candidates line {}: expected 4 fields, found {}", i + 1, f.len()));
        }
        let provenance = f[1].parse().map_err(|e| format!("candidates line {}: {e}", i + 1))?;
        out.push(FilterCandidate {
            id: f[0].to_string(),
            provenance,
            reactants: f[2].to_string(),
            product: f[3].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Kept,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validity,
    TemplateMatch,
    SimilarityPass,
    SimilarityFail,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Validity, Stage::TemplateMatch, Stage::SimilarityPass, Stage::SimilarityFail];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Validity => "validity",
            Stage::TemplateMatch => "template_match",
            Stage::SimilarityPass => "similarity_pass",
            Stage::SimilarityFail => "similarity_fail",
        }
    }

    pub fn verdict(self) -> Verdict {
        match self {
            Stage::TemplateMatch | Stage::SimilarityPass => Verdict::Kept,
            Stage::Validity | Stage::SimilarityFail => Verdict::Dropped,
        }
    }
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Kept => "kept",
            Verdict::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub id: String,
    pub verdict: Verdict,
    pub stage: Stage,
    pub matched_template: Option<String>,
    pub pseudo_output: Option<String>,
    pub similarity: Option<f64>,
}

impl FilterDecision {
    fn new(id: &str, stage: Stage) -> Self {
        FilterDecision {
            id: id.to_string(),
            verdict: stage.verdict(),
            stage,
            matched_template: None,
            pseudo_output: None,
            similarity: None,
        }
    }

    /// `id<TAB>verdict<TAB>stage<TAB>similarity<TAB>template<TAB>pseudo`,
    /// with `-` for absent fields.
    pub fn log_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.id,
            self.verdict.as_str(),
            self.stage.as_str(),
            self.similarity.map_or_else(|| "-".to_string(), |s| format!("{s:.6}")),
            self.matched_template.as_deref().unwrap_or("-"),
            self.pseudo_output.as_deref().unwrap_or("-"),
        )
    }
}

pub fn write_decision_log<W: Write>(mut out: W, decisions: &[FilterDecision]) -> io::Result<()> {
    for d in decisions {
        writeln!(out, "{}", d.log_line())?;
    }
    out.flush()
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    /// Kept reactions, first occurrence of each canonical reaction only.
    pub kept: Vec<ReactionRecord>,
    pub decisions: Vec<FilterDecision>,
    pub duplicates_removed: usize,
}

struct Parsed {
    reactants: Molecule,
    product: Molecule,
}

fn parse_candidate(c: &FilterCandidate) -> Option<Parsed> {
    let reactants = parse_smiles(&c.reactants).ok()?;
    let product = parse_smiles(&c.product).ok()?;
    if reactants.is_empty() || product.components().len() != 1 {
        return None;
    }
    Some(Parsed { reactants, product })
}

/// Decides every candidate exactly once, in input order.
pub fn filter_reactions(
    candidates: &[FilterCandidate],
    library: &FrozenLibrary,
    inverse: &dyn Generator,
    config: &FilterConfig,
) -> Result<FilterOutcome, FilterError> {
    config.validate()?;
    if let Some(c) = candidates.iter().find(|c| !c.provenance.is_in_silico()) {
        return Err(FilterError::NotInSilico(c.id.clone()));
    }
    let first: Vec<(Option<Parsed>, Option<FilterDecision>)> = candidates
        .par_iter()
        .map(|c| {
            let Some(parsed) = parse_candidate(c) else {
                return (None, Some(FilterDecision::new(&c.id, Stage::Validity)));
            };
            let reactant_set = crate::chem::canonicalize(&parsed.reactants);
            match library.first_match(&parsed.product, &reactant_set) {
                Some(entry) => {
                    let mut d = FilterDecision::new(&c.id, Stage::TemplateMatch);
                    d.matched_template = Some(entry.template.signature().to_string());
                    (Some(parsed), Some(d))
                }
                None => (Some(parsed), None),
            }
        })
        .collect();

    // Stage 2 runs as one batch per inverse direction.
    let mut pending: Vec<usize> = Vec::new();
    for (i, (_, decision)) in first.iter().enumerate() {
        if decision.is_none() {
            pending.push(i);
        }
    }
    let mut decided: Vec<Option<FilterDecision>> = first.iter().map(|(_, d)| d.clone()).collect();
    for provenance in [Provenance::InSilicoFromReactants, Provenance::InSilicoFromProducts] {
        let group: Vec<usize> = pending.iter().copied().filter(|&i| candidates[i].provenance == provenance).collect();
        if group.is_empty() {
            continue;
        }
        // Generated product: regenerate reactants (retro) and compare with
        // the original reactants; generated reactants: the reverse.
        let (direction, query_side): (Direction, fn(&Parsed) -> &Molecule) = match provenance {
            Provenance::InSilicoFromReactants => (Direction::Retro, |p| &p.product),
            _ => (Direction::Forward, |p| &p.reactants),
        };
        let original_side: fn(&Parsed) -> &Molecule = match provenance {
            Provenance::InSilicoFromReactants => |p| &p.reactants,
            _ => |p| &p.product,
        };
        let queries: Vec<String> =
            group.iter().map(|&i| crate::chem::canonicalize(query_side(first[i].0.as_ref().unwrap()))).collect();
        let results = match inverse.generate_batch(&queries, direction, 1) {
            Ok(r) => r,
            Err(error) => {
                let partial = decided.into_iter().flatten().collect();
                return Err(FilterError::Inverse { error, partial });
            }
        };
        for (&i, result) in group.iter().zip(results) {
            let parsed = first[i].0.as_ref().unwrap();
            let id = &candidates[i].id;
            let decision = match result.into_iter().next() {
                None => {
                    let mut d = FilterDecision::new(id, Stage::SimilarityFail);
                    d.similarity = Some(0.0);
                    d
                }
                Some(top) => {
                    let pseudo = parse_smiles(&top.output).expect("generator outputs are canonical");
                    let original = original_side(parsed);
                    let sim = similarity(&pseudo, original, config)?;
                    let stage =
                        if sim >= config.similarity_threshold { Stage::SimilarityPass } else { Stage::SimilarityFail };
                    let mut d = FilterDecision::new(id, stage);
                    d.similarity = Some(sim);
                    d.pseudo_output = Some(top.output);
                    d
                }
            };
            decided[i] = Some(decision);
        }
    }

    let decisions: Vec<FilterDecision> = decided.into_iter().map(|d| d.expect("every candidate decided")).collect();
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut duplicates_removed = 0;
    for ((parsed, _), (c, d)) in first.into_iter().zip(candidates.iter().zip(&decisions)) {
        if d.verdict != Verdict::Kept {
            continue;
        }
        let parsed = parsed.unwrap();
        let mut record = ReactionRecord::new(parsed.product, &parsed.reactants, c.id.clone());
        record.provenance = c.provenance;
        if seen.insert(record.key()) {
            kept.push(record);
        } else {
            duplicates_removed += 1;
        }
    }
    Ok(FilterOutcome { kept, decisions, duplicates_removed })
}

fn similarity(a: &Molecule, b: &Molecule, config: &FilterConfig) -> Result<f64, FingerprintError> {
    let r = config.fingerprint_radius;
    let n = config.fingerprint_length;
    let fa = fingerprint_set(&a.split_components(), r, n)?;
    let fb = fingerprint_set(&b.split_components(), r, n)?;
    tanimoto(&fa, &fb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub total: usize,
    pub counts: Vec<(Stage, usize)>,
    pub kept: usize,
}

impl RetentionReport {
    pub fn fraction(&self, stage: Stage) -> Option<f64> {
        let n = self.counts.iter().find(|(s, _)| *s == stage)?.1;
        (self.total > 0).then(|| n as f64 / self.total as f64)
    }

    pub fn kept_fraction(&self) -> Option<f64> {
        (self.total > 0).then(|| self.kept as f64 / self.total as f64)
    }
}

impl fmt::Display for RetentionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total\t{}", self.total)?;
        if self.total == 0 {
            return Ok(());
        }
        for &(stage, n) in &self.counts {
            writeln!(f, "{}\t{}\t{:.4}", stage.as_str(), n, n as f64 / self.total as f64)?;
        }
        writeln!(f, "kept_fraction\t{:.4}", self.kept_fraction().unwrap_or(0.0))
    }
}

pub fn retention_report(decisions: &[FilterDecision]) -> RetentionReport {
    let counts = Stage::ALL.iter().map(|&s| (s, decisions.iter().filter(|d| d.stage == s).count())).collect();
    RetentionReport {
        total: decisions.len(),
        counts,
        kept: decisions.iter().filter(|d| d.verdict == Verdict::Kept).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GenerationCandidate;
    use crate::templates::{extract_from_graphs, TemplateLibrary};
    use std::collections::HashMap;

    #[test]
    fn candidate_tsv_round_trip() {
        let cands = vec![
            FilterCandidate {
                id: "R1".into(),
                reactants: "CC(=O)Cl.CN".into(),
                product: "CNC(C)=O".into(),
                provenance: Provenance::InSilicoFromReactants,
            },
            FilterCandidate {
                id: "P7".into(),
                reactants: "CO".into(),
                product: "COC".into(),
                provenance: Provenance::InSilicoFromProducts,
            },
        ];
        assert_eq!(parse_candidates(&candidates_to_tsv(&cands)).unwrap(), cands);
        assert!(parse_candidates("R1\tnope\tC\tC\n").is_err());
        assert!(parse_candidates("R1\tC\tC\n").is_err());
    }

    /// Returns a fixed answer per query.
    struct Table(HashMap<String, String>);

    impl Generator for Table {
        fn name(&self) -> &str {
            "table"
        }

        fn generate_batch(
            &self,
            inputs: &[String],
            _direction: Direction,
            _k: usize,
        ) -> Result<Vec<Vec<GenerationCandidate>>, GeneratorError> {
            Ok(inputs
                .iter()
                .map(|q| {
                    self.0
                        .get(q)
                        .map(|o| vec![GenerationCandidate { output: o.clone(), score: 0.0, rank: 1 }])
                        .unwrap_or_default()
                })
                .collect())
        }
    }

    fn canon(s: &str) -> String {
        crate::chem::canonicalize(&parse_smiles(s).unwrap())
    }

    fn library() -> FrozenLibrary {
        let t = extract_from_graphs(
            &parse_smiles("[CH3:1][C:2](=[O:3])[Cl:4].[NH2:5][CH3:6]").unwrap(),
            &parse_smiles("[CH3:1][C:2](=[O:3])[NH:5][CH3:6]").unwrap(),
            1,
        )
        .unwrap();
        let mut lib = TemplateLibrary::new(0);
        lib.add(t.signature(), 10);
        lib.freeze().unwrap()
    }

    fn candidate(id: &str, r: &str, p: &str) -> FilterCandidate {
        FilterCandidate {
            id: id.into(),
            reactants: r.into(),
            product: p.into(),
            provenance: Provenance::InSilicoFromReactants,
        }
    }

    #[test]
    fn stages_in_order() {
        let cands = vec![
            candidate("a", "CC(=O)Cl.CN", "CNC(C)=O"),
            candidate("b", "CCO.CC(=O)O", "CCOC(C)=O"),
            candidate("c", "CCCCCC", "C1CC"),
            candidate("d", "CCCl.O", "CCO"),
            candidate("e", "CCBr", "CCBr"),
        ];
        let gen = Table(HashMap::from([(canon("CCOC(C)=O"), canon("CC(=O)O.OCC")), (canon("CCO"), canon("c1ccccc1"))]));
        let out = filter_reactions(&cands, &library(), &gen, &FilterConfig::default()).unwrap();
        let stages: Vec<Stage> = out.decisions.iter().map(|d| d.stage).collect();
        assert_eq!(
            stages,
            [
                Stage::TemplateMatch,
                Stage::SimilarityPass,
                Stage::Validity,
                Stage::SimilarityFail,
                Stage::SimilarityFail
            ]
        );
        assert_eq!(out.decisions[1].similarity, Some(1.0));
        assert_eq!(out.decisions[4].similarity, Some(0.0));
        assert!(out.decisions[4].pseudo_output.is_none());
        assert_eq!(out.kept.len(), 2);
        assert!(out.decisions[0].log_line().starts_with("a\tkept\ttemplate_match\t-\t"));
        assert!(out.decisions[2].log_line().ends_with("validity\t-\t-\t-"));
    }

    #[test]
    fn kept_duplicates_removed() {
        let cands = vec![candidate("a", "CC(=O)Cl.CN", "CNC(C)=O"), candidate("b", "CN.ClC(C)=O", "CC(=O)NC")];
        let gen = Table(HashMap::new());
        let out = filter_reactions(&cands, &library(), &gen, &FilterConfig::default()).unwrap();
        assert_eq!(out.decisions.len(), 2);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.duplicates_removed, 1);
    }

    #[test]
    fn report_fractions() {
        let mut decisions = Vec::new();
        for (stage, n) in [(Stage::TemplateMatch, 60), (Stage::SimilarityPass, 25), (Stage::SimilarityFail, 15)] {
            decisions.extend((0..n).map(|i| FilterDecision::new(&i.to_string(), stage)));
        }
        let report = retention_report(&decisions);
        assert_eq!(report.kept_fraction(), Some(0.85));
        let sum: f64 = Stage::ALL.iter().map(|&s| report.fraction(s).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(report.to_string().contains("kept_fraction\t0.8500"));
        let empty = retention_report(&[]);
        assert_eq!(empty.total, 0);
        assert_eq!(empty.kept_fraction(), None);
    }

    #[test]
    fn rejects_real_records_and_bad_threshold() {
        let mut c = candidate("a", "CC", "CC");
        c.provenance = Provenance::Real;
        let gen = Table(HashMap::new());
        assert!(matches!(
            filter_reactions(&[c], &library(), &gen, &FilterConfig::default()),
            Err(FilterError::NotInSilico(_))
        ));
        let cfg = FilterConfig { similarity_threshold: 1.5, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(FilterError::Threshold(_))));
    }
}
