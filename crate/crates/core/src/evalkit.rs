//! Top-k exact and largest-fragment accuracy, rare-template subsets and
//! grouped reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::augment::ReactionRecord;
use crate::chem::{canonicalize, largest_fragment, parse_smiles};
use crate::templates::{build_library, extract_template, TemplateLibrary};

pub const DEFAULT_TOP_K: [usize; 6] = [1, 3, 5, 10, 20, 50];
pub const RARE_THRESHOLDS: [u64; 3] = [2, 5, 10];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("k values must be positive and strictly ascending")]
    BadKs,
    #[error("frequency threshold must be at least 1")]
    Threshold,
    #[error("predictions line {line}: {reason}")]
    BadPredictionLine { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    pub id: String,
    /// Canonical reactant set.
    pub ground_truth: String,
    /// Canonical reactant sets, best first.
    pub candidates: Vec<String>,
}

fn components(set: &str) -> Vec<&str> {
    let mut parts: Vec<&str> = set.split('.').filter(|s| !s.is_empty()).collect();
    parts.sort_unstable();
    parts
}

/// Equal multisets of canonical components.
pub fn exact_match(pred: &str, truth: &str) -> bool {
    components(pred) == components(truth)
}

fn main_fragment(set: &str) -> Option<String> {
    let mol = parse_smiles(set).ok()?;
    largest_fragment(&mol).ok().map(|m| canonicalize(&m))
}

/// Largest fragments (by heavy atoms, ties by canonical string) agree.
pub fn maxfrag_match(pred: &str, truth: &str) -> bool {
    match (main_fragment(pred), main_fragment(truth)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub ks: Vec<usize>,
    pub exact: Vec<f64>,
    pub maxfrag: Vec<f64>,
    pub samples: usize,
}

impl MetricsTable {
    pub fn exact_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.exact[i])
    }

    pub fn maxfrag_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.maxfrag[i])
    }

    /// Aligned columns, one row per metric.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<8}", "metric");
        for k in &self.ks {
            let _ = write!(out, " {:>8}", format!("top-{k}"));
        }
        out.push('\n');
        for (name, row) in [("exact", &self.exact), ("maxfrag", &self.maxfrag)] {
            let _ = write!(out, "{name:<8}");
            for v in row {
                let _ = write!(out, " {v:>8.4}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "samples  {}", self.samples);
        out
    }

    /// `metric.k=value` lines.
    pub fn to_key_values(&self, prefix: &str) -> String {
        let mut out = String::new();
        for (name, row) in [("exact", &self.exact), ("maxfrag", &self.maxfrag)] {
            for (k, v) in self.ks.iter().zip(row) {
                let _ = writeln!(out, "{prefix}{name}.{k}={v:.6}");
            }
        }
        let _ = writeln!(out, "{prefix}samples={}", self.samples);
        out
    }
}

fn check_ks(ks: &[usize]) -> Result<(), EvalError> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BadKs);
    }
    Ok(())
}

type HitRanks = (Option<usize>, Option<usize>);

/// First 1-based ranks of an exact and a largest-fragment hit.
fn hit_ranks(p: &PredictionSet, max_k: usize) -> HitRanks {
    let truth_frag = main_fragment(&p.ground_truth);
    let mut exact = None;
    let mut frag = None;
    for (i, c) in p.candidates.iter().take(max_k).enumerate() {
        if exact.is_none() && exact_match(c, &p.ground_truth) {
            exact = Some(i + 1);
        }
        if frag.is_none() && truth_frag.is_some() && main_fragment(c) == truth_frag {
            frag = Some(i + 1);
        }
        if exact.is_some() && frag.is_some() {
            break;
        }
    }
    // an exact hit is always a largest-fragment hit
    let frag = match (frag, exact) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    (exact, frag)
}

fn table_from_ranks(ranks: &[HitRanks], ks: &[usize]) -> MetricsTable {
    let n = ranks.len() as f64;
    let rate = |pick: fn(&HitRanks) -> Option<usize>, k: usize| {
        ranks.iter().filter(|r| pick(r).is_some_and(|x| x <= k)).count() as f64 / n
    };
    MetricsTable {
        ks: ks.to_vec(),
        exact: ks.iter().map(|&k| rate(|r| r.0, k)).collect(),
        maxfrag: ks.iter().map(|&k| rate(|r| r.1, k)).collect(),
        samples: ranks.len(),
    }
}

/// Accuracy at each k; queries without candidates count as misses.
pub fn topk_table(preds: &[PredictionSet], ks: &[usize]) -> Result<MetricsTable, EvalError> {
    check_ks(ks)?;
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let max_k = *ks.last().unwrap();
    let ranks: Vec<_> = preds.par_iter().map(|p| hit_ranks(p, max_k)).collect();
    Ok(table_from_ranks(&ranks, ks))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupedTable {
    pub groups: BTreeMap<String, MetricsTable>,
    pub overall: MetricsTable,
}

pub const UNLABELED: &str = "unlabeled";

/// Per-group tables; ids missing from `labels` go to [`UNLABELED`].
pub fn grouped_table(
    preds: &[PredictionSet],
    labels: &HashMap<String, String>,
    ks: &[usize],
) -> Result<GroupedTable, EvalError> {
    let overall = topk_table(preds, ks)?;
    let mut buckets: BTreeMap<String, Vec<PredictionSet>> = BTreeMap::new();
    for p in preds {
        let g = labels.get(&p.id).cloned().unwrap_or_else(|| UNLABELED.to_string());
        buckets.entry(g).or_default().push(p.clone());
    }
    let groups = buckets.into_iter().map(|(g, ps)| topk_table(&ps, ks).map(|t| (g, t))).collect::<Result<_, _>>()?;
    Ok(GroupedTable { groups, overall })
}

/// `(a - b) / b`; `None` when `b` is zero.
pub fn relative_improvement(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| (a - b) / b)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RareSubset {
    /// Indices into the evaluated records, ascending.
    pub members: Vec<usize>,
    pub extraction_errors: usize,
}

/// Records whose template occurs fewer than `threshold` times in `library`.
pub fn rare_subset_against(
    records: &[ReactionRecord],
    library: &TemplateLibrary,
    threshold: u64,
    radius: u32,
) -> Result<RareSubset, EvalError> {
    if threshold < 1 {
        return Err(EvalError::Threshold);
    }
    let signatures: Vec<Option<String>> =
        records.par_iter().map(|r| extract_template(r, radius).ok().map(|t| t.signature().to_string())).collect();
    let mut members = Vec::new();
    let mut extraction_errors = 0;
    for (i, sig) in signatures.iter().enumerate() {
        match sig {
            None => extraction_errors += 1,
            Some(s) if library.count(s) < threshold => members.push(i),
            Some(_) => {}
        }
    }
    Ok(RareSubset { members, extraction_errors })
}

/// Records whose template occurs fewer than `threshold` times across the
/// corpus itself.
pub fn rare_subset(corpus: &[ReactionRecord], threshold: u64, radius: u32) -> Result<RareSubset, EvalError> {
    if threshold < 1 {
        return Err(EvalError::Threshold);
    }
    if corpus.is_empty() {
        return Ok(RareSubset { members: Vec::new(), extraction_errors: 0 });
    }
    let (library, _) = build_library(corpus, radius, 0).expect("non-empty corpus");
    rare_subset_against(corpus, &library, threshold, radius)
}

/// `id<TAB>rank<TAB>smiles` lines.
pub fn write_predictions(preds: &[(String, Vec<String>)]) -> String {
    let mut out = String::new();
    for (id, cands) in preds {
        for (i, c) in cands.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{}\t{c}", i + 1);
        }
    }
    out
}

/// Parses a predictions file; ranks must run 1, 2, ... per id. SMILES are
/// canonicalized, unparseable ones are kept verbatim (they never match).
pub fn read_predictions(text: &str) -> Result<BTreeMap<String, Vec<String>>, EvalError> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| EvalError::BadPredictionLine { line: i + 1, reason: reason.into() };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad("expected id<TAB>rank<TAB>smiles"));
        }
        let rank: usize = fields[1].parse().map_err(|_| bad("rank is not an integer"))?;
        let list = out.entry(fields[0].to_string()).or_default();
        if rank != list.len() + 1 {
            return Err(bad("ranks must be contiguous from 1"));
        }
        let smiles = parse_smiles(fields[2]).map_or_else(|_| fields[2].to_string(), |m| canonicalize(&m));
        list.push(smiles);
    }
    Ok(out)
}
