use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use super::{maps_consistent, ReactionRecord};
use crate::chem::{parse_smiles, parse_smiles_lenient, GraphError, Molecule, SmilesErrorKind};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    BadSmiles { line: usize, reason: String },
    #[error("line {line}: inconsistent atom maps")]
    InconsistentMaps { line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Malformed lines, unparseable SMILES and bad atom maps become fatal.
    pub strict: bool,
}

/// Per-action counts. `records + duplicates == lines - blank - malformed -
/// bad_smiles + split_extra`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub lines: usize,
    pub blank: usize,
    pub malformed: usize,
    pub bad_smiles: usize,
    pub split_extra: usize,
    pub duplicates: usize,
    pub unmapped_flagged: usize,
    pub mapped: usize,
    pub records: usize,
}

impl IngestReport {
    pub fn reconciles(&self) -> bool {
        self.records + self.duplicates + self.blank + self.malformed + self.bad_smiles == self.lines + self.split_extra
    }
}

enum LineProblem {
    Malformed(String),
    BadSmiles(String),
}

struct ParsedLine {
    records: Vec<ReactionRecord>,
    flagged: bool,
}

fn parse_side(text: &str) -> Result<(Molecule, bool), String> {
    match parse_smiles(text) {
        Ok(m) => Ok((m, false)),
        Err(e) if matches!(e.kind, SmilesErrorKind::Graph(GraphError::DuplicateMap(_))) => {
            parse_smiles_lenient(text).map(|m| (m, true)).map_err(|e| e.to_string())
        }
        Err(e) => Err(e.to_string()),
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<ParsedLine, LineProblem> {
    let mut fields = line.split('\t');
    let reaction = fields.next().unwrap_or("").trim();
    let class_label = match fields.next().map(str::trim) {
        None | Some("") | Some("-") => None,
        Some(c) => {
            Some(c.parse::<u32>().map_err(|_| LineProblem::Malformed(format!("class label '{c}' is not an integer")))?)
        }
    };
    let id = match fields.next().map(str::trim) {
        None | Some("") => format!("L{line_no}"),
        Some(id) => id.to_string(),
    };
    let parts: Vec<&str> = reaction.split('>').collect();
    if parts.len() != 3 {
        return Err(LineProblem::Malformed(format!(
            "expected reactants>reagents>products, found {} '>' separators",
            parts.len() - 1
        )));
    }
    if parts[0].trim().is_empty() || parts[2].trim().is_empty() {
        return Err(LineProblem::Malformed("empty reactant or product side".into()));
    }
    let (reactants, mut flagged) = parse_side(parts[0]).map_err(LineProblem::BadSmiles)?;
    let (products, product_flag) = parse_side(parts[2]).map_err(LineProblem::BadSmiles)?;
    flagged |= product_flag;
    let products = products.split_components();
    let any_maps = reactants.has_maps() || products.iter().any(Molecule::has_maps);
    let mapped = !flagged && any_maps && products.iter().all(|p| maps_consistent(&reactants, p));
    if any_maps && !mapped {
        flagged = true;
    }
    let (reactants, products) = if mapped {
        (reactants, products)
    } else {
        (reactants.without_maps(), products.iter().map(Molecule::without_maps).collect())
    };
    let split = products.len() > 1;
    let records = products
        .into_iter()
        .enumerate()
        .map(|(k, product)| {
            let source_id = if split { format!("{id}/{}", k + 1) } else { id.clone() };
            let mut rec = ReactionRecord::new(product, &reactants, source_id);
            rec.atom_mapped = mapped;
            rec.class_label = class_label;
            rec
        })
        .collect();
    Ok(ParsedLine { records, flagged })
}

/// Parses one `reactants>reagents>products[\tclass[\tid]]` line into one
/// record per product.
pub fn parse_reaction_line(line: &str) -> Result<Vec<ReactionRecord>, IngestError> {
    match parse_line(line, 1) {
        Ok(p) => Ok(p.records),
        Err(LineProblem::Malformed(reason)) => Err(IngestError::Malformed { line: 1, reason }),
        Err(LineProblem::BadSmiles(reason)) => Err(IngestError::BadSmiles { line: 1, reason }),
    }
}

pub fn ingest_reaction_smiles<R: BufRead>(
    reader: R,
    options: IngestOptions,
) -> Result<(Vec<ReactionRecord>, IngestReport), IngestError> {
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        report.lines += 1;
        if line.trim().is_empty() || line.starts_with('#') {
            report.blank += 1;
            continue;
        }
        let parsed = match parse_line(&line, line_no) {
            Ok(p) => p,
            Err(LineProblem::Malformed(reason)) => {
                if options.strict {
                    return Err(IngestError::Malformed { line: line_no, reason });
                }
                log::warn!("line {line_no}: {reason}");
                report.malformed += 1;
                continue;
            }
            Err(LineProblem::BadSmiles(reason)) => {
                if options.strict {
                    return Err(IngestError::BadSmiles { line: line_no, reason });
                }
                log::warn!("line {line_no}: {reason}");
                report.bad_smiles += 1;
                continue;
            }
        };
        if parsed.flagged {
            if options.strict {
                return Err(IngestError::InconsistentMaps { line: line_no });
            }
            report.unmapped_flagged += 1;
        }
        report.split_extra += parsed.records.len() - 1;
        for rec in parsed.records {
            if seen.insert(rec.key()) {
                report.mapped += rec.atom_mapped as usize;
                out.push(rec);
            } else {
                report.duplicates += 1;
            }
        }
    }
    report.records = out.len();
    Ok((out, report))
}

pub fn read_reaction_file(
    path: &Path,
    options: IngestOptions,
) -> Result<(Vec<ReactionRecord>, IngestReport), IngestError> {
    ingest_reaction_smiles(BufReader::new(fs::File::open(path)?), options)
}

/// Writes `reactants>>product<TAB>class<TAB>id` lines; maps are kept.
pub fn write_reaction_file(path: &Path, records: &[ReactionRecord]) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for rec in records {
        let class = rec.class_label.map_or_else(|| "-".to_string(), |c| c.to_string());
        writeln!(out, "{}\t{}\t{}", rec.reaction_smiles(), class, rec.source_id)?;
    }
    out.flush()
}

/// Drops records whose canonical reaction occurs in `holdout`; with
/// `strict_products`, also drops records sharing a holdout product.
pub fn exclude_overlap(
    records: Vec<ReactionRecord>,
    holdout: &[ReactionRecord],
    strict_products: bool,
) -> Vec<ReactionRecord> {
    if holdout.is_empty() {
        return records;
    }
    let keys: HashSet<(String, String)> = holdout.iter().map(ReactionRecord::key).collect();
    let products: HashSet<&String> = keys.iter().map(|k| &k.0).collect();
    records
        .into_iter()
        .filter(|r| {
            let key = r.key();
            !(keys.contains(&key) || strict_products && products.contains(&key.0))
        })
        .collect()
}
