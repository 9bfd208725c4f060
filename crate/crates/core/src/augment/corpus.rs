use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{rsmiles_pairs, ReactionRecord, SequencePair};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("real_ratio must be in (0, 1], got {0}")]
    RealRatio(f64),
    #[error("insilico_ratio must be >= 0, got {0}")]
    InsilicoRatio(f64),
    #[error("n_variants must be at least 1")]
    NoVariants,
    #[error("assembled corpus is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusOptions {
    pub real_ratio: f64,
    /// In-silico records selected per selected real record.
    pub insilico_ratio: f64,
    pub n_variants: usize,
    pub seed: u64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions { real_ratio: 1.0, insilico_ratio: 1.0, n_variants: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub real_available: usize,
    pub real_selected: usize,
    pub insilico_available: usize,
    pub insilico_selected: usize,
    pub n_variants: usize,
    pub lines: usize,
    /// Variants written again because a product had fewer distinct roots
    /// than `n_variants`.
    pub repeated_variants: usize,
    pub seed: u64,
}

fn subsample<'a>(pool: &'a [ReactionRecord], count: usize, rng: &mut ChaCha8Rng) -> Vec<&'a ReactionRecord> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(rng);
    idx.truncate(count);
    idx.sort_unstable();
    idx.into_iter().map(|i| &pool[i]).collect()
}

/// Exactly `n` pairs per record; variants cycle when roots run out.
fn expand(record: &ReactionRecord, n: usize, seed: u64) -> (Vec<SequencePair>, usize) {
    let rooted = rsmiles_pairs(record, n, seed);
    let have = rooted.pairs.len();
    let mut pairs = rooted.pairs;
    for i in have..n {
        let mut again = pairs[i % have].clone();
        again.variant_index = i;
        pairs.push(again);
    }
    (pairs, n - have)
}

/// Writes `src.txt`, `tgt.txt`, `provenance.tsv` and `manifest.json` into
/// `out_dir` and returns the manifest.
pub fn assemble_corpus(
    real: &[ReactionRecord],
    insilico: &[ReactionRecord],
    options: &CorpusOptions,
    out_dir: &Path,
) -> Result<CorpusManifest, CorpusError> {
    if options.real_ratio.is_nan() || options.real_ratio <= 0.0 || options.real_ratio > 1.0 {
        return Err(CorpusError::RealRatio(options.real_ratio));
    }
    if !options.insilico_ratio.is_finite() || options.insilico_ratio < 0.0 {
        return Err(CorpusError::InsilicoRatio(options.insilico_ratio));
    }
    if options.n_variants == 0 {
        return Err(CorpusError::NoVariants);
    }
    // Separate streams keep real-only output independent of the in-silico pool.
    let stream = |n: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(n);
        rng
    };
    let real_count =
        ((real.len() as f64 * options.real_ratio).round() as usize).clamp(usize::from(!real.is_empty()), real.len());
    let chosen_real = subsample(real, real_count, &mut stream(1));
    let insilico_count = ((chosen_real.len() as f64 * options.insilico_ratio).round() as usize).min(insilico.len());
    let chosen_insilico = subsample(insilico, insilico_count, &mut stream(2));
    if chosen_real.is_empty() && chosen_insilico.is_empty() {
        return Err(CorpusError::Empty);
    }

    let selected: Vec<&ReactionRecord> = chosen_real.iter().chain(&chosen_insilico).copied().collect();
    let expanded: Vec<(Vec<SequencePair>, usize)> =
        selected.par_iter().map(|r| expand(r, options.n_variants, options.seed)).collect();
    let mut rows: Vec<(&ReactionRecord, SequencePair)> = Vec::new();
    let mut repeated = 0;
    for (record, (pairs, extra)) in selected.iter().zip(expanded) {
        repeated += extra;
        rows.extend(pairs.into_iter().map(|p| (*record, p)));
    }
    rows.shuffle(&mut stream(3));

    fs::create_dir_all(out_dir)?;
    let mut src = io::BufWriter::new(fs::File::create(out_dir.join("src.txt"))?);
    let mut tgt = io::BufWriter::new(fs::File::create(out_dir.join("tgt.txt"))?);
    let mut prov = io::BufWriter::new(fs::File::create(out_dir.join("provenance.tsv"))?);
    for (line, (record, pair)) in rows.iter().enumerate() {
        writeln!(src, "{}", pair.source)?;
        writeln!(tgt, "{}", pair.target)?;
        writeln!(prov, "{}\t{}\t{}\t{}", line + 1, record.source_id, record.provenance, pair.variant_index)?;
    }
    src.flush()?;
    tgt.flush()?;
    prov.flush()?;

    let manifest = CorpusManifest {
        real_available: real.len(),
        real_selected: chosen_real.len(),
        insilico_available: insilico.len(),
        insilico_selected: chosen_insilico.len(),
        n_variants: options.n_variants,
        lines: rows.len(),
        repeated_variants: repeated,
        seed: options.seed,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}
