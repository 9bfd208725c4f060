use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::PipelineError;
use crate::augment::ReactionRecord;
use crate::evalkit::{
    grouped_table, rare_subset, rare_subset_against, topk_table, GroupedTable, MetricsTable, PredictionSet,
    RARE_THRESHOLDS,
};
use crate::generator::{Direction, Generator, GeneratorError};
use crate::templates::TemplateLibrary;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RareSlice {
    pub threshold: u64,
    pub members: usize,
    /// `None` when the slice is empty.
    pub table: Option<MetricsTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall: MetricsTable,
    pub rare: Vec<RareSlice>,
    pub grouped: Option<GroupedTable>,
    /// Holdout reactions with no entry in the predictions.
    pub missing_predictions: usize,
}

/// Retro predictions for every holdout product at `k`, keyed by record id.
pub fn predict(
    holdout: &[ReactionRecord],
    generator: &dyn Generator,
    k: usize,
) -> Result<Vec<(String, Vec<String>)>, GeneratorError> {
    let queries: Vec<String> = holdout.iter().map(ReactionRecord::canonical_product).collect();
    let results = generator.generate_batch(&queries, Direction::Retro, k)?;
    Ok(holdout
        .iter()
        .zip(results)
        .map(|(r, cands)| (r.source_id.clone(), cands.into_iter().map(|c| c.output).collect()))
        .collect())
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(PipelineError::io(path))
}

/// Scores `predictions` against `holdout` and writes `metrics.txt`,
/// `metrics.kv`, `rare.txt` and, when any record has a class label,
/// `grouped.txt` into `out_dir`.
///
/// Rare slices count templates in `reference` (normally the training
/// library); without one, in the holdout itself.
pub fn run_eval(
    holdout: &[ReactionRecord],
    predictions: &BTreeMap<String, Vec<String>>,
    ks: &[usize],
    reference: Option<&TemplateLibrary>,
    radius: u32,
    out_dir: &Path,
) -> Result<EvalReport, PipelineError> {
    if holdout.is_empty() {
        return Err(PipelineError::Data("holdout set is empty".into()));
    }
    let mut missing = 0;
    let sets: Vec<PredictionSet> = holdout
        .iter()
        .map(|r| {
            let candidates = predictions.get(&r.source_id).cloned().unwrap_or_else(|| {
                missing += 1;
                Vec::new()
            });
            PredictionSet { id: r.source_id.clone(), ground_truth: r.canonical_reactants(), candidates }
        })
        .collect();
    let overall = topk_table(&sets, ks)?;

    let mut rare = Vec::new();
    for threshold in RARE_THRESHOLDS {
        let subset = match reference {
            Some(lib) => rare_subset_against(holdout, lib, threshold, radius)?,
            None => rare_subset(holdout, threshold, radius)?,
        };
        let members: Vec<PredictionSet> = subset.members.iter().map(|&i| sets[i].clone()).collect();
        let table = if members.is_empty() { None } else { Some(topk_table(&members, ks)?) };
        rare.push(RareSlice { threshold, members: members.len(), table });
    }

    let labels: HashMap<String, String> =
        holdout.iter().filter_map(|r| r.class_label.map(|c| (r.source_id.clone(), c.to_string()))).collect();
    let grouped = if labels.is_empty() { None } else { Some(grouped_table(&sets, &labels, ks)?) };

    fs::create_dir_all(out_dir).map_err(PipelineError::io(out_dir))?;
    write(&out_dir.join("metrics.txt"), &overall.to_text())?;
    let mut kv = overall.to_key_values("");
    let mut rare_text = String::new();
    for slice in &rare {
        let _ = writeln!(rare_text, "rare-{} ({} reactions)", slice.threshold, slice.members);
        match &slice.table {
            Some(t) => {
                rare_text.push_str(&t.to_text());
                kv.push_str(&t.to_key_values(&format!("rare{}.", slice.threshold)));
            }
            None => {
                rare_text.push_str("empty\n");
                let _ = writeln!(kv, "rare{}.samples=0", slice.threshold);
            }
        }
        rare_text.push('\n');
    }
    write(&out_dir.join("rare.txt"), &rare_text)?;
    if let Some(g) = &grouped {
        let mut text = String::new();
        for (name, t) in &g.groups {
            let _ = writeln!(text, "group {name}");
            text.push_str(&t.to_text());
            text.push('\n');
            kv.push_str(&t.to_key_values(&format!("group.{name}.")));
        }
        write(&out_dir.join("grouped.txt"), &text)?;
    }
    let _ = writeln!(kv, "missing_predictions={missing}");
    write(&out_dir.join("metrics.kv"), &kv)?;
    Ok(EvalReport { overall, rare, grouped, missing_predictions: missing })
}
