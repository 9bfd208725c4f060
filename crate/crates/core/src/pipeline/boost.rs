use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{PipelineConfig, PipelineError};
use crate::augment::{
    assemble_corpus, read_reaction_file, write_reaction_file, CorpusManifest, CorpusOptions, IngestOptions,
    IngestReport, Provenance, ReactionRecord,
};
use crate::chem::{canonicalize, parse_smiles};
use crate::filter::{
    candidates_to_tsv, filter_reactions, retention_report, write_decision_log, FilterCandidate, Stage,
};
use crate::generator::{
    AdapterGenerator, ByDirection, Direction, Endpoint, Generator, GeneratorError, NativeGenerator,
};
use crate::templates::{build_library, TemplateLibrary};

#[derive(Debug, Clone, Copy, Default)]
pub struct BoostOptions {
    /// Record per-stage wall-clock milliseconds in the manifest.
    pub timing: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct InputStage {
    pub real: IngestReport,
    pub holdout_records: usize,
    pub unpaired_reactants: usize,
    pub unpaired_products: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LibraryStage {
    pub real_reactions: usize,
    pub extracted: usize,
    pub extraction_errors: BTreeMap<String, usize>,
    /// Template counts contributed by kept in-silico reactions so far.
    pub attributed: u64,
    pub templates: usize,
    pub filter_templates: usize,
    pub generator_templates: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GenerationReport {
    pub inputs: usize,
    pub invalid_inputs: usize,
    pub no_prediction: usize,
    /// `inputs == invalid_inputs + no_prediction + generated`.
    pub generated: usize,
    pub dropped_adapter_lines: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FilterStage {
    pub candidates: usize,
    pub stages: BTreeMap<String, usize>,
    pub kept: usize,
    pub dropped: usize,
    pub kept_fraction: Option<f64>,
    pub duplicates_removed: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DedupStage {
    pub input: usize,
    pub holdout_overlap: usize,
    pub real_overlap: usize,
    pub earlier_iterations: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AttributionStage {
    pub attributed: usize,
    pub unattributed: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IterationManifest {
    pub iteration: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub library: Option<LibraryStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dedup: Option<DedupStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribution: Option<AttributionStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusManifest>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<InputStage>,
    pub iterations: Vec<IterationManifest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_templates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
}

/// Non-blank, non-comment lines as `(line number, text)`.
pub fn read_unpaired(path: &Path) -> Result<Vec<(usize, String)>, PipelineError> {
    let text = fs::read_to_string(path).map_err(PipelineError::io(path))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .collect())
}

/// Top-1 generation for each input. Forward inputs are reactant sets and
/// yield candidates with generated products; retro inputs the reverse.
/// Candidate ids are `R<line>` or `P<line>`.
pub fn generate_candidates(
    inputs: &[(usize, String)],
    direction: Direction,
    generator: &dyn Generator,
) -> Result<(Vec<FilterCandidate>, GenerationReport), GeneratorError> {
    let mut report = GenerationReport { inputs: inputs.len(), ..Default::default() };
    let mut valid = Vec::new();
    for (line, text) in inputs {
        match parse_smiles(text) {
            Ok(m) if !m.is_empty() => valid.push((*line, canonicalize(&m))),
            _ => {
                log::warn!("unpaired input line {line} does not parse: '{text}'");
                report.invalid_inputs += 1;
            }
        }
    }
    let queries: Vec<String> = valid.iter().map(|(_, s)| s.clone()).collect();
    let before = generator.dropped_lines();
    let results = generator.generate_batch(&queries, direction, 1)?;
    report.dropped_adapter_lines = generator.dropped_lines() - before;
    let mut out = Vec::new();
    for ((line, input), result) in valid.into_iter().zip(results) {
        let Some(top) = result.into_iter().next() else {
            report.no_prediction += 1;
            continue;
        };
        let candidate = match direction {
            Direction::Forward => FilterCandidate {
                id: format!("R{line}"),
                reactants: input,
                product: top.output,
                provenance: Provenance::InSilicoFromReactants,
            },
            Direction::Retro => FilterCandidate {
                id: format!("P{line}"),
                reactants: top.output,
                product: input,
                provenance: Provenance::InSilicoFromProducts,
            },
        };
        out.push(candidate);
    }
    report.generated = out.len();
    Ok((out, report))
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    workdir: PathBuf,
    manifest: RunManifest,
    timings: BTreeMap<String, u64>,
    timing: bool,
    stage: String,
}

impl Run<'_> {
    fn flush(&mut self) -> Result<(), PipelineError> {
        self.manifest.timings_ms = self.timing.then(|| self.timings.clone());
        let path = self.workdir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(PipelineError::io(path))
    }

    fn timed<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T, PipelineError>,
    ) -> Result<T, PipelineError> {
        self.stage = name.to_string();
        let start = Instant::now();
        let out = f(self)?;
        self.timings.insert(name.to_string(), start.elapsed().as_millis() as u64);
        self.flush()?;
        Ok(out)
    }

    fn iteration(&mut self) -> &mut IterationManifest {
        self.manifest.iterations.last_mut().expect("inside an iteration")
    }
}

fn prepare_workdir(dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(PipelineError::io(dir))?;
        if entries.next().is_some() {
            return Err(PipelineError::WorkdirNotEmpty(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(PipelineError::io(dir))
}

fn make_generator(endpoint: &str, native: &Option<Arc<dyn Generator>>) -> Result<Arc<dyn Generator>, PipelineError> {
    if endpoint == "native" {
        return native.clone().ok_or_else(|| PipelineError::Data("native generator library is empty".into()));
    }
    let endpoint = Endpoint::parse(endpoint).map_err(PipelineError::Usage)?;
    Ok(Arc::new(AdapterGenerator::new(endpoint)))
}

fn run_hook(hook: &str, corpus: &Path, iteration: usize) -> Result<(), PipelineError> {
    let words: Vec<String> = hook
        .split_whitespace()
        .map(|w| w.replace("{corpus}", &corpus.to_string_lossy()).replace("{iteration}", &iteration.to_string()))
        .collect();
    let Some((program, args)) = words.split_first() else {
        return Ok(());
    };
    let status = Command::new(program)
        .args(args)
        .status()
        .map_err(|e| PipelineError::Generator(GeneratorError::Transport(format!("retrain hook {program}: {e}"))))?;
    if !status.success() {
        return Err(GeneratorError::Transport(format!("retrain hook {program} exited with {status}")).into());
    }
    Ok(())
}

/// Runs every configured iteration in a fresh workdir and returns the
/// manifest. On failure the manifest on disk covers the stages completed so
/// far and names the failing stage.
pub fn boost(cfg: &PipelineConfig, options: BoostOptions) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    prepare_workdir(&cfg.paths.workdir)?;
    let mut run = Run {
        cfg,
        workdir: cfg.paths.workdir.clone(),
        manifest: RunManifest {
            config_hash: cfg.hash(),
            seed: cfg.run.seed,
            status: "running".into(),
            ..Default::default()
        },
        timings: BTreeMap::new(),
        timing: options.timing,
        stage: "start".into(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| PipelineError::Usage(format!("worker pool: {e}")))?;
    match pool.install(|| run_stages(&mut run)) {
        Ok(()) => {
            run.manifest.status = "complete".into();
            run.flush()?;
            Ok(run.manifest)
        }
        Err(e) => {
            run.manifest.status = format!("failed at {}: {e}", run.stage);
            let _ = run.flush();
            Err(e)
        }
    }
}

fn run_stages(run: &mut Run) -> Result<(), PipelineError> {
    let cfg = run.cfg;
    let ingest = IngestOptions { strict: cfg.augment.strict_ingest };
    let (real, holdout, reactant_inputs, product_inputs) = run.timed("inputs", |run| {
        let (real, report) = read_reaction_file(&cfg.paths.real_corpus, ingest)?;
        let mut holdout = Vec::new();
        for path in &cfg.paths.holdout {
            holdout.extend(read_reaction_file(path, ingest)?.0);
        }
        let reactants = cfg.paths.unpaired_reactants.as_deref().map(read_unpaired).transpose()?.unwrap_or_default();
        let products = cfg.paths.unpaired_products.as_deref().map(read_unpaired).transpose()?.unwrap_or_default();
        run.manifest.inputs = Some(InputStage {
            real: report,
            holdout_records: holdout.len(),
            unpaired_reactants: reactants.len(),
            unpaired_products: products.len(),
        });
        Ok((real, holdout, reactants, products))
    })?;
    if real.is_empty() {
        return Err(PipelineError::Data("real corpus has no usable reactions".into()));
    }

    let (real_library, build) = build_library(&real, cfg.templates.radius, 0)?;
    let mut attributed = TemplateLibrary::new(0);
    let mut all_kept: Vec<ReactionRecord> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let holdout_keys: HashSet<(String, String)> = holdout.par_iter().map(ReactionRecord::key).collect();
    let holdout_products: HashSet<String> = holdout_keys.iter().map(|k| k.0.clone()).collect();
    let real_keys: HashSet<(String, String)> = real.par_iter().map(ReactionRecord::key).collect();
    let uses_adapter = cfg.generator.forward != "native" || cfg.generator.retro != "native";

    for i in 1..=cfg.run.iterations {
        let dir = run.workdir.join(format!("iter-{i:02}"));
        fs::create_dir_all(&dir).map_err(PipelineError::io(&dir))?;
        run.manifest.iterations.push(IterationManifest { iteration: i, ..Default::default() });
        let tag = |s: &str| format!("iter-{i:02}.{s}");

        if i > 1 && uses_adapter {
            if let Some(hook) = &cfg.generator.retrain_hook {
                let corpus = run.workdir.join(format!("iter-{:02}", i - 1)).join("corpus");
                run.timed(&tag("retrain"), |_| run_hook(hook, &corpus, i))?;
            }
        }

        let (filter_lib, full_lib, generators) = run.timed(&tag("library"), |run| {
            let mut library = real_library.clone();
            library.merge(&attributed);
            library.write_file(&dir.join("library.tsv"))?;
            let filter_lib = library.clone().with_min_count(cfg.templates.min_count).freeze_or_empty();
            let gen_lib = library.clone().with_min_count(cfg.templates.generator_min_count).freeze_or_empty();
            let full_lib = library.clone().with_min_count(0).freeze_or_empty();
            run.iteration().library = Some(LibraryStage {
                real_reactions: build.reactions,
                extracted: build.extracted,
                extraction_errors: build.errors.clone(),
                attributed: attributed.sorted_entries().iter().map(|e| e.1).sum(),
                templates: library.len(),
                filter_templates: filter_lib.len(),
                generator_templates: gen_lib.len(),
            });
            let native: Option<Arc<dyn Generator>> =
                NativeGenerator::new(gen_lib).ok().map(|g| Arc::new(g) as Arc<dyn Generator>);
            let generators = ByDirection {
                forward: make_generator(&cfg.generator.forward, &native)?,
                retro: make_generator(&cfg.generator.retro, &native)?,
            };
            Ok((filter_lib, full_lib, generators))
        })?;

        let candidates = run.timed(&tag("generation"), |run| {
            let mut candidates = Vec::new();
            let mut total = GenerationReport::default();
            for (inputs, direction) in [(&reactant_inputs, Direction::Forward), (&product_inputs, Direction::Retro)] {
                if inputs.is_empty() {
                    continue;
                }
                let (c, r) = generate_candidates(inputs, direction, generators.get(direction))?;
                candidates.extend(c);
                total.inputs += r.inputs;
                total.invalid_inputs += r.invalid_inputs;
                total.no_prediction += r.no_prediction;
                total.generated += r.generated;
                total.dropped_adapter_lines += r.dropped_adapter_lines;
            }
            let path = dir.join("generated.tsv");
            fs::write(&path, candidates_to_tsv(&candidates)).map_err(PipelineError::io(path))?;
            run.iteration().generation = Some(total);
            Ok(candidates)
        })?;

        let kept = run.timed(&tag("filter"), |run| {
            let outcome = filter_reactions(&candidates, &filter_lib, &generators, &cfg.filter_config());
            let outcome = match outcome {
                Ok(o) => o,
                Err(crate::filter::FilterError::Inverse { error, partial }) => {
                    let path = dir.join("decisions.partial.tsv");
                    let file = fs::File::create(&path).map_err(PipelineError::io(&path))?;
                    write_decision_log(std::io::BufWriter::new(file), &partial).map_err(PipelineError::io(&path))?;
                    return Err(error.into());
                }
                Err(e) => return Err(e.into()),
            };
            let path = dir.join("decisions.tsv");
            let file = fs::File::create(&path).map_err(PipelineError::io(&path))?;
            write_decision_log(std::io::BufWriter::new(file), &outcome.decisions).map_err(PipelineError::io(&path))?;
            let report = retention_report(&outcome.decisions);
            let path = dir.join("retention.txt");
            fs::write(&path, report.to_string()).map_err(PipelineError::io(path))?;
            run.iteration().filter = Some(FilterStage {
                candidates: report.total,
                stages: Stage::ALL
                    .iter()
                    .map(|s| (s.as_str().to_string(), report.counts.iter().find(|c| c.0 == *s).map_or(0, |c| c.1)))
                    .collect(),
                kept: report.kept,
                dropped: report.total - report.kept,
                kept_fraction: report.kept_fraction(),
                duplicates_removed: outcome.duplicates_removed,
            });
            Ok(outcome.kept)
        })?;

        let fresh = run.timed(&tag("dedup"), |run| {
            let mut stage = DedupStage { input: kept.len(), ..Default::default() };
            let keys: Vec<(String, String)> = kept.par_iter().map(ReactionRecord::key).collect();
            let mut fresh = Vec::new();
            for (record, key) in kept.into_iter().zip(keys) {
                if holdout_keys.contains(&key) || cfg.augment.strict_products && holdout_products.contains(&key.0) {
                    stage.holdout_overlap += 1;
                } else if real_keys.contains(&key) {
                    stage.real_overlap += 1;
                } else if !seen.insert(key) {
                    stage.earlier_iterations += 1;
                } else {
                    fresh.push(record);
                }
            }
            stage.output = fresh.len();
            run.iteration().dedup = Some(stage);
            Ok(fresh)
        })?;

        run.timed(&tag("attribution"), |run| {
            let matches: Vec<Option<String>> = fresh
                .par_iter()
                .map(|r| {
                    full_lib
                        .first_match(&r.product, &r.canonical_reactants())
                        .map(|e| e.template.signature().to_string())
                })
                .collect();
            let mut lines = String::new();
            let mut stage = AttributionStage::default();
            for (record, sig) in fresh.iter().zip(&matches) {
                match sig {
                    Some(s) => {
                        attributed.add(s, 1);
                        stage.attributed += 1;
                    }
                    None => stage.unattributed += 1,
                }
                lines.push_str(&format!("{}\t{}\n", record.source_id, sig.as_deref().unwrap_or("-")));
            }
            let path = dir.join("attribution.tsv");
            fs::write(&path, lines).map_err(PipelineError::io(path))?;
            write_reaction_file(&dir.join("kept.rsmi"), &fresh).map_err(PipelineError::io(dir.join("kept.rsmi")))?;
            run.iteration().attribution = Some(stage);
            Ok(())
        })?;
        all_kept.extend(fresh);

        run.timed(&tag("corpus"), |run| {
            let options = CorpusOptions {
                real_ratio: cfg.augment.real_ratio,
                insilico_ratio: cfg.augment.insilico_ratio,
                n_variants: cfg.augment.n_variants,
                seed: cfg.run.seed.wrapping_add(i as u64 - 1),
            };
            let insilico: &[ReactionRecord] = if cfg.augment.insilico_ratio > 0.0 { &all_kept } else { &[] };
            let manifest = assemble_corpus(&real, insilico, &options, &dir.join("corpus"))?;
            run.iteration().corpus = Some(manifest);
            Ok(())
        })?;
    }

    run.timed("final-library", |run| {
        let mut library = real_library.clone();
        library.merge(&attributed);
        library.write_file(&run.workdir.join("library-final.tsv"))?;
        run.manifest.final_templates = Some(library.len());
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::NativeGenerator;

    #[test]
    fn generation_counts_reconcile() {
        let mut lib = TemplateLibrary::new(0);
        let t = crate::templates::extract_from_graphs(
            &parse_smiles("[CH3:1][C:2](=[O:3])[Cl:4].[NH2:5][CH3:6]").unwrap(),
            &parse_smiles("[CH3:1][C:2](=[O:3])[NH:5][CH3:6]").unwrap(),
            1,
        )
        .unwrap();
        lib.add(t.signature(), 3);
        let g = NativeGenerator::new(lib.freeze().unwrap()).unwrap();
        let inputs = vec![(1, "CC(=O)Cl.CN".to_string()), (2, "C1CC".to_string()), (4, "CCCC".to_string())];
        let (cands, report) = generate_candidates(&inputs, Direction::Forward, &g).unwrap();
        assert_eq!(
            report,
            GenerationReport { inputs: 3, invalid_inputs: 1, no_prediction: 1, generated: 1, dropped_adapter_lines: 0 }
        );
        assert_eq!(cands[0].id, "R1");
        assert_eq!(cands[0].product, canonicalize(&parse_smiles("CNC(C)=O").unwrap()));
    }

    #[test]
    fn workdir_must_be_empty() {
        let dir = tempfile::tempdir().unwrap();
        prepare_workdir(&dir.path().join("new")).unwrap();
        fs::write(dir.path().join("x"), "").unwrap();
        assert!(matches!(prepare_workdir(dir.path()), Err(PipelineError::WorkdirNotEmpty(_))));
    }
}
