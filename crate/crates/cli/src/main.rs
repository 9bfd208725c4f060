use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use rxboost::augment::{
    assemble_corpus, exclude_overlap, read_reaction_file, write_reaction_file, CorpusOptions, IngestOptions,
    ReactionRecord,
};
use rxboost::chem::{canonicalize, parse_smiles};
use rxboost::evalkit::{rare_subset, rare_subset_against, read_predictions, write_predictions, DEFAULT_TOP_K};
use rxboost::filter::{
    filter_reactions, parse_candidates, retention_report, write_decision_log, FilterConfig, FilterError,
    DEFAULT_SIMILARITY_THRESHOLD, DEFAULT_TEMPLATE_MIN_COUNT,
};
use rxboost::fingerprint::{self, fingerprint, tanimoto};
use rxboost::generator::{AdapterGenerator, ByDirection, Direction, Endpoint, Generator, NativeGenerator};
use rxboost::pipeline::{boost, generate_candidates, predict, run_eval, BoostOptions, PipelineConfig, PipelineError};
use rxboost::synthetic::{write_scenario, Scenario};
use rxboost::templates::{build_library, TemplateLibrary, DEFAULT_RADIUS};

/// Reaction data augmentation: templates, in-silico generation, filtering,
/// corpus assembly and top-k evaluation.
#[derive(Parser)]
#[command(name = "rxboost", version)]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Canonical SMILES, one per input line.
    Canon(CanonArgs),
    /// Fingerprint bits per input line, or the Tanimoto similarity of two molecules.
    Fp(FpArgs),
    /// Count templates of a mapped reaction file into a library TSV.
    ExtractTemplates(ExtractArgs),
    /// Ranked candidates per input line, or filter candidates with --candidates.
    Generate(GenerateArgs),
    /// Screen in-silico candidates and write the decision log.
    Filter(FilterArgs),
    /// Assemble a training corpus from real and in-silico reactions.
    Augment(AugmentArgs),
    /// Top-k exact and largest-fragment accuracy on a holdout set.
    Eval(EvalArgs),
    /// Reactions whose template occurs fewer than --threshold times in the file.
    RareSubset(RareArgs),
    /// Run the self-boosting loop from a config file.
    Boost(BoostArgs),
    /// Write a synthetic demo data set and a matching boost config.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CanonArgs {
    /// Input file; stdin when absent.
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FpArgs {
    input: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = fingerprint::DEFAULT_RADIUS)]
    radius: u32,
    #[arg(long, default_value_t = fingerprint::DEFAULT_LENGTH)]
    length: usize,
    /// Print the similarity of two SMILES instead.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    tanimoto: Option<Vec<String>>,
}

#[derive(Args)]
struct ExtractArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: u32,
}

#[derive(Args)]
struct LibraryArgs {
    /// Template library TSV.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Native generator uses templates with count above this.
    #[arg(long, default_value_t = 0)]
    generator_min_count: u64,
    /// `native` or an adapter endpoint (`cmd:...`, `files:...`).
    #[arg(long, default_value = "native")]
    forward: String,
    #[arg(long, default_value = "native")]
    retro: String,
}

#[derive(Args)]
struct GenerateArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = parse_direction)]
    direction: Direction,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    /// Top-1 filter candidates (`id, provenance, reactants, product`).
    #[arg(long)]
    candidates: bool,
    #[command(flatten)]
    lib: LibraryArgs,
}

#[derive(Args)]
struct FilterArgs {
    /// Candidates TSV as written by `generate --candidates`.
    candidates: PathBuf,
    #[arg(long)]
    decisions: PathBuf,
    #[arg(long)]
    kept: Option<PathBuf>,
    #[arg(long)]
    retention: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TEMPLATE_MIN_COUNT)]
    min_count: u64,
    #[arg(long, default_value_t = DEFAULT_SIMILARITY_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = fingerprint::DEFAULT_RADIUS)]
    fp_radius: u32,
    #[arg(long, default_value_t = fingerprint::DEFAULT_LENGTH)]
    fp_length: usize,
    #[command(flatten)]
    lib: LibraryArgs,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    insilico: Option<PathBuf>,
    /// In-silico reactions occurring here are dropped first.
    #[arg(long)]
    holdout: Vec<PathBuf>,
    #[arg(long)]
    strict_products: bool,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    variants: usize,
    #[arg(long, default_value_t = 1.0)]
    real_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    insilico_ratio: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    holdout: PathBuf,
    /// Model predictions (`id, rank, smiles`); otherwise the native generator runs.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TEMPLATE_MIN_COUNT)]
    min_count: u64,
    /// Library whose counts define the rare slices; the holdout itself when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TOP_K)]
    top_k: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: u32,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RareArgs {
    input: PathBuf,
    #[arg(long)]
    threshold: u64,
    /// Count templates in this library instead of in the input itself.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: u32,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BoostArgs {
    #[arg(long)]
    config: PathBuf,
    /// `section.key=value`, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    workdir: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Record and print per-stage wall-clock times.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 5000)]
    unpaired: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    s.parse()
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(m: impl Into<String>) -> Self {
        Failure { code: 1, message: m.into() }
    }

    fn data(m: impl Into<String>) -> Self {
        Failure { code: 2, message: m.into() }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::from(PipelineError::from(e))
            }
        }
    )*};
}
data_error!(
    rxboost::augment::IngestError,
    rxboost::templates::LibraryError,
    rxboost::augment::CorpusError,
    rxboost::evalkit::EvalError,
    FilterError,
    rxboost::generator::GeneratorError
);

type Result<T> = std::result::Result<T, Failure>;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn read_lines(input: Option<&Path>) -> Result<Vec<String>> {
    let lines: io::Result<Vec<String>> = match input {
        Some(p) => return Ok(read_text(p)?.lines().map(String::from).collect()),
        None => io::stdin().lock().lines().collect(),
    };
    lines.map_err(|e| Failure::data(format!("stdin: {e}")))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    let result = match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| Failure::data(format!("{}: {e}", path.map_or("stdout".into(), |p| p.display().to_string()))))
}

fn reactions(path: &Path) -> Result<Vec<ReactionRecord>> {
    let (records, report) = read_reaction_file(path, IngestOptions::default())?;
    log::info!("{}: {report:?}", path.display());
    Ok(records)
}

fn generators(lib: &LibraryArgs) -> Result<ByDirection> {
    let native: Option<Arc<dyn Generator>> = match &lib.library {
        Some(p) => {
            let frozen = TemplateLibrary::read_file(p, lib.generator_min_count)?.freeze()?;
            Some(Arc::new(NativeGenerator::new(frozen)?))
        }
        None => None,
    };
    let make = |endpoint: &str| -> Result<Arc<dyn Generator>> {
        if endpoint == "native" {
            return native.clone().ok_or_else(|| Failure::usage("the native generator needs --library"));
        }
        Ok(Arc::new(AdapterGenerator::new(Endpoint::parse(endpoint).map_err(Failure::usage)?)))
    };
    Ok(ByDirection { forward: make(&lib.forward)?, retro: make(&lib.retro)? })
}

fn canon(a: CanonArgs) -> Result<()> {
    let mut out = String::new();
    for (i, line) in read_lines(a.input.as_deref())?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mol = parse_smiles(line.trim()).map_err(|e| Failure::data(format!("line {}: {e}", i + 1)))?;
        out.push_str(&canonicalize(&mol));
        out.push('\n');
    }
    write_out(a.output.as_deref(), &out)
}

fn fp(a: FpArgs) -> Result<()> {
    let fp_of = |s: &str| -> Result<_> {
        let mol = parse_smiles(s).map_err(|e| Failure::data(format!("'{s}': {e}")))?;
        fingerprint(&mol, a.radius, a.length).map_err(|e| Failure::usage(e.to_string()))
    };
    if let Some(pair) = &a.tanimoto {
        let t = tanimoto(&fp_of(&pair[0])?, &fp_of(&pair[1])?).map_err(|e| Failure::data(e.to_string()))?;
        return write_out(a.output.as_deref(), &format!("{t:.6}\n"));
    }
    let mut out = String::new();
    for line in read_lines(a.input.as_deref())? {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let bits = fp_of(s)?;
        let ones: Vec<String> = bits.ones().map(|b| b.to_string()).collect();
        let _ = writeln!(out, "{s}\t{}\t{}", bits.count_ones(), ones.join(","));
    }
    write_out(a.output.as_deref(), &out)
}

fn extract(a: ExtractArgs) -> Result<()> {
    let records = reactions(&a.input)?;
    let (lib, report) = build_library(&records, a.radius, 0)?;
    eprintln!(
        "reactions {} extracted {} templates {} skipped {:?}",
        report.reactions,
        report.extracted,
        lib.len(),
        report.errors
    );
    write_out(a.output.as_deref(), &lib.to_tsv())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let gens = generators(&a.lib)?;
    let generator = gens.get(a.direction);
    let text = read_text(&a.input)?;
    let inputs: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .collect();
    if a.candidates {
        let (cands, report) = generate_candidates(&inputs, a.direction, generator)?;
        eprintln!("{report:?}");
        return write_out(a.output.as_deref(), &rxboost::filter::candidates_to_tsv(&cands));
    }
    let queries: Vec<String> = inputs.iter().map(|(_, s)| s.clone()).collect();
    let results = generator.generate_batch(&queries, a.direction, a.k)?;
    let mut out = String::new();
    for ((line, _), cands) in inputs.iter().zip(results) {
        for c in cands {
            let _ = writeln!(out, "{line}\t{}\t{}\t{}", c.rank, c.score, c.output);
        }
    }
    if generator.dropped_lines() > 0 {
        eprintln!("dropped {} unparseable adapter lines", generator.dropped_lines());
    }
    write_out(a.output.as_deref(), &out)
}

fn filter(a: FilterArgs) -> Result<()> {
    let candidates = parse_candidates(&read_text(&a.candidates)?).map_err(Failure::data)?;
    let library_path = a.lib.library.as_deref().ok_or_else(|| Failure::usage("filter needs --library"))?;
    let library = TemplateLibrary::read_file(library_path, a.min_count)?.freeze_or_empty();
    let gens = generators(&a.lib)?;
    let config = FilterConfig {
        similarity_threshold: a.threshold,
        template_min_count: a.min_count,
        fingerprint_radius: a.fp_radius,
        fingerprint_length: a.fp_length,
    };
    config.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let outcome = filter_reactions(&candidates, &library, &gens, &config)?;
    let file = fs::File::create(&a.decisions).map_err(|e| Failure::data(format!("{}: {e}", a.decisions.display())))?;
    write_decision_log(io::BufWriter::new(file), &outcome.decisions)
        .map_err(|e| Failure::data(format!("{}: {e}", a.decisions.display())))?;
    let report = retention_report(&outcome.decisions);
    if let Some(p) = &a.kept {
        write_reaction_file(p, &outcome.kept).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
    }
    match &a.retention {
        Some(p) => write_out(Some(p), &report.to_string()),
        None => {
            eprint!("{report}");
            Ok(())
        }
    }
}

fn augment(a: AugmentArgs) -> Result<()> {
    let real = reactions(&a.real)?;
    let mut insilico = match &a.insilico {
        Some(p) => reactions(p)?,
        None => Vec::new(),
    };
    for p in &a.holdout {
        insilico = exclude_overlap(insilico, &reactions(p)?, a.strict_products);
    }
    let options = CorpusOptions {
        real_ratio: a.real_ratio,
        insilico_ratio: a.insilico_ratio,
        n_variants: a.variants,
        seed: a.seed,
    };
    let manifest = assemble_corpus(&real, &insilico, &options, &a.output)?;
    eprintln!("{manifest:?}");
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let holdout = reactions(&a.holdout)?;
    let predictions: BTreeMap<String, Vec<String>> = match (&a.predictions, &a.library) {
        (Some(p), _) => read_predictions(&read_text(p)?)?,
        (None, Some(lib)) => {
            let frozen = TemplateLibrary::read_file(lib, a.min_count)?.freeze()?;
            let generator = NativeGenerator::new(frozen)?;
            let k = *a.top_k.iter().max().ok_or_else(|| Failure::usage("--top-k is empty"))?;
            let preds = predict(&holdout, &generator, k)?;
            fs::create_dir_all(&a.output).map_err(|e| Failure::data(format!("{}: {e}", a.output.display())))?;
            write_out(Some(&a.output.join("predictions.tsv")), &write_predictions(&preds))?;
            preds.into_iter().collect()
        }
        (None, None) => return Err(Failure::usage("eval needs --predictions or --library")),
    };
    let reference = a.reference.as_deref().map(|p| TemplateLibrary::read_file(p, 0)).transpose()?;
    let report = run_eval(&holdout, &predictions, &a.top_k, reference.as_ref(), a.radius, &a.output)?;
    print!("{}", report.overall.to_text());
    Ok(())
}

fn rare(a: RareArgs) -> Result<()> {
    let records = reactions(&a.input)?;
    let subset = match &a.reference {
        Some(p) => rare_subset_against(&records, &TemplateLibrary::read_file(p, 0)?, a.threshold, a.radius)?,
        None => rare_subset(&records, a.threshold, a.radius)?,
    };
    let members: Vec<ReactionRecord> = subset.members.iter().map(|&i| records[i].clone()).collect();
    write_reaction_file(&a.output, &members).map_err(|e| Failure::data(format!("{}: {e}", a.output.display())))?;
    eprintln!(
        "rare-{}: {} of {} reactions ({} extraction errors)",
        a.threshold,
        members.len(),
        records.len(),
        subset.extraction_errors
    );
    Ok(())
}

fn run_boost(a: BoostArgs) -> Result<()> {
    let mut overrides = a.overrides.clone();
    if let Some(w) = &a.workdir {
        overrides.push(format!("paths.workdir={}", toml_string(&w.to_string_lossy())));
    }
    if let Some(n) = a.iterations {
        overrides.push(format!("run.iterations={n}"));
    }
    if let Some(s) = a.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(w) = a.workers {
        overrides.push(format!("run.workers={w}"));
    }
    let cfg = PipelineConfig::load(&a.config, &overrides)?;
    let start = Instant::now();
    let manifest = boost(&cfg, BoostOptions { timing: a.timing })?;
    if a.timing {
        for (stage, ms) in manifest.timings_ms.iter().flatten() {
            eprintln!("{stage}\t{ms} ms");
        }
        eprintln!("total\t{} ms", start.elapsed().as_millis());
    }
    for it in &manifest.iterations {
        if let (Some(f), Some(c)) = (&it.filter, &it.corpus) {
            eprintln!(
                "iteration {}: kept {} of {} candidates, corpus {} lines",
                it.iteration, f.kept, f.candidates, c.lines
            );
        }
    }
    eprintln!("workdir {}", cfg.paths.workdir.display());
    Ok(())
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn synth(a: SynthArgs) -> Result<()> {
    let scenario = Scenario { unpaired: a.unpaired, seed: a.seed, ..Scenario::default() };
    let data = scenario.build();
    write_scenario(&data, &a.output, "work").map_err(|e| Failure::data(format!("{}: {e}", a.output.display())))?;
    eprintln!(
        "wrote {} training, {} held-out reactions and {} unpaired reactant sets to {}",
        data.train.len(),
        data.heldout.len(),
        data.unpaired.len(),
        a.output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Cmd::Canon(a) => canon(a),
        Cmd::Fp(a) => fp(a),
        Cmd::ExtractTemplates(a) => extract(a),
        Cmd::Generate(a) => generate(a),
        Cmd::Filter(a) => filter(a),
        Cmd::Augment(a) => augment(a),
        Cmd::Eval(a) => eval(a),
        Cmd::RareSubset(a) => rare(a),
        Cmd::Boost(a) => run_boost(a),
        Cmd::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
