use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::evalkit::DEFAULT_TOP_K;
use crate::filter::{FilterConfig, DEFAULT_SIMILARITY_THRESHOLD, DEFAULT_TEMPLATE_MIN_COUNT};
use crate::fingerprint;
use crate::templates::DEFAULT_RADIUS;

/// Environment variable giving the root for relative workdirs.
pub const WORKDIR_ENV: &str = "RXBOOST_WORKDIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Reaction SMILES file; mapped reactions feed the template library.
    pub real_corpus: PathBuf,
    /// One reactant set per line.
    pub unpaired_reactants: Option<PathBuf>,
    /// One product per line.
    pub unpaired_products: Option<PathBuf>,
    /// Reaction files excluded from augmentation.
    pub holdout: Vec<PathBuf>,
    /// Reaction file scored by `eval`; defaults to the first holdout file.
    pub eval: Option<PathBuf>,
    pub workdir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            real_corpus: PathBuf::new(),
            unpaired_reactants: None,
            unpaired_products: None,
            holdout: Vec::new(),
            eval: None,
            workdir: PathBuf::from("rxboost-work"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplatesConfig {
    pub radius: u32,
    /// Templates used for filtering and evaluation need a count above this.
    pub min_count: u64,
    /// Templates used by the native generator need a count above this.
    pub generator_min_count: u64,
}

impl Default for TemplatesConfig {
    fn default() -> Self {
        TemplatesConfig { radius: DEFAULT_RADIUS, min_count: DEFAULT_TEMPLATE_MIN_COUNT, generator_min_count: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub similarity_threshold: f64,
    pub fingerprint_radius: u32,
    pub fingerprint_length: usize,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            fingerprint_radius: fingerprint::DEFAULT_RADIUS,
            fingerprint_length: fingerprint::DEFAULT_LENGTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// `native`, `cmd:<program args>` or `files:<request>,<response>[,<command>]`.
    pub forward: String,
    pub retro: String,
    /// Run before every iteration after the first when an adapter is in use.
    /// `{corpus}` and `{iteration}` are substituted.
    pub retrain_hook: Option<String>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { forward: "native".into(), retro: "native".into(), retrain_hook: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub n_variants: usize,
    pub real_ratio: f64,
    pub insilico_ratio: f64,
    /// Also drop kept reactions whose product occurs in a holdout set.
    pub strict_products: bool,
    /// Make malformed input lines fatal.
    pub strict_ingest: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            n_variants: 1,
            real_ratio: 1.0,
            insilico_ratio: 1.0,
            strict_products: false,
            strict_ingest: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub iterations: usize,
    pub seed: u64,
    pub top_k: Vec<usize>,
    /// 0 uses every core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { iterations: 1, seed: 42, top_k: DEFAULT_TOP_K.to_vec(), workers: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub templates: TemplatesConfig,
    pub filter: FilterSection,
    pub generator: GeneratorConfig,
    pub augment: AugmentConfig,
    pub run: RunConfig,
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), PipelineError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| PipelineError::Usage(format!("bad key '{key}'")))?;
    let mut cur = table;
    for part in parts {
        let slot = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        cur =
            slot.as_table_mut().ok_or_else(|| PipelineError::Usage(format!("'{part}' in '{key}' is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads `key=value` as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl PipelineConfig {
    /// Parses TOML text and applies `section.key=value` overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, PipelineError> {
        let mut table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| PipelineError::Usage(format!("config: {e}")))?;
        for o in overrides {
            let (key, raw) =
                o.split_once('=').ok_or_else(|| PipelineError::Usage(format!("override '{o}' is not key=value")))?;
            set_dotted(&mut table, key.trim(), override_value(raw.trim()))?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| PipelineError::Usage(format!("config: {e}")))
    }

    /// Loads a config file; relative input paths resolve against its
    /// directory, a relative workdir against `RXBOOST_WORKDIR` when set.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base, std::env::var_os(WORKDIR_ENV).map(PathBuf::from).as_deref());
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path, workdir_root: Option<&Path>) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        join(&mut p.real_corpus);
        p.unpaired_reactants.iter_mut().for_each(join);
        p.unpaired_products.iter_mut().for_each(join);
        p.holdout.iter_mut().for_each(join);
        p.eval.iter_mut().for_each(join);
        if p.workdir.is_relative() {
            p.workdir = workdir_root.unwrap_or(base).join(&p.workdir);
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            similarity_threshold: self.filter.similarity_threshold,
            template_min_count: self.templates.min_count,
            fingerprint_radius: self.filter.fingerprint_radius,
            fingerprint_length: self.filter.fingerprint_length,
        }
    }

    /// Checks values and that every input path exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let usage = |m: String| Err(PipelineError::Usage(m));
        if self.run.iterations == 0 {
            return usage("run.iterations must be at least 1".into());
        }
        if self.run.top_k.is_empty() || self.run.top_k[0] == 0 || self.run.top_k.windows(2).any(|w| w[0] >= w[1]) {
            return usage("run.top_k must be positive and strictly ascending".into());
        }
        if self.augment.n_variants == 0 {
            return usage("augment.n_variants must be at least 1".into());
        }
        if !(self.augment.real_ratio > 0.0 && self.augment.real_ratio <= 1.0) {
            return usage(format!("augment.real_ratio {} is outside (0, 1]", self.augment.real_ratio));
        }
        if !(self.augment.insilico_ratio >= 0.0 && self.augment.insilico_ratio.is_finite()) {
            return usage(format!("augment.insilico_ratio {} must be finite and >= 0", self.augment.insilico_ratio));
        }
        self.filter_config().validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        for endpoint in [&self.generator.forward, &self.generator.retro] {
            if endpoint != "native" {
                crate::generator::Endpoint::parse(endpoint).map_err(PipelineError::Usage)?;
            }
        }
        if self.paths.real_corpus.as_os_str().is_empty() {
            return usage("paths.real_corpus is required".into());
        }
        let p = &self.paths;
        let inputs = std::iter::once(&p.real_corpus)
            .chain(&p.unpaired_reactants)
            .chain(&p.unpaired_products)
            .chain(&p.holdout)
            .chain(&p.eval);
        for path in inputs {
            if !path.exists() {
                return usage(format!("{} does not exist", path.display()));
            }
        }
        Ok(())
    }

    /// SHA-256 over the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn eval_path(&self) -> Option<&Path> {
        self.paths.eval.as_deref().or(self.paths.holdout.first().map(PathBuf::as_path))
    }
}
