use std::collections::HashMap;

use rayon::prelude::*;

use super::{rank_candidates, Direction, GenerationCandidate, Generator, GeneratorError};
use crate::chem::parse_smiles;
use crate::templates::{apply_template, FrozenLibrary};

/// Applies every library template; a candidate scores `ln(count)` of the
/// most frequent template producing it.
#[derive(Debug, Clone)]
pub struct NativeGenerator {
    library: FrozenLibrary,
}

impl NativeGenerator {
    pub fn new(library: FrozenLibrary) -> Result<Self, GeneratorError> {
        if library.is_empty() {
            return Err(GeneratorError::EmptyLibrary);
        }
        Ok(NativeGenerator { library })
    }

    pub fn library(&self) -> &FrozenLibrary {
        &self.library
    }

    fn one(&self, input: &str, direction: Direction, k: usize) -> Result<Vec<GenerationCandidate>, GeneratorError> {
        let mol = parse_smiles(input).map_err(|e| GeneratorError::BadInput(input.to_string(), e.to_string()))?;
        let mut best: HashMap<String, f64> = HashMap::new();
        for entry in self.library.entries() {
            let score = (entry.count as f64).ln();
            for output in apply_template(&entry.template, &mol, direction) {
                let slot = best.entry(output).or_insert(f64::NEG_INFINITY);
                if score > *slot {
                    *slot = score;
                }
            }
        }
        Ok(rank_candidates(best.into_iter().collect(), k))
    }
}

impl Generator for NativeGenerator {
    fn name(&self) -> &str {
        "native"
    }

    fn generate_batch(
        &self,
        inputs: &[String],
        direction: Direction,
        k: usize,
    ) -> Result<Vec<Vec<GenerationCandidate>>, GeneratorError> {
        if k == 0 {
            return Err(GeneratorError::ZeroK);
        }
        inputs.par_iter().map(|s| self.one(s, direction, k)).collect()
    }
}
