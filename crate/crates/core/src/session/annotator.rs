use crate::error::Result;
use crate::oracle::{GroundTruthHierarchy, Oracle};
use crate::query::{ResponseSource, TripletQuery};
use crate::seed;

/// Anything that answers 3AFC queries with the index of the odd one out.
pub trait Annotator {
    fn source(&self) -> ResponseSource;
    fn answer(&mut self, query: &TripletQuery) -> Result<usize>;
}

/// Virtual participant. Each answer draws from a stream derived from the
/// base seed and the query itself, so answers do not depend on how many
/// queries were answered before.
#[derive(Debug, Clone)]
pub struct OracleAnnotator {
    oracle: Oracle,
    seed: u64,
}

impl OracleAnnotator {
    pub fn new(hierarchy: GroundTruthHierarchy, error_rate: f64, seed: u64) -> Self {
        let mut oracle = Oracle::new(hierarchy);
        oracle.error_rate = error_rate;
        OracleAnnotator { oracle, seed }
    }
}

impl Annotator for OracleAnnotator {
    fn source(&self) -> ResponseSource {
        ResponseSource::Oracle
    }

    fn answer(&mut self, query: &TripletQuery) -> Result<usize> {
        let mut rng = seed::derived_rng(self.seed, &[query.a as u64, query.b as u64, query.c as u64]);
        self.oracle.answer(query, &mut rng)
    }
}

/// Replays a fixed list of choices; used by tests and scripted runs.
#[derive(Debug, Clone)]
pub struct ScriptedAnnotator {
    pub choices: Vec<usize>,
    next: usize,
}

impl ScriptedAnnotator {
    pub fn new(choices: Vec<usize>) -> Self {
        ScriptedAnnotator { choices, next: 0 }
    }
}

impl Annotator for ScriptedAnnotator {
    fn source(&self) -> ResponseSource {
        ResponseSource::Human
    }

    fn answer(&mut self, _query: &TripletQuery) -> Result<usize> {
        let c = self.choices[self.next % self.choices.len()];
        self.next += 1;
        Ok(c)
    }
}
