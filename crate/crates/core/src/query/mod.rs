//! 3AFC queries, Dirichlet-based filtering, neighborhood evidence and query
//! enhancement.

mod candidates;
mod dirichlet;
mod enhance;
mod evidence;
mod log;
mod select;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use candidates::{generate_candidates, generate_from_levels};
pub use dirichlet::{dirichlet_density, posterior_mean, posterior_update, posterior_variance, DirichletPosterior};
pub use enhance::enhance_responses;
pub use evidence::{similar_query_evidence, Neighborhoods};
pub use log::{append_responses, read_responses, repair_log};
pub use select::{judge, select_queries, RejectReason, Selection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTriplet")]
pub struct TripletQuery {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

#[derive(Deserialize)]
struct RawTriplet {
    a: usize,
    b: usize,
    c: usize,
}

impl TryFrom<RawTriplet> for TripletQuery {
    type Error = Error;

    fn try_from(r: RawTriplet) -> Result<Self> {
        TripletQuery::new(r.a, r.b, r.c)
    }
}

impl TripletQuery {
    pub fn new(a: usize, b: usize, c: usize) -> Result<Self> {
        if a == b || b == c || a == c {
            return Err(Error::arg(format!("query options ({a}, {b}, {c}) are not distinct")));
        }
        Ok(TripletQuery { a, b, c })
    }

    pub fn patches(&self) -> [usize; 3] {
        [self.a, self.b, self.c]
    }

    /// Options as an unordered set.
    pub fn sorted(&self) -> [usize; 3] {
        let mut p = self.patches();
        p.sort_unstable();
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseSource {
    Human,
    Oracle,
    Enhanced,
}

/// One answered query. Serializes flat as `{a, b, c, choice, source, iteration, ts}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawResponse")]
pub struct QueryResponse {
    #[serde(flatten)]
    pub query: TripletQuery,
    pub choice: usize,
    pub source: ResponseSource,
    pub iteration: usize,
    pub ts: u64,
}

#[derive(Deserialize)]
struct RawResponse {
    a: usize,
    b: usize,
    c: usize,
    choice: usize,
    source: ResponseSource,
    iteration: usize,
    ts: u64,
}

impl TryFrom<RawResponse> for QueryResponse {
    type Error = Error;

    fn try_from(r: RawResponse) -> Result<Self> {
        QueryResponse::new(TripletQuery::new(r.a, r.b, r.c)?, r.choice, r.source, r.iteration, r.ts)
    }
}

impl QueryResponse {
    pub fn new(query: TripletQuery, choice: usize, source: ResponseSource, iteration: usize, ts: u64) -> Result<Self> {
        if choice > 2 {
            return Err(Error::arg(format!("choice {choice} is not 0, 1 or 2")));
        }
        Ok(QueryResponse { query, choice, source, iteration, ts })
    }

    pub fn chosen(&self) -> usize {
        self.query.patches()[self.choice]
    }

    /// `(p1, p2, n)`: the two unchosen options in query order, then the chosen one.
    pub fn training_triple(&self) -> (usize, usize, usize) {
        let p = self.query.patches();
        match self.choice {
            0 => (p[1], p[2], p[0]),
            1 => (p[0], p[2], p[1]),
            _ => (p[0], p[1], p[2]),
        }
    }

    pub fn is_enhanced(&self) -> bool {
        self.source == ResponseSource::Enhanced
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryEngineConfig {
    /// Neighbors per option for evidence matching and enhancement.
    pub k: usize,
    pub tau_conf: f64,
    pub tau_var: f64,
    pub min_evidence: usize,
    /// Candidates drawn per iteration, as a multiple of the response quota.
    pub candidate_factor: usize,
    /// Total training responses as a multiple of the answered ones (1 disables enhancement).
    pub enhancement_factor: f64,
    /// Skip Dirichlet filtering and accept candidates as drawn.
    pub random_selection: bool,
    pub seed: u64,
}

impl Default for QueryEngineConfig {
    fn default() -> Self {
        QueryEngineConfig {
            k: 2,
            tau_conf: 0.75,
            tau_var: 0.04,
            min_evidence: 6,
            candidate_factor: 5,
            enhancement_factor: 2.0,
            random_selection: false,
            seed: 0,
        }
    }
}

impl QueryEngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_conf > 1.0 / 3.0 && self.tau_conf < 1.0) {
            return Err(Error::Config(format!("tau_conf {} outside (1/3, 1)", self.tau_conf)));
        }
        if !(self.tau_var > 0.0) {
            return Err(Error::Config(format!("tau_var {} must be positive", self.tau_var)));
        }
        if self.candidate_factor == 0 {
            return Err(Error::Config("candidate_factor must be positive".into()));
        }
        if !(self.enhancement_factor >= 1.0) || !self.enhancement_factor.is_finite() {
            return Err(Error::Config(format!("enhancement factor {} must be >= 1", self.enhancement_factor)));
        }
        Ok(())
    }
}
