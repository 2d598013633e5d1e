use serde::{Deserialize, Serialize};

use super::{DirichletPosterior, Neighborhoods, QueryEngineConfig, QueryResponse, TripletQuery};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectReason {
    /// The expected answer is already predictable.
    Confident,
    /// Enough evidence, yet the answer stays uncertain.
    Ambiguous,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub accepted: Vec<TripletQuery>,
    pub rejected: Vec<(TripletQuery, RejectReason)>,
}

/// Posterior of one candidate and its verdict.
pub fn judge(posterior: &DirichletPosterior, evidence: [usize; 3], config: &QueryEngineConfig) -> Option<RejectReason> {
    let max = |v: [f64; 3]| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max(posterior.mean()) > config.tau_conf {
        Some(RejectReason::Confident)
    } else if evidence.iter().sum::<usize>() >= config.min_evidence && max(posterior.variance()) > config.tau_var {
        Some(RejectReason::Ambiguous)
    } else {
        None
    }
}

/// Filters candidates against the evidence of answered (non-enhanced)
/// responses. Accepted queries keep candidate order.
pub fn select_queries(
    candidates: &[TripletQuery],
    answered: &[QueryResponse],
    neighborhoods: &Neighborhoods,
    config: &QueryEngineConfig,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::arg("no candidate queries to select from"));
    }
    let evidence_pool: Vec<&QueryResponse> = answered.iter().filter(|r| !r.is_enhanced()).collect();
    let prior = DirichletPosterior::default();
    let mut out = Selection::default();
    for q in candidates {
        let m = neighborhoods.evidence(q, evidence_pool.iter().copied());
        match judge(&prior.update(m), m, config) {
            None => out.accepted.push(*q),
            Some(reason) => out.rejected.push((*q, reason)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::ResponseSource;

    fn cfg() -> QueryEngineConfig {
        QueryEngineConfig::default()
    }

    #[test]
    fn verdict_examples() {
        let prior = DirichletPosterior::default();
        assert_eq!(judge(&prior.update([9, 0, 0]), [9, 0, 0], &cfg()), Some(RejectReason::Confident));
        assert_eq!(judge(&prior, [0, 0, 0], &cfg()), None);
        let tight = QueryEngineConfig { tau_var: 0.02, ..cfg() };
        assert_eq!(judge(&prior.update([4, 4, 4]), [4, 4, 4], &tight), None);
        // same evidence, a variance threshold below 0.0139 flags it
        let tighter = QueryEngineConfig { tau_var: 0.01, ..cfg() };
        assert_eq!(judge(&prior.update([4, 4, 4]), [4, 4, 4], &tighter), Some(RejectReason::Ambiguous));
    }

    #[test]
    fn empty_answered_accepts_all() {
        let e: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let n = Neighborhoods::new(&e, 2);
        let cands = vec![TripletQuery::new(0, 1, 2).unwrap(), TripletQuery::new(5, 3, 1).unwrap()];
        let s = select_queries(&cands, &[], &n, &cfg()).unwrap();
        assert_eq!(s.accepted, cands);
        assert!(select_queries(&[], &[], &n, &cfg()).is_err());
    }

    #[test]
    fn consistent_evidence_rejects_and_enhanced_is_ignored() {
        let e: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let n = Neighborhoods::new(&e, 0);
        let q = TripletQuery::new(0, 1, 2).unwrap();
        let mk = |src| QueryResponse::new(q, 2, src, 0, 0).unwrap();
        let oracle: Vec<_> = (0..9).map(|_| mk(ResponseSource::Oracle)).collect();
        let s = select_queries(&[q], &oracle, &n, &cfg()).unwrap();
        assert_eq!(s.rejected, vec![(q, RejectReason::Confident)]);
        let enhanced: Vec<_> = (0..9).map(|_| mk(ResponseSource::Enhanced)).collect();
        let s = select_queries(&[q], &enhanced, &n, &cfg()).unwrap();
        assert_eq!(s.accepted, vec![q]);
    }
}
