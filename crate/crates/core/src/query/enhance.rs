use std::collections::HashSet;

use rand::Rng;

use super::{Neighborhoods, QueryResponse, ResponseSource, TripletQuery};

const ATTEMPTS: usize = 10;

fn key(r: &QueryResponse) -> ([usize; 3], usize) {
    (r.query.sorted(), r.chosen())
}

/// Synthesizes `ceil((factor - 1) * |answered|)` responses by replacing each
/// option of a randomly drawn answered response with a member of its
/// neighborhood, keeping the choice index. At least one option must change
/// and the result must not repeat an existing response; each draw gets
/// [`ATTEMPTS`] tries before another source response is picked.
pub fn enhance_responses(
    answered: &[QueryResponse],
    neighborhoods: &Neighborhoods,
    factor: f64,
    iteration: usize,
    rng: &mut impl Rng,
) -> Vec<QueryResponse> {
    let target = ((factor - 1.0) * answered.len() as f64 - 1e-9).ceil().max(0.0) as usize;
    if target == 0 || neighborhoods.k() == 0 {
        return Vec::new();
    }
    let mut seen: HashSet<_> = answered.iter().map(key).collect();
    let mut out = Vec::with_capacity(target);
    let mut budget = target * ATTEMPTS * 10;
    while out.len() < target && budget > 0 {
        let src = &answered[rng.random_range(0..answered.len())];
        for _ in 0..ATTEMPTS {
            budget = budget.saturating_sub(1);
            let p = src.query.patches().map(|x| {
                let hood = neighborhoods.closed(x);
                hood[rng.random_range(0..hood.len())]
            });
            if p == src.query.patches() {
                continue;
            }
            let Ok(q) = TripletQuery::new(p[0], p[1], p[2]) else { continue };
            let r = QueryResponse { query: q, choice: src.choice, source: ResponseSource::Enhanced, iteration, ts: src.ts };
            if seen.insert(key(&r)) {
                out.push(r);
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn setup() -> (Vec<QueryResponse>, Neighborhoods) {
        let e: Vec<Vec<f64>> = (0..60).map(|i| vec![(i / 3) as f64, (i % 3) as f64 * 0.01]).collect();
        let n = Neighborhoods::new(&e, 2);
        let answered = (0..20)
            .map(|i| {
                let q = TripletQuery::new(3 * i, (3 * i + 7) % 60, (3 * i + 31) % 60).unwrap();
                QueryResponse::new(q, i % 3, ResponseSource::Oracle, 0, i as u64).unwrap()
            })
            .collect();
        (answered, n)
    }

    #[test]
    fn factor_two_doubles() {
        let (answered, n) = setup();
        let out = enhance_responses(&answered, &n, 2.0, 4, &mut seed::rng(1));
        assert_eq!(out.len(), answered.len());
        assert!(out.iter().all(|r| r.source == ResponseSource::Enhanced && r.iteration == 4));
        let keys: HashSet<_> = out.iter().chain(&answered).map(key).collect();
        assert_eq!(keys.len(), 2 * answered.len());
    }

    #[test]
    fn factor_one_is_noop() {
        let (answered, n) = setup();
        assert!(enhance_responses(&answered, &n, 1.0, 0, &mut seed::rng(1)).is_empty());
        assert_eq!(enhance_responses(&answered, &n, 1.5, 0, &mut seed::rng(1)).len(), 10);
    }

    #[test]
    fn choice_is_copied() {
        let (mut answered, n) = setup();
        answered.iter_mut().for_each(|r| r.choice = 2);
        let out = enhance_responses(&answered, &n, 3.0, 0, &mut seed::rng(5));
        assert!(!out.is_empty());
        assert!(out.iter().all(|r| r.choice == 2));
        for r in &out {
            // each option stays inside the source neighborhood of some answered query
            assert!(answered.iter().any(|s| (0..3).all(|i| n.contains(s.query.patches()[i], r.query.patches()[i]))));
        }
    }
}
