use super::{QueryResponse, TripletQuery};
use crate::embedding::distance;

/// Per-patch k-nearest-neighbor sets in embedding space. Ties in distance
/// are broken by patch id.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    k: usize,
    /// k nearest other patches, nearest first.
    nearest: Vec<Vec<usize>>,
    /// `{x} ∪ nearest[x]`, sorted for lookup.
    closed: Vec<Vec<usize>>,
}

impl Neighborhoods {
    pub fn new(embeddings: &[Vec<f64>], k: usize) -> Self {
        let n = embeddings.len();
        let k = k.min(n.saturating_sub(1));
        let mut nearest = Vec::with_capacity(n);
        let mut closed = Vec::with_capacity(n);
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
        for (i, ei) in embeddings.iter().enumerate() {
            order.clear();
            order.extend(
                embeddings
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, ej)| (distance(ei, ej), j)),
            );
            if k < order.len() {
                order.select_nth_unstable_by(k, |x, y| x.partial_cmp(y).unwrap());
                order.truncate(k);
            }
            order.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let near: Vec<usize> = order.iter().map(|&(_, j)| j).collect();
            let mut set = near.clone();
            set.push(i);
            set.sort_unstable();
            nearest.push(near);
            closed.push(set);
        }
        Neighborhoods { k, nearest, closed }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.nearest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nearest.is_empty()
    }

    pub fn nearest(&self, patch: usize) -> &[usize] {
        &self.nearest[patch]
    }

    /// The patch itself plus its k nearest neighbors, sorted by id.
    pub fn closed(&self, patch: usize) -> &[usize] {
        &self.closed[patch]
    }

    pub fn contains(&self, center: usize, patch: usize) -> bool {
        self.closed[center].binary_search(&patch).is_ok()
    }

    /// Option of `q` that the chosen patch of `r` maps to, if `r` is similar
    /// to `q`: its three patches can be assigned one-to-one to the
    /// neighborhoods of q's options. Among several assignments the first in
    /// lexicographic permutation order wins.
    pub fn match_choice(&self, q: &TripletQuery, r: &QueryResponse) -> Option<usize> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let qp = q.patches();
        let rp = r.query.patches();
        let mut fits = [[false; 3]; 3];
        for (i, &center) in qp.iter().enumerate() {
            for (j, &p) in rp.iter().enumerate() {
                fits[i][j] = self.contains(center, p);
            }
        }
        PERMS
            .iter()
            .find(|perm| (0..3).all(|i| fits[i][perm[i]]))
            .map(|perm| perm.iter().position(|&j| j == r.choice).unwrap())
    }

    /// Counts `(m1, m2, m3)` of similar answered responses by the option of
    /// `q` their chosen patch maps to.
    pub fn evidence<'a>(&self, q: &TripletQuery, answered: impl IntoIterator<Item = &'a QueryResponse>) -> [usize; 3] {
        let mut m = [0usize; 3];
        for r in answered {
            if let Some(i) = self.match_choice(q, r) {
                m[i] += 1;
            }
        }
        m
    }
}

pub fn similar_query_evidence(
    q: &TripletQuery,
    answered: &[QueryResponse],
    embeddings: &[Vec<f64>],
    k: usize,
) -> [usize; 3] {
    Neighborhoods::new(embeddings, k).evidence(q, answered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::ResponseSource;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn resp(a: usize, b: usize, c: usize, choice: usize) -> QueryResponse {
        QueryResponse::new(TripletQuery::new(a, b, c).unwrap(), choice, ResponseSource::Oracle, 0, 0).unwrap()
    }

    /// Patches 0..3 are a, b, c; 3..6 their primed twins right next to them.
    fn twin_embeddings() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![10.0, 0.0],
            vec![0.0, 10.0],
            vec![0.1, 0.0],
            vec![10.1, 0.0],
            vec![0.0, 10.1],
        ]
    }

    #[test]
    fn self_match_with_zero_neighbors() {
        let q = TripletQuery::new(0, 1, 2).unwrap();
        assert_eq!(similar_query_evidence(&q, &[resp(0, 1, 2, 2)], &twin_embeddings(), 0), [0, 0, 1]);
    }

    #[test]
    fn nearest_twin_query_counts() {
        let q = TripletQuery::new(0, 1, 2).unwrap();
        let e = twin_embeddings();
        assert_eq!(similar_query_evidence(&q, &[resp(3, 4, 5, 2)], &e, 1), [0, 0, 1]);
        // unordered: the twin query listed in another order still maps c' to c
        assert_eq!(similar_query_evidence(&q, &[resp(5, 3, 4, 0)], &e, 1), [0, 0, 1]);
        assert_eq!(similar_query_evidence(&q, &[resp(3, 4, 5, 2)], &e, 0), [0, 0, 0]);
    }

    #[test]
    fn empty_answered() {
        let q = TripletQuery::new(0, 1, 2).unwrap();
        assert_eq!(similar_query_evidence(&q, &[], &twin_embeddings(), 2), [0, 0, 0]);
    }

    #[test]
    fn neighborhoods_break_ties_by_id() {
        let e = vec![vec![0.0], vec![1.0], vec![-1.0], vec![5.0]];
        let n = Neighborhoods::new(&e, 2);
        assert_eq!(n.nearest(0), &[1, 2]);
        assert_eq!(n.closed(0), &[0, 1, 2]);
        assert_eq!(Neighborhoods::new(&e, 10).k(), 3);
    }

    proptest! {
        #[test]
        fn invariant_to_answer_order(seed in 0u64..1000, k in 0usize..4) {
            let mut rng = crate::seed::rng(seed);
            use rand::Rng;
            let e: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
            let mut answered: Vec<QueryResponse> = (0..40)
                .map(|_| {
                    let mut ids: Vec<usize> = (0..12).collect();
                    ids.shuffle(&mut rng);
                    resp(ids[0], ids[1], ids[2], rng.random_range(0..3))
                })
                .collect();
            let q = TripletQuery::new(0, 1, 2).unwrap();
            let before = similar_query_evidence(&q, &answered, &e, k);
            answered.shuffle(&mut rng);
            prop_assert_eq!(before, similar_query_evidence(&q, &answered, &e, k));
        }
    }
}
