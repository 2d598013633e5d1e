use std::collections::HashSet;

use rand::Rng;

use super::TripletQuery;
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyTree;

/// Draws up to `budget` distinct (as unordered sets) candidate queries.
///
/// Without a hierarchy every triplet is drawn uniformly from `patches`.
/// With one, the budget is split equally across its levels: a triplet is drawn
/// by picking a node of the level with probability proportional to its size,
/// then three distinct members uniformly. Nodes with fewer than three members
/// are skipped, as are levels left with no eligible node. Levels are
/// interleaved round-robin in the output, so any prefix keeps the split.
pub fn generate_candidates(
    hierarchy: Option<&HierarchyTree>,
    patches: &[usize],
    budget: usize,
    rng: &mut impl Rng,
) -> Result<Vec<TripletQuery>> {
    if patches.len() < 3 {
        return Err(Error::arg(format!("need at least 3 patches, got {}", patches.len())));
    }
    match hierarchy {
        None => generate_from_levels(&[vec![patches]], budget, rng),
        Some(tree) => {
            let levels: Vec<Vec<&[usize]>> = (0..=tree.depth())
                .map(|l| tree.nodes_at_level(l).map(|n| n.members.as_slice()).collect())
                .collect();
            generate_from_levels(&levels, budget, rng)
        }
    }
}

/// Level-stratified sampling over explicit member lists; see [`generate_candidates`].
pub fn generate_from_levels(levels: &[Vec<&[usize]>], budget: usize, rng: &mut impl Rng) -> Result<Vec<TripletQuery>> {
    let usable: Vec<Vec<&[usize]>> = levels
        .iter()
        .map(|nodes| nodes.iter().copied().filter(|m| m.len() >= 3).collect::<Vec<_>>())
        .filter(|nodes| !nodes.is_empty())
        .collect();
    if usable.is_empty() {
        return Err(Error::arg("no node has three members to draw from"));
    }
    let mut seen = HashSet::new();
    let mut per_level: Vec<Vec<TripletQuery>> = Vec::with_capacity(usable.len());
    let mut carry = 0;
    for (li, nodes) in usable.iter().enumerate() {
        let share = budget / usable.len() + usize::from(li < budget % usable.len()) + carry;
        let weights: Vec<usize> = nodes.iter().map(|m| m.len()).collect();
        let total: usize = weights.iter().sum();
        let mut out = Vec::with_capacity(share);
        let mut got = 0;
        let mut attempts = 0;
        let cap = 50 * share + 100;
        while got < share && attempts < cap {
            attempts += 1;
            let mut pick = rng.random_range(0..total);
            let node = weights
                .iter()
                .position(|&w| {
                    if pick < w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .unwrap();
            let members = nodes[node];
            let i = rng.random_range(0..members.len());
            let mut j = rng.random_range(0..members.len() - 1);
            if j >= i {
                j += 1;
            }
            let mut k = rng.random_range(0..members.len() - 2);
            for skip in [i.min(j), i.max(j)] {
                if k >= skip {
                    k += 1;
                }
            }
            let q = TripletQuery::new(members[i], members[j], members[k])?;
            if seen.insert(q.sorted()) {
                out.push(q);
                got += 1;
            }
        }
        carry = share - got;
        per_level.push(out);
    }
    let longest = per_level.iter().map(Vec::len).max().unwrap_or(0);
    Ok((0..longest).flat_map(|i| per_level.iter().filter_map(move |l| l.get(i).copied())).collect())
}
