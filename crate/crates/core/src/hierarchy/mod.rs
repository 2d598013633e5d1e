//! Divisive K-means clustering with silhouette-based K selection.

mod kmeans;
mod silhouette;

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use kmeans::{kmeans, KMeansResult};
pub use silhouette::silhouette;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub k_max: usize,
    /// Best silhouette below this stops the split.
    pub s_min: f64,
    /// Nodes with fewer members are not split.
    pub min_size: usize,
    pub max_depth: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { k_max: 8, s_min: 0.35, min_size: 12, max_depth: 4, restarts: 8, seed: 0 }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 2 {
            return Err(Error::Config("k_max must be at least 2".into()));
        }
        if !(self.s_min > -1.0 && self.s_min < 1.0) {
            return Err(Error::Config(format!("s_min {} outside (-1, 1)", self.s_min)));
        }
        if self.min_size < 4 {
            return Err(Error::Config("min_size must be at least 4".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be positive".into()));
        }
        Ok(())
    }
}

/// Picks K in `2..=min(k_max, n - 1)` by mean silhouette (smaller K on ties).
/// `None` when the best silhouette is below `s_min`.
pub fn choose_k(points: &[Vec<f64>], config: &ClusteringConfig, seed: u64) -> Result<Option<(usize, Vec<usize>)>> {
    if points.len() < 4 {
        return Err(Error::arg(format!("choose_k needs at least 4 points, got {}", points.len())));
    }
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for k in 2..=config.k_max.min(points.len() - 1) {
        let run = kmeans(points, k, config.restarts, seed::derive(seed, &[k as u64]))?;
        let Ok(s) = silhouette(points, &run.assignment) else { continue };
        if best.as_ref().is_none_or(|(bs, _, _)| s > *bs) {
            best = Some((s, k, run.assignment));
        }
    }
    Ok(match best {
        Some((s, k, a)) if s >= config.s_min => Some((k, a)),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyNode {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    /// Patch ids, ascending.
    pub members: Vec<usize>,
    pub children: Vec<usize>,
    pub centroid: Vec<f64>,
    pub purity: Option<f64>,
}

impl HierarchyNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Node arena in breadth-first order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NestedNode", try_from = "NestedNode")]
pub struct HierarchyTree {
    nodes: Vec<HierarchyNode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NestedNode {
    id: usize,
    level: usize,
    members: Vec<usize>,
    centroid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    purity: Option<f64>,
    #[serde(default)]
    children: Vec<NestedNode>,
}

impl From<HierarchyTree> for NestedNode {
    fn from(t: HierarchyTree) -> Self {
        fn build(t: &HierarchyTree, id: usize) -> NestedNode {
            let n = &t.nodes[id];
            NestedNode {
                id: n.id,
                level: n.level,
                members: n.members.clone(),
                centroid: n.centroid.clone(),
                purity: n.purity,
                children: n.children.iter().map(|&c| build(t, c)).collect(),
            }
        }
        build(&t, 0)
    }
}

impl TryFrom<NestedNode> for HierarchyTree {
    type Error = Error;

    fn try_from(root: NestedNode) -> Result<Self> {
        let mut flat: Vec<Option<HierarchyNode>> = Vec::new();
        let mut stack = vec![(root, None)];
        while let Some((n, parent)) = stack.pop() {
            if n.id >= flat.len() {
                flat.resize(n.id + 1, None);
            }
            if flat[n.id].is_some() {
                return Err(Error::arg(format!("duplicate node id {}", n.id)));
            }
            flat[n.id] = Some(HierarchyNode {
                id: n.id,
                level: n.level,
                parent,
                members: n.members,
                children: n.children.iter().map(|c| c.id).collect(),
                centroid: n.centroid,
                purity: n.purity,
            });
            stack.extend(n.children.into_iter().map(|c| (c, Some(n.id))));
        }
        let nodes = flat
            .into_iter()
            .enumerate()
            .map(|(i, n)| n.ok_or_else(|| Error::arg(format!("node id {i} missing"))))
            .collect::<Result<Vec<_>>>()?;
        let tree = HierarchyTree { nodes };
        tree.validate()?;
        Ok(tree)
    }
}

impl HierarchyTree {
    /// Single-node tree over `n` patches.
    pub fn trivial(embeddings: &[Vec<f64>]) -> Self {
        let members: Vec<usize> = (0..embeddings.len()).collect();
        HierarchyTree {
            nodes: vec![HierarchyNode {
                id: 0,
                level: 0,
                parent: None,
                centroid: mean_of(embeddings, &members),
                members,
                children: vec![],
                purity: None,
            }],
        }
    }

    pub fn root(&self) -> &HierarchyNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &HierarchyNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_patches(&self) -> usize {
        self.root().members.len()
    }

    /// Level of the deepest node.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    pub fn nodes_at_level(&self, level: usize) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.iter().filter(move |n| n.level == level)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// The segmentation at `level`: nodes on that level plus shallower leaves,
    /// in node-id order.
    pub fn cut(&self, level: usize) -> Result<Vec<&HierarchyNode>> {
        if level > self.depth() {
            return Err(Error::arg(format!("level {level} exceeds tree depth {}", self.depth())));
        }
        Ok(self
            .nodes
            .iter()
            .filter(|n| n.level == level || (n.level < level && n.is_leaf()))
            .collect())
    }

    /// Per-patch index into [`HierarchyTree::cut`] at `level`.
    pub fn assignment_at(&self, level: usize) -> Result<Vec<usize>> {
        let mut out = vec![0; self.num_patches()];
        for (i, n) in self.cut(level)?.iter().enumerate() {
            n.members.iter().for_each(|&m| out[m] = i);
        }
        Ok(out)
    }

    /// Deepest node containing both patches.
    pub fn lca(&self, x: usize, y: usize) -> usize {
        let mut id = 0;
        'descend: loop {
            for &c in &self.nodes[id].children {
                let m = &self.nodes[c].members;
                if m.binary_search(&x).is_ok() && m.binary_search(&y).is_ok() {
                    id = c;
                    continue 'descend;
                }
            }
            return id;
        }
    }

    pub fn set_purity(&mut self, node: usize, purity: Option<f64>) {
        self.nodes[node].purity = purity;
    }

    /// Root covers `0..n`, children partition their parent, internal nodes
    /// have at least two children and levels increase by one per edge.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::arg(msg));
        let root = self.root();
        if root.level != 0 || root.parent.is_some() || root.members.iter().enumerate().any(|(i, &m)| i != m) {
            return bad("root must be level 0 and hold every patch 0..n".into());
        }
        for n in &self.nodes {
            if n.members.is_empty() || n.members.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("node {} members must be non-empty and ascending", n.id));
            }
            if n.children.len() == 1 {
                return bad(format!("node {} has a single child", n.id));
            }
            let mut union: Vec<usize> = Vec::new();
            for &c in &n.children {
                let child = self.nodes.get(c).ok_or_else(|| Error::arg(format!("unknown child {c}")))?;
                if child.level != n.level + 1 || child.parent != Some(n.id) {
                    return bad(format!("child {c} of node {} has inconsistent level or parent", n.id));
                }
                union.extend(&child.members);
            }
            union.sort_unstable();
            if !n.is_leaf() && union != n.members {
                return bad(format!("children of node {} do not partition it", n.id));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read(path)?;
        serde_json::from_slice(&data).map_err(|e| Error::Decode { path: path.to_path_buf(), reason: e.to_string() })
    }
}

fn mean_of(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points.first().map_or(0, |p| p.len());
    let mut c = vec![0.0; dim];
    for &m in members {
        c.iter_mut().zip(&points[m]).for_each(|(s, v)| *s += v);
    }
    c.iter_mut().for_each(|s| *s /= members.len().max(1) as f64);
    c
}

/// Top-down recursive splitting with [`choose_k`], stopping at no-split,
/// `min_size` or `max_depth`.
pub fn build_hierarchy(embeddings: &[Vec<f64>], config: &ClusteringConfig) -> Result<HierarchyTree> {
    config.validate()?;
    if embeddings.is_empty() {
        return Err(Error::arg("cannot cluster zero patches"));
    }
    let mut tree = HierarchyTree::trivial(embeddings);
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let node = &tree.nodes[id];
        if node.members.len() < config.min_size.max(4) || node.level >= config.max_depth {
            continue;
        }
        let members = node.members.clone();
        let level = node.level;
        let points: Vec<Vec<f64>> = members.iter().map(|&m| embeddings[m].clone()).collect();
        let Some((k, assignment)) = choose_k(&points, config, seed::derive(config.seed, &[id as u64]))? else {
            continue;
        };
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (&m, &a) in members.iter().zip(&assignment) {
            groups[a].push(m);
        }
        groups.retain(|g| !g.is_empty());
        if groups.len() < 2 {
            continue;
        }
        groups.sort_by_key(|g| g[0]);
        for g in groups {
            let child = tree.nodes.len();
            tree.nodes.push(HierarchyNode {
                id: child,
                level: level + 1,
                parent: Some(id),
                centroid: mean_of(embeddings, &g),
                members: g,
                children: vec![],
                purity: None,
            });
            tree.nodes[id].children.push(child);
            queue.push_back(child);
        }
    }
    Ok(tree)
}
