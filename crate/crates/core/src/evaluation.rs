//! Node purity, dendrogram purity and per-iteration reports.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::HierarchyTree;

/// Largest class fraction among `members`.
pub fn node_purity(members: &[usize], labels: &[usize]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::arg("purity of an empty node"));
    }
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &m in members {
        let c = *labels.get(m).ok_or_else(|| Error::arg(format!("patch {m} has no label")))?;
        *counts.entry(c).or_default() += 1;
    }
    Ok(*counts.values().max().unwrap() as f64 / members.len() as f64)
}

fn pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Mean over same-class patch pairs of the pair's class fraction in their
/// lowest common ancestor.
///
/// Each node contributes the pairs whose LCA it is: for class c, the
/// same-class pairs inside it minus those inside any single child.
pub fn dendrogram_purity(tree: &HierarchyTree, labels: &[usize]) -> Result<f64> {
    if labels.len() != tree.num_patches() {
        return Err(Error::arg(format!("{} labels for {} patches", labels.len(), tree.num_patches())));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let count = |members: &[usize]| {
        let mut c = vec![0usize; classes];
        members.iter().for_each(|&m| c[labels[m]] += 1);
        c
    };
    let total: f64 = count(&tree.root().members).into_iter().map(pairs).sum();
    if total == 0.0 {
        return Err(Error::UndefinedMetric("no class has two patches".into()));
    }
    let mut sum = 0.0;
    for node in tree.nodes() {
        let here = count(&node.members);
        let mut lca_pairs: Vec<f64> = here.iter().map(|&n| pairs(n)).collect();
        for &c in &node.children {
            for (acc, n) in lca_pairs.iter_mut().zip(count(&tree.node(c).members)) {
                *acc -= pairs(n);
            }
        }
        let size = node.members.len() as f64;
        for (p, n) in lca_pairs.iter().zip(&here) {
            if *p > 0.0 {
                sum += p * (*n as f64 / size);
            }
        }
    }
    Ok(sum / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePurity {
    pub node: usize,
    pub level: usize,
    pub size: usize,
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub iteration: usize,
    /// Answered (non-enhanced) responses consumed so far.
    pub responses: usize,
    pub enhanced: usize,
    pub dendrogram_purity: f64,
    pub node_purities: Vec<NodePurity>,
    #[serde(default)]
    pub variant: String,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl EvaluationReport {
    /// Scores `tree` and writes each node's purity into it.
    pub fn evaluate(tree: &mut HierarchyTree, labels: &[usize], iteration: usize, responses: usize) -> Result<Self> {
        let purity = dendrogram_purity(tree, labels)?;
        let mut node_purities = Vec::with_capacity(tree.len());
        for id in 0..tree.len() {
            let n = tree.node(id);
            let p = node_purity(&n.members, labels)?;
            node_purities.push(NodePurity { node: id, level: n.level, size: n.members.len(), purity: p });
            tree.set_purity(id, Some(p));
        }
        Ok(EvaluationReport {
            iteration,
            responses,
            enhanced: 0,
            dendrogram_purity: purity,
            node_purities,
            variant: String::new(),
            config: serde_json::Value::Null,
        })
    }

    pub fn leaf_purities<'a>(&'a self, tree: &'a HierarchyTree) -> impl Iterator<Item = f64> + 'a {
        self.node_purities.iter().filter(|p| tree.node(p.node).is_leaf()).map(|p| p.purity)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| Error::Decode { path: path.to_path_buf(), reason: e.to_string() })
    }
}

pub const CURVE_HEADER: &str = "iteration,responses,dendrogram_purity,variant";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub responses: usize,
    pub dendrogram_purity: f64,
    pub variant: String,
}

impl From<&EvaluationReport> for CurvePoint {
    fn from(r: &EvaluationReport) -> Self {
        CurvePoint {
            iteration: r.iteration,
            responses: r.responses,
            dendrogram_purity: r.dendrogram_purity,
            variant: r.variant.clone(),
        }
    }
}

pub fn write_curve(path: impl AsRef<Path>, points: &[CurvePoint]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{CURVE_HEADER}")?;
    for p in points {
        if p.variant.contains([',', '\n', '"']) {
            return Err(Error::arg(format!("variant name {:?} is not CSV-safe", p.variant)));
        }
        writeln!(out, "{},{},{},{}", p.iteration, p.responses, p.dendrogram_purity, p.variant)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_curve(path: impl AsRef<Path>) -> Result<Vec<CurvePoint>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let bad = |line: usize, why: &str| Error::Decode { path: path.to_path_buf(), reason: format!("line {line}: {why}") };
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(i + 2, "expected 4 fields"));
            }
            Ok(CurvePoint {
                iteration: f[0].parse().map_err(|_| bad(i + 2, "iteration"))?,
                responses: f[1].parse().map_err(|_| bad(i + 2, "responses"))?,
                dendrogram_purity: f[2].parse().map_err(|_| bad(i + 2, "purity"))?,
                variant: f[3].to_string(),
            })
        })
        .collect()
}
