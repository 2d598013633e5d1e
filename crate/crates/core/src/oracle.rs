//! Simulated annotators. A virtual participant holds a knowledge tree over
//! semantic classes and, shown three patches, names the one whose class
//! shares the shallowest common ancestors with the other two.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::SuperpixelMap;
use crate::query::TripletQuery;

/// Node of a knowledge tree; leaves are semantic classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn leaf(name: impl Into<String>) -> Self {
        TreeNode { name: name.into(), children: Vec::new() }
    }

    pub fn branch(name: impl Into<String>, children: Vec<TreeNode>) -> Self {
        TreeNode { name: name.into(), children }
    }
}

/// A knowledge tree plus the class of every patch.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthHierarchy {
    root: TreeNode,
    leaves: Vec<String>,
    /// Child-index path from the root to each leaf.
    leaf_paths: Vec<Vec<usize>>,
    patch_labels: Vec<Option<usize>>,
}

#[derive(Serialize, Deserialize)]
struct OracleFile {
    tree: TreeNode,
    #[serde(default)]
    patch_classes: Vec<Option<String>>,
}

impl GroundTruthHierarchy {
    pub fn new(root: TreeNode) -> Result<Self> {
        fn walk(node: &TreeNode, path: &mut Vec<usize>, leaves: &mut Vec<String>, paths: &mut Vec<Vec<usize>>) {
            if node.children.is_empty() {
                leaves.push(node.name.clone());
                paths.push(path.clone());
            }
            for (i, c) in node.children.iter().enumerate() {
                path.push(i);
                walk(c, path, leaves, paths);
                path.pop();
            }
        }
        let (mut leaves, mut leaf_paths) = (Vec::new(), Vec::new());
        walk(&root, &mut Vec::new(), &mut leaves, &mut leaf_paths);
        let mut seen = HashMap::new();
        for name in &leaves {
            if seen.insert(name.as_str(), ()).is_some() {
                return Err(Error::Config(format!("duplicate class name {name:?} in knowledge tree")));
            }
        }
        Ok(GroundTruthHierarchy { root, leaves, leaf_paths, patch_labels: Vec::new() })
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    /// Class names in depth-first order; a class id indexes this list.
    pub fn leaf_names(&self) -> &[String] {
        &self.leaves
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.leaves.iter().position(|l| l == name)
    }

    pub fn leaf_depth(&self, class: usize) -> usize {
        self.leaf_paths[class].len()
    }

    /// Index path of the ancestor of `class` at `depth`, usable as a group key.
    pub fn ancestor_at(&self, class: usize, depth: usize) -> &[usize] {
        let p = &self.leaf_paths[class];
        &p[..depth.min(p.len())]
    }

    pub fn set_patch_labels(&mut self, labels: Vec<Option<usize>>) -> Result<()> {
        if let Some(bad) = labels.iter().flatten().find(|&&c| c >= self.leaves.len()) {
            return Err(Error::arg(format!("class id {bad} out of range")));
        }
        self.patch_labels = labels;
        Ok(())
    }

    /// Labels each patch with the majority class of its pixels, where
    /// `pixel_classes` indexes `class_names` and names are resolved against
    /// this tree's leaves.
    pub fn label_patches_from_pixels(
        &mut self,
        map: &SuperpixelMap,
        pixel_classes: &[u16],
        class_names: &[String],
    ) -> Result<()> {
        if pixel_classes.len() != map.labels.len() {
            return Err(Error::arg("pixel class map and superpixel map sizes differ"));
        }
        let resolve: Vec<Option<usize>> = class_names.iter().map(|n| self.class_index(n)).collect();
        let mut votes = vec![vec![0usize; class_names.len()]; map.len()];
        for (&patch, &class) in map.labels.iter().zip(pixel_classes) {
            let class = class as usize;
            if class >= class_names.len() {
                return Err(Error::arg(format!("pixel class {class} has no name")));
            }
            votes[patch as usize][class] += 1;
        }
        let labels = votes
            .iter()
            .map(|v| {
                let best = (0..v.len()).max_by_key(|&c| (v[c], std::cmp::Reverse(c)))?;
                resolve[best]
            })
            .collect();
        self.set_patch_labels(labels)
    }

    pub fn patch_labels(&self) -> &[Option<usize>] {
        &self.patch_labels
    }

    pub fn patch_class(&self, patch: usize) -> Result<usize> {
        self.patch_labels
            .get(patch)
            .copied()
            .flatten()
            .ok_or_else(|| Error::arg(format!("patch {patch} has no ground-truth class")))
    }

    /// Fully labeled class vector, or an error naming the first gap.
    pub fn class_vector(&self) -> Result<Vec<usize>> {
        (0..self.patch_labels.len()).map(|p| self.patch_class(p)).collect()
    }

    /// Depth of the lowest common ancestor of two classes (root = 0).
    pub fn lca_depth(&self, a: usize, b: usize) -> usize {
        self.leaf_paths[a]
            .iter()
            .zip(&self.leaf_paths[b])
            .take_while(|(x, y)| x == y)
            .count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = OracleFile {
            tree: self.root.clone(),
            patch_classes: self
                .patch_labels
                .iter()
                .map(|l| l.map(|c| self.leaves[c].clone()))
                .collect(),
        };
        fs::write(path, serde_json::to_vec_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: OracleFile = serde_json::from_slice(&fs::read(path)?)?;
        let mut h = GroundTruthHierarchy::new(file.tree)?;
        let labels = file
            .patch_classes
            .iter()
            .map(|n| match n {
                None => Ok(None),
                Some(n) => h
                    .class_index(n)
                    .map(Some)
                    .ok_or_else(|| Error::Config(format!("patch class {n:?} is not a leaf of the tree"))),
            })
            .collect::<Result<Vec<_>>>()?;
        h.set_patch_labels(labels)?;
        Ok(h)
    }
}

/// LCA depth between the classes of two patches; equal classes give the leaf depth.
pub fn class_similarity(h: &GroundTruthHierarchy, x: usize, y: usize) -> Result<usize> {
    Ok(h.lca_depth(h.patch_class(x)?, h.patch_class(y)?))
}

/// Summed similarity of each option to the other two.
pub fn option_scores(h: &GroundTruthHierarchy, q: &TripletQuery) -> Result<[usize; 3]> {
    let p = q.patches();
    let s01 = class_similarity(h, p[0], p[1])?;
    let s02 = class_similarity(h, p[0], p[2])?;
    let s12 = class_similarity(h, p[1], p[2])?;
    Ok([s01 + s02, s01 + s12, s02 + s12])
}

/// Picks the least similar option; ties are broken uniformly with `rng`.
pub fn answer(h: &GroundTruthHierarchy, q: &TripletQuery, rng: &mut impl Rng) -> Result<usize> {
    let scores = option_scores(h, q)?;
    let min = *scores.iter().min().unwrap();
    let tied: Vec<usize> = (0..3).filter(|&i| scores[i] == min).collect();
    Ok(if tied.len() == 1 { tied[0] } else { tied[rng.random_range(0..tied.len())] })
}

/// A virtual participant, optionally answering uniformly at random with
/// probability `error_rate`.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub hierarchy: GroundTruthHierarchy,
    pub error_rate: f64,
}

impl Oracle {
    pub fn new(hierarchy: GroundTruthHierarchy) -> Self {
        Oracle { hierarchy, error_rate: 0.0 }
    }

    pub fn answer(&self, q: &TripletQuery, rng: &mut impl Rng) -> Result<usize> {
        if self.error_rate > 0.0 && rng.random_bool(self.error_rate.min(1.0)) {
            return Ok(rng.random_range(0..3));
        }
        answer(&self.hierarchy, q, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{color_first_tree, texture_first_tree};
    use crate::seed;

    fn labeled(tree: TreeNode, classes: &[&str]) -> GroundTruthHierarchy {
        let mut h = GroundTruthHierarchy::new(tree).unwrap();
        let labels = classes.iter().map(|c| h.class_index(c)).collect();
        h.set_patch_labels(labels).unwrap();
        h
    }

    const PATCHES: [&str; 4] = ["dark/lines", "dark/dots", "normal/lines", "dark/lines"];

    #[test]
    fn similarity_walks_the_color_tree() {
        let h = labeled(color_first_tree(), &PATCHES);
        assert_eq!(class_similarity(&h, 0, 3).unwrap(), 2);
        assert_eq!(class_similarity(&h, 0, 1).unwrap(), 1);
        assert_eq!(class_similarity(&h, 0, 2).unwrap(), 0);
    }

    #[test]
    fn color_participant_rejects_other_color() {
        let h = labeled(color_first_tree(), &PATCHES);
        let q = TripletQuery::new(0, 1, 2).unwrap();
        assert_eq!(option_scores(&h, &q).unwrap(), [1, 1, 0]);
        assert_eq!(answer(&h, &q, &mut seed::rng(0)).unwrap(), 2);
    }

    #[test]
    fn texture_participant_rejects_other_texture() {
        // same texture in two colors, plus a third texture
        let h = labeled(texture_first_tree(), &["light/dots", "dark/dots", "light/lines"]);
        let q = TripletQuery::new(0, 1, 2).unwrap();
        assert_eq!(answer(&h, &q, &mut seed::rng(0)).unwrap(), 2);
    }

    #[test]
    fn symmetric_ties_are_uniform() {
        let h = labeled(color_first_tree(), &["light/dots"; 3]);
        let q = TripletQuery::new(0, 1, 2).unwrap();
        let mut rng = seed::rng(42);
        let mut counts = [0usize; 3];
        let trials = 10_000;
        for _ in 0..trials {
            counts[answer(&h, &q, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((0.30..=0.37).contains(&f), "{counts:?}");
        }
    }

    #[test]
    fn unlabeled_patch_is_an_error() {
        let mut h = GroundTruthHierarchy::new(color_first_tree()).unwrap();
        h.set_patch_labels(vec![Some(0), None]).unwrap();
        assert!(class_similarity(&h, 0, 1).is_err());
        assert!(class_similarity(&h, 0, 7).is_err());
    }

    #[test]
    fn duplicate_leaves_rejected() {
        let tree = TreeNode::branch("root", vec![TreeNode::leaf("a"), TreeNode::leaf("a")]);
        assert!(GroundTruthHierarchy::new(tree).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let h = labeled(color_first_tree(), &PATCHES);
        let path = dir.path().join("oracle.json");
        h.save(&path).unwrap();
        assert_eq!(GroundTruthHierarchy::load(&path).unwrap(), h);
    }

    #[test]
    fn majority_labeling() {
        // patch 0 = 3 pixels (2 of class 1), patch 1 = 1 pixel of class 0
        let map = SuperpixelMap::from_labels(4, 1, vec![0, 0, 0, 1]).unwrap();
        let names: Vec<String> = vec!["light/lines".into(), "dark/dots".into()];
        let mut h = GroundTruthHierarchy::new(color_first_tree()).unwrap();
        h.label_patches_from_pixels(&map, &[1, 0, 1, 0], &names).unwrap();
        assert_eq!(h.patch_class(0).unwrap(), h.class_index("dark/dots").unwrap());
        assert_eq!(h.patch_class(1).unwrap(), h.class_index("light/lines").unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn answer_is_permutation_equivariant(classes in proptest::collection::vec(0usize..9, 3)) {
                let mut h = GroundTruthHierarchy::new(color_first_tree()).unwrap();
                h.set_patch_labels(classes.iter().map(|&c| Some(c)).collect()).unwrap();
                let q = TripletQuery::new(0, 1, 2).unwrap();
                let scores = option_scores(&h, &q).unwrap();
                let min = *scores.iter().min().unwrap();
                prop_assume!(scores.iter().filter(|&&s| s == min).count() == 1);
                let base = answer(&h, &q, &mut seed::rng(0)).unwrap();
                prop_assert_eq!(scores[base], min);
                for perm in [[1, 2, 0], [2, 0, 1], [1, 0, 2], [0, 2, 1], [2, 1, 0]] {
                    let pq = TripletQuery::new(perm[0], perm[1], perm[2]).unwrap();
                    let got = answer(&h, &pq, &mut seed::rng(0)).unwrap();
                    prop_assert_eq!(perm[got], base);
                }
            }
        }
    }
}
