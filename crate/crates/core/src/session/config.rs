use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::TrainingConfig;
use crate::error::{Error, Result};
use crate::hierarchy::ClusteringConfig;
use crate::imaging::SyntheticSpec;
use crate::query::QueryEngineConfig;
use crate::viz::{PaletteMode, DEFAULT_ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    /// An RGB PNG on disk.
    File { path: PathBuf },
    Synthetic { spec: SyntheticSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Participant {
    /// Splits by color first, then texture.
    ColorFirst,
    /// Splits by texture first, then color.
    TextureFirst,
}

/// Known semantic classes of the image, used by the oracle annotator and for
/// evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthSource {
    /// One of the two reference hierarchies of a synthetic image.
    Synthetic { participant: Participant },
    /// A hierarchy file (`oracle.json` layout; patch classes may be empty)
    /// and a gray PNG whose pixel values index `class_names`.
    File { tree: PathBuf, classes: PathBuf, class_names: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AnnotatorMode {
    /// Simulated participant answering from the ground truth.
    Oracle {
        #[serde(default)]
        error_rate: f64,
    },
    /// Answers arrive through the HTTP interface.
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuotaSchedule {
    Constant(usize),
    PerIteration(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub image: ImageSource,
    #[serde(default)]
    pub ground_truth: Option<GroundTruthSource>,
    pub annotator: AnnotatorMode,
    pub superpixels: usize,
    pub compactness: f64,
    pub context_scale: f64,
    pub iterations: usize,
    pub responses_per_iteration: QuotaSchedule,
    pub training: TrainingConfig,
    pub query: QueryEngineConfig,
    pub clustering: ClusteringConfig,
    /// Hidden layer widths of the embedding network.
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub palette_mode: PaletteMode,
    pub alpha: f64,
    /// Label written to curves and reports.
    #[serde(default)]
    pub variant: String,
    pub seed: u64,
}

impl SessionConfig {
    /// Desk-scale synthetic image answered by a virtual participant:
    /// 10 iterations of 800 responses, doubled by enhancement.
    pub fn synthetic(participant: Participant, seed: u64) -> Self {
        SessionConfig {
            image: ImageSource::Synthetic { spec: SyntheticSpec::desk_scale(seed) },
            ground_truth: Some(GroundTruthSource::Synthetic { participant }),
            annotator: AnnotatorMode::Oracle { error_rate: 0.0 },
            superpixels: 300,
            compactness: 10.0,
            context_scale: 3.0,
            iterations: 10,
            responses_per_iteration: QuotaSchedule::Constant(800),
            training: TrainingConfig::default(),
            query: QueryEngineConfig::default(),
            clustering: ClusteringConfig { k_max: 4, s_min: 0.2, ..ClusteringConfig::default() },
            hidden: vec![64, 32],
            embedding_dim: 16,
            palette_mode: PaletteMode::Nodes,
            alpha: DEFAULT_ALPHA,
            variant: "active+enhance".into(),
            seed,
        }
    }

    /// Interactive session on a user image: 1500 responses, then 9 x 1000.
    pub fn histology(path: impl Into<PathBuf>, seed: u64) -> Self {
        let mut c = Self::interactive(path, seed);
        c.iterations = 10;
        c.responses_per_iteration = QuotaSchedule::PerIteration([1500].into_iter().chain([1000; 9]).collect());
        c
    }

    /// Interactive session on a user image: 600 responses, then 4 x 400.
    pub fn aerial(path: impl Into<PathBuf>, seed: u64) -> Self {
        let mut c = Self::interactive(path, seed);
        c.iterations = 5;
        c.responses_per_iteration = QuotaSchedule::PerIteration([600].into_iter().chain([400; 4]).collect());
        c
    }

    fn interactive(path: impl Into<PathBuf>, seed: u64) -> Self {
        SessionConfig {
            image: ImageSource::File { path: path.into() },
            ground_truth: None,
            annotator: AnnotatorMode::Interactive,
            superpixels: 800,
            ..Self::synthetic(Participant::ColorFirst, seed)
        }
    }

    pub fn quota(&self, iteration: usize) -> usize {
        match &self.responses_per_iteration {
            QuotaSchedule::Constant(q) => *q,
            QuotaSchedule::PerIteration(qs) => qs.get(iteration).copied().unwrap_or(0),
        }
    }

    pub fn layer_dims(&self, input: usize) -> Vec<usize> {
        std::iter::once(input).chain(self.hidden.iter().copied()).chain([self.embedding_dim]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        match &self.responses_per_iteration {
            QuotaSchedule::Constant(0) => return bad("per-iteration quota must be at least 1".into()),
            QuotaSchedule::PerIteration(qs) if qs.len() != self.iterations || qs.contains(&0) => {
                return bad(format!("quota schedule needs {} entries, each at least 1", self.iterations))
            }
            _ => {}
        }
        if self.superpixels < 3 {
            return bad("at least 3 superpixels are needed to ask anything".into());
        }
        if !(self.compactness > 0.0) || !(self.context_scale >= 1.0) {
            return bad("compactness must be positive and context_scale at least 1".into());
        }
        if self.embedding_dim == 0 || self.hidden.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if let AnnotatorMode::Oracle { error_rate } = self.annotator {
            if self.ground_truth.is_none() {
                return bad("oracle annotation needs a ground truth".into());
            }
            if !(0.0..=1.0).contains(&error_rate) {
                return bad(format!("error rate {error_rate} outside [0, 1]"));
            }
        }
        if matches!(self.ground_truth, Some(GroundTruthSource::Synthetic { .. }))
            && !matches!(self.image, ImageSource::Synthetic { .. })
        {
            return bad("a synthetic ground truth requires a synthetic image".into());
        }
        self.training.validate()?;
        self.query.validate()?;
        self.clustering.validate()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read(path)?;
        serde_json::from_slice(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        SessionConfig::synthetic(Participant::TextureFirst, 1).validate().unwrap();
        let h = SessionConfig::histology("x.png", 1);
        h.validate().unwrap();
        assert_eq!((h.quota(0), h.quota(1), h.quota(9)), (1500, 1000, 1000));
        let a = SessionConfig::aerial("x.png", 1);
        assert_eq!((a.iterations, a.quota(0), a.quota(4)), (5, 600, 400));
    }

    #[test]
    fn schedule_json_forms() {
        let mut c = SessionConfig::synthetic(Participant::ColorFirst, 0);
        c.iterations = 2;
        c.responses_per_iteration = QuotaSchedule::PerIteration(vec![15, 10]);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains(r#""responses_per_iteration":[15,10]"#));
        assert_eq!(serde_json::from_str::<SessionConfig>(&text).unwrap(), c);
        c.responses_per_iteration = QuotaSchedule::PerIteration(vec![15]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn oracle_needs_ground_truth() {
        let mut c = SessionConfig::synthetic(Participant::ColorFirst, 0);
        c.ground_truth = None;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
