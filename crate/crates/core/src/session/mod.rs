//! The iterative elicitation loop and its on-disk state.
//!
//! A session directory holds everything needed to resume or re-render:
//!
//! | file | contents |
//! |---|---|
//! | `config.json` | the [`SessionConfig`] echo |
//! | `image.png`, `superpixels.json`, `labels.png` | input image and SLIC map |
//! | `features.json` | one descriptor per patch |
//! | `oracle.json` | ground-truth hierarchy and patch classes, when known |
//! | `responses.jsonl` | every answered and enhanced response, append-only |
//! | `state.json` | open iteration, its pending queries, purity history |
//! | `model.json`, `hierarchy.json` | latest embedding model and tree |
//! | `report.json`, `reports/`, `curve.csv` | evaluation, when ground truth exists |
//! | `segmentation_L{level}.png`, `palette.json` | overlays per level |

mod annotator;
mod config;
mod experiment;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::embedding::{describe_patch, mean_loss, train, EmbeddingModel, FeatureVector, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::evaluation::{write_curve, CurvePoint, EvaluationReport};
use crate::hierarchy::{build_hierarchy, HierarchyTree};
use crate::imaging::{
    extract_patch, generate_synthetic, load_class_map, load_image, save_image, slic, Image, PatchView, SuperpixelMap,
    SyntheticImage,
};
use crate::oracle::GroundTruthHierarchy;
use crate::query::{
    append_responses, enhance_responses, generate_candidates, read_responses, repair_log, select_queries, Neighborhoods,
    QueryResponse, RejectReason, ResponseSource, TripletQuery,
};
use crate::seed;
use crate::viz::{overlay_file_name, render_overlay, save_palettes, PaletteAssignment};

pub use annotator::{Annotator, OracleAnnotator, ScriptedAnnotator};
pub use config::{AnnotatorMode, GroundTruthSource, ImageSource, Participant, QuotaSchedule, SessionConfig};
pub use experiment::{ablation, margin_sweep, run_simulation, AblationResult, Variant};

pub const CONFIG_FILE: &str = "config.json";
pub const IMAGE_FILE: &str = "image.png";
pub const FEATURES_FILE: &str = "features.json";
pub const ORACLE_FILE: &str = "oracle.json";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const STATE_FILE: &str = "state.json";
pub const MODEL_FILE: &str = "model.json";
pub const HIERARCHY_FILE: &str = "hierarchy.json";
pub const REPORT_FILE: &str = "report.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const PALETTE_FILE: &str = "palette.json";

// Stream tags for seed derivation.
const TAG_SLIC: u64 = 1;
const TAG_MODEL: u64 = 2;
const TAG_CANDIDATES: u64 = 3;
const TAG_ORACLE: u64 = 4;
const TAG_ENHANCE: u64 = 5;
const TAG_TRAIN: u64 = 6;
const TAG_CLUSTER: u64 = 7;

/// Extra candidate rounds tried before falling back to rejected candidates.
const CANDIDATE_ROUNDS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub query_id: String,
    #[serde(flatten)]
    pub query: TripletQuery,
    #[serde(skip)]
    pub choice: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub candidates: usize,
    pub accepted: usize,
    pub confident: usize,
    pub ambiguous: usize,
    /// Pending queries taken from rejected candidates to fill the quota.
    pub filled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateFile {
    iteration: usize,
    pending: Vec<PendingQuery>,
    selection: SelectionStats,
    history: Vec<CurvePoint>,
}

/// Everything that changes while the loop runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    /// Index of the open iteration; equals the configured count once finished.
    pub iteration: usize,
    pub answered: Vec<QueryResponse>,
    pub enhanced: Vec<QueryResponse>,
    pub model: EmbeddingModel,
    pub hierarchy: Option<HierarchyTree>,
    pub pending: Vec<PendingQuery>,
    pub selection: SelectionStats,
    pub history: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Waiting for answers to pending queries.
    Collecting,
    /// Quota met; the iteration can be closed.
    Ready,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    pub iteration: usize,
    pub iterations: usize,
    /// Answered pending queries of the open iteration.
    pub answered: usize,
    pub quota: usize,
    pub state: Phase,
    pub total_answered: usize,
    pub total_enhanced: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recorded {
    Created,
    /// The query was already answered; the first answer stands.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub answered: usize,
    pub enhanced: usize,
    pub training_loss: f64,
    pub depth: usize,
    pub nodes_per_level: Vec<usize>,
    pub dendrogram_purity: Option<f64>,
}

pub struct Session {
    dir: PathBuf,
    config: SessionConfig,
    image: Image,
    map: SuperpixelMap,
    features: Vec<FeatureVector>,
    ground_truth: Option<GroundTruthHierarchy>,
    state: SessionState,
}

fn decode_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Decode { path: path.to_path_buf(), reason: e.to_string() }
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, data)?;
    std::fs::File::open(&tmp)?.sync_all()?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

fn unix_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Session {
    /// Prepares a new session directory: image, superpixels, descriptors,
    /// ground truth and an initial model, then opens iteration 0.
    pub fn init(dir: impl AsRef<Path>, config: SessionConfig) -> Result<Session> {
        config.validate()?;
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        if dir.join(CONFIG_FILE).exists() {
            return Err(Error::State(format!("{} already holds a session", dir.display())));
        }
        let (image, synthetic) = match &config.image {
            ImageSource::Synthetic { spec } => {
                let s = generate_synthetic(spec)?;
                (s.image.clone(), Some(s))
            }
            ImageSource::File { path } => (load_image(path)?, None),
        };
        let map = slic(&image, config.superpixels, config.compactness, seed::derive(config.seed, &[TAG_SLIC]))?;
        let features = map
            .patches
            .iter()
            .map(|p| Ok(describe_patch(&extract_patch(&image, &map, p.id, config.context_scale)?)))
            .collect::<Result<Vec<_>>>()?;

        let ground_truth = match &config.ground_truth {
            None => None,
            Some(GroundTruthSource::Synthetic { participant }) => {
                let s = synthetic.as_ref().expect("validated: synthetic ground truth needs a synthetic image");
                let mut h = match participant {
                    Participant::ColorFirst => s.color_first.clone(),
                    Participant::TextureFirst => s.texture_first.clone(),
                };
                h.label_patches_from_pixels(&map, &s.labels, &SyntheticImage::class_names())?;
                Some(h)
            }
            Some(GroundTruthSource::File { tree, classes, class_names }) => {
                let mut h = GroundTruthHierarchy::load(tree)?;
                let (w, hgt, pixels) = load_class_map(classes)?;
                if (w, hgt) != (image.width(), image.height()) {
                    return Err(Error::Config(format!("class map {} does not match the image size", classes.display())));
                }
                h.label_patches_from_pixels(&map, &pixels, class_names)?;
                Some(h)
            }
        };

        let mut model = EmbeddingModel::new(&config.layer_dims(FEATURE_DIM), seed::derive(config.seed, &[TAG_MODEL]))?;
        model.fit_input_normalization(&features)?;

        config.save(dir.join(CONFIG_FILE))?;
        save_image(&image, dir.join(IMAGE_FILE))?;
        map.save(&dir)?;
        std::fs::write(dir.join(FEATURES_FILE), serde_json::to_vec(&features)?)?;
        if let Some(h) = &ground_truth {
            h.save(dir.join(ORACLE_FILE))?;
        }
        model.save(dir.join(MODEL_FILE))?;
        std::fs::write(dir.join(RESPONSES_FILE), b"")?;

        let mut session = Session {
            dir,
            config,
            image,
            map,
            features,
            ground_truth,
            state: SessionState {
                iteration: 0,
                answered: Vec::new(),
                enhanced: Vec::new(),
                model,
                hierarchy: None,
                pending: Vec::new(),
                selection: SelectionStats::default(),
                history: Vec::new(),
            },
        };
        session.open_iteration()?;
        session.save_state()?;
        Ok(session)
    }

    /// Reloads a session, replaying `responses.jsonl` onto the pending queries.
    pub fn open(dir: impl AsRef<Path>) -> Result<Session> {
        let dir = dir.as_ref().to_path_buf();
        let config = SessionConfig::load(dir.join(CONFIG_FILE))?;
        let image = load_image(dir.join(IMAGE_FILE))?;
        let map = SuperpixelMap::load(&dir)?;
        let fpath = dir.join(FEATURES_FILE);
        let features: Vec<FeatureVector> =
            serde_json::from_slice(&std::fs::read(&fpath)?).map_err(|e| decode_err(&fpath, e))?;
        if features.len() != map.len() {
            return Err(Error::State("descriptor count does not match the superpixel count".into()));
        }
        let ground_truth = match dir.join(ORACLE_FILE) {
            p if p.exists() => Some(GroundTruthHierarchy::load(p)?),
            _ => None,
        };
        let model = EmbeddingModel::load(dir.join(MODEL_FILE))?;
        let hierarchy = match dir.join(HIERARCHY_FILE) {
            p if p.exists() => Some(HierarchyTree::load(p)?),
            _ => None,
        };
        let log = dir.join(RESPONSES_FILE);
        repair_log(&log)?;
        let (enhanced, answered): (Vec<_>, Vec<_>) = read_responses(&log)?.into_iter().partition(|r| r.is_enhanced());
        let spath = dir.join(STATE_FILE);
        let file: StateFile = serde_json::from_slice(&std::fs::read(&spath)?).map_err(|e| decode_err(&spath, e))?;

        let mut pending = file.pending;
        for r in answered.iter().filter(|r| r.iteration == file.iteration) {
            let slot = pending
                .iter_mut()
                .find(|p| p.choice.is_none() && p.query == r.query)
                .ok_or_else(|| Error::State(format!("logged response {:?} matches no pending query", r.query)))?;
            slot.choice = Some(r.choice);
        }
        Ok(Session {
            dir,
            config,
            image,
            map,
            features,
            ground_truth,
            state: SessionState {
                iteration: file.iteration,
                answered,
                enhanced,
                model,
                hierarchy,
                pending,
                selection: file.selection,
                history: file.history,
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn superpixels(&self) -> &SuperpixelMap {
        &self.map
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn ground_truth(&self) -> Option<&GroundTruthHierarchy> {
        self.ground_truth.as_ref()
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn hierarchy(&self) -> Option<&HierarchyTree> {
        self.state.hierarchy.as_ref()
    }

    pub fn embeddings(&self) -> Result<Vec<Vec<f64>>> {
        self.state.model.embed_all(&self.features)
    }

    pub fn is_finished(&self) -> bool {
        self.state.iteration >= self.config.iterations
    }

    pub fn remaining(&self) -> usize {
        self.state.pending.iter().filter(|p| p.choice.is_none()).count()
    }

    pub fn status(&self) -> Status {
        let quota = self.state.pending.len();
        let remaining = self.remaining();
        Status {
            iteration: self.state.iteration,
            iterations: self.config.iterations,
            answered: quota - remaining,
            quota,
            state: if self.is_finished() {
                Phase::Finished
            } else if remaining == 0 {
                Phase::Ready
            } else {
                Phase::Collecting
            },
            total_answered: self.state.answered.len(),
            total_enhanced: self.state.enhanced.len(),
        }
    }

    /// First unanswered pending query of the open iteration.
    pub fn next_query(&self) -> Option<&PendingQuery> {
        self.state.pending.iter().find(|p| p.choice.is_none())
    }

    pub fn patch_view(&self, patch: usize) -> Result<PatchView> {
        extract_patch(&self.image, &self.map, patch, self.config.context_scale)
    }

    fn ensure_open(&self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::State("all iterations are complete".into()));
        }
        Ok(())
    }

    /// Durably logs an answer to a pending query before acknowledging it.
    pub fn record_response(&mut self, query_id: &str, choice: usize, source: ResponseSource) -> Result<Recorded> {
        self.ensure_open()?;
        let idx = self
            .state
            .pending
            .iter()
            .position(|p| p.query_id == query_id)
            .ok_or_else(|| Error::NotFound(format!("query {query_id}")))?;
        if choice > 2 {
            return Err(Error::arg(format!("choice {choice} is not 0, 1 or 2")));
        }
        if self.state.pending[idx].choice.is_some() {
            return Ok(Recorded::Duplicate);
        }
        let r = self.make_response(idx, choice, source)?;
        append_responses(self.dir.join(RESPONSES_FILE), std::slice::from_ref(&r))?;
        self.state.pending[idx].choice = Some(choice);
        self.state.answered.push(r);
        Ok(Recorded::Created)
    }

    fn make_response(&self, idx: usize, choice: usize, source: ResponseSource) -> Result<QueryResponse> {
        let ts = match source {
            ResponseSource::Human => unix_millis(),
            _ => self.state.answered.len() as u64,
        };
        QueryResponse::new(self.state.pending[idx].query, choice, source, self.state.iteration, ts)
    }

    /// Answers every open pending query with `annotator`, logging them in one write.
    pub fn answer_pending(&mut self, annotator: &mut dyn Annotator) -> Result<usize> {
        self.ensure_open()?;
        let mut batch = Vec::new();
        for idx in 0..self.state.pending.len() {
            if self.state.pending[idx].choice.is_some() {
                continue;
            }
            let choice = annotator.answer(&self.state.pending[idx].query)?;
            let r = self.make_response(idx, choice, annotator.source())?;
            self.state.pending[idx].choice = Some(choice);
            self.state.answered.push(r.clone());
            batch.push(r);
        }
        append_responses(self.dir.join(RESPONSES_FILE), &batch)?;
        Ok(batch.len())
    }

    /// The configured virtual participant for the open iteration.
    pub fn oracle_annotator(&self) -> Result<OracleAnnotator> {
        let AnnotatorMode::Oracle { error_rate } = self.config.annotator else {
            return Err(Error::State("session is interactive".into()));
        };
        let h = self.ground_truth.clone().ok_or_else(|| Error::State("no ground truth to answer from".into()))?;
        Ok(OracleAnnotator::new(h, error_rate, seed::derive(self.config.seed, &[self.state.iteration as u64, TAG_ORACLE])))
    }

    fn stream(&self, tag: u64) -> u64 {
        seed::derive(self.config.seed, &[self.state.iteration as u64, tag])
    }

    /// Draws candidates for the open iteration and fills its pending list.
    fn open_iteration(&mut self) -> Result<()> {
        let quota = self.config.quota(self.state.iteration);
        let qc = &self.config.query;
        let patches: Vec<usize> = (0..self.map.len()).collect();
        let mut rng = seed::rng(self.stream(TAG_CANDIDATES));
        let mut stats = SelectionStats::default();
        let mut chosen: Vec<TripletQuery> = Vec::with_capacity(quota);

        if qc.random_selection {
            chosen = generate_candidates(None, &patches, quota, &mut rng)?;
            stats.candidates = chosen.len();
            stats.accepted = chosen.len();
        } else {
            let hoods = Neighborhoods::new(&self.embeddings()?, qc.k);
            let mut seen = HashSet::new();
            let mut rejected: Vec<(TripletQuery, RejectReason)> = Vec::new();
            for _ in 0..CANDIDATE_ROUNDS {
                let mut cands =
                    generate_candidates(self.state.hierarchy.as_ref(), &patches, quota * qc.candidate_factor, &mut rng)?;
                cands.retain(|q| seen.insert(q.sorted()));
                if cands.is_empty() {
                    break;
                }
                stats.candidates += cands.len();
                let sel = select_queries(&cands, &self.state.answered, &hoods, qc)?;
                for (_, reason) in &sel.rejected {
                    match reason {
                        RejectReason::Confident => stats.confident += 1,
                        RejectReason::Ambiguous => stats.ambiguous += 1,
                    }
                }
                stats.accepted += sel.accepted.len();
                let room = quota - chosen.len();
                chosen.extend(sel.accepted.into_iter().take(room));
                rejected.extend(sel.rejected);
                if chosen.len() >= quota {
                    break;
                }
            }
            let fill = (quota - chosen.len()).min(rejected.len());
            chosen.extend(rejected.into_iter().take(fill).map(|(q, _)| q));
            stats.filled = fill;
        }
        if chosen.is_empty() {
            return Err(Error::State("no query could be generated".into()));
        }
        let it = self.state.iteration;
        self.state.pending = chosen
            .into_iter()
            .enumerate()
            .map(|(n, query)| PendingQuery { query_id: format!("{it}-{n}"), query, choice: None })
            .collect();
        self.state.selection = stats;
        Ok(())
    }

    fn save_state(&self) -> Result<()> {
        let file = StateFile {
            iteration: self.state.iteration,
            pending: self.state.pending.clone(),
            selection: self.state.selection.clone(),
            history: self.state.history.clone(),
        };
        write_atomic(&self.dir.join(STATE_FILE), &serde_json::to_vec_pretty(&file)?)
    }

    /// Enhances, trains, clusters, evaluates and renders, then opens the next
    /// iteration. Fails without side effects while answers are missing.
    pub fn close_iteration(&mut self) -> Result<IterationSummary> {
        self.ensure_open()?;
        let remaining = self.remaining();
        if remaining > 0 {
            return Err(Error::QuotaNotReached { remaining });
        }
        let it = self.state.iteration;
        let qc = self.config.query.clone();

        // A crash after logging enhanced responses must not duplicate them.
        if qc.enhancement_factor > 1.0 && !self.state.enhanced.iter().any(|r| r.iteration == it) {
            let fresh: Vec<QueryResponse> = self.state.answered.iter().filter(|r| r.iteration == it).cloned().collect();
            let hoods = Neighborhoods::new(&self.embeddings()?, qc.k);
            let mut rng = seed::rng(self.stream(TAG_ENHANCE));
            let extra = enhance_responses(&fresh, &hoods, qc.enhancement_factor, it, &mut rng);
            append_responses(self.dir.join(RESPONSES_FILE), &extra)?;
            self.state.enhanced.extend(extra);
        }

        let training: Vec<QueryResponse> =
            self.state.answered.iter().chain(&self.state.enhanced).cloned().collect();
        let tc = crate::embedding::TrainingConfig { seed: self.stream(TAG_TRAIN), ..self.config.training.clone() };
        let mut model = self.state.model.clone();
        train(&mut model, &self.features, &training, &tc)?;
        let training_loss = mean_loss(&model, &self.features, &training, tc.margin)?;
        let embeddings = model.embed_all(&self.features)?;
        let cc = crate::hierarchy::ClusteringConfig { seed: self.stream(TAG_CLUSTER), ..self.config.clustering.clone() };
        let mut tree = build_hierarchy(&embeddings, &cc)?;

        let mut purity = None;
        if let Some(gt) = &self.ground_truth {
            let labels = gt.class_vector()?;
            let mut report = EvaluationReport::evaluate(&mut tree, &labels, it, self.state.answered.len())?;
            report.enhanced = self.state.enhanced.len();
            report.variant = self.config.variant.clone();
            report.config = serde_json::to_value(&self.config)?;
            let reports = self.dir.join("reports");
            std::fs::create_dir_all(&reports)?;
            report.save(reports.join(format!("report_{it:02}.json")))?;
            report.save(self.dir.join(REPORT_FILE))?;
            purity = Some(report.dendrogram_purity);
            self.state.history.push(CurvePoint::from(&report));
            write_curve(self.dir.join(CURVE_FILE), &self.state.history)?;
        }
        tree.save(self.dir.join(HIERARCHY_FILE))?;
        let mut palettes = Vec::new();
        for level in 0..=tree.depth() {
            let palette = PaletteAssignment::build(&tree, &embeddings, level, self.config.palette_mode)?;
            let overlay = render_overlay(&self.image, &self.map, &tree, level, &palette, self.config.alpha)?;
            save_image(&overlay, self.dir.join(overlay_file_name(level)))?;
            palettes.push(palette);
        }
        save_palettes(self.dir.join(PALETTE_FILE), &palettes)?;
        model.save(self.dir.join(MODEL_FILE))?;

        let summary = IterationSummary {
            iteration: it,
            answered: self.state.answered.len(),
            enhanced: self.state.enhanced.len(),
            training_loss,
            depth: tree.depth(),
            nodes_per_level: (0..=tree.depth()).map(|l| tree.nodes_at_level(l).count()).collect(),
            dendrogram_purity: purity,
        };
        self.state.model = model;
        self.state.hierarchy = Some(tree);
        self.state.iteration += 1;
        if self.is_finished() {
            self.state.pending.clear();
            self.state.selection = SelectionStats::default();
        } else {
            self.open_iteration()?;
        }
        self.save_state()?;
        Ok(summary)
    }

    pub fn run_iteration(&mut self, annotator: &mut dyn Annotator) -> Result<IterationSummary> {
        self.answer_pending(annotator)?;
        self.close_iteration()
    }

    /// Runs every remaining iteration with the configured virtual participant.
    pub fn simulate(&mut self) -> Result<Vec<IterationSummary>> {
        let mut out = Vec::new();
        while !self.is_finished() {
            let mut oracle = self.oracle_annotator()?;
            out.push(self.run_iteration(&mut oracle)?);
        }
        Ok(out)
    }

    /// Rescores the current hierarchy against the ground truth.
    pub fn evaluate(&self) -> Result<EvaluationReport> {
        let gt = self.ground_truth.as_ref().ok_or_else(|| Error::State("session has no ground truth".into()))?;
        let mut tree = self.state.hierarchy.clone().ok_or_else(|| Error::State("no hierarchy yet".into()))?;
        let mut r = EvaluationReport::evaluate(
            &mut tree,
            &gt.class_vector()?,
            self.state.iteration.saturating_sub(1),
            self.state.answered.len(),
        )?;
        r.enhanced = self.state.enhanced.len();
        r.variant = self.config.variant.clone();
        Ok(r)
    }

    /// Overlay of the current hierarchy at `level`.
    pub fn render(&self, level: usize, alpha: f64) -> Result<Image> {
        let tree = self.state.hierarchy.as_ref().ok_or_else(|| Error::State("no hierarchy yet".into()))?;
        let palette = PaletteAssignment::build(tree, &self.embeddings()?, level, self.config.palette_mode)?;
        render_overlay(&self.image, &self.map, tree, level, &palette, alpha)
    }
}
