//! Non-interactive subcommands.

use std::path::{Path, PathBuf};

use psyseg_core::imaging::{
    color_first_tree, generate_synthetic, save_class_map, save_image, texture_first_tree, SyntheticImage,
};
use psyseg_core::session::{
    ablation, margin_sweep, AblationResult, AnnotatorMode, GroundTruthSource, ImageSource, IterationSummary, Participant,
    QuotaSchedule, Variant, CONFIG_FILE,
};
use psyseg_core::{Error, GroundTruthHierarchy, Result, Session, SessionConfig, SyntheticSpec};

pub const CLASS_NAMES_FILE: &str = "class_names.json";

/// Files written by [`synth`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub image: PathBuf,
    pub classes: PathBuf,
    pub configs: Vec<PathBuf>,
}

/// Writes a synthetic image, its per-pixel class map, both reference
/// hierarchies and a ready-to-run session config per participant.
pub fn synth(out: &Path, spec: &SyntheticSpec, seed: u64) -> Result<SynthOutput> {
    std::fs::create_dir_all(out)?;
    let out = out.canonicalize()?;
    let s = generate_synthetic(spec)?;
    let image = out.join("image.png");
    let classes = out.join("classes.png");
    save_image(&s.image, &image)?;
    save_class_map(spec.width, spec.height, &s.labels, &classes)?;
    let names = SyntheticImage::class_names();
    std::fs::write(out.join(CLASS_NAMES_FILE), serde_json::to_vec_pretty(&names)?)?;
    let mut configs = Vec::new();
    for (participant, tree, stem) in [
        (Participant::ColorFirst, color_first_tree(), "color_first"),
        (Participant::TextureFirst, texture_first_tree(), "texture_first"),
    ] {
        let tree_path = out.join(format!("oracle_{stem}.json"));
        GroundTruthHierarchy::new(tree)?.save(&tree_path)?;
        let mut c = SessionConfig::synthetic(participant, seed);
        c.image = ImageSource::File { path: image.clone() };
        c.ground_truth =
            Some(GroundTruthSource::File { tree: tree_path, classes: classes.clone(), class_names: names.clone() });
        let path = out.join(format!("config_{stem}.json"));
        c.save(&path)?;
        configs.push(path);
    }
    Ok(SynthOutput { image, classes, configs })
}

/// Opens the session in `dir`, creating it from `config` when the directory
/// holds none yet.
pub fn open_or_init(dir: &Path, config: Option<SessionConfig>) -> Result<Session> {
    if dir.join(CONFIG_FILE).exists() {
        Session::open(dir)
    } else {
        let config = config.ok_or_else(|| Error::Config(format!("{} holds no session; pass --config", dir.display())))?;
        Session::init(dir, config)
    }
}

pub fn simulate(session: &mut Session, mut report: impl FnMut(&IterationSummary)) -> Result<Vec<IterationSummary>> {
    let mut out = Vec::new();
    while !session.is_finished() {
        let mut oracle = session.oracle_annotator()?;
        let summary = session.run_iteration(&mut oracle)?;
        report(&summary);
        out.push(summary);
    }
    Ok(out)
}

pub fn render(session: &Session, level: usize, alpha: f64, out: &Path) -> Result<()> {
    save_image(&session.render(level, alpha)?, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    Variants,
    Margins,
}

pub fn ablate(
    out: &Path,
    base: &SessionConfig,
    mode: AblationMode,
    seeds: &[u64],
    margins: &[f64],
) -> Result<Vec<AblationResult>> {
    if !matches!(base.annotator, AnnotatorMode::Oracle { .. }) {
        return Err(Error::Config("ablation needs an oracle annotator".into()));
    }
    match mode {
        AblationMode::Variants => ablation(out, base, &Variant::ALL, seeds),
        AblationMode::Margins => margin_sweep(out, base, margins),
    }
}

/// Applies command-line overrides to a config.
pub fn override_config(c: &mut SessionConfig, seed: Option<u64>, iterations: Option<usize>, quota: Option<usize>) {
    if let Some(s) = seed {
        c.seed = s;
        if let ImageSource::Synthetic { spec } = &mut c.image {
            spec.seed = s;
        }
    }
    if let Some(i) = iterations {
        c.iterations = i;
        if let QuotaSchedule::PerIteration(qs) = &c.responses_per_iteration {
            let last = qs.last().copied().unwrap_or(1);
            let mut qs = qs.clone();
            qs.resize(i, last);
            c.responses_per_iteration = QuotaSchedule::PerIteration(qs);
        }
    }
    if let Some(q) = quota {
        c.responses_per_iteration = QuotaSchedule::Constant(q);
    }
}
