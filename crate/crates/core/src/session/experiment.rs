use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IterationSummary, Session, SessionConfig, CURVE_FILE};
use crate::error::{Error, Result};
use crate::evaluation::{write_curve, CurvePoint};

/// Query strategies compared in ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Uniform random triplets, no filtering, no enhancement.
    Random,
    /// Hierarchy-guided candidates filtered by the Dirichlet rule.
    Active,
    /// `Active` plus similar-query enhancement.
    #[serde(rename = "active+enhance")]
    ActiveEnhance,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Random, Variant::Active, Variant::ActiveEnhance];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Random => "random",
            Variant::Active => "active",
            Variant::ActiveEnhance => "active+enhance",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::arg(format!("unknown variant {name:?}")))
    }

    pub fn apply(self, config: &mut SessionConfig) {
        let q = &mut config.query;
        match self {
            Variant::Random => {
                q.random_selection = true;
                q.enhancement_factor = 1.0;
            }
            Variant::Active => {
                q.random_selection = false;
                q.enhancement_factor = 1.0;
            }
            Variant::ActiveEnhance => {
                q.random_selection = false;
                if q.enhancement_factor <= 1.0 {
                    q.enhancement_factor = 2.0;
                }
            }
        }
        config.variant = self.name().into();
    }
}

/// Creates a session in `dir` and runs it to completion with its oracle.
pub fn run_simulation(dir: impl AsRef<Path>, config: SessionConfig) -> Result<(Session, Vec<IterationSummary>)> {
    let mut s = Session::init(dir, config)?;
    let summaries = s.simulate()?;
    Ok((s, summaries))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub variant: String,
    pub seed: u64,
    pub final_purity: f64,
    pub curve: Vec<CurvePoint>,
}

fn finish(dir: &Path, config: SessionConfig) -> Result<AblationResult> {
    let seed = config.seed;
    let variant = config.variant.clone();
    let (s, _) = run_simulation(dir, config)?;
    let curve = s.state().history.clone();
    let final_purity = curve.last().map(|p| p.dendrogram_purity).ok_or_else(|| Error::State("no evaluation".into()))?;
    Ok(AblationResult { variant, seed, final_purity, curve })
}

/// Runs every variant for every seed under `root/{variant}_{seed}` and writes
/// the combined `root/curve.csv`.
pub fn ablation(root: impl AsRef<Path>, base: &SessionConfig, variants: &[Variant], seeds: &[u64]) -> Result<Vec<AblationResult>> {
    let root = root.as_ref();
    std::fs::create_dir_all(root)?;
    let mut out = Vec::new();
    for &seed in seeds {
        for &v in variants {
            let mut c = SessionConfig { seed, ..base.clone() };
            if let super::ImageSource::Synthetic { spec } = &mut c.image {
                spec.seed = seed;
            }
            v.apply(&mut c);
            out.push(finish(&root.join(format!("{}_{seed}", v.name())), c)?);
        }
    }
    let points: Vec<CurvePoint> = out.iter().flat_map(|r| r.curve.iter().cloned()).collect();
    write_curve(root.join(CURVE_FILE), &points)?;
    Ok(out)
}

/// Runs one session per triplet margin under `root/margin_{m}` and writes the
/// combined `root/curve.csv`, labelled `margin-{m}`.
pub fn margin_sweep(root: impl AsRef<Path>, base: &SessionConfig, margins: &[f64]) -> Result<Vec<AblationResult>> {
    let root = root.as_ref();
    std::fs::create_dir_all(root)?;
    let mut out = Vec::new();
    for &m in margins {
        let mut c = base.clone();
        c.training.margin = m;
        c.variant = format!("margin-{m}");
        out.push(finish(&root.join(format!("margin_{m}")), c)?);
    }
    let points: Vec<CurvePoint> = out.iter().flat_map(|r| r.curve.iter().cloned()).collect();
    write_curve(root.join(CURVE_FILE), &points)?;
    Ok(out)
}
