use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use psyseg_cli::commands::{self, AblationMode};
use psyseg_cli::server;
use psyseg_core::session::{AnnotatorMode, Participant};
use psyseg_core::{Result, Session, SessionConfig, SyntheticSpec};

#[derive(Parser)]
#[command(name = "psyseg", version, about = "Hierarchical segmentation from odd-one-out judgments")]
struct Cli {
    /// Session directory.
    #[arg(long, global = true, default_value = ".")]
    session_dir: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Session config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    SyntheticColor,
    SyntheticTexture,
    Histology,
    Aerial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Desk,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic image, its class map, both reference hierarchies and session configs.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
    },
    /// Create a session: superpixels, descriptors, initial model and first queries.
    Init {
        /// Used when no --config is given.
        #[arg(long, value_enum, default_value = "synthetic-color")]
        preset: Preset,
        /// Input image for the histology and aerial presets.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Constant per-iteration quota.
        #[arg(long)]
        quota: Option<usize>,
        /// Collect answers over HTTP instead of from the oracle.
        #[arg(long)]
        interactive: bool,
    },
    /// Run the remaining iterations with the virtual participant.
    Simulate,
    /// Serve an interactive session over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory holding the annotation UI bundle.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Score the current hierarchy against the ground truth.
    Evaluate,
    /// Render the overlay of one hierarchy level.
    Render {
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long, default_value_t = psyseg_core::viz::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare query strategies or triplet margins over fresh sessions.
    Ablate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "variants")]
        mode: Mode,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.8")]
        margins: Vec<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        quota: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Variants,
    Margins,
}

fn load_config(cli: &Cli) -> Result<Option<SessionConfig>> {
    cli.config.as_ref().map(SessionConfig::load).transpose()
}

fn preset_config(preset: Preset, image: Option<PathBuf>, seed: u64) -> Result<SessionConfig> {
    let need_image = || image.clone().ok_or_else(|| psyseg_core::Error::Config("this preset needs --image".into()));
    Ok(match preset {
        Preset::SyntheticColor => SessionConfig::synthetic(Participant::ColorFirst, seed),
        Preset::SyntheticTexture => SessionConfig::synthetic(Participant::TextureFirst, seed),
        Preset::Histology => SessionConfig::histology(need_image()?, seed),
        Preset::Aerial => SessionConfig::aerial(need_image()?, seed),
    })
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let dir = cli.session_dir.clone();
    match cli.command {
        Command::Synth { ref out, scale } => {
            let seed = cli.seed.unwrap_or(0);
            let spec = match scale {
                Scale::Desk => SyntheticSpec::desk_scale(seed),
                Scale::Full => SyntheticSpec::full_scale(seed),
            };
            let written = commands::synth(out, &spec, seed)?;
            for p in std::iter::once(&written.image).chain([&written.classes]).chain(&written.configs) {
                println!("{}", p.display());
            }
        }
        Command::Init { preset, ref image, iterations, quota, interactive } => {
            let mut config = match load_config(&cli)? {
                Some(c) => c,
                None => preset_config(preset, image.clone(), cli.seed.unwrap_or(0))?,
            };
            commands::override_config(&mut config, cli.seed, iterations, quota);
            if interactive {
                config.annotator = AnnotatorMode::Interactive;
            }
            let s = Session::init(&dir, config)?;
            eprintln!("{} superpixels", s.superpixels().len());
            print_json(&s.status())?;
        }
        Command::Simulate => {
            let mut config = load_config(&cli)?;
            if let Some(c) = config.as_mut() {
                commands::override_config(c, cli.seed, None, None);
            }
            let mut s = commands::open_or_init(&dir, config)?;
            commands::simulate(&mut s, |sum| {
                let purity = sum.dendrogram_purity.map_or("-".into(), |p| format!("{p:.4}"));
                eprintln!(
                    "iteration {}: {} answered, {} enhanced, loss {:.4}, levels {:?}, purity {purity}",
                    sum.iteration, sum.answered, sum.enhanced, sum.training_loss, sum.nodes_per_level
                );
            })?;
        }
        Command::Serve { ref addr, ref static_dir } => {
            let s = commands::open_or_init(&dir, load_config(&cli)?)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(s, addr, static_dir.clone()))?;
        }
        Command::Evaluate => {
            let s = Session::open(&dir)?;
            print_json(&s.evaluate()?)?;
        }
        Command::Render { level, alpha, ref out } => {
            let s = Session::open(&dir)?;
            let out = out.clone().unwrap_or_else(|| dir.join(format!("render_L{level}.png")));
            commands::render(&s, level, alpha, &out)?;
            println!("{}", out.display());
        }
        Command::Ablate { ref out, mode, ref seeds, ref margins, iterations, quota } => {
            let mut base = match load_config(&cli)? {
                Some(c) => c,
                None => SessionConfig::synthetic(Participant::ColorFirst, cli.seed.unwrap_or(0)),
            };
            commands::override_config(&mut base, cli.seed, iterations, quota);
            let mode = match mode {
                Mode::Variants => AblationMode::Variants,
                Mode::Margins => AblationMode::Margins,
            };
            for r in commands::ablate(out, &base, mode, seeds, margins)? {
                println!("{}\tseed {}\tfinal purity {:.4}", r.variant, r.seed, r.final_purity);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
