//! The `dualcloak` command line: protect, calibrate, evaluate,
//! mask-preview and grid workflows, plus `serve` (mock verification
//! service) and `synth` (fixture generation).

pub mod commands;
pub mod components;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod util;

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use dualcloak::attacks::AttackMode;
use dualcloak::zoo::Zoo;

use crate::commands::calibrate::{cmd_calibrate, write_thresholds};
use crate::commands::evaluate::{cmd_evaluate, default_report_path, write_report, EvaluateOptions};
use crate::commands::grid::{cmd_grid, parse_row};
use crate::commands::mask_preview::cmd_mask_preview;
use crate::commands::protect::cmd_protect;
use crate::config::{load, parse_assignment, LoadedConfig};
use crate::error::{CliResult, EXIT_OK, EXIT_USAGE};
use crate::fixtures::{write_fixture_set, FixtureOptions};

#[derive(Debug, Parser)]
#[command(name = "dualcloak", version, about = "Facial privacy protection by adversarial perturbation")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config field by dotted path, e.g. `attack.off_steps=10`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
    /// Attack mode (overrides `attack.mode`).
    #[arg(long, value_parser = PossibleValuesParser::new(AttackMode::ALL.map(|m| m.as_str())))]
    pub mode: Option<String>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core (overrides `workers`).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl RunArgs {
    pub fn overrides(&self) -> CliResult<Vec<(String, String)>> {
        let mut out = self.set.iter().map(|s| parse_assignment(s)).collect::<CliResult<Vec<_>>>()?;
        if let Some(m) = &self.mode {
            out.push(("attack.mode".into(), m.clone()));
        }
        if let Some(s) = self.seed {
            out.push(("seed".into(), s.to_string()));
        }
        if let Some(w) = self.workers {
            out.push(("workers".into(), w.to_string()));
        }
        Ok(out)
    }

    pub fn load(&self) -> CliResult<LoadedConfig> {
        load(&self.config, &self.overrides()?)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Protect every input image and write a run manifest.
    Protect {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Calibrate verification thresholds on impostor pairs.
    Calibrate {
        #[command(flatten)]
        run: RunArgs,
        /// JSON list of [image_a, image_b] impostor pairs.
        #[arg(long)]
        pairs: PathBuf,
        /// Output file (default: <io.output>/thresholds.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score protected images against their targets.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Directory of protected images, paired with targets by file stem.
        #[arg(long)]
        protected: PathBuf,
        /// Target directory or single image (default: `target_image`).
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Threshold table from `calibrate` (default: `thresholds`).
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Verification service URL, or `mock` for an in-process server.
        #[arg(long)]
        api: Option<String>,
        /// Exit 0 even when some files could not be paired.
        #[arg(long)]
        allow_partial: bool,
        /// Report path (default: <io.output>/report.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write texture, hair and combined mask PNGs plus an overlay.
    MaskPreview {
        #[command(flatten)]
        run: RunArgs,
        /// Image to preview.
        #[arg(long)]
        image: PathBuf,
        /// Directory for the mask PNGs and overlay.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tile images into a labelled comparison grid.
    Grid {
        /// A row as LABEL=PATH[,PATH...]; directories expand to their images.
        #[arg(long = "row", required = true)]
        rows: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the mock verification service.
    Serve {
        #[arg(long, default_value = dualcloak::zoo::DEFAULT_HOLDOUT)]
        embedder: String,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Generate a synthetic fixture set with a ready-to-run config.
    Synth {
        /// Directory to create the fixture set in.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FixtureOptions::default().pairs)]
        pairs: usize,
        #[arg(long, default_value_t = FixtureOptions::default().impostor_pairs)]
        impostor_pairs: usize,
        #[arg(long, default_value_t = FixtureOptions::default().seed)]
        seed: u64,
    },
}

/// Executes a parsed command and returns the process exit status.
pub fn execute(cli: Cli) -> CliResult<u8> {
    let zoo = Zoo::from_env();
    match cli.command {
        Command::Protect { run } => {
            let loaded = run.load()?;
            let out = cmd_protect(&loaded, &zoo)?;
            eprintln!(
                "protected {}/{} images into {}",
                out.manifest.n_ok,
                out.manifest.images.len(),
                out.output_dir.display()
            );
            Ok(out.exit_code)
        }
        Command::Calibrate { run, pairs, out } => {
            let loaded = run.load()?;
            let table = cmd_calibrate(&loaded, &zoo, &pairs)?;
            let path = out.unwrap_or_else(|| loaded.resolve(&loaded.config.io.output).join("thresholds.json"));
            if let Some(dir) = path.parent() {
                util::create_dir(dir)?;
            }
            write_thresholds(&path, &table)?;
            eprintln!("wrote {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Evaluate {
            run,
            protected,
            targets,
            thresholds,
            api,
            allow_partial,
            out,
        } => {
            let loaded = run.load()?;
            let opts = EvaluateOptions {
                protected,
                targets,
                thresholds,
                api,
                allow_partial,
            };
            let outcome = cmd_evaluate(&loaded, &zoo, &opts)?;
            let path = out.unwrap_or_else(|| default_report_path(&loaded));
            write_report(&path, &outcome.report)?;
            if !outcome.report.unpaired.is_empty() {
                eprintln!("unpaired files excluded: {}", outcome.report.unpaired.join(", "));
            }
            eprintln!("wrote {}", path.display());
            Ok(outcome.exit_code)
        }
        Command::MaskPreview { run, image, out } => {
            let loaded = run.load()?;
            let p = cmd_mask_preview(&loaded, &zoo, &image, &out)?;
            eprintln!("wrote {}", p.overlay.display());
            Ok(EXIT_OK)
        }
        Command::Grid { rows, out } => {
            let rows = rows.iter().map(|r| parse_row(r)).collect::<CliResult<Vec<_>>>()?;
            cmd_grid(&rows, &out)?;
            Ok(EXIT_OK)
        }
        Command::Serve { embedder, addr } => {
            dualcloak_service::serve(zoo.embedder(&embedder)?, addr)?;
            Ok(EXIT_OK)
        }
        Command::Synth {
            out,
            pairs,
            impostor_pairs,
            seed,
        } => {
            let opts = FixtureOptions {
                pairs,
                impostor_pairs,
                seed,
                ..FixtureOptions::default()
            };
            let cfg = write_fixture_set(&out, &opts)?;
            eprintln!("wrote fixture set; config at {}", cfg.display());
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (including the program name) and runs; usage errors,
/// including clap's, map to exit status 2.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .try_init();
}
