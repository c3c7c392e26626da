//! Command-line front end: training, segmentation, occlusion simulation,
//! open-ended evaluation and category recognition.
//!
//! Exit codes: 0 on success, 2 on I/O or configuration errors, 3 when
//! recognition cannot assign any known category ("unknown object").

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "partseg",
    about = "Open-ended 3D object-part segmentation and category recognition",
    version
)]
struct Cli {
    /// Experiment configuration file (flat `key = value` with sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed; every command is bit-reproducible per
    /// seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Build documents from spin words only (occluded-object mode).
    #[arg(long, global = true)]
    spin_only: bool,

    /// Train the argumentation layer on ground-truth part names.
    #[arg(long, global = true)]
    oracle_labels: bool,

    /// Output file or directory (defaults to stdout or configured paths).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a point cloud with a trained checkpoint.
    Segment {
        /// Input cloud (`.xyz`, `.off`, or labelled text).
        input: PathBuf,
        /// Trained model checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train part models offline from an annotated dataset.
    Train {
        /// Dataset root (category directories of labelled point files).
        dataset: Option<PathBuf>,
    },
    /// Run the simulated-teacher open-ended evaluation.
    Openended,
    /// Rotate a cloud uniformly at random and cut it along the x-axis.
    Occlude {
        input: PathBuf,
        output: PathBuf,
    },
    /// Segment a cloud and recognize its object category with explanations.
    Recognize {
        input: PathBuf,
        /// Trained model checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Argument store (`pre -> post : weight` lines).
        #[arg(long)]
        arguments: Option<PathBuf>,
    },
    /// Generate the synthetic three-category demo dataset.
    GenData {
        out_dir: PathBuf,
        /// Objects per category.
        #[arg(long, default_value_t = 30)]
        objects: usize,
        /// Surface samples per object.
        #[arg(long, default_value_t = 1200)]
        points: usize,
    },
    /// Print the effective configuration in canonical form.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(config) => config,
            Err(err) => {
                eprintln!("error: {err:#}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.spin_only {
        config.descriptor.spin_only = true;
    }
    if cli.oracle_labels {
        config.oracle_labels = true;
    }

    let result = match &cli.command {
        Command::Segment { input, checkpoint } => {
            commands::cmd_segment(&config, input, checkpoint.as_deref(), cli.out.as_deref())
        }
        Command::Train { dataset } => {
            commands::cmd_train(&config, dataset.as_deref(), cli.out.as_deref())
        }
        Command::Openended => commands::cmd_openended(&config, cli.out.as_deref()),
        Command::Occlude { input, output } => commands::cmd_occlude(input, output, config.seed),
        Command::Recognize {
            input,
            checkpoint,
            arguments,
        } => commands::cmd_recognize(
            &config,
            input,
            checkpoint.as_deref(),
            arguments.as_deref(),
            cli.out.as_deref(),
        ),
        Command::GenData {
            out_dir,
            objects,
            points,
        } => commands::cmd_gen_data(out_dir, *objects, *points, config.seed),
        Command::Config => commands::cmd_config(&config, cli.out.as_deref()),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let unknown = err
                .downcast_ref::<partseg_core::Error>()
                .is_some_and(|e| matches!(e, partseg_core::Error::UnknownObject));
            ExitCode::from(if unknown { 3 } else { 2 })
        }
    }
}
