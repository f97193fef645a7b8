use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "evnlos", version, about = "Synthetic event-based passive NLOS imaging")]
pub struct Cli {
    /// Seed for every random choice; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pipeline configuration JSON (missing fields take defaults).
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the diffuse transport kernel as a 16-bit PGM.
    Kernel,
    /// Render a wall video for a target moving along a straight line.
    Render(RenderArgs),
    /// Turn a rendered wall video into an NEVT1 event stream.
    Simulate(SimulateArgs),
    /// Voxel-grid time-surfaces (and optionally count maps) of an event file.
    Featurize(FeaturizeArgs),
    /// Dataset operations.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train a linear reconstructor on a dataset's train split.
    Train(TrainArgs),
    /// Reconstruct a target from a feature image or, with --wiener, a wall frame.
    Reconstruct(ReconstructArgs),
    /// Evaluate a model on one split of a dataset.
    Eval(EvalArgs),
    /// Train and evaluate event-feature and frame models side by side.
    CompareEf(CompareArgs),
    /// Render an eval summary or comparison JSON as a markdown table.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
pub enum DatasetCommand {
    /// Generate a dataset and its manifest.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// `builtin:<digit>[:<variant>]` or a 28x28 PGM file.
    #[arg(long, default_value = "builtin:3")]
    pub target: String,
    #[arg(long, default_value_t = -0.01, allow_hyphen_values = true)]
    pub from_x: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub to_x: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub y: f64,
    /// Sweep duration; defaults to the config's motion duration.
    #[arg(long)]
    pub duration_us: Option<u64>,
    /// Frame rate; defaults to the config's (100 Hz).
    #[arg(long)]
    pub fps: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Directory holding `times.json` and the frame PGMs listed by `render`.
    #[arg(long)]
    pub frames: PathBuf,
    /// Also write `events.csv`.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    /// NEVT1 file, or CSV with `--width/--height`.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub tau_us: Option<f64>,
    /// Also write per-bin event count maps.
    #[arg(long)]
    pub count_maps: bool,
    #[arg(long)]
    pub width: Option<u16>,
    #[arg(long)]
    pub height: Option<u16>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// smoke, desk or full.
    #[arg(long, default_value = "desk")]
    pub profile: String,
    /// `builtin`, `idx:<images>,<labels>` or `pgm-dir:<dir>`.
    #[arg(long, default_value = "builtin")]
    pub source: String,
    /// Print split counts without generating files.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Manifest file or its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// e (event features) or f (frames).
    #[arg(long, default_value = "e")]
    pub modality: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Model file stem inside the output directory.
    #[arg(long, default_value = "model")]
    pub name: String,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Model file (learned reconstruction).
    #[arg(long, required_unless_present = "wiener")]
    pub model: Option<PathBuf>,
    /// Input PGM: a feature image, or a wall frame with --wiener.
    #[arg(long)]
    pub input: PathBuf,
    /// Physics inverse by regularized deconvolution.
    #[arg(long)]
    pub wiener: bool,
    /// Regularizer, relative to the peak kernel power.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Defaults to the modality recorded next to the model, else e.
    #[arg(long)]
    pub modality: Option<String>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `compare.json` or an eval `summary.json`.
    #[arg(long)]
    pub input: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            commands::emit_error("Usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli) {
        Ok(summary) => {
            // a closed stdout (e.g. piped into `head`) is not a failure
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&summary).expect("json value")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            commands::emit_error(e.kind(), &e.to_string());
            ExitCode::from(1)
        }
    }
}
