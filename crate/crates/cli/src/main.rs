//! `dermalens` command-line front end.
//!
//! Exit codes: 0 success, 1 pipeline error, 2 usage error (bad flags, missing
//! inputs, empty directories). Errors are also written to stderr as JSON.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dermalens", version, about = "Dermoscopy lesion analysis")]
pub struct Cli {
    /// Service configuration file (JSON); defaults apply when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for batch work (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment, measure and classify one image.
    Analyze(AnalyzeArgs),
    /// Train a linear classifier from a labelled manifest.
    Train(TrainArgs),
    /// Score benign and malignant image folders and report metrics.
    Evaluate(EvaluateArgs),
    /// Render a RISE saliency map for one image.
    Explain(ExplainArgs),
    /// Run the REST service.
    Serve(ServeArgs),
    /// Write a synthetic labelled dataset with a manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Taxonomy {
    Binary,
    Multi8,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Binary model file, overriding the configuration.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RiseArgs {
    /// Number of random masks (configuration default when absent).
    #[arg(long)]
    pub n_masks: Option<usize>,
    #[arg(long)]
    pub grid_cells: Option<usize>,
    #[arg(long)]
    pub p_on: Option<f64>,
    /// Class index to explain.
    #[arg(long)]
    pub target_class: Option<usize>,
    /// Heatmap opacity in [0, 1].
    #[arg(long)]
    pub opacity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub image: PathBuf,
    /// Directory for the report and overlays; the report goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mm_per_pixel: Option<f64>,
    #[arg(long, value_enum, default_value_t = Taxonomy::Binary)]
    pub taxonomy: Taxonomy,
    /// Also render a RISE heatmap.
    #[arg(long)]
    pub explain: bool,
    #[command(flatten)]
    pub rise: RiseArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// CSV (path,label) or JSONL manifest.
    pub manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Taxonomy::Binary)]
    pub taxonomy: Taxonomy,
    #[arg(long)]
    pub model_id: Option<String>,
    #[arg(long, value_enum, default_value_t = Loss::Logistic)]
    pub loss: Loss,
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    #[arg(long, default_value_t = 500)]
    pub max_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Loss {
    Logistic,
    Hinge,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub benign_dir: PathBuf,
    pub malignant_dir: PathBuf,
    /// Directory for the report and CSV tables; the report goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    pub image: PathBuf,
    /// Directory for the saliency map, heatmap and parameter sidecar.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Taxonomy::Binary)]
    pub taxonomy: Taxonomy,
    #[command(flatten)]
    pub rise: RiseArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Images per class.
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
    /// Seed of the first image; each image uses the next seed.
    #[arg(long)]
    pub first_seed: Option<u64>,
    #[arg(long, default_value_t = 300)]
    pub width: usize,
    #[arg(long, default_value_t = 225)]
    pub height: usize,
    #[arg(long, default_value_t = 5.0)]
    pub noise: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.message() }));
            ExitCode::from(e.code())
        }
    }
}
