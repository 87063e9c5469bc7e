//! `osodbench` command-line tool.
//!
//! Exit codes: 0 success, 1 input error, 2 metric precondition violated,
//! 3 claimed training scenario violated.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "osodbench", version, about = "Open-set object detection benchmark toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "OSODBENCH_WORKERS")]
    workers: Option<usize>,

    /// Validate inputs without writing any output.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score detections on the ID, all and OOD test splits.
    Evaluate(EvaluateArgs),
    /// Build a benchmark partition and splits from an annotation dump.
    BuildSplits(BuildSplitsArgs),
    /// Generate unknown-object pseudo-labels from exported ViT tensors.
    Pseudolabel(PseudolabelArgs),
    /// Check a training set against a claimed scenario.
    ValidateScenario(ValidateArgs),
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Test annotations (COCO).
    #[arg(long)]
    pub annotations: PathBuf,
    /// Detector results (COCO results list).
    #[arg(long)]
    pub detections: PathBuf,
    /// Partition file, or a splits file produced by `build-splits`.
    #[arg(long)]
    pub partition: PathBuf,
    /// Class hierarchy; required for AP_sc.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Splits to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "id,all,ood")]
    pub split: Vec<String>,
    /// Metrics to compute on every requested split (default: per-split set).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.5)]
    pub iou_thresh: f64,
    /// Require IoU strictly above the threshold.
    #[arg(long)]
    pub strict_iou: bool,
    /// One or more score thresholds for U-Recall, A-OSE and WI.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub score_thresh: Vec<f64>,
    /// Use 11-point instead of all-point interpolation.
    #[arg(long)]
    pub eleven_point: bool,
    /// Also report Wilderness Impact.
    #[arg(long)]
    pub wi: bool,
    /// Write one SVG precision-recall plot per curve.
    #[arg(long)]
    pub plots: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildSplitsArgs {
    /// Full annotation dump (COCO).
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Recipe document; omitted fields take the published defaults.
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PseudolabelArgs {
    /// Training annotations; their boxes filter overlapping pseudo-labels.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Directory of `<image_id>.feat` / `<image_id>.attn` tensor files.
    #[arg(long)]
    pub tensors: PathBuf,
    /// Pipeline parameters; omitted fields take the published defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Partition whose reserved unknown id labels the output.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Claim {
    Unseen,
    Unlabeled,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Training annotations.
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long, value_enum)]
    pub claim: Claim,
    /// Optional directory for the scenario report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("OSODBENCH_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let dry_run = cli.dry_run;
    let result = match cli.command {
        Command::Evaluate(a) => commands::evaluate(&a, dry_run),
        Command::BuildSplits(a) => commands::build_splits(&a, dry_run),
        Command::Pseudolabel(a) => commands::pseudolabel(&a, dry_run),
        Command::ValidateScenario(a) => commands::validate_scenario(&a, dry_run),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
