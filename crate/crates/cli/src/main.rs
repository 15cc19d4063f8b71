//! `sosnet` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sosnet::ErrorCategory;

#[derive(Parser)]
#[command(name = "sosnet", version, about = "Selective-pair comparison learning for subtle image attributes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sunrise or sunset time (UT) for a location and date.
    Solar(SolarArgs),
    /// Generate a synthetic catalog and its images.
    Synth(SynthArgs),
    /// Split a catalog into train/test id lists.
    Split(SplitArgs),
    /// Enumerate pairs under a pair constraint.
    Pairs(PairsArgs),
    /// Train a sunrise/sunset classifier.
    Train(TrainArgs),
    /// Evaluate a classifier checkpoint (per-class accuracy and mAcc).
    Eval(EvalArgs),
    /// Classify individual images.
    Predict(PredictArgs),
    /// Train the two-stage temperature regressor for one scene.
    TempTrain(TempTrainArgs),
    /// Evaluate a temperature regressor (R^2 and RMSE).
    TempEval(TempEvalArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
pub struct SolarArgs {
    /// Latitude in degrees, north positive.
    #[arg(long, allow_hyphen_values = true)]
    pub lat: f64,
    /// Longitude in degrees, east positive.
    #[arg(long, allow_hyphen_values = true)]
    pub lon: f64,
    /// Date as YYYY-MM-DD.
    #[arg(long)]
    pub date: String,
    /// `rise` or `set`.
    #[arg(long)]
    pub kind: String,
    /// Zenith angle in degrees (90.833 official, 96 civil, 102 nautical, 108 astronomical).
    #[arg(long, default_value_t = sosnet::solar::OFFICIAL_ZENITH_DEG)]
    pub zenith: f64,
}

#[derive(Args)]
pub struct SynthArgs {
    /// key=value config file (task, n_cameras, days_per_camera, height, width,
    /// cue_strength, nuisance_strength, noise_sigma, seed).
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Output directory; receives catalog.csv and images/.
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// Overrides the config file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra key=value overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub catalog: std::path::PathBuf,
    /// easy, hard or chronological.
    #[arg(long)]
    pub mode: String,
    /// Test fraction for easy and chronological splits.
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    /// Comma-separated test camera ids (hard mode).
    #[arg(long, value_delimiter = ',')]
    pub test_cameras: Vec<String>,
    /// Number of randomly chosen test cameras (hard mode).
    #[arg(long)]
    pub n_test_cameras: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for train_ids.txt and test_ids.txt.
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Args)]
pub struct PairsArgs {
    #[arg(long)]
    pub catalog: std::path::PathBuf,
    /// Restrict to the ids listed in this file (one per line).
    #[arg(long)]
    pub ids: Option<std::path::PathBuf>,
    /// Comma-separated flags from {ss, same-camera, same-day}, or `none`.
    #[arg(long, default_value = "ss,same-camera,same-day")]
    pub constraint: String,
    /// Subsample to at most this many pairs.
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print only per-camera counts and the total.
    #[arg(long)]
    pub counts: bool,
}

#[derive(Args)]
pub struct TrainFlags {
    /// key=value config file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// sosnet, sosnet-rand, siamese or single-stream.
    #[arg(long)]
    pub method: Option<String>,
    /// combined, contrast, softmax-contrast, softmax, square or square-ranking.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Comma-separated flags from {ss, same-camera, same-day}, or `none`.
    #[arg(long)]
    pub pair_constraint: Option<String>,
    #[arg(long)]
    pub batch_pairs: Option<usize>,
    /// A number, or `auto` for half the training images.
    #[arg(long)]
    pub pairs_per_epoch: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr_start: Option<f64>,
    #[arg(long)]
    pub lr_end: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub readout_reg: Option<f64>,
    #[arg(long)]
    pub track_accuracy: Option<bool>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub catalog: std::path::PathBuf,
    /// Training ids, one per line (default: every record).
    #[arg(long)]
    pub train_ids: Option<std::path::PathBuf>,
    /// Output directory for model.ckpt, history.txt and summary.json.
    #[arg(long)]
    pub out: std::path::PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub catalog: std::path::PathBuf,
    /// Ids to evaluate, one per line (default: every labelled record).
    #[arg(long)]
    pub ids: Option<std::path::PathBuf>,
    #[arg(long)]
    pub checkpoint: std::path::PathBuf,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    pub report: Option<std::path::PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: std::path::PathBuf,
    /// PPM images to classify.
    #[arg(required = true)]
    pub images: Vec<std::path::PathBuf>,
}

#[derive(Args)]
pub struct TempTrainArgs {
    #[arg(long)]
    pub catalog: std::path::PathBuf,
    /// Output directory for model.ckpt, head.json, history.txt and summary.json.
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// key=value config file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// ridge or eps-insensitive.
    #[arg(long)]
    pub head: Option<String>,
    /// Ridge strength.
    #[arg(long)]
    pub reg: Option<f64>,
    /// Tube half-width of the eps-insensitive head.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Hinge weight of the eps-insensitive head.
    #[arg(long)]
    pub c: Option<f64>,
    /// embedding or blockN (N = 1..4).
    #[arg(long)]
    pub feature_layer: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub batch_pairs: Option<usize>,
    #[arg(long)]
    pub pairs_per_epoch: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr_start: Option<f64>,
    #[arg(long)]
    pub lr_end: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Latest fraction of frames held out for testing.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
}

#[derive(Args)]
pub struct TempEvalArgs {
    #[arg(long)]
    pub catalog: std::path::PathBuf,
    /// Ids to evaluate, one per line (default: every record).
    #[arg(long)]
    pub ids: Option<std::path::PathBuf>,
    #[arg(long)]
    pub checkpoint: std::path::PathBuf,
    /// head.json written by temp-train.
    #[arg(long)]
    pub head: std::path::PathBuf,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// combined, contrast, softmax, square, or all.
    #[arg(long, default_value = "all")]
    pub loss: String,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 240)]
    pub coords: usize,
    /// Input height and width of the network under test.
    #[arg(long, default_value_t = 16)]
    pub size: usize,
    #[arg(long, default_value_t = 4)]
    pub batch_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solar(a) => commands::solar(a),
        Command::Synth(a) => commands::synth(a),
        Command::Split(a) => commands::split(a),
        Command::Pairs(a) => commands::pairs(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::TempTrain(a) => commands::temp_train(a),
        Command::TempEval(a) => commands::temp_eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err.category() {
                ErrorCategory::Usage => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numeric => 3,
            })
        }
    }
}
