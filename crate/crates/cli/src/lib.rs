//! The `dcnn` command line: preprocess, train, eval, predict and inspect.
//!
//! Results go to the output stream. The resolved configuration, progress
//! and one-line errors go to the error stream. Exit codes are 0 on success,
//! 1 on an operational error and 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod commands;
pub mod config;

pub use config::{ConfigFile, ResolvedTrain, DEFAULT_SPLIT};

#[derive(Debug, Parser)]
#[command(
    name = "dcnn",
    version,
    about = "Train and run a small convolutional network on handwritten characters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the reference network on a directory of class folders.
    Train(TrainArgs),
    /// Evaluate a saved model on a directory of class folders.
    Eval(EvalArgs),
    /// Rank the classes for a single image.
    Predict(PredictArgs),
    /// Print the per-layer output shapes and parameter counts.
    Inspect(InspectArgs),
    /// Turn raw 28×28 crops into padded 32×32 images, or check processed ones.
    Preprocess(PreprocessArgs),
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of each class used for training.
    #[arg(long)]
    pub split: Option<f64>,
    /// Images are already 32×32 with zero padding and background.
    #[arg(long)]
    pub already_processed: bool,
    /// Per-epoch CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// JSON file with training and architecture settings; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    Train,
    Test,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub already_processed: bool,
    /// Also print the confusion matrix.
    #[arg(long)]
    pub confusion: bool,
    /// Evaluate one side of the split a training run would make.
    #[arg(long, value_enum, default_value = "all")]
    pub subset: Subset,
    #[arg(long, default_value_t = DEFAULT_SPLIT)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// A 28×28 raw crop or a 32×32 processed image (PGM or PNG).
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub top: u64,
    #[arg(long, default_value_t = dcnn::preprocess::DEFAULT_BACKGROUND_THRESHOLD)]
    pub threshold: u8,
}

#[derive(Clone, Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// The reference network for 36 classes.
    #[arg(long)]
    pub arch_default: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, required_unless_present = "verify")]
    pub out: Option<PathBuf>,
    /// Check an already-processed tree instead of converting.
    #[arg(long)]
    pub verify: bool,
    /// Exit 1 if any file fails or has violations.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = dcnn::preprocess::DEFAULT_BACKGROUND_THRESHOLD)]
    pub threshold: u8,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<dcnn::Error> for CliError {
    fn from(e: dcnn::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("i/o error: {e}"))
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return e.exit_code();
        }
    };
    match execute(&cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Train(a) => commands::train(a, out, err),
        Command::Eval(a) => commands::eval(a, out, err),
        Command::Predict(a) => commands::predict(a, out, err),
        Command::Inspect(a) => commands::inspect(a, out, err),
        Command::Preprocess(a) => commands::preprocess(a, out, err),
    }
}
