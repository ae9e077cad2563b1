//! File formats and subcommands of the `posebox` tool.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod render;
pub mod scene_file;
pub mod tensor;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

/// Sets the default worker count for commands that process scenes in parallel.
pub const THREADS_ENV: &str = "POSEBOX_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "posebox",
    version,
    about = "Multi-person pose encoding and box-constrained parsing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a scene file into confidence-map and direction-field tensors.
    Encode(EncodeArgs),
    /// Parse poses from a tensor directory and a boxes file.
    Parse(ParseArgs),
    /// Score predictions against ground truth (OKS-based AP).
    Eval(EvalArgs),
    /// Generate a seeded synthetic corpus of scenes and tensors.
    Synth(SynthArgs),
    /// Draw the skeletons and boxes of a scene or pose file as a PNG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub scene_file: PathBuf,
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 7.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 8.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    pub tensor_dir: PathBuf,
    pub boxes_file: PathBuf,
    pub out_file: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub peak_threshold: f64,
    #[arg(long, default_value_t = 0.10)]
    pub box_extension: f64,
    /// Side of the square peak-suppression window in cells (odd).
    #[arg(long, default_value_t = 5)]
    pub nms_window: usize,
    #[arg(long)]
    pub no_nms: bool,
    #[arg(long)]
    pub no_completion: bool,
    /// Scale factors to fuse, taken from the manifest's scale list.
    #[arg(long, value_delimiter = ',')]
    pub scales: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction scene file or directory of them.
    pub pred: PathBuf,
    /// Ground-truth scene file or directory of them.
    pub gt: PathBuf,
    /// JSON file with a 14-entry `per_joint_k` array.
    #[arg(long)]
    pub oks_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub scenes: usize,
    /// Persons per scene: `N` or `MIN-MAX`.
    #[arg(long, default_value = "1-5", value_parser = parse_range)]
    pub persons: (usize, usize),
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Limb whose direction field is zeroed over occluded persons.
    #[arg(long)]
    pub occlude_limb: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub occlude_probability: f64,
    #[arg(long, default_value_t = 120.0)]
    pub min_separation: f64,
    #[arg(long, default_value_t = 848)]
    pub width: usize,
    #[arg(long, default_value_t = 480)]
    pub height: usize,
    #[arg(long, default_value_t = 7.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 8.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub scene_file: PathBuf,
    pub out_image: PathBuf,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let (lo, hi) = match s.split_once('-') {
        Some((a, b)) => (num(a)?, num(b)?),
        None => {
            let n = num(s)?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(format!("empty range {s}"));
    }
    Ok((lo, hi))
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
