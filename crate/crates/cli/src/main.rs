//! `sigsal`: file-based front end for the saliency engine.
//!
//! Exit status is 0 on success, 1 when a computation or file operation fails
//! and 2 for malformed command lines or an invalid `SIGSAL_THREADS`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sigsal", version, about = "Signature Activation saliency maps and evaluation harnesses")]
pub struct Cli {
    /// Print a JSON summary on stdout instead of plain text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Orthonormal DCT (or inverse) of a rank-1 or rank-2 tensor.
    Dct(DctArgs),
    /// Background suppression of a grayscale image via its signature.
    Suppress(SuppressArgs),
    /// Saliency map from an activation stack or a model layer.
    Map(MapArgs),
    /// Threshold sweep on a saliency map, reporting bounding boxes.
    Boxes(BoxesArgs),
    /// Localization error rate over a manifest of maps and boxes.
    Wsol(WsolArgs),
    /// Cascading or independent weight randomization of a model.
    Sanity(SanityArgs),
    /// Monte-Carlo estimate of signature foreground recovery.
    Theorem(TheoremArgs),
    /// Forward pass of a model on one image.
    Infer(InferArgs),
    /// Write the seeded reference model to a directory.
    MicronetInit(MicronetInitArgs),
}

#[derive(Args, Debug)]
pub struct DctArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Apply the inverse transform instead.
    #[arg(long)]
    pub inverse: bool,
}

#[derive(Args, Debug)]
pub struct SuppressArgs {
    /// Grayscale `.pgm` or rank-2 `.npy`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `.npy` or `.pgm`, chosen by extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct FilterArgs {
    #[arg(long, default_value_t = 3.0)]
    pub sigma_spatial: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_range: f64,
    #[arg(long, default_value_t = 6)]
    pub radius: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Signature,
    Eigen,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    /// Activation stack `[channels, h, w]` as `.npy`.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub activations: Option<PathBuf>,
    /// Model directory; the map is taken at `--layer` for `--image`.
    #[arg(long, requires_all = ["image", "layer"])]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub layer: Option<String>,
    /// Input image; also sets the default output size and the overlay base.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Signature)]
    pub method: MethodArg,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Also write a `.ppm` heatmap overlay on `--image`.
    #[arg(long, requires = "image")]
    pub overlay: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnectivityArg {
    Four,
    Eight,
}

#[derive(Args, Debug)]
pub struct BoxesArgs {
    /// Saliency map `.npy` with values in `[0, 1]`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub target: usize,
    #[arg(long, value_enum, default_value_t = ConnectivityArg::Eight)]
    pub connectivity: ConnectivityArg,
    /// Optional JSON file for the selection.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WsolArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Optional JSON file for the full report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ConnectivityArg::Eight)]
    pub connectivity: ConnectivityArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Cascading,
    Independent,
}

#[derive(Args, Debug)]
pub struct SanityArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub layer: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Cascading)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Output directory for stage maps, metrics.csv and run.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TheoremArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub fg: usize,
    #[arg(long)]
    pub bg: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for trials.csv and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Optional directory receiving `<layer>.npy` for every layer output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MicronetInitArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("SIGSAL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("SIGSAL_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        anyhow::bail!("SIGSAL_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
