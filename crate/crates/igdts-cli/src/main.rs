//! Command-line front end: robust regression, template-distance
//! demonstrations, tracking runs, synthetic data generation and re-scoring.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use igdts_core::synth::MotionPreset;
use igdts_core::Error as CoreError;

#[derive(Parser)]
#[command(
    name = "igdts",
    about = "Robust regression and visual tracking via iterative gradient descent with sorted soft-threshold selection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the robust regression on a CSV with header y,x1,...,xp.
    Regress(RegressArgs),
    /// Print the four template distances for candidate images against a template stack.
    DistanceDemo(DistanceDemoArgs),
    /// Track a target through an image sequence and score it against ground truth.
    Track(TrackArgs),
    /// Generate a regression dataset with planted outliers (plus a truth sidecar).
    SynthRegression(SynthRegressionArgs),
    /// Generate a textured image sequence with ground truth.
    SynthSequence(SynthSequenceArgs),
    /// Re-score an existing results CSV against ground truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RegressArgs {
    /// Input CSV (header y,x1,...,xp).
    #[arg(long)]
    input: PathBuf,
    /// Largest outlier weight; the sequence decays linearly to
    /// lambda-min-ratio times this value.
    #[arg(long)]
    lambda_max: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda_min_ratio: f64,
    /// Fixed gradient step size; derived from the design spectrum when omitted.
    #[arg(long)]
    eta: Option<f64>,
    /// Stop when the thresholded MSE changes less than this.
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Output CSV holding beta, gamma and the iteration traces.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistanceDemoArgs {
    /// Directory holding at least two template images.
    #[arg(long)]
    templates: PathBuf,
    /// Candidate images to score.
    #[arg(required = true)]
    candidates: Vec<PathBuf>,
    /// Comma-separated weight levels for the thresholded distances.
    #[arg(long, default_value = "0.01,0.1", value_delimiter = ',')]
    lambda_max: Vec<f64>,
}

#[derive(Args)]
#[command(after_help = config::config_help())]
struct TrackArgs {
    /// Directory of numbered frames (pgm/ppm/png/jpg).
    #[arg(long)]
    seq: PathBuf,
    /// File-name glob selecting the frames.
    #[arg(long, default_value = "*")]
    pattern: String,
    /// Ground-truth boxes, one x,y,w,h line per frame; line 1 seeds the tracker.
    #[arg(long)]
    gt: PathBuf,
    /// Config file (key=value); defaults to $IGDTS_CONFIG when set.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for results.csv, report.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
    /// Also render per-frame overlays (tracked box red, truth green).
    #[arg(long)]
    overlays: bool,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthRegressionArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    /// Fraction of rows carrying an outlier, in [0, 1).
    #[arg(long)]
    outlier_frac: f64,
    /// Dense Gaussian noise scale.
    #[arg(long)]
    sigma_g: f64,
    /// Laplacian outlier scale.
    #[arg(long)]
    sigma_l: f64,
    /// Plant fixed +-magnitude outliers instead of Laplacian draws.
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the planted truth goes to the .truth sidecar next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthSequenceArgs {
    #[arg(long, default_value_t = 120)]
    frames: usize,
    #[arg(long, default_value_t = 96)]
    frame_size: usize,
    #[arg(long, default_value_t = 24)]
    target_size: usize,
    /// Target motion: static or walk.
    #[arg(long, default_value = "walk")]
    motion: String,
    /// Random-walk step standard deviation in pixels.
    #[arg(long, default_value_t = 1.0)]
    walk_std: f64,
    /// First occluded frame (1-based, inclusive); no occlusion when omitted.
    #[arg(long)]
    occlude_from: Option<usize>,
    /// Last occluded frame (1-based, inclusive).
    #[arg(long)]
    occlude_to: Option<usize>,
    /// Fraction of the target height covered by the occluding strip.
    #[arg(long, default_value_t = 0.35)]
    coverage: f64,
    /// Total relative illumination gain reached at the last frame.
    #[arg(long, default_value_t = 0.0)]
    illumination_ramp: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the numbered PGM frames and groundtruth.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// results.csv produced by `track` (frame,x,y,w,h,...).
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Regress(a) => commands::cmd_regress(
            &a.input,
            a.lambda_max,
            a.lambda_min_ratio,
            a.eta,
            a.eps,
            a.max_iter,
            &a.out,
        ),
        Command::DistanceDemo(a) => {
            commands::cmd_distance_demo(&a.templates, &a.candidates, &a.lambda_max)
        }
        Command::Track(a) => {
            let config_path = a.config.or_else(|| std::env::var_os("IGDTS_CONFIG").map(Into::into));
            let mut cfg = match config_path {
                Some(p) => config::parse_config_file(&p)?,
                None => config::RunConfig::default(),
            };
            if let Some(seed) = a.seed {
                cfg.tracker.seed = seed;
            }
            commands::cmd_track(&a.seq, &a.pattern, &a.gt, cfg, &a.out, a.overlays)
        }
        Command::SynthRegression(a) => commands::cmd_synth_regression(
            a.n,
            a.p,
            a.outlier_frac,
            a.sigma_g,
            a.sigma_l,
            a.magnitude,
            a.seed,
            &a.out,
        ),
        Command::SynthSequence(a) => {
            let motion = match a.motion.as_str() {
                "static" => MotionPreset::Static,
                "walk" => MotionPreset::RandomWalk { step_std: a.walk_std },
                other => bail!("unknown motion preset `{other}` (use static or walk)"),
            };
            let occlusion = match (a.occlude_from, a.occlude_to) {
                (Some(from), Some(to)) => Some((from, to)),
                (None, None) => None,
                _ => bail!("--occlude-from and --occlude-to must be given together"),
            };
            commands::cmd_synth_sequence(
                a.frames,
                a.frame_size,
                a.target_size,
                motion,
                occlusion,
                a.coverage,
                a.illumination_ramp,
                a.seed,
                &a.out,
            )
        }
        Command::Eval(a) => commands::cmd_eval(&a.results, &a.gt, &a.out),
    }
}

/// Missing input files exit with 2; any other failure exits with 1.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return 2;
            }
        }
        if let Some(CoreError::Io { source, .. }) = cause.downcast_ref::<CoreError>() {
            if source.kind() == std::io::ErrorKind::NotFound {
                return 2;
            }
        }
        // Core errors arrive stringified through command glue; check the text.
        if cause.to_string().contains("i/o error") && cause.to_string().contains("not found") {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
