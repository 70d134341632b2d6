//! `vessel-surrogate`: train and run a learned replacement for the
//! maximum-stress analysis of sub-sea pressure vessels.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vessel_surrogate::cli;
use vessel_surrogate::config::RunConfig;
use vessel_surrogate::physics::DesignPoint;
use vessel_surrogate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vessel-surrogate",
    version,
    about = "Deep-ensemble stress surrogate for sub-sea pressure vessels",
    long_about = "Generates analytically labeled stress data for cylindrical pressure \
                  hulls, trains a cross-validated deep ensemble plus tree baselines, \
                  and serves fast stress predictions with feasibility checks."
)]
struct CliArgs {
    /// TOML run configuration; omitted sections use built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker pool size (0 = all cores); overrides the config file.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the design space, label it with the stress oracle, write CSV.
    GenData {
        /// Output CSV path.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Sample count; overrides the config file.
        #[arg(long, value_name = "N")]
        n: Option<usize>,
        /// Sampling method: uniform | latin_hypercube.
        #[arg(long, value_name = "METHOD")]
        method: Option<String>,
    },
    /// Split a dataset and train the deep ensemble on the training part.
    Train {
        /// Input CSV (from gen-data or imported).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Output model file (JSON). A `<out>.split.json` sidecar records
        /// the held-out rows.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Training rows; overrides the config file.
        #[arg(long, value_name = "N")]
        n_train: Option<usize>,
    },
    /// Train ensemble + tuned tree baselines on one split and compare all
    /// three on the held-out rows.
    Benchmark {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Optional CSV output for the comparison table.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Predict the maximum von Mises stress of designs with a saved model.
    Predict {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Sea depth in meters (single-design mode).
        #[arg(long, value_name = "M")]
        depth: Option<f64>,
        /// Cylinder length in meters.
        #[arg(long, value_name = "M")]
        length: Option<f64>,
        /// Wall thickness in meters.
        #[arg(long, value_name = "M")]
        thickness: Option<f64>,
        /// Outer radius in meters.
        #[arg(long, value_name = "M")]
        radius: Option<f64>,
        /// CSV of designs for batch mode (columns depth_m, length_m,
        /// thickness_m, radius_m).
        #[arg(long, value_name = "PATH", conflicts_with_all = ["depth", "length", "thickness", "radius"])]
        batch: Option<PathBuf>,
        /// Also evaluate the analytical oracle for comparison.
        #[arg(long)]
        oracle: bool,
        /// Batch-mode output CSV (stdout when omitted).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved model on a dataset (optionally on a recorded split).
    Eval {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Split sidecar from `train`; evaluates only its held-out rows.
        #[arg(long, value_name = "PATH")]
        split: Option<PathBuf>,
        /// Optional CSV output for the metrics row.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn load_config(args: &CliArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    Ok(config)
}

fn run(args: CliArgs) -> Result<()> {
    let mut config = load_config(&args)?;
    match args.command {
        Command::GenData { out, n, method } => {
            if let Some(n) = n {
                config.sampling.n = n;
                if config.split.n_train >= n {
                    // keep the config self-consistent when only --n is given
                    config.split.n_train = (n * 7 / 10).max(1);
                }
            }
            if let Some(method) = method {
                config.sampling.method = method.parse()?;
            }
            let jobs = config.jobs;
            cli::with_jobs(jobs, move || cli::run_gen_data(&config, &out))
        }
        Command::Train { data, out, n_train } => {
            if let Some(n_train) = n_train {
                config.split.n_train = n_train;
            }
            let jobs = config.jobs;
            cli::with_jobs(jobs, move || cli::run_train(&config, &data, &out))
        }
        Command::Benchmark { data, out } => {
            let jobs = config.jobs;
            cli::with_jobs(jobs, move || {
                cli::run_benchmark(&config, &data, out.as_deref())
            })
        }
        Command::Predict {
            model,
            depth,
            length,
            thickness,
            radius,
            batch,
            oracle,
            out,
        } => match (batch, depth, length, thickness, radius) {
            (Some(batch), None, None, None, None) => {
                cli::run_predict_batch(&config, &model, &batch, oracle, out.as_deref())
            }
            (None, Some(depth), Some(length), Some(thickness), Some(radius)) => {
                let design = DesignPoint::new(depth, length, thickness, radius)?;
                cli::run_predict_single(&config, &model, design, oracle)
            }
            _ => Err(Error::config(
                "predict needs either --batch PATH or all of --depth --length --thickness --radius"
                    .to_string(),
            )),
        },
        Command::Eval {
            model,
            data,
            split,
            out,
        } => cli::run_eval(&model, &data, split.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
