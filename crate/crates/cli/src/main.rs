//! `tnq`: train and compare tensor-network classifiers and their
//! circuit counterparts on image-like binary classification data.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use tnq_core::train::ModelArch;
use tnq_core::Error;

#[derive(Parser)]
#[command(
    name = "tnq",
    version,
    about = "Tensor-network and quantum-circuit classifiers: synthesis, training, diagnostics"
)]
struct Cli {
    /// TOML run configuration; flags override file values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (generation, splits, initialization, sampling).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for batch evaluation; 1 is bit-reproducible.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (default: config `out`, then $TNQ_OUT, then `.`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled image dataset.
    Synth {
        /// Number of events (labels alternate, so even counts balance).
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 37)]
        height: usize,
        #[arg(long, default_value_t = 37)]
        width: usize,
        /// Output file (default `<out>/synthetic.tnqc`).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Flip, standardize to [0, pi], crop, and average-pool a dataset.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// Output file (default `<out>/preprocessed.tnqc`).
        #[arg(long)]
        file: Option<PathBuf>,
        /// Pixels cropped from every side.
        #[arg(long)]
        crop: Option<usize>,
        /// Pooling window edge length.
        #[arg(long)]
        pool: Option<usize>,
        /// Images used to fit the intensity scaler.
        #[arg(long)]
        n_fit: Option<usize>,
    },
    /// Convert a whitespace text dump (pixels then label per line).
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 37)]
        height: usize,
        #[arg(long, default_value_t = 37)]
        width: usize,
    },
    /// Train the configured model; writes checkpoint, log, summary.
    Train {
        /// Dataset path (overrides `data.dataset` in the config).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Architecture (overrides `model.arch` in the config).
        #[arg(long)]
        arch: Option<ModelArch>,
    },
    /// Evaluate a checkpoint: loss and AUC, optionally shot-sampled.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Measurement shots per event (omit for exact expectations).
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Sample the mean Fisher information matrix and its spectrum.
    Fisher {
        /// Diagnose a trained checkpoint instead of a fresh model.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        arch: Option<ModelArch>,
        /// Qubits (or sites for classical models).
        #[arg(long)]
        qubits: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
    },
    /// Effective-dimension table over sample sizes.
    Effdim {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        arch: Option<ModelArch>,
        /// Qubits (or sites for classical models).
        #[arg(long)]
        qubits: Option<usize>,
        /// Largest sample size in the table (decades from 1e3).
        #[arg(long, default_value_t = 1e6)]
        n: f64,
        /// Parameter draws for the Fisher Monte Carlo.
        #[arg(long, default_value_t = 100)]
        param_draws: usize,
        /// Inputs per parameter draw.
        #[arg(long, default_value_t = 100)]
        input_draws: usize,
    },
    /// ROC curve of a checkpoint; with a baseline, also the
    /// background-rejection ratio across signal efficiencies.
    Roc {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Classical reference checkpoint for the rejection ratio.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Cross-check circuit amplitudes against the tensor-network
    /// contraction of the same circuit.
    Xcheck {
        #[arg(long)]
        arch: ModelArch,
        #[arg(long, default_value_t = 4)]
        qubits: usize,
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
}

/// Exit codes: 0 success, 2 usage (from clap), 3 configuration,
/// 4 file/data, 5 numerical.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Shape(_) | Error::Structure(_) => 3,
        Error::Io(_)
        | Error::Format { .. }
        | Error::UnsupportedVersion { .. }
        | Error::DegenerateData(_) => 4,
        Error::Numerical(_) => 5,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                ))
            })?;
            RunConfig::from_str(&text).map_err(Error::InvalidArgument)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.train.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads.max(1);
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    if config.threads == 0 {
        config.threads = 1;
    }
    Ok(config)
}

fn out_dir(config: &RunConfig) -> PathBuf {
    config
        .out
        .clone()
        .or_else(|| std::env::var_os("TNQ_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = load_config(&cli)?;
    // Flag-level architecture overrides happen before validation so
    // the validated config is the one that runs.
    match &cli.command {
        Command::Train { arch: Some(a), .. }
        | Command::Fisher { arch: Some(a), .. }
        | Command::Effdim { arch: Some(a), .. } => config.model.arch = *a,
        _ => {}
    }
    match &cli.command {
        Command::Fisher {
            qubits: Some(q), ..
        }
        | Command::Effdim {
            qubits: Some(q), ..
        } => config.model.n_sites = *q,
        _ => {}
    }
    match &cli.command {
        Command::Preprocess {
            crop, pool, n_fit, ..
        } => {
            if let Some(c) = crop {
                config.data.crop = *c;
            }
            if let Some(p) = pool {
                config.data.pool = *p;
            }
            if let Some(n) = n_fit {
                config.data.n_fit = *n;
            }
        }
        _ => {}
    }
    config
        .validate()
        .map_err(|problems| Error::InvalidArgument(problems.join("; ")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("threads: {e}")))?;
    let dir = out_dir(&config);
    match cli.command {
        Command::Synth {
            n,
            height,
            width,
            file,
        } => commands::cmd_synth(&config, &dir, n, height, width, file),
        Command::Preprocess { input, file, .. } => {
            commands::cmd_preprocess(&config, &dir, input, file)
        }
        Command::Convert {
            input,
            file,
            height,
            width,
        } => {
            let path = file.unwrap_or_else(|| dir.join("converted.tnqc"));
            let n = tnq_core::data::convert_column_dump(&input, &path, height, width)?;
            println!("convert: {n} events ({height}x{width}) to {}", path.display());
            Ok(())
        }
        Command::Train { data, .. } => commands::cmd_train(&config, &dir, data),
        Command::Eval {
            checkpoint,
            data,
            shots,
        } => commands::cmd_eval(&config, &dir, checkpoint, data, shots),
        Command::Fisher {
            checkpoint, draws, ..
        } => commands::cmd_fisher(&config, &dir, checkpoint, draws),
        Command::Effdim {
            checkpoint,
            n,
            param_draws,
            input_draws,
            ..
        } => commands::cmd_effdim(&config, &dir, checkpoint, n, param_draws, input_draws),
        Command::Roc {
            checkpoint,
            baseline,
            data,
        } => commands::cmd_roc(&config, &dir, checkpoint, baseline, data),
        Command::Xcheck {
            arch,
            qubits,
            trials,
        } => commands::cmd_xcheck(&config, &dir, arch, qubits, trials),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
