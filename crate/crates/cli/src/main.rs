//! `permreg` command line: fit, eval, gen, split, serve.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use permreg::boost::fit_auto;
use permreg::data::{
    generate_planted, load_csv, load_model, save_csv, save_model, split, PlantedSpec, SplitSpec,
};
use permreg::metrics::{evaluate, MetricsReport};
use permreg::{Error, Hyperparams};
use permreg_server::ServerConfig;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "permreg",
    version,
    about = "Sparse regression over item orderings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model automatically and write it as JSON.
    Fit {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        /// Number of constraints to add.
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 1.0)]
        learning_rate: f64,
        /// Longest constraint considered; defaults to the number of items.
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print MAE, MSE and R² of a model on a dataset.
    Eval { model: PathBuf, data: PathBuf },
    /// Generate a dataset from a planted-model spec.
    Gen { spec: PathBuf, out: PathBuf },
    /// Shuffle a dataset into train, validation and test files.
    Split {
        input: PathBuf,
        #[arg(long)]
        train: usize,
        #[arg(long)]
        validation: usize,
        #[arg(long)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Files are written as `<prefix>.train.csv` and so on.
        out_prefix: String,
    },
    /// Run the HTTP session server.
    Serve {
        #[arg(long, env = "PERMREG_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, env = "PERMREG_MAX_SESSIONS", default_value_t = 256)]
        max_sessions: usize,
        #[arg(long, env = "PERMREG_MAX_DATASET_ROWS", default_value_t = 100_000)]
        max_dataset_rows: usize,
    },
}

#[derive(Serialize)]
struct FitReport {
    terms: usize,
    train: MetricsReport,
    validation: MetricsReport,
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn with_path(path: &Path, e: Error) -> Box<dyn std::error::Error> {
    format!("{}: {e}", path.display()).into()
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Fit {
            train,
            val,
            l,
            learning_rate,
            max_len,
            out,
        } => {
            Hyperparams::new(l, learning_rate)?;
            let tr = load_csv(&train).map_err(|e| with_path(&train, e))?;
            let va = load_csv(&val).map_err(|e| with_path(&val, e))?;
            if tr.n_items() != va.n_items() {
                return Err(Error::IncompatibleDatasets.into());
            }
            let model = fit_auto(&tr, l, learning_rate, max_len.unwrap_or(tr.n_items()))?;
            save_model(&model, &out)?;
            print_json(&FitReport {
                terms: model.len(),
                train: evaluate(&model, &tr)?,
                validation: evaluate(&model, &va)?,
            });
        }
        Command::Eval { model, data } => {
            let m = load_model(&model).map_err(|e| with_path(&model, e))?;
            let ds = load_csv(&data).map_err(|e| with_path(&data, e))?;
            print_json(&evaluate(&m, &ds)?);
        }
        Command::Gen { spec, out } => {
            let text = std::fs::read_to_string(&spec)?;
            let spec: PlantedSpec = serde_json::from_str(&text)?;
            save_csv(&generate_planted(&spec)?, &out)?;
        }
        Command::Split {
            input,
            train,
            validation,
            test,
            seed,
            out_prefix,
        } => {
            let ds = load_csv(&input).map_err(|e| with_path(&input, e))?;
            let s = split(
                &ds,
                &SplitSpec {
                    train,
                    validation,
                    test,
                    seed,
                },
            )?;
            for (part, d) in [
                ("train", &s.train),
                ("validation", &s.validation),
                ("test", &s.test),
            ] {
                save_csv(d, format!("{out_prefix}.{part}.csv"))?;
            }
        }
        Command::Serve {
            bind,
            max_sessions,
            max_dataset_rows,
        } => {
            tracing_subscriber::fmt()
                .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
                .with_writer(std::io::stderr)
                .init();
            let config = ServerConfig {
                bind,
                max_sessions,
                max_dataset_rows,
            };
            tokio::runtime::Runtime::new()?.block_on(permreg_server::serve(config))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
