//! `l2e`: desk-scale monosemanticity reports from activation dumps and toy
//! training runs.
//!
//! Reports are CSV on stdout unless `--out` is given. Failures print one
//! line, `error: kind=<kind> message="<text>"`, on stderr and exit non-zero.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use l2e_core::Error;

#[derive(Parser)]
#[command(name = "l2e", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Streaming per-neuron mean and variance of a dump.
    Stats {
        #[arg(long)]
        dump: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Partition means and single-threshold probe F1 per neuron and feature.
    Probe {
        #[arg(long)]
        dump: PathBuf,
        #[command(flatten)]
        names: Names,
        #[command(flatten)]
        out: Output,
    },
    /// K-S statistic between each neuron's scores on its relatively
    /// monosemantic feature and on all inputs, one dump per scale.
    Ks {
        /// Repeat once per scale, smallest first.
        #[arg(long = "dump", required = true)]
        dumps: Vec<PathBuf>,
        /// Also emit one row per neuron.
        #[arg(long)]
        per_neuron: bool,
        #[command(flatten)]
        out: Output,
    },
    /// False killing rate at each inhibition rate.
    Fkr {
        #[arg(long)]
        dump: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.005,0.01,0.02,0.03,0.05")]
        rates: Vec<f64>,
        #[command(flatten)]
        out: Output,
    },
    /// Time moving-threshold selection against sort and heap top-k.
    BenchSelect {
        #[arg(long, default_value_t = 1 << 20)]
        neurons: usize,
        #[arg(long, default_value_t = 0.02)]
        rate: f64,
        #[arg(long, default_value_t = 100)]
        batches: usize,
        #[arg(long, default_value_t = 20)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Paired baseline / inhibited training run on the synthetic task.
    Train {
        /// JSON run configuration; defaults apply to anything omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configuration seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory; overrides `output.dir` (default `l2e-train`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dump with known monosemantic neurons.
    GenDump {
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth CSV: neuron, bound feature (empty for background).
        #[arg(long)]
        bindings: Option<PathBuf>,
        #[arg(long, default_value_t = 9)]
        features: usize,
        #[arg(long, default_value_t = 10_000)]
        records: usize,
        #[arg(long, default_value_t = 6)]
        mono: usize,
        #[arg(long, default_value_t = 58)]
        background: usize,
        /// Mean shift of monosemantic neurons in noise standard deviations.
        #[arg(long, default_value_t = 5.0)]
        shift: f64,
        #[arg(long, default_value_t = 0.01)]
        spike_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Output {
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Names {
    /// Feature names, one per line, replacing the names stored in the dump.
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn configure_threads() -> l2e_core::Result<()> {
    let Ok(v) = std::env::var("L2E_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("L2E_THREADS={v} is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> l2e_core::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Stats { dump, out } => commands::stats(&dump, out.out.as_deref()),
        Command::Probe { dump, names, out } => commands::probe(&dump, names.labels.as_deref(), out.out.as_deref()),
        Command::Ks { dumps, per_neuron, out } => commands::ks(&dumps, per_neuron, out.out.as_deref()),
        Command::Fkr { dump, rates, out } => commands::fkr(&dump, &rates, out.out.as_deref()),
        Command::BenchSelect {
            neurons,
            rate,
            batches,
            warmup,
            seed,
            out,
        } => commands::bench_select(
            l2e_core::selector::BenchConfig {
                n_neurons: neurons,
                rate,
                batches,
                warmup_batches: warmup,
                seed,
            },
            out.out.as_deref(),
        ),
        Command::Train { config, seed, out } => commands::train(config.as_deref(), seed, out),
        Command::GenDump {
            out,
            bindings,
            features,
            records,
            mono,
            background,
            shift,
            spike_prob,
            seed,
        } => commands::gen_dump(
            l2e_core::gen::GenDumpSpec {
                n_features: features,
                n_records: records,
                mono,
                background,
                shift,
                spike_prob,
                seed,
                ..Default::default()
            },
            &out,
            bindings.as_deref(),
        ),
    }
}

fn broken_pipe(e: &Error) -> bool {
    let io = match e {
        Error::Io(io) => io,
        Error::Csv(c) => match c.kind() {
            csv::ErrorKind::Io(io) => io,
            _ => return false,
        },
        _ => return false,
    };
    io.kind() == std::io::ErrorKind::BrokenPipe
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("error: kind={kind} message={message:?}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            return fail("usage-error", first);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed the pipe, e.g. `| head`
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
