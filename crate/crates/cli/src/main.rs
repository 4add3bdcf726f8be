//! `qmit`: calibrate detectors, simulate readout, mitigate shot files and
//! compare mitigation methods.
//!
//! Exit codes: 0 on success, 1 on usage and validation errors, 2 when a
//! resource budget is exceeded.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "qmit", version, about = "Readout-error mitigation for qubit registers")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "QMIT_THREADS")]
    threads: Option<usize>,

    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Build a detector file from calibration records.
    Calibrate(CalibrateArgs),
    /// Sample synthetic shots or calibration records.
    Simulate(SimulateArgs),
    /// Run pairwise Bayesian mitigation on a shot file.
    Mitigate(MitigateArgs),
    /// Tabulate success probabilities of several methods.
    Compare(CompareArgs),
    /// Render a result trace or comparison table.
    Report(ReportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Binary,
    Analog,
}

impl From<ModeArg> for qmit::Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Binary => qmit::Mode::Binary,
            ModeArg::Analog => qmit::Mode::Analog,
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
struct CalibrateArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Histogram bins per qubit (analog mode).
    #[arg(long = "n-bin", default_value_t = 20)]
    n_bin: usize,
    /// Calibration records, one JSON object per line.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
struct SimulateArgs {
    /// Experiment spec: preparation, shot count, seed and mode.
    #[arg(long)]
    spec: PathBuf,
    /// Gaussian detector parameters.
    #[arg(long = "detector-spec")]
    detector_spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
struct MitigateArgs {
    #[arg(long)]
    detector: PathBuf,
    #[arg(long)]
    shots: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Grid points per pair segment.
    #[arg(long = "n-p", default_value_t = 101)]
    n_p: usize,
    /// Stop once a sweep moves less than this total variation.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long = "max-sweeps", default_value_t = 20)]
    max_sweeps: usize,
    #[arg(long, default_value = "argmax")]
    estimator: qmit::Estimator,
    /// Record the TV distance of every pair update.
    #[arg(long = "trace-pairs")]
    trace_pairs: bool,
    /// Largest likelihood cache, in entries, before giving up.
    #[arg(long = "max-cache-entries", default_value_t = qmit::MitigationConfig::default().max_cache_entries)]
    max_cache_entries: usize,
}

impl MitigateArgs {
    fn config(&self) -> qmit::MitigationConfig {
        qmit::MitigationConfig {
            n_p: self.n_p,
            epsilon: self.epsilon,
            max_sweeps: self.max_sweeps,
            estimator: self.estimator,
            trace_pairs: self.trace_pairs,
            max_cache_entries: self.max_cache_entries,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Bayes,
    Ibu,
    Mim,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
struct CompareArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bayes,ibu,mim")]
    methods: Vec<Method>,
    #[arg(long)]
    detector: PathBuf,
    #[arg(long)]
    shots: PathBuf,
    /// Prepared bitstring whose population is reported.
    #[arg(long)]
    target: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "n-p", default_value_t = 101)]
    n_p: usize,
    #[arg(long = "ibu-iterations", default_value_t = 100)]
    ibu_iterations: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
#[group(required = true, multiple = false)]
struct ReportInput {
    /// Result file of `mitigate`; renders its convergence trace.
    #[arg(long)]
    result: Option<PathBuf>,
    /// Table written by `compare`.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
struct ReportArgs {
    #[command(flatten)]
    input: ReportInput,
    #[arg(long)]
    out: PathBuf,
    /// Whitespace-separated columns with a commented header.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write the primary output here instead of the recorded path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failed invocation: message, machine-readable kind and exit code.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: "usage",
            message: message.into(),
            code: 1,
        }
    }

    fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Failure {
            kind: "io",
            message: format!("{}: {err}", path.display()),
            code: 1,
        }
    }
}

impl From<qmit::Error> for Failure {
    fn from(e: qmit::Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
            code: if e.is_resource() { 2 } else { 1 },
        }
    }
}

fn report(f: &Failure, json: bool) {
    if json {
        let doc = serde_json::json!({ "error": { "kind": f.kind, "message": f.message, "exit_code": f.code } });
        eprintln!("{doc}");
    } else {
        eprintln!("error: {}", f.message);
    }
}

fn main() -> ExitCode {
    let json_requested = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if json_requested {
                report(&Failure::usage(e.kind().to_string()), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            report(&Failure::usage("--threads must be at least 1"), cli.json_errors);
            return ExitCode::from(1);
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match commands::run(&cli.command, &std::env::args().collect::<Vec<_>>()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f, cli.json_errors);
            ExitCode::from(f.code)
        }
    }
}
