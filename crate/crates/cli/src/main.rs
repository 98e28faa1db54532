mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use aflib::experiments::JensenLocation;
use aflib::integrand::RecessionMode;

use commands::{EnvelopeArgs, ExperimentKind};

#[derive(Parser, Debug)]
#[command(
    name = "aflib",
    version,
    about = "Wave cones, A-free projections, quasiconvex envelopes and measure functionals"
)]
struct Cli {
    /// Seed for every randomised step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Constant-rank check of an operator.
    OperatorCheck {
        /// Operator file or `div:d[:m]`, `curl:d[:m]`, `curlcurl:d`.
        #[arg(long)]
        op: String,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Rank scan, wave-cone span and optional membership of `--P`.
    Wavecone {
        #[arg(long)]
        op: String,
        #[arg(long = "P", value_delimiter = ',', allow_hyphen_values = true)]
        p: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
        /// Per-sample rows `xi_0..,rank,residual`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Project a field onto the A-free subspace.
    Project {
        #[arg(long)]
        op: String,
        /// Field file (binary, or `.csv` for d = 2).
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// Negative Sobolev norm of a field, or of `A u` when `--op` is given.
    Norm {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        op: Option<String>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
    },
    /// Numerical A-quasiconvex envelope at one point.
    Envelope {
        #[arg(long)]
        op: String,
        /// Built-in integrand name or an inline JSON object.
        #[arg(long)]
        f: String,
        #[arg(long = "A0", value_delimiter = ',', allow_hyphen_values = true)]
        a0: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dir: Option<Vec<f64>>,
        /// Estimate the recession of the envelope along `--dir`.
        #[arg(long)]
        recession: bool,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        t_grid: Vec<f64>,
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// Evaluate a functional on a measure file.
    MeasureEval {
        #[arg(long)]
        f: String,
        /// JSON sidecar referring to the density file.
        #[arg(long)]
        mu: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Analytic)]
        mode: Mode,
        /// Also check the singular polars against this operator's wave cone.
        #[arg(long)]
        op: Option<String>,
    },
    /// Run an experiment from a JSON config.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
        /// Series rows `j,F_j,residual_j`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Jensen only: restrict to one location.
        #[arg(long, value_enum)]
        location: Option<Location>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Analytic,
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Location {
    Regular,
    Singular,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::OperatorCheck { .. } => "operator-check",
            Command::Wavecone { .. } => "wavecone",
            Command::Project { .. } => "project",
            Command::Norm { .. } => "norm",
            Command::Envelope { .. } => "envelope",
            Command::MeasureEval { .. } => "measure-eval",
            Command::Experiment { .. } => "experiment",
        }
    }
}

fn run(cli: Cli) -> aflib::Result<report::Outcome> {
    match cli.command {
        Command::OperatorCheck { op, tol } => commands::operator_check(&op, tol),
        Command::Wavecone {
            op,
            p,
            samples,
            csv,
        } => commands::wavecone(&op, p, samples, csv.as_deref()),
        Command::Project {
            op,
            field,
            field_out,
        } => commands::project(&op, &field, field_out.as_deref()),
        Command::Norm { field, op, k, q } => commands::norm(&field, op.as_deref(), k, q),
        Command::Envelope {
            op,
            f,
            a0,
            x0,
            grid,
            restarts,
            max_iters,
            dir,
            recession,
            t_grid,
            field_out,
        } => commands::envelope(EnvelopeArgs {
            op: &op,
            f: &f,
            a0,
            x0,
            grid,
            restarts,
            max_iters,
            dir,
            recession,
            t_grid,
            field_out,
            seed: cli.seed.unwrap_or(0),
        }),
        Command::MeasureEval { f, mu, mode, op } => {
            let mode = match mode {
                Mode::Analytic => RecessionMode::Analytic,
                Mode::Upper => RecessionMode::Upper,
                Mode::Lower => RecessionMode::Lower,
            };
            commands::measure_eval(&f, &mu, mode, op.as_deref())
        }
        Command::Experiment {
            kind,
            config,
            csv,
            location,
        } => {
            let location = location.map(|l| match l {
                Location::Regular => JensenLocation::Regular,
                Location::Singular => JensenLocation::Singular,
            });
            commands::experiment(kind, &config, csv.as_deref(), location, cli.seed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = std::env::var("AFLIB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let name = cli.command.name();
    let out = cli.out.clone();
    let (report, code) = match run(cli) {
        Ok(o) => (report::success(name, &o), if o.pass { 0 } else { 1 }),
        Err(e) => (report::failure(name, &e), 1),
    };
    if let Err(e) = report::emit(&report, out.as_deref()) {
        eprintln!("aflib: cannot write report: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
