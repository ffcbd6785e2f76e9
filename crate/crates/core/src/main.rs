use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use transolve::autodiff::derivative;
use transolve::domains::{dataset_fingerprint, generate_dataset, read_jsonl, write_jsonl, DatasetCounts};
use transolve::eval::{mean_relative_error, MetricsReport, ReportFormat};
use transolve::expr::parse;
use transolve::harness::{read_records, run_assisted, run_direct, HttpBackend, RunConfig, RunOptions};
use transolve::solver::{newton_raphson, Mode, SolveStatus, SolverConfig};

#[derive(Parser)]
#[command(name = "transolve", version, about = "Transcendental equation toolkit: datasets, solving, runs, reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded problem set as JSON Lines.
    GenDataset {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-domain overrides on top of the default counts, e.g. `fluid=5,orbital=0`.
        #[arg(long)]
        counts: Option<String>,
    },
    /// Solve f(x) = 0 with Newton-Raphson.
    Solve {
        #[arg(long)]
        equation: String,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, value_enum, default_value_t = CliMode::Residual)]
        mode: CliMode,
        /// Ground truth; required in replication mode.
        #[arg(long, allow_hyphen_values = true)]
        gt: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 1000)]
        max_iterations: u32,
        #[arg(long, default_value_t = 3)]
        digits: u32,
        /// Print the outcome as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the symbolic derivative of an expression in x.
    Diff {
        #[arg(long)]
        equation: String,
        /// Also evaluate f and f' here.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<f64>,
    },
    /// Run one paradigm over a dataset and write results.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        paradigm: CliParadigm,
        #[arg(long, value_enum, default_value_t = CliBackend::Mock)]
        backend: CliBackend,
        /// TOML file with optional [backend], [solver] and [mock] tables.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured parallelism.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Label recorded as the model on every prediction.
        #[arg(long)]
        model_label: Option<String>,
    },
    /// Aggregate one or more results files.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = CliFormat::Text)]
        format: CliFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Residual,
    Replication,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliParadigm {
    Direct,
    Assisted,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliBackend {
    Mock,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliFormat {
    Text,
    Json,
    Csv,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenDataset { seed, out, counts } => gen_dataset(seed, &out, counts.as_deref()),
        Command::Solve { equation, x0, mode, gt, tolerance, max_iterations, digits, json } => {
            let mode = match mode {
                CliMode::Residual => Mode::Residual,
                CliMode::Replication => Mode::Replication,
            };
            let config = SolverConfig { mode, tolerance, max_iterations, rounding_digits: digits };
            solve(&equation, x0, &config, gt, json)
        }
        Command::Diff { equation, at } => diff(&equation, at),
        Command::Run { dataset, paradigm, backend, config, out, parallelism, model_label } => {
            run_paradigm(&dataset, paradigm, backend, config.as_deref(), &out, parallelism, model_label)
        }
        Command::Report { runs, format, out } => report(&runs, format, out.as_deref()),
    }
}

fn gen_dataset(seed: u64, out: &Path, counts: Option<&str>) -> Result<ExitCode> {
    let counts = match counts {
        Some(overrides) => DatasetCounts::default().with_overrides(overrides)?,
        None => DatasetCounts::default(),
    };
    let problems = generate_dataset(seed, &counts)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&mut w, &problems)?;
    w.flush()?;
    eprintln!("wrote {} problems to {} (sha256 {})", problems.len(), out.display(), dataset_fingerprint(&problems));
    Ok(ExitCode::SUCCESS)
}

fn solve(equation: &str, x0: f64, config: &SolverConfig, gt: Option<f64>, json: bool) -> Result<ExitCode> {
    let f = parse(equation)?;
    let fprime = derivative(&f);
    if config.mode == Mode::Replication && gt.is_none() {
        bail!("--mode replication needs --gt");
    }
    let outcome = newton_raphson(&f, &fprime, x0, config, gt)?;
    if json {
        println!("{}", serde_json::to_string(&outcome)?);
    } else {
        println!("status: {}", outcome.status.as_str());
        match outcome.root {
            Some(root) => println!("root: {root}"),
            None => println!("root: -"),
        }
        if let Some(x) = outcome.unrounded {
            println!("unrounded: {x}");
        }
        println!("iterations: {}", outcome.iterations);
        println!("final_residual: {}", outcome.final_residual);
        println!("derivative: {fprime}");
    }
    Ok(if outcome.status == SolveStatus::Converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn diff(equation: &str, at: Option<f64>) -> Result<ExitCode> {
    let f = parse(equation)?;
    let fprime = derivative(&f);
    println!("{fprime}");
    if let Some(x) = at {
        println!("f({x}) = {}", f.eval(x));
        println!("f'({x}) = {}", fprime.eval(x));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_paradigm(
    dataset: &Path,
    paradigm: CliParadigm,
    backend: CliBackend,
    config: Option<&Path>,
    out: &Path,
    parallelism: Option<usize>,
    model_label: Option<String>,
) -> Result<ExitCode> {
    let config = match config {
        Some(path) => RunConfig::load(path).map_err(anyhow::Error::msg)?,
        None => RunConfig::default(),
    };
    let file = File::open(dataset).with_context(|| format!("opening {}", dataset.display()))?;
    let problems = read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", dataset.display()))?;

    let mock;
    let http;
    let (backend, default_parallelism): (&dyn transolve::harness::Backend, usize) = match backend {
        CliBackend::Mock => {
            mock = config.mock.build(&problems);
            (&mock, 1)
        }
        CliBackend::Http => {
            http = HttpBackend::new(config.backend.clone())?;
            (&http, config.backend.parallelism)
        }
    };
    let options = RunOptions { parallelism: parallelism.unwrap_or(default_parallelism), model_label };
    let result = match paradigm {
        CliParadigm::Direct => run_direct(&problems, backend, &options)?,
        CliParadigm::Assisted => run_assisted(&problems, backend, &config.solver, &options)?,
    };
    let manifest = result.write(out)?;
    eprintln!(
        "run {} ({}): {} records, {} unscorable, MRE {:.4}; results in {}",
        manifest.run_id,
        manifest.paradigm,
        manifest.problems,
        manifest.unscorable,
        mean_relative_error(&result.records),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn report(runs: &[PathBuf], format: CliFormat, out: Option<&Path>) -> Result<ExitCode> {
    let mut records = Vec::new();
    for path in runs {
        records.extend(read_records(path)?);
    }
    let format = match format {
        CliFormat::Text => ReportFormat::Text,
        CliFormat::Json => ReportFormat::Json,
        CliFormat::Csv => ReportFormat::Csv,
    };
    let text = MetricsReport::from_records(&records).render(format);
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
