//! Direct and solver-assisted runs over a dataset, plus their artifacts.
//!
//! A run sends every problem's query to a [`Backend`] under one of the two
//! fixed system prompts and turns the replies into [`PredictionRecord`]s.
//! Direct runs take the model's number as the prediction. Assisted runs
//! parse the model's equation, differentiate it and hand it to Newton; the
//! model's own numbers never become the prediction.

mod backend;
mod extract;
mod http;
mod mock;
mod prompts;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::derivative;
use crate::domains::{dataset_fingerprint, DomainProblem};
use crate::eval::{Paradigm, PredictionRecord, RecordStatus};
use crate::expr::parse;
use crate::solver::{newton_raphson, Mode, SolveStatus, SolverConfig, SolverError};

pub use backend::{
    ApiFlavor, Backend, BackendConfig, BackendError, BackendMetadata, ChatMessage, ChatRequest, DEFAULT_TEMPERATURE,
    REDACTED,
};
pub use extract::{coerce_number, extract_json_payload, normalize_equation, DirectResponse, ExtractError, FormulatorResponse};
pub use http::{request_body, response_text, HttpBackend};
pub use mock::{DirectAnswer, MockBackend, Perturbation, BAD_X0};
pub use prompts::{ASSISTED_SYSTEM_PROMPT, DIRECT_SYSTEM_PROMPT};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid solver config: {0}")]
    Solver(#[from] SolverError),
    #[error("invalid run options: {0}")]
    Options(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
}

/// Knobs shared by both paradigms.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Concurrent backend calls. At least 1.
    pub parallelism: usize,
    /// Overrides the model label recorded on each prediction.
    pub model_label: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { parallelism: 1, model_label: None }
    }
}

/// One request/response pair, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub id: u64,
    pub paradigm: Paradigm,
    pub system: String,
    pub user: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Milliseconds since the Unix epoch.
    pub started_ms: u64,
    pub finished_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Derived from dataset, paradigm, backend and solver settings, so a
    /// repeated offline run gets the same id.
    pub run_id: String,
    pub paradigm: Paradigm,
    pub dataset_fingerprint: String,
    pub backend: BackendMetadata,
    pub solver: Option<SolverConfig>,
    pub started_ms: u64,
    pub finished_ms: u64,
    pub records: Vec<PredictionRecord>,
    pub exchanges: Vec<Exchange>,
}

/// Everything about a run except its records and exchanges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub paradigm: Paradigm,
    pub dataset_fingerprint: String,
    pub problems: usize,
    pub backend: BackendMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    pub started_ms: u64,
    pub finished_ms: u64,
    /// Records whose prediction is NaN (unparseable reply, failed solve, ...).
    pub unscorable: usize,
    pub records_file: String,
    pub exchanges_file: String,
    pub tool_version: String,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn run_id(fingerprint: &str, paradigm: Paradigm, backend: &BackendMetadata, solver: Option<&SolverConfig>) -> String {
    let mut h = Sha256::new();
    h.update(fingerprint.as_bytes());
    h.update(paradigm.as_str().as_bytes());
    h.update(serde_json::to_vec(backend).expect("metadata serializes"));
    h.update(serde_json::to_vec(&solver).expect("config serializes"));
    hex::encode(&h.finalize()[..8])
}

type Reply = (Result<String, BackendError>, Exchange);

/// Sends every query with `system` and collects `(reply, exchange)` pairs in
/// dataset order.
fn ask_all(
    dataset: &[DomainProblem],
    backend: &dyn Backend,
    paradigm: Paradigm,
    system: &str,
    options: &RunOptions,
) -> Result<Vec<Reply>, HarnessError> {
    if options.parallelism == 0 {
        return Err(HarnessError::Options("parallelism must be at least 1".into()));
    }
    let meta = backend.metadata();
    let ask = |problem: &DomainProblem| {
        let request = ChatRequest::new(&meta.model, meta.temperature, system, &problem.query);
        let started_ms = now_ms();
        let reply = backend.complete(&request);
        let exchange = Exchange {
            id: problem.id,
            paradigm,
            system: system.to_string(),
            user: problem.query.clone(),
            response: reply.as_ref().ok().cloned(),
            error: reply.as_ref().err().map(ToString::to_string),
            started_ms,
            finished_ms: now_ms(),
        };
        (reply, exchange)
    };
    if options.parallelism == 1 {
        return Ok(dataset.iter().map(ask).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism)
        .build()
        .map_err(|e| HarnessError::Options(e.to_string()))?;
    Ok(pool.install(|| dataset.par_iter().map(ask).collect()))
}

fn finish(
    dataset: &[DomainProblem],
    backend: &dyn Backend,
    paradigm: Paradigm,
    solver: Option<SolverConfig>,
    started_ms: u64,
    records: Vec<PredictionRecord>,
    exchanges: Vec<Exchange>,
) -> RunResult {
    let fingerprint = dataset_fingerprint(dataset);
    let meta = backend.metadata();
    RunResult {
        run_id: run_id(&fingerprint, paradigm, &meta, solver.as_ref()),
        paradigm,
        dataset_fingerprint: fingerprint,
        backend: meta,
        solver,
        started_ms,
        finished_ms: now_ms(),
        records,
        exchanges,
    }
}

fn label(backend: &dyn Backend, options: &RunOptions) -> String {
    options.model_label.clone().unwrap_or_else(|| backend.metadata().model)
}

/// Asks for the answer directly. Unusable replies and backend failures
/// become NaN predictions with a note; the run always completes.
pub fn run_direct(
    dataset: &[DomainProblem],
    answerer: &dyn Backend,
    options: &RunOptions,
) -> Result<RunResult, HarnessError> {
    if dataset.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    let started_ms = now_ms();
    let model = label(answerer, options);
    let replies = ask_all(dataset, answerer, Paradigm::Direct, DIRECT_SYSTEM_PROMPT, options)?;
    let mut records = Vec::with_capacity(dataset.len());
    let mut exchanges = Vec::with_capacity(dataset.len());
    for (problem, (reply, exchange)) in dataset.iter().zip(replies) {
        let base = PredictionRecord::direct(problem.id, problem.domain, f64::NAN, problem.ground_truth)
            .with_model(model.clone());
        let record = match reply {
            Err(e) => base.with_note(format!("backend: {e}")),
            Ok(text) => match DirectResponse::parse(&text) {
                Ok(r) => PredictionRecord { predicted: r.answer, ..base },
                Err(e) => base.with_note(format!("extract: {e}")),
            },
        };
        records.push(record);
        exchanges.push(exchange);
    }
    Ok(finish(dataset, answerer, Paradigm::Direct, None, started_ms, records, exchanges))
}

/// Asks for an equation and initial guess, then solves with Newton.
///
/// In [`Mode::Replication`] each problem's ground truth is the convergence
/// target.
pub fn run_assisted(
    dataset: &[DomainProblem],
    formulator: &dyn Backend,
    config: &SolverConfig,
    options: &RunOptions,
) -> Result<RunResult, HarnessError> {
    if dataset.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    config.validate()?;
    let started_ms = now_ms();
    let model = label(formulator, options);
    let replies = ask_all(dataset, formulator, Paradigm::Assisted, ASSISTED_SYSTEM_PROMPT, options)?;
    let mut records = Vec::with_capacity(dataset.len());
    let mut exchanges = Vec::with_capacity(dataset.len());
    for (problem, (reply, exchange)) in dataset.iter().zip(replies) {
        records.push(solve_reply(problem, reply, config).with_model(model.clone()));
        exchanges.push(exchange);
    }
    Ok(finish(dataset, formulator, Paradigm::Assisted, Some(*config), started_ms, records, exchanges))
}

fn solve_reply(problem: &DomainProblem, reply: Result<String, BackendError>, config: &SolverConfig) -> PredictionRecord {
    let failed = |status, note: String| {
        PredictionRecord::assisted(problem.id, problem.domain, f64::NAN, problem.ground_truth, 0, status).with_note(note)
    };
    let text = match reply {
        Ok(t) => t,
        Err(e) => return failed(RecordStatus::BackendError, format!("backend: {e}")),
    };
    let response = match FormulatorResponse::parse(&text) {
        Ok(r) => r,
        Err(e) => return failed(RecordStatus::FormulationError, format!("extract: {e}")),
    };
    let expr = match normalize_equation(&response.equation).map(|eq| parse(&eq)) {
        Ok(Ok(expr)) => expr,
        Ok(Err(e)) => return failed(RecordStatus::FormulationError, format!("parse: {e}")),
        Err(e) => return failed(RecordStatus::FormulationError, format!("extract: {e}")),
    };
    if !response.x0.is_finite() {
        return failed(RecordStatus::FormulationError, format!("x0 is not finite: {}", response.x0));
    }
    let fprime = derivative(&expr);
    let target = (config.mode == Mode::Replication).then_some(problem.ground_truth);
    let outcome = match newton_raphson(&expr, &fprime, response.x0, config, target) {
        Ok(o) => o,
        Err(e) => return failed(RecordStatus::EvalError, format!("solver: {e}")),
    };
    let predicted = match outcome.status {
        SolveStatus::Converged | SolveStatus::MaxIterations => outcome.root.unwrap_or(f64::NAN),
        SolveStatus::DerivativeVanished | SolveStatus::EvalError => f64::NAN,
    };
    PredictionRecord::assisted(
        problem.id,
        problem.domain,
        predicted,
        problem.ground_truth,
        outcome.iterations,
        outcome.status.into(),
    )
}

/// `<out>.manifest.json` and `<out>.exchanges.jsonl` next to the records file.
pub fn sidecar_paths(out: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(suffix);
        out.with_file_name(name)
    };
    (with(".manifest.json"), with(".exchanges.jsonl"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io_err(path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

impl RunResult {
    pub fn manifest(&self, records_file: &Path, exchanges_file: &Path) -> RunManifest {
        RunManifest {
            run_id: self.run_id.clone(),
            paradigm: self.paradigm,
            dataset_fingerprint: self.dataset_fingerprint.clone(),
            problems: self.records.len(),
            backend: self.backend.clone(),
            solver: self.solver,
            started_ms: self.started_ms,
            finished_ms: self.finished_ms,
            unscorable: self.records.iter().filter(|r| r.predicted.is_nan()).count(),
            records_file: records_file.display().to_string(),
            exchanges_file: exchanges_file.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Writes the records to `out` plus the two sidecars. Returns the manifest.
    pub fn write(&self, out: &Path) -> Result<RunManifest, HarnessError> {
        let (manifest_path, exchanges_path) = sidecar_paths(out);
        write_lines(out, &self.records)?;
        write_lines(&exchanges_path, &self.exchanges)?;
        let manifest = self.manifest(out, &exchanges_path);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
        Ok(manifest)
    }
}

/// Reads a results file written by [`RunResult::write`]. Blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<PredictionRecord>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Mock knobs in a run config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    pub perturbation: Perturbation,
    /// Direct answers are ground truth times this.
    pub direct_scale: f64,
    pub non_json: bool,
    pub model: String,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig { perturbation: Perturbation::None, direct_scale: 1.0, non_json: false, model: "mock".into() }
    }
}

impl MockConfig {
    pub fn build(&self, dataset: &[DomainProblem]) -> MockBackend {
        let direct = if self.non_json { DirectAnswer::NonJson } else { DirectAnswer::Scaled(self.direct_scale) };
        MockBackend::new(dataset)
            .with_perturbation(self.perturbation)
            .with_direct_answer(direct)
            .with_model(self.model.clone())
    }
}

/// The `run --config` file: `[backend]`, `[solver]` and `[mock]` tables,
/// all optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub solver: SolverConfig,
    pub mock: MockConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.solver.validate().map_err(|e| e.to_string())?;
        config.backend.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
