//! Relative error, MRE, improvement and convergence buckets.
//!
//! Everything here is pure aggregation over [`PredictionRecord`]s. Records
//! with a NaN prediction, a NaN ground truth or a zero ground truth are
//! dropped before averaging; callers never have to pre-filter.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domains::DomainId;
use crate::solver::SolveStatus;

pub use report::{DomainRow, MetricsReport, ModelRow, RecordCounts, ReportFormat};

/// Iteration ceiling of the fast bucket.
pub const FAST_MAX_ITERATIONS: u32 = 15;
/// Iteration ceiling of the slow bucket.
pub const SLOW_MAX_ITERATIONS: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    Direct,
    Assisted,
}

impl Paradigm {
    pub fn as_str(self) -> &'static str {
        match self {
            Paradigm::Direct => "direct",
            Paradigm::Assisted => "assisted",
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Paradigm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Paradigm::Direct),
            "assisted" | "solver" | "hybrid" => Ok(Paradigm::Assisted),
            other => Err(format!("unknown paradigm `{other}` (expected direct or assisted)")),
        }
    }
}

/// How an assisted record ended. The first four mirror [`SolveStatus`]; the
/// last two cover problems that never reached the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Converged,
    DerivativeVanished,
    MaxIterations,
    EvalError,
    /// The formulator's reply had no usable equation or initial guess.
    FormulationError,
    /// The backend failed after all retries.
    BackendError,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Converged => "converged",
            RecordStatus::DerivativeVanished => "derivative_vanished",
            RecordStatus::MaxIterations => "max_iterations",
            RecordStatus::EvalError => "eval_error",
            RecordStatus::FormulationError => "formulation_error",
            RecordStatus::BackendError => "backend_error",
        }
    }
}

impl From<SolveStatus> for RecordStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Converged => RecordStatus::Converged,
            SolveStatus::DerivativeVanished => RecordStatus::DerivativeVanished,
            SolveStatus::MaxIterations => RecordStatus::MaxIterations,
            SolveStatus::EvalError => RecordStatus::EvalError,
        }
    }
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One model prediction for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: u64,
    pub domain: DomainId,
    pub paradigm: Paradigm,
    /// Model (or mock) that produced the prediction.
    #[serde(default)]
    pub model: String,
    #[serde(with = "crate::nan_as_null")]
    pub predicted: f64,
    #[serde(with = "crate::nan_as_null")]
    pub ground_truth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_status: Option<RecordStatus>,
    /// Free-text annotation: parse errors, transport failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PredictionRecord {
    pub fn direct(id: u64, domain: DomainId, predicted: f64, ground_truth: f64) -> Self {
        PredictionRecord {
            id,
            domain,
            paradigm: Paradigm::Direct,
            model: String::new(),
            predicted,
            ground_truth,
            iterations: None,
            solve_status: None,
            note: None,
        }
    }

    pub fn assisted(
        id: u64,
        domain: DomainId,
        predicted: f64,
        ground_truth: f64,
        iterations: u32,
        status: RecordStatus,
    ) -> Self {
        PredictionRecord {
            paradigm: Paradigm::Assisted,
            iterations: Some(iterations),
            solve_status: Some(status),
            ..PredictionRecord::direct(id, domain, predicted, ground_truth)
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Whether the record survives the NaN / zero-truth filter.
    pub fn is_scorable(&self) -> bool {
        !self.predicted.is_nan() && !self.ground_truth.is_nan() && self.ground_truth != 0.0
    }

    /// Relative error, or `None` when the record is filtered out.
    pub fn relative_error(&self) -> Option<f64> {
        self.is_scorable().then(|| relative_error(self.predicted, self.ground_truth))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("improvement needs a positive direct MRE, got {0}")]
    NonPositiveBaseline(f64),
}

/// `|predicted - ground_truth| / |ground_truth|`.
///
/// Callers filter zero and NaN ground truths; see [`PredictionRecord::is_scorable`].
pub fn relative_error(predicted: f64, ground_truth: f64) -> f64 {
    (predicted - ground_truth).abs() / ground_truth.abs()
}

/// Mean relative error over the scorable records. NaN when none survive.
pub fn mean_relative_error<'a, I>(records: I) -> f64
where
    I: IntoIterator<Item = &'a PredictionRecord>,
{
    let (sum, n) = records
        .into_iter()
        .filter_map(PredictionRecord::relative_error)
        .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Percentage error reduction from `direct_mre` to `assisted_mre`.
pub fn improvement(direct_mre: f64, assisted_mre: f64) -> Result<f64, EvalError> {
    // written so NaN also fails the check
    if !(direct_mre > 0.0) {
        return Err(EvalError::NonPositiveBaseline(direct_mre));
    }
    Ok((direct_mre - assisted_mre) / direct_mre * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Fast,
    Slow,
    VerySlow,
    Failed,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::Fast, Bucket::Slow, Bucket::VerySlow, Bucket::Failed];

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Fast => "fast",
            Bucket::Slow => "slow",
            Bucket::VerySlow => "very_slow",
            Bucket::Failed => "failed",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Bucket::Fast => "Fast (<=15 iter)",
            Bucket::Slow => "Slow (16-100 iter)",
            Bucket::VerySlow => "Very Slow (>100 iter)",
            Bucket::Failed => "Failed",
        }
    }
}

/// Bucket for one assisted record, or `None` for direct records.
///
/// Converged and iteration-capped runs go by iteration count, so a run that
/// hits the cap lands in very_slow. Anything that stopped without an
/// iterate to report (vanished derivative, NaN, bad formulation, transport
/// failure) is failed.
pub fn classify(record: &PredictionRecord) -> Option<Bucket> {
    if record.paradigm != Paradigm::Assisted {
        return None;
    }
    let by_count = |n: u32| {
        if n <= FAST_MAX_ITERATIONS {
            Bucket::Fast
        } else if n <= SLOW_MAX_ITERATIONS {
            Bucket::Slow
        } else {
            Bucket::VerySlow
        }
    };
    Some(match (record.solve_status, record.iterations) {
        (Some(RecordStatus::Converged | RecordStatus::MaxIterations), Some(n)) => by_count(n),
        _ => Bucket::Failed,
    })
}

/// Counts and percentages per bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub total: usize,
    pub fast: usize,
    pub slow: usize,
    pub very_slow: usize,
    pub failed: usize,
    /// Very-slow records that stopped at the iteration cap.
    pub hit_iteration_cap: usize,
    /// Failed records by status (`missing_status` when absent).
    pub failure_reasons: BTreeMap<String, usize>,
}

impl BucketTable {
    pub fn count(&self, bucket: Bucket) -> usize {
        match bucket {
            Bucket::Fast => self.fast,
            Bucket::Slow => self.slow,
            Bucket::VerySlow => self.very_slow,
            Bucket::Failed => self.failed,
        }
    }

    /// Share of assisted records in `bucket`, in percent. Zero for an empty table.
    pub fn percent(&self, bucket: Bucket) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(bucket) as f64 * 100.0 / self.total as f64
        }
    }
}

/// Buckets every assisted record; direct records are ignored.
pub fn convergence_buckets<'a, I>(records: I) -> BucketTable
where
    I: IntoIterator<Item = &'a PredictionRecord>,
{
    let mut t = BucketTable {
        total: 0,
        fast: 0,
        slow: 0,
        very_slow: 0,
        failed: 0,
        hit_iteration_cap: 0,
        failure_reasons: BTreeMap::new(),
    };
    for r in records {
        let Some(bucket) = classify(r) else { continue };
        t.total += 1;
        match bucket {
            Bucket::Fast => t.fast += 1,
            Bucket::Slow => t.slow += 1,
            Bucket::VerySlow => {
                t.very_slow += 1;
                if r.solve_status == Some(RecordStatus::MaxIterations) {
                    t.hit_iteration_cap += 1;
                }
            }
            Bucket::Failed => {
                t.failed += 1;
                let reason = r.solve_status.map_or("missing_status", RecordStatus::as_str);
                *t.failure_reasons.entry(reason.to_string()).or_default() += 1;
            }
        }
    }
    t
}

/// Groups by domain and scores each paradigm with the same filter as
/// [`mean_relative_error`]. Rows follow [`DomainId`] order; domains with no
/// records are omitted.
pub fn per_domain_aggregate<'a, I>(records: I) -> Vec<DomainRow>
where
    I: IntoIterator<Item = &'a PredictionRecord>,
{
    let mut groups: BTreeMap<DomainId, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.domain).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(domain, rs)| {
            let n = rs.iter().map(|r| r.id).collect::<BTreeSet<_>>().len();
            let direct = mean_relative_error(rs.iter().copied().filter(|r| r.paradigm == Paradigm::Direct));
            let assisted =
                mean_relative_error(rs.iter().copied().filter(|r| r.paradigm == Paradigm::Assisted));
            DomainRow {
                domain,
                n,
                direct_mre: direct,
                assisted_mre: assisted,
                improvement_percent: improvement(direct, assisted).ok().filter(|v| v.is_finite()),
            }
        })
        .collect()
}
