//! Newton-Raphson iteration and a bisection oracle.
//!
//! [`newton_raphson`] follows the classic loop: evaluate `f` and `f'`, stop
//! if the derivative vanishes, step, test convergence, and give up after
//! `max_iterations`. Two convergence tests are available. [`Mode::Replication`]
//! compares each new iterate against a known answer, which is how benchmark
//! runs were scored; [`Mode::Residual`] checks `|f(x_new)|` and is what you
//! want when the answer is unknown.
//!
//! [`bisection_oracle`] shares no code with the Newton path and is used to
//! produce and verify ground truths.

use serde::{Deserialize, Serialize};

use crate::expr::Expr;

/// Derivatives smaller than this are treated as zero so the Newton step
/// never overflows.
pub const DERIVATIVE_FLOOR: f64 = 1e-300;

pub const DEFAULT_BISECTION_TOLERANCE: f64 = 1e-10;

const MAX_BISECTION_STEPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Converged once `|x_new - ground_truth| < tolerance`.
    Replication,
    /// Converged once `|f(x_new)| < tolerance`.
    Residual,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replication" => Ok(Mode::Replication),
            "residual" => Ok(Mode::Residual),
            other => Err(format!("unknown solver mode `{other}` (expected replication|residual)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: Mode,
    pub tolerance: f64,
    pub max_iterations: u32,
    pub rounding_digits: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::Residual,
            tolerance: 1e-4,
            max_iterations: 1000,
            rounding_digits: 3,
        }
    }
}

impl SolverConfig {
    pub fn replication() -> Self {
        SolverConfig { mode: Mode::Replication, ..Default::default() }
    }

    pub fn residual(tolerance: f64) -> Self {
        SolverConfig { mode: Mode::Residual, tolerance, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if self.rounding_digits > 15 {
            return Err(SolverError::InvalidConfig(format!(
                "rounding_digits must be at most 15, got {}",
                self.rounding_digits
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    DerivativeVanished,
    MaxIterations,
    EvalError,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::DerivativeVanished => "derivative_vanished",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::EvalError => "eval_error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Final iterate rounded to `rounding_digits`. Absent when the derivative
    /// vanished or evaluation failed.
    pub root: Option<f64>,
    /// Final iterate before rounding.
    pub unrounded: Option<f64>,
    pub iterations: u32,
    /// `f` at the final iterate, NaN when unavailable.
    pub final_residual: f64,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("initial guess must be finite, got {0}")]
    NonFiniteGuess(f64),
    #[error("replication mode needs a finite ground truth")]
    MissingGroundTruth,
    #[error("invalid bracket [{lo}, {hi}]: lower end must be below upper end")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("bracket endpoint {x} evaluates to a non-finite value")]
    NonFiniteEndpoint { x: f64 },
    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function is undefined at {x} inside the bracket")]
    UndefinedInBracket { x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Bracket, SolverError> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SolverError::InvalidBracket { lo, hi });
        }
        Ok(Bracket { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Rounds half away from zero to `digits` decimal places.
pub fn round_to(value: f64, digits: u32) -> f64 {
    let scale = 10f64.powi(digits as i32);
    (value * scale).round() / scale
}

/// Runs Newton-Raphson on `f` with analytic derivative `fprime` from `x0`.
///
/// `ground_truth` is required in [`Mode::Replication`] and ignored otherwise.
/// Numerical trouble inside the loop is reported through
/// [`SolveOutcome::status`]; `Err` is reserved for violated preconditions.
pub fn newton_raphson(
    f: &Expr,
    fprime: &Expr,
    x0: f64,
    config: &SolverConfig,
    ground_truth: Option<f64>,
) -> Result<SolveOutcome, SolverError> {
    config.validate()?;
    if !x0.is_finite() {
        return Err(SolverError::NonFiniteGuess(x0));
    }
    let target = match config.mode {
        Mode::Replication => match ground_truth {
            Some(gt) if gt.is_finite() => Some(gt),
            _ => return Err(SolverError::MissingGroundTruth),
        },
        Mode::Residual => None,
    };
    let digits = config.rounding_digits;
    let failed = |status, iterations, residual| SolveOutcome {
        status,
        root: None,
        unrounded: None,
        iterations,
        final_residual: residual,
    };

    let mut x = x0;
    let mut f_x = f.eval(x);
    for iter in 1..=config.max_iterations {
        let d = fprime.eval(x);
        if !f_x.is_finite() || !d.is_finite() {
            return Ok(failed(SolveStatus::EvalError, iter, f_x));
        }
        if d == 0.0 || d.abs() < DERIVATIVE_FLOOR {
            return Ok(failed(SolveStatus::DerivativeVanished, iter, f_x));
        }
        let x_new = x - f_x / d;
        if !x_new.is_finite() {
            return Ok(failed(SolveStatus::EvalError, iter, f_x));
        }
        let f_new = f.eval(x_new);
        let error = match target {
            Some(gt) => (x_new - gt).abs(),
            None => f_new.abs(),
        };
        if error < config.tolerance {
            return Ok(SolveOutcome {
                status: SolveStatus::Converged,
                root: Some(round_to(x_new, digits)),
                unrounded: Some(x_new),
                iterations: iter,
                final_residual: f_new,
            });
        }
        x = x_new;
        f_x = f_new;
    }
    Ok(SolveOutcome {
        status: SolveStatus::MaxIterations,
        root: Some(round_to(x, digits)),
        unrounded: Some(x),
        iterations: config.max_iterations,
        final_residual: f_x,
    })
}

/// Bisection on a sign-changing bracket until its width drops below
/// `tolerance`. Returns the midpoint of the final bracket, or an endpoint or
/// midpoint where `f` is exactly zero.
pub fn bisection_oracle(f: &Expr, bracket: Bracket, tolerance: f64) -> Result<f64, SolverError> {
    let Bracket { mut lo, mut hi } = Bracket::new(bracket.lo, bracket.hi)?;
    if !(tolerance > 0.0) {
        return Err(SolverError::InvalidConfig(format!("bisection tolerance must be positive, got {tolerance}")));
    }
    let mut f_lo = f.eval(lo);
    let f_hi = f.eval(hi);
    if !f_lo.is_finite() {
        return Err(SolverError::NonFiniteEndpoint { x: lo });
    }
    if !f_hi.is_finite() {
        return Err(SolverError::NonFiniteEndpoint { x: hi });
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(SolverError::NoSignChange { lo, hi, f_lo, f_hi });
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = lo + 0.5 * (hi - lo);
        if hi - lo < tolerance || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f.eval(mid);
        if f_mid.is_nan() {
            return Err(SolverError::UndefinedInBracket { x: mid });
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}
