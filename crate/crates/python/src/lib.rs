//! Python bindings: expressions, the solver, domain builders and metrics.

use pyo3::exceptions::{PyValueError, PyZeroDivisionError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use ::transolve::autodiff::derivative;
use ::transolve::domains::{self, DatasetCounts, DomainId, DomainParams};
use ::transolve::eval::{self, PredictionRecord, RecordStatus};
use ::transolve::expr::{self, render};
use ::transolve::solver::{self, Bracket, Mode, SolverConfig};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py_json<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn from_py_json(obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

/// A parsed expression in the single variable `x`.
#[pyclass(name = "Expr", module = "transolve", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyExpr(expr::Expr);

#[pymethods]
impl PyExpr {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        expr::parse(source).map(PyExpr).map_err(value_err)
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    fn __call__(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    /// Simplified symbolic derivative.
    fn derivative(&self) -> PyExpr {
        PyExpr(derivative(&self.0))
    }

    /// Fully parenthesised form.
    fn render(&self) -> String {
        render(&self.0)
    }

    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?})", self.0.to_string())
    }

    fn __eq__(&self, other: &PyExpr) -> bool {
        self.0 == other.0
    }
}

fn as_expr(obj: &Bound<'_, PyAny>) -> PyResult<expr::Expr> {
    if let Ok(e) = obj.cast::<PyExpr>() {
        return Ok(e.get().0.clone());
    }
    let source: String = obj.extract()?;
    expr::parse(&source).map_err(value_err)
}

/// Newton-Raphson on `f(x) = 0`. Returns a dict with status, root,
/// unrounded, iterations and final_residual.
#[pyfunction]
#[pyo3(signature = (f, x0, mode="residual", ground_truth=None, tolerance=1e-4, max_iterations=1000, digits=3))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    f: &Bound<'py, PyAny>,
    x0: f64,
    mode: &str,
    ground_truth: Option<f64>,
    tolerance: f64,
    max_iterations: u32,
    digits: u32,
) -> PyResult<Bound<'py, PyAny>> {
    let f = as_expr(f)?;
    let mode = match mode {
        "residual" => Mode::Residual,
        "replication" => Mode::Replication,
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    let config = SolverConfig { mode, tolerance, max_iterations, rounding_digits: digits };
    let outcome = solver::newton_raphson(&f, &derivative(&f), x0, &config, ground_truth).map_err(value_err)?;
    to_py_json(py, &serde_json::to_value(outcome).map_err(value_err)?)
}

/// Bisection on a sign-changing bracket.
#[pyfunction]
#[pyo3(signature = (f, lo, hi, tolerance=1e-10))]
fn bisection(f: &Bound<'_, PyAny>, lo: f64, hi: f64, tolerance: f64) -> PyResult<f64> {
    let f = as_expr(f)?;
    let bracket = Bracket::new(lo, hi).map_err(value_err)?;
    solver::bisection_oracle(&f, bracket, tolerance).map_err(value_err)
}

fn params(domain: &str, values: &Bound<'_, PyAny>) -> PyResult<DomainParams> {
    let id: DomainId = domain.parse().map_err(value_err)?;
    DomainParams::from_json(id, from_py_json(values)?).map_err(value_err)
}

/// Residual expression and initial guess for a domain problem.
#[pyfunction]
fn build_residual(domain: &str, values: &Bound<'_, PyAny>) -> PyResult<(PyExpr, f64)> {
    let r = domains::build_residual(&params(domain, values)?).map_err(value_err)?;
    Ok((PyExpr(r.expr), r.x0))
}

#[pyfunction]
fn ground_truth(domain: &str, values: &Bound<'_, PyAny>) -> PyResult<f64> {
    domains::ground_truth(&params(domain, values)?).map_err(value_err)
}

#[pyfunction]
fn render_query(domain: &str, values: &Bound<'_, PyAny>) -> PyResult<String> {
    Ok(domains::render_query(&params(domain, values)?))
}

/// Seeded dataset as a list of dicts; `counts` overrides per-domain sizes.
#[pyfunction]
#[pyo3(signature = (seed, counts=None))]
fn generate_dataset<'py>(
    py: Python<'py>,
    seed: u64,
    counts: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyList>> {
    let mut c = DatasetCounts::default();
    if let Some(counts) = counts {
        for (k, v) in counts.iter() {
            let id: DomainId = k.extract::<String>()?.parse().map_err(value_err)?;
            c.set(id, v.extract()?);
        }
    }
    let problems = domains::generate_dataset(seed, &c).map_err(value_err)?;
    let mut buf = Vec::new();
    domains::write_jsonl(&mut buf, &problems).map_err(value_err)?;
    let out = PyList::empty(py);
    for line in String::from_utf8_lossy(&buf).lines() {
        out.append(py.import("json")?.call_method1("loads", (line,))?)?;
    }
    Ok(out)
}

#[pyfunction]
fn relative_error(predicted: f64, ground_truth: f64) -> f64 {
    eval::relative_error(predicted, ground_truth)
}

/// Mean relative error over (predicted, ground_truth) pairs, skipping
/// non-finite predictions. NaN when nothing is scorable.
#[pyfunction]
fn mean_relative_error(pairs: Vec<(f64, f64)>) -> f64 {
    let records: Vec<_> = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (p, g))| PredictionRecord::direct(i as u64, DomainId::FluidMechanics, p, g))
        .collect();
    eval::mean_relative_error(&records)
}

#[pyfunction]
fn improvement(direct_mre: f64, assisted_mre: f64) -> PyResult<f64> {
    eval::improvement(direct_mre, assisted_mre).map_err(|e| PyZeroDivisionError::new_err(e.to_string()))
}

/// Bucket counts for (iterations, status) pairs.
#[pyfunction]
fn convergence_buckets<'py>(py: Python<'py>, runs: Vec<(u32, String)>) -> PyResult<Bound<'py, PyDict>> {
    let mut records = Vec::with_capacity(runs.len());
    for (i, (iters, status)) in runs.into_iter().enumerate() {
        let status: RecordStatus = serde_json::from_value(serde_json::Value::String(status)).map_err(value_err)?;
        records.push(PredictionRecord::assisted(i as u64, DomainId::FluidMechanics, 0.0, 1.0, iters, status));
    }
    let table = eval::convergence_buckets(&records);
    let out = PyDict::new(py);
    for b in eval::Bucket::ALL {
        out.set_item(b.as_str(), table.count(b))?;
    }
    Ok(out)
}

#[pymodule]
fn transolve(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(bisection, m)?)?;
    m.add_function(wrap_pyfunction!(build_residual, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth, m)?)?;
    m.add_function(wrap_pyfunction!(render_query, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(mean_relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(improvement, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_buckets, m)?)?;
    Ok(())
}
