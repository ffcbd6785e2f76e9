//! Deterministic offline backend that answers from the dataset itself.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendError, BackendMetadata, ChatRequest, DEFAULT_TEMPERATURE};
use super::prompts::{ASSISTED_SYSTEM_PROMPT, DIRECT_SYSTEM_PROMPT};
use crate::domains::{build_residual, DomainParams, DomainProblem};
use crate::expr::{BinOp, Expr};

/// Deliberate defects in the formulator reply, for exercising failure paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    None,
    /// First constant other than 0 and ±1 multiplied by 1.5.
    WrongConstant,
    /// Initial guess replaced by [`BAD_X0`].
    BadX0,
    /// Top-level `a - b` becomes `a + b` and vice versa.
    WrongSign,
    /// An equation that does not parse.
    Garbage,
}

pub const BAD_X0: f64 = 1e6;
const WRONG_CONSTANT_FACTOR: f64 = 1.5;

impl Perturbation {
    pub fn as_str(self) -> &'static str {
        match self {
            Perturbation::None => "none",
            Perturbation::WrongConstant => "wrong_constant",
            Perturbation::BadX0 => "bad_x0",
            Perturbation::WrongSign => "wrong_sign",
            Perturbation::Garbage => "garbage",
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Perturbation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Perturbation::None),
            "wrong_constant" => Ok(Perturbation::WrongConstant),
            "bad_x0" => Ok(Perturbation::BadX0),
            "wrong_sign" => Ok(Perturbation::WrongSign),
            "garbage" => Ok(Perturbation::Garbage),
            other => Err(format!("unknown perturbation `{other}`")),
        }
    }
}

/// How the mock answers the direct prompt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectAnswer {
    /// Ground truth times the factor (1.0 echoes it verbatim).
    Scaled(f64),
    /// Prose with no JSON object.
    NonJson,
}

#[derive(Debug, Clone)]
struct Known {
    ground_truth: f64,
    params: Option<DomainParams>,
}

/// Looks problems up by query text, so it only answers for the dataset it
/// was built from. Formulating needs the problem's parameters; records
/// imported without them get a reply with no JSON in it.
#[derive(Debug, Clone)]
pub struct MockBackend {
    known: HashMap<String, Known>,
    perturbation: Perturbation,
    direct: DirectAnswer,
    model: String,
}

impl MockBackend {
    pub fn new(dataset: &[DomainProblem]) -> Self {
        let known = dataset
            .iter()
            .map(|p| (p.query.clone(), Known { ground_truth: p.ground_truth, params: p.params }))
            .collect();
        MockBackend { known, perturbation: Perturbation::None, direct: DirectAnswer::Scaled(1.0), model: "mock".into() }
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = perturbation;
        self
    }

    pub fn with_direct_answer(mut self, direct: DirectAnswer) -> Self {
        self.direct = direct;
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    fn answer(&self, known: &Known) -> String {
        match self.direct {
            DirectAnswer::Scaled(k) => format!("{{\"answer\":\"{}\"}}", known.ground_truth * k),
            DirectAnswer::NonJson => "The answer is somewhere around a few units, I would estimate.".into(),
        }
    }

    fn formulate(&self, known: &Known) -> Result<String, BackendError> {
        let Some(params) = &known.params else {
            return Ok("I cannot tell which equation applies here.".into());
        };
        let residual = build_residual(params).map_err(|e| BackendError::Other(e.to_string()))?;
        let (equation, x0) = match self.perturbation {
            Perturbation::None => (residual.expr.to_string(), residual.x0),
            Perturbation::WrongConstant => (scale_first_constant(&residual.expr, &mut false).to_string(), residual.x0),
            Perturbation::BadX0 => (residual.expr.to_string(), BAD_X0),
            Perturbation::WrongSign => (flip_top_sign(&residual.expr).to_string(), residual.x0),
            Perturbation::Garbage => ("garbage(".to_string(), residual.x0),
        };
        let payload = serde_json::json!({"equation": equation, "x0": x0.to_string()});
        Ok(payload.to_string())
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let known = self
            .known
            .get(request.user_text())
            .ok_or_else(|| BackendError::Other("query is not part of the mock's dataset".into()))?;
        match request.system_text() {
            DIRECT_SYSTEM_PROMPT => Ok(self.answer(known)),
            ASSISTED_SYSTEM_PROMPT => self.formulate(known),
            _ => Err(BackendError::Other("unrecognised system prompt".into())),
        }
    }

    fn metadata(&self) -> BackendMetadata {
        let direct = match self.direct {
            DirectAnswer::Scaled(k) => format!("scaled({k})"),
            DirectAnswer::NonJson => "non_json".into(),
        };
        BackendMetadata {
            kind: "mock".into(),
            model: self.model.clone(),
            temperature: DEFAULT_TEMPERATURE,
            flavor: None,
            endpoint: None,
            auth_env: None,
            auth_token: None,
            timeout_secs: None,
            max_retries: None,
            detail: Some(format!("perturbation={}; direct={direct}", self.perturbation)),
        }
    }
}

fn scale_first_constant(expr: &Expr, done: &mut bool) -> Expr {
    if *done {
        return expr.clone();
    }
    match expr {
        Expr::Const(c) if *c != 0.0 && c.abs() != 1.0 => {
            *done = true;
            Expr::Const(c * WRONG_CONSTANT_FACTOR)
        }
        Expr::Const(_) | Expr::Var => expr.clone(),
        Expr::Neg(a) => Expr::Neg(Box::new(scale_first_constant(a, done))),
        Expr::Call(f, a) => Expr::Call(*f, Box::new(scale_first_constant(a, done))),
        Expr::Binary(op, a, b) => {
            let a = scale_first_constant(a, done);
            let b = scale_first_constant(b, done);
            Expr::Binary(*op, Box::new(a), Box::new(b))
        }
    }
}

fn flip_top_sign(expr: &Expr) -> Expr {
    match expr {
        Expr::Binary(BinOp::Sub, a, b) => Expr::Binary(BinOp::Add, a.clone(), b.clone()),
        Expr::Binary(BinOp::Add, a, b) => Expr::Binary(BinOp::Sub, a.clone(), b.clone()),
        other => Expr::Neg(Box::new(other.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{generate_dataset, DatasetCounts, DomainId};
    use crate::expr::parse;
    use crate::harness::extract::{DirectResponse, FormulatorResponse};

    fn one(domain: DomainId) -> Vec<DomainProblem> {
        let mut counts = DatasetCounts::zeros();
        counts.set(domain, 1);
        generate_dataset(7, &counts).unwrap()
    }

    fn ask(backend: &MockBackend, system: &str, problem: &DomainProblem) -> String {
        backend.complete(&ChatRequest::new("mock", 1.0, system, &problem.query)).unwrap()
    }

    #[test]
    fn unperturbed_reply_matches_residual() {
        for d in DomainId::ALL {
            let ds = one(d);
            let reply = ask(&MockBackend::new(&ds), ASSISTED_SYSTEM_PROMPT, &ds[0]);
            let r = FormulatorResponse::parse(&reply).unwrap();
            let expected = build_residual(ds[0].params.as_ref().unwrap()).unwrap();
            assert_eq!(parse(&r.equation).unwrap(), expected.expr, "{d}");
            assert_eq!(r.x0, expected.x0);
        }
    }

    #[test]
    fn direct_modes() {
        let ds = one(DomainId::HeatTransfer);
        let echo = ask(&MockBackend::new(&ds), DIRECT_SYSTEM_PROMPT, &ds[0]);
        assert_eq!(DirectResponse::parse(&echo).unwrap().answer, ds[0].ground_truth);
        let scaled = MockBackend::new(&ds).with_direct_answer(DirectAnswer::Scaled(1.1));
        let v = DirectResponse::parse(&ask(&scaled, DIRECT_SYSTEM_PROMPT, &ds[0])).unwrap().answer;
        assert!((v / ds[0].ground_truth - 1.1).abs() < 1e-12);
        let prose = MockBackend::new(&ds).with_direct_answer(DirectAnswer::NonJson);
        assert!(DirectResponse::parse(&ask(&prose, DIRECT_SYSTEM_PROMPT, &ds[0])).is_err());
    }

    #[test]
    fn perturbations_change_the_reply() {
        let ds = one(DomainId::Structural);
        let base = ask(&MockBackend::new(&ds), ASSISTED_SYSTEM_PROMPT, &ds[0]);
        for p in [Perturbation::WrongConstant, Perturbation::BadX0, Perturbation::WrongSign, Perturbation::Garbage] {
            let reply = ask(&MockBackend::new(&ds).with_perturbation(p), ASSISTED_SYSTEM_PROMPT, &ds[0]);
            assert_ne!(reply, base, "{p}");
        }
        let reply = ask(&MockBackend::new(&ds).with_perturbation(Perturbation::WrongSign), ASSISTED_SYSTEM_PROMPT, &ds[0]);
        assert!(FormulatorResponse::parse(&reply).unwrap().equation.contains(" + "));
    }

    #[test]
    fn unknown_queries_and_prompts_fail() {
        let ds = one(DomainId::Structural);
        let m = MockBackend::new(&ds);
        assert!(m.complete(&ChatRequest::new("mock", 1.0, DIRECT_SYSTEM_PROMPT, "what?")).is_err());
        assert!(m.complete(&ChatRequest::new("mock", 1.0, "be brief", &ds[0].query)).is_err());
    }

    #[test]
    fn missing_params_give_unusable_reply() {
        let mut ds = one(DomainId::Structural);
        ds[0].params = None;
        let reply = ask(&MockBackend::new(&ds), ASSISTED_SYSTEM_PROMPT, &ds[0]);
        assert!(FormulatorResponse::parse(&reply).is_err());
    }
}
