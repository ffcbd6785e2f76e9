//! Seeded dataset generation and JSON Lines persistence.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ground_truth, render_query, DomainError, DomainId, DomainParams, Gas};

/// One benchmark problem.
///
/// `params` is absent for records imported from files that carry only the
/// query and the answer.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainProblem {
    pub id: u64,
    pub domain: DomainId,
    pub params: Option<DomainParams>,
    pub query: String,
    pub ground_truth: f64,
}

#[derive(Serialize, Deserialize)]
struct ProblemRecord {
    id: u64,
    domain: DomainId,
    query: String,
    #[serde(with = "crate::nan_as_null")]
    ground_truth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<serde_json::Value>,
}

impl Serialize for DomainProblem {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ProblemRecord {
            id: self.id,
            domain: self.domain,
            query: self.query.clone(),
            ground_truth: self.ground_truth,
            params: self.params.map(|p| p.to_json()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DomainProblem {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rec = ProblemRecord::deserialize(deserializer)?;
        let params = match rec.params {
            Some(serde_json::Value::Null) | None => None,
            Some(v) => Some(DomainParams::from_json(rec.domain, v).map_err(serde::de::Error::custom)?),
        };
        Ok(DomainProblem {
            id: rec.id,
            domain: rec.domain,
            params,
            query: rec.query,
            ground_truth: rec.ground_truth,
        })
    }
}

/// Number of problems to draw per domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetCounts(pub BTreeMap<DomainId, usize>);

impl Default for DatasetCounts {
    /// 16/16/16/16/11/13/12, summing to 100.
    fn default() -> Self {
        DatasetCounts(DomainId::ALL.iter().map(|d| (*d, d.default_count())).collect())
    }
}

impl DatasetCounts {
    pub fn zeros() -> Self {
        DatasetCounts(DomainId::ALL.iter().map(|d| (*d, 0)).collect())
    }

    pub fn uniform(n: usize) -> Self {
        DatasetCounts(DomainId::ALL.iter().map(|d| (*d, n)).collect())
    }

    pub fn get(&self, domain: DomainId) -> usize {
        self.0.get(&domain).copied().unwrap_or(0)
    }

    pub fn set(&mut self, domain: DomainId, n: usize) {
        self.0.insert(domain, n);
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }

    /// Applies `domain=n,domain=n` overrides on top of `self`.
    pub fn with_overrides(mut self, overrides: &str) -> Result<Self, DomainError> {
        for item in overrides.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, n) = item.split_once('=').ok_or_else(|| DomainError::InvalidParams {
                domain: DomainId::FluidMechanics,
                message: format!("count override `{item}` is not of the form domain=n"),
            })?;
            let domain: DomainId = name.parse()?;
            let n: usize = n.trim().parse().map_err(|_| DomainError::InvalidParams {
                domain,
                message: format!("count `{n}` is not a non-negative integer"),
            })?;
            self.set(domain, n);
        }
        Ok(self)
    }
}

fn round_sig(v: f64, sig: usize) -> f64 {
    format!("{:.*e}", sig - 1, v).parse().expect("formatted float parses")
}

fn round_dec(v: f64, digits: usize) -> f64 {
    format!("{v:.digits$}").parse().expect("formatted float parses")
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..=hi.ln()).exp()
}

/// Draws one parameter set. Values are rounded to the precision the query
/// prints them with, so the text and the ground truth agree.
fn draw(domain: DomainId, rng: &mut ChaCha8Rng) -> DomainParams {
    match domain {
        DomainId::FluidMechanics => {
            let reynolds = round_sig(log_uniform(rng, 1e4, 1e7), 3);
            let diameter = round_dec(rng.gen_range(0.025..=1.0), 3);
            let relative = log_uniform(rng, 1e-6, 1e-2);
            DomainParams::fluid(reynolds, round_sig(relative * diameter, 2), diameter)
        }
        DomainId::OrbitalMechanics => DomainParams::orbital(
            round_dec(rng.gen_range(0.1..=0.9), 2),
            round_dec(rng.gen_range(0.0..=std::f64::consts::PI), 3),
        ),
        DomainId::Electronics => DomainParams::electronics(
            round_dec(rng.gen_range(1.0..=10.0), 1),
            round_sig(rng.gen_range(100.0..=10_000.0), 3),
            round_sig(log_uniform(rng, 1e-15, 1e-12), 2),
        ),
        DomainId::Thermodynamics => {
            let gas = Gas::ALL[rng.gen_range(0..Gas::ALL.len())];
            DomainParams::thermo(
                gas,
                round_dec(rng.gen_range(10.0..=100.0), 1),
                round_dec(rng.gen_range(200.0..=500.0), 1),
            )
        }
        DomainId::HeatTransfer => DomainParams::heat(round_dec(rng.gen_range(0.5..=10.0), 2)),
        DomainId::Structural => DomainParams::structural(round_sig(rng.gen_range(0.1..=100.0), 3)),
        DomainId::Chemical => DomainParams::chemical(
            round_sig(rng.gen_range(10.0..=1000.0), 3),
            round_dec(rng.gen_range(0.05..=0.35), 3),
            round_dec(rng.gen_range(5.0..=500.0), 1),
        ),
    }
}

/// Thermodynamics draws are limited to gas-phase states: supercritical, or
/// subcritical with the selected root above the critical volume. Other
/// domains always pass.
fn is_gas_phase(params: &DomainParams) -> bool {
    match params {
        DomainParams::Thermo(t) if t.temperature_k < t.critical_temperature() => {
            super::oracle_root(params).is_ok_and(|v| v > t.critical_volume())
        }
        _ => true,
    }
}

/// Generates `counts` problems per domain from `seed`.
///
/// Each domain draws from its own ChaCha8 stream, so changing one domain's
/// count leaves the other domains' problems untouched. Ids run from 1 in
/// domain order.
pub fn generate_dataset(seed: u64, counts: &DatasetCounts) -> Result<Vec<DomainProblem>, DomainError> {
    let mut problems = Vec::with_capacity(counts.total());
    let mut next_id = 1;
    for domain in DomainId::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(domain.index());
        for _ in 0..counts.get(domain) {
            let params = loop {
                let p = draw(domain, &mut rng);
                // Rounding can nudge a value past a range bound; redraw.
                if p.validate().is_ok() && is_gas_phase(&p) {
                    break p;
                }
            };
            problems.push(DomainProblem {
                id: next_id,
                domain,
                params: Some(params),
                query: render_query(&params),
                ground_truth: ground_truth(&params)?,
            });
            next_id += 1;
        }
    }
    Ok(problems)
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub fn write_jsonl<W: Write>(mut out: W, problems: &[DomainProblem]) -> std::io::Result<()> {
    for p in problems {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<DomainProblem>, DatasetError> {
    let mut problems = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p = serde_json::from_str(&line).map_err(|source| DatasetError::Json { line: i + 1, source })?;
        problems.push(p);
    }
    Ok(problems)
}

/// SHA-256 over the canonical JSON Lines encoding, hex encoded.
pub fn dataset_fingerprint(problems: &[DomainProblem]) -> String {
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, problems).expect("writing to a Vec cannot fail");
    hex::encode(Sha256::digest(&bytes))
}
