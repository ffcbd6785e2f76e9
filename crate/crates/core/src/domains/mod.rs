//! The seven engineering equation families.
//!
//! Each domain turns its physical parameters into a residual [`Expr`] whose
//! root is the quantity the natural-language query asks for, together with a
//! default initial guess and a bracket with a verified sign change.
//!
//! | domain | unknown | residual |
//! |---|---|---|
//! | fluid mechanics | Darcy friction factor | `1/sqrt(x) + 2*log10((eps/D)/3.7 + 2.51/(Re*sqrt(x)))` |
//! | orbital mechanics | eccentric anomaly (rad) | `x - e*sin(x) - M` |
//! | electronics | diode voltage (V) | `x + R*Is*(exp(x/V_T) - 1) - Vs` |
//! | thermodynamics | molar volume (L/mol) | `(P + a/x**2)*(x - b) - R*T` |
//! | heat transfer | temperature (K) | `(w - 5)*exp(w) + 5` with `w = hc/(lambda k_B x)` |
//! | structural | `x` with `x e^x = k` | `x*exp(x) - k` |
//! | chemical | BET monolayer capacity | `(1/(x*C) + (C-1)/(x*C)*r)/(r/(V*(1-r))) - 1` |

mod dataset;
mod query;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::solver::{bisection_oracle, round_to, Bracket, SolverError, DEFAULT_BISECTION_TOLERANCE};

pub use dataset::{
    dataset_fingerprint, generate_dataset, read_jsonl, write_jsonl, DatasetCounts, DomainProblem,
};
pub use query::{query_fragments, render_query};

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Gas constant in L·atm/(mol·K).
pub const GAS_CONSTANT_L_ATM: f64 = 0.08206;
/// Thermal voltage at room temperature, V.
pub const ROOM_THERMAL_VOLTAGE: f64 = 0.026;

/// Digits kept in ground truths and solver roots.
pub const GROUND_TRUTH_DIGITS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DomainId {
    FluidMechanics,
    OrbitalMechanics,
    Electronics,
    Thermodynamics,
    HeatTransfer,
    Structural,
    Chemical,
}

impl DomainId {
    pub const ALL: [DomainId; 7] = [
        DomainId::FluidMechanics,
        DomainId::OrbitalMechanics,
        DomainId::Electronics,
        DomainId::Thermodynamics,
        DomainId::HeatTransfer,
        DomainId::Structural,
        DomainId::Chemical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainId::FluidMechanics => "fluid_mechanics",
            DomainId::OrbitalMechanics => "orbital_mechanics",
            DomainId::Electronics => "electronics",
            DomainId::Thermodynamics => "thermodynamics",
            DomainId::HeatTransfer => "heat_transfer",
            DomainId::Structural => "structural",
            DomainId::Chemical => "chemical",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            DomainId::FluidMechanics => "Fluid Mechanics",
            DomainId::OrbitalMechanics => "Orbital Mechanics",
            DomainId::Electronics => "Electronics",
            DomainId::Thermodynamics => "Thermodynamics",
            DomainId::HeatTransfer => "Heat Transfer",
            DomainId::Structural => "Structural",
            DomainId::Chemical => "Chemical Engineering",
        }
    }

    /// Problems per domain in the default 100-problem dataset.
    pub fn default_count(self) -> usize {
        match self {
            DomainId::FluidMechanics => 16,
            DomainId::OrbitalMechanics => 16,
            DomainId::Electronics => 16,
            DomainId::Thermodynamics => 16,
            DomainId::HeatTransfer => 11,
            DomainId::Structural => 13,
            DomainId::Chemical => 12,
        }
    }

    fn index(self) -> u64 {
        DomainId::ALL.iter().position(|d| *d == self).unwrap_or(0) as u64
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainId {
    type Err = DomainError;

    /// Accepts the snake-case ids as well as display titles such as
    /// `"Fluid Mechanics"` or `"Structural Engineering"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        let norm = norm.strip_suffix("_engineering").unwrap_or(&norm);
        let id = match norm {
            "fluid_mechanics" | "fluid" => DomainId::FluidMechanics,
            "orbital_mechanics" | "orbital" => DomainId::OrbitalMechanics,
            "electronics" | "electrical" => DomainId::Electronics,
            "thermodynamics" | "thermo" => DomainId::Thermodynamics,
            "heat_transfer" | "heat" => DomainId::HeatTransfer,
            "structural" => DomainId::Structural,
            "chemical" => DomainId::Chemical,
            _ => return Err(DomainError::UnknownDomain(s.to_string())),
        };
        Ok(id)
    }
}

impl Serialize for DomainId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DomainId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("{domain}: {field} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        domain: DomainId,
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid parameters for {domain}: {message}")]
    InvalidParams { domain: DomainId, message: String },
    #[error("{domain}: bracket search failed: {source}")]
    Bracket {
        domain: DomainId,
        #[source]
        source: SolverError,
    },
}

fn check_range(
    domain: DomainId,
    field: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
) -> Result<(), DomainError> {
    // Slack of a few ulps so values printed at a bound still validate.
    let slack = 1e-12 * lo.abs().max(hi.abs());
    if value.is_finite() && value >= lo - slack && value <= hi + slack {
        Ok(())
    } else {
        Err(DomainError::OutOfRange { domain, field, value, lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub reynolds: f64,
    pub roughness_m: f64,
    pub diameter_m: f64,
}

impl FluidParams {
    pub fn relative_roughness(&self) -> f64 {
        self.roughness_m / self.diameter_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalParams {
    pub eccentricity: f64,
    pub mean_anomaly_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectronicsParams {
    pub source_voltage_v: f64,
    pub resistance_ohm: f64,
    pub saturation_current_a: f64,
    pub thermal_voltage_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gas {
    #[serde(rename = "N2")]
    Nitrogen,
    #[serde(rename = "CO2")]
    CarbonDioxide,
    #[serde(rename = "CH4")]
    Methane,
}

impl Gas {
    pub const ALL: [Gas; 3] = [Gas::Nitrogen, Gas::CarbonDioxide, Gas::Methane];

    pub fn name(self) -> &'static str {
        match self {
            Gas::Nitrogen => "nitrogen",
            Gas::CarbonDioxide => "carbon dioxide",
            Gas::Methane => "methane",
        }
    }

    /// van der Waals `(a [L²·atm/mol²], b [L/mol])`.
    pub fn vdw_constants(self) -> (f64, f64) {
        match self {
            Gas::Nitrogen => (1.39, 0.0391),
            Gas::CarbonDioxide => (3.59, 0.0427),
            Gas::Methane => (2.25, 0.0428),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoParams {
    pub gas: Gas,
    pub pressure_atm: f64,
    pub temperature_k: f64,
    pub a: f64,
    pub b: f64,
    pub gas_constant: f64,
}

impl ThermoParams {
    pub fn new(gas: Gas, pressure_atm: f64, temperature_k: f64) -> Self {
        let (a, b) = gas.vdw_constants();
        ThermoParams { gas, pressure_atm, temperature_k, a, b, gas_constant: GAS_CONSTANT_L_ATM }
    }

    pub fn ideal_volume(&self) -> f64 {
        self.gas_constant * self.temperature_k / self.pressure_atm
    }

    /// van der Waals critical temperature `8a / (27 R b)`.
    pub fn critical_temperature(&self) -> f64 {
        8.0 * self.a / (27.0 * self.gas_constant * self.b)
    }

    /// van der Waals critical molar volume `3b`.
    pub fn critical_volume(&self) -> f64 {
        3.0 * self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatParams {
    pub peak_wavelength_um: f64,
}

impl HeatParams {
    /// `hc/(lambda k_B)` in kelvin; the temperature is this over the Wien variable.
    pub fn wien_scale_k(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / (self.peak_wavelength_um * 1e-6 * BOLTZMANN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChemicalParams {
    pub bet_constant: f64,
    pub relative_pressure: f64,
    pub adsorbed_volume: f64,
}

/// Physical parameters of one problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainParams {
    Fluid(FluidParams),
    Orbital(OrbitalParams),
    Electronics(ElectronicsParams),
    Thermo(ThermoParams),
    Heat(HeatParams),
    Structural(StructuralParams),
    Chemical(ChemicalParams),
}

impl DomainParams {
    pub fn domain(&self) -> DomainId {
        match self {
            DomainParams::Fluid(_) => DomainId::FluidMechanics,
            DomainParams::Orbital(_) => DomainId::OrbitalMechanics,
            DomainParams::Electronics(_) => DomainId::Electronics,
            DomainParams::Thermo(_) => DomainId::Thermodynamics,
            DomainParams::Heat(_) => DomainId::HeatTransfer,
            DomainParams::Structural(_) => DomainId::Structural,
            DomainParams::Chemical(_) => DomainId::Chemical,
        }
    }

    pub fn fluid(reynolds: f64, roughness_m: f64, diameter_m: f64) -> Self {
        DomainParams::Fluid(FluidParams { reynolds, roughness_m, diameter_m })
    }

    pub fn orbital(eccentricity: f64, mean_anomaly_rad: f64) -> Self {
        DomainParams::Orbital(OrbitalParams { eccentricity, mean_anomaly_rad })
    }

    pub fn electronics(source_voltage_v: f64, resistance_ohm: f64, saturation_current_a: f64) -> Self {
        DomainParams::Electronics(ElectronicsParams {
            source_voltage_v,
            resistance_ohm,
            saturation_current_a,
            thermal_voltage_v: ROOM_THERMAL_VOLTAGE,
        })
    }

    pub fn thermo(gas: Gas, pressure_atm: f64, temperature_k: f64) -> Self {
        DomainParams::Thermo(ThermoParams::new(gas, pressure_atm, temperature_k))
    }

    pub fn heat(peak_wavelength_um: f64) -> Self {
        DomainParams::Heat(HeatParams { peak_wavelength_um })
    }

    pub fn structural(k: f64) -> Self {
        DomainParams::Structural(StructuralParams { k })
    }

    pub fn chemical(bet_constant: f64, relative_pressure: f64, adsorbed_volume: f64) -> Self {
        DomainParams::Chemical(ChemicalParams { bet_constant, relative_pressure, adsorbed_volume })
    }

    /// Checks every field against its domain range.
    ///
    /// Ranges follow the benchmark's sampling ranges, except that orbital
    /// eccentricity may go down to 0 (circular orbit).
    pub fn validate(&self) -> Result<(), DomainError> {
        let d = self.domain();
        match self {
            DomainParams::Fluid(p) => {
                check_range(d, "reynolds", p.reynolds, 1e4, 1e7)?;
                check_range(d, "diameter_m", p.diameter_m, 1e-3, 10.0)?;
                check_range(d, "roughness_m / diameter_m", p.relative_roughness(), 1e-6, 1e-2)
            }
            DomainParams::Orbital(p) => {
                check_range(d, "eccentricity", p.eccentricity, 0.0, 0.9)?;
                check_range(d, "mean_anomaly_rad", p.mean_anomaly_rad, 0.0, std::f64::consts::PI)
            }
            DomainParams::Electronics(p) => {
                check_range(d, "source_voltage_v", p.source_voltage_v, 1.0, 10.0)?;
                check_range(d, "resistance_ohm", p.resistance_ohm, 100.0, 10_000.0)?;
                check_range(d, "saturation_current_a", p.saturation_current_a, 1e-15, 1e-12)?;
                check_range(d, "thermal_voltage_v", p.thermal_voltage_v, 0.01, 0.1)
            }
            DomainParams::Thermo(p) => {
                check_range(d, "pressure_atm", p.pressure_atm, 10.0, 100.0)?;
                check_range(d, "temperature_k", p.temperature_k, 200.0, 500.0)?;
                check_range(d, "a", p.a, 1e-3, 100.0)?;
                check_range(d, "b", p.b, 1e-4, 1.0)?;
                check_range(d, "gas_constant", p.gas_constant, 1e-3, 100.0)
            }
            DomainParams::Heat(p) => check_range(d, "peak_wavelength_um", p.peak_wavelength_um, 0.5, 10.0),
            DomainParams::Structural(p) => check_range(d, "k", p.k, 0.1, 100.0),
            DomainParams::Chemical(p) => {
                check_range(d, "bet_constant", p.bet_constant, 10.0, 1000.0)?;
                check_range(d, "relative_pressure", p.relative_pressure, 0.05, 0.35)?;
                check_range(d, "adsorbed_volume", p.adsorbed_volume, 1e-3, 1e6)
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            DomainParams::Fluid(p) => serde_json::to_value(p),
            DomainParams::Orbital(p) => serde_json::to_value(p),
            DomainParams::Electronics(p) => serde_json::to_value(p),
            DomainParams::Thermo(p) => serde_json::to_value(p),
            DomainParams::Heat(p) => serde_json::to_value(p),
            DomainParams::Structural(p) => serde_json::to_value(p),
            DomainParams::Chemical(p) => serde_json::to_value(p),
        };
        v.expect("parameter structs always serialize")
    }

    pub fn from_json(domain: DomainId, value: serde_json::Value) -> Result<Self, DomainError> {
        let invalid = |e: serde_json::Error| DomainError::InvalidParams { domain, message: e.to_string() };
        let params = match domain {
            DomainId::FluidMechanics => DomainParams::Fluid(serde_json::from_value(value).map_err(invalid)?),
            DomainId::OrbitalMechanics => DomainParams::Orbital(serde_json::from_value(value).map_err(invalid)?),
            DomainId::Electronics => DomainParams::Electronics(serde_json::from_value(value).map_err(invalid)?),
            DomainId::Thermodynamics => DomainParams::Thermo(serde_json::from_value(value).map_err(invalid)?),
            DomainId::HeatTransfer => DomainParams::Heat(serde_json::from_value(value).map_err(invalid)?),
            DomainId::Structural => DomainParams::Structural(serde_json::from_value(value).map_err(invalid)?),
            DomainId::Chemical => DomainParams::Chemical(serde_json::from_value(value).map_err(invalid)?),
        };
        Ok(params)
    }
}

/// A domain residual with its default starting point and root bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub expr: Expr,
    pub x0: f64,
    pub bracket: Bracket,
}

/// Builds the residual whose root answers the domain query.
pub fn build_residual(params: &DomainParams) -> Result<Residual, DomainError> {
    params.validate()?;
    let domain = params.domain();
    let x = Expr::x;
    let (expr, x0, lo, hi) = match *params {
        DomainParams::Fluid(p) => {
            let expr = 1.0 / x().sqrt()
                + 2.0
                    * ((Expr::num(p.roughness_m) / p.diameter_m) / 3.7
                        + 2.51 / (Expr::num(p.reynolds) * x().sqrt()))
                    .log10();
            (expr, swamee_jain(&p), 0.005, 0.1)
        }
        DomainParams::Orbital(p) => {
            let (e, m) = (p.eccentricity, p.mean_anomaly_rad);
            // |E - M| <= e, so this bracket always straddles the unique root.
            (x() - e * x().sin() - m, m, m - e - 0.1, m + e + 0.1)
        }
        DomainParams::Electronics(p) => {
            let expr = x()
                + Expr::num(p.resistance_ohm) * p.saturation_current_a * ((x() / p.thermal_voltage_v).exp() - 1.0)
                - p.source_voltage_v;
            (expr, 0.6, 0.0, p.source_voltage_v)
        }
        DomainParams::Thermo(p) => {
            let expr = (p.pressure_atm + p.a / x().pow(Expr::num(2.0))) * (x() - p.b)
                - Expr::num(p.gas_constant) * p.temperature_k;
            let (lo, hi) = vdw_gas_bracket(&expr, &p).map_err(|source| DomainError::Bracket { domain, source })?;
            (expr, p.ideal_volume(), lo, hi)
        }
        DomainParams::Heat(p) => {
            let scale = p.wien_scale_k();
            let wien = || scale / x();
            let expr = (wien() - 5.0) * wien().exp() + 5.0;
            // Wien variable 4.9 as the guess; [4, 6] in Wien variable excludes the trivial root at 0.
            (expr, scale / 4.9, scale / 6.0, scale / 4.0)
        }
        DomainParams::Structural(p) => {
            let upper = (1.0 + p.k).ln();
            (x() * x().exp() - p.k, upper, 0.0, upper + 1.0)
        }
        DomainParams::Chemical(p) => {
            let (c, r, v) = (p.bet_constant, p.relative_pressure, p.adsorbed_volume);
            // BET right-hand side over the measured left-hand side, minus one.
            let expr = (1.0 / (x() * c) + (c - 1.0) / (x() * c) * r) / (Expr::num(r) / (Expr::num(v) * (1.0 - r)))
                - 1.0;
            let seed = v * (1.0 - r);
            (expr, seed, 0.5 * seed, 4.0 * seed)
        }
    };
    let bracket = Bracket::new(lo, hi).map_err(|source| DomainError::Bracket { domain, source })?;
    verify_sign_change(&expr, bracket).map_err(|source| DomainError::Bracket { domain, source })?;
    Ok(Residual { expr, x0, bracket })
}

/// Explicit Swamee-Jain friction factor, to four significant figures.
///
/// Newton on the Colebrook residual overshoots below zero when started far
/// above the root, so the guess has to land close to it.
pub fn swamee_jain(p: &FluidParams) -> f64 {
    let log = (p.relative_roughness() / 3.7 + 5.74 / p.reynolds.powf(0.9)).log10();
    let f = 0.25 / (log * log);
    format!("{f:.3e}").parse().expect("formatted float parses")
}

fn verify_sign_change(expr: &Expr, bracket: Bracket) -> Result<(), SolverError> {
    let (f_lo, f_hi) = (expr.eval(bracket.lo), expr.eval(bracket.hi));
    if !f_lo.is_finite() {
        return Err(SolverError::NonFiniteEndpoint { x: bracket.lo });
    }
    if !f_hi.is_finite() {
        return Err(SolverError::NonFiniteEndpoint { x: bracket.hi });
    }
    if f_lo != 0.0 && f_hi != 0.0 && f_lo.signum() == f_hi.signum() {
        return Err(SolverError::NoSignChange { lo: bracket.lo, hi: bracket.hi, f_lo, f_hi });
    }
    Ok(())
}

/// Bracket around the largest van der Waals root above `b` (gas phase).
///
/// Walks a geometric grid down from `10 RT/P` towards `1.01 b` and stops at
/// the first sign change.
fn vdw_gas_bracket(expr: &Expr, p: &ThermoParams) -> Result<(f64, f64), SolverError> {
    const STEPS: u32 = 4000;
    let lo = 1.01 * p.b;
    let hi = 10.0 * p.ideal_volume();
    let ratio = (lo / hi).powf(1.0 / STEPS as f64);
    let mut upper = hi;
    let mut f_upper = expr.eval(upper);
    if !(f_upper > 0.0) {
        return Err(SolverError::NoSignChange { lo, hi, f_lo: expr.eval(lo), f_hi: f_upper });
    }
    for i in 1..=STEPS {
        let v = if i == STEPS { lo } else { hi * ratio.powi(i as i32) };
        let f_v = expr.eval(v);
        if f_v <= 0.0 {
            return Ok((v, upper));
        }
        upper = v;
        f_upper = f_v;
    }
    Err(SolverError::NoSignChange { lo, hi, f_lo: f_upper, f_hi: expr.eval(hi) })
}

/// Unrounded root from the bisection oracle. Never touches Newton.
pub fn oracle_root(params: &DomainParams) -> Result<f64, DomainError> {
    let residual = build_residual(params)?;
    bisection_oracle(&residual.expr, residual.bracket, DEFAULT_BISECTION_TOLERANCE)
        .map_err(|source| DomainError::Bracket { domain: params.domain(), source })
}

/// Oracle root rounded to three decimals.
pub fn ground_truth(params: &DomainParams) -> Result<f64, DomainError> {
    oracle_root(params).map(|r| round_to(r, GROUND_TRUTH_DIGITS))
}

/// `|f(x)| / max(1, |f'(x)|)`: roughly the distance from `x` to the root.
pub fn scaled_residual(f: &Expr, fprime: &Expr, x: f64) -> f64 {
    f.eval(x).abs() / fprime.eval(x).abs().max(1.0)
}
