//! Natural-language query templates.
//!
//! One fixed paragraph per domain with parameter values slotted in. Values
//! print in their shortest round-trip form so the query text carries exactly
//! the numbers the ground truth was computed from.

use super::{DomainParams, Gas};

/// Shortest decimal text for `v` (no exponent).
pub(crate) fn plain(v: f64) -> String {
    format!("{v}")
}

/// Integer with thousands separators, e.g. `100,000`.
pub(crate) fn grouped(v: f64) -> String {
    let digits = format!("{}", v.round().abs() as u64);
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if v < 0.0 {
        out.insert(0, '-');
    }
    out
}

/// Scientific notation, e.g. `1e-14` or `2.5e-13`.
pub(crate) fn scientific(v: f64) -> String {
    format!("{v:e}")
}

fn gas_label(gas: Gas) -> &'static str {
    match gas {
        Gas::Nitrogen => "nitrogen (N2)",
        Gas::CarbonDioxide => "carbon dioxide (CO2)",
        Gas::Methane => "methane (CH4)",
    }
}

/// The numeric fragments a query for `params` must contain.
pub fn query_fragments(params: &DomainParams) -> Vec<String> {
    match params {
        DomainParams::Fluid(p) => vec![plain(p.diameter_m), grouped(p.reynolds), plain(p.roughness_m)],
        DomainParams::Orbital(p) => vec![plain(p.eccentricity), plain(p.mean_anomaly_rad)],
        DomainParams::Electronics(p) => vec![
            plain(p.source_voltage_v),
            plain(p.resistance_ohm),
            scientific(p.saturation_current_a),
            plain(p.thermal_voltage_v),
        ],
        DomainParams::Thermo(p) => vec![
            plain(p.pressure_atm),
            plain(p.temperature_k),
            plain(p.a),
            plain(p.b),
            plain(p.gas_constant),
        ],
        DomainParams::Heat(p) => vec![plain(p.peak_wavelength_um)],
        DomainParams::Structural(p) => vec![plain(p.k)],
        DomainParams::Chemical(p) => {
            vec![plain(p.adsorbed_volume), plain(p.relative_pressure), plain(p.bet_constant)]
        }
    }
}

/// Renders the query paragraph for `params`. Deterministic.
pub fn render_query(params: &DomainParams) -> String {
    match params {
        DomainParams::Fluid(p) => format!(
            "A commercial building's water supply line is a pipe with a diameter of {} meters. \
             Water moves through it at a Reynolds number of {}, and the absolute roughness of the \
             pipe wall is {} meters. I need the head loss along the line. What is the Darcy \
             friction factor for this flow?",
            plain(p.diameter_m),
            grouped(p.reynolds),
            plain(p.roughness_m),
        ),
        DomainParams::Orbital(p) => format!(
            "A satellite travels on an elliptical Earth orbit with an eccentricity of {}. At the \
             moment of interest its mean anomaly is {} radians. What is the eccentric anomaly in \
             radians, so that I can locate the satellite on its orbit?",
            plain(p.eccentricity),
            plain(p.mean_anomaly_rad),
        ),
        DomainParams::Electronics(p) => format!(
            "A {}-volt DC source drives a {}-ohm resistor in series with a silicon diode. The \
             diode's saturation current is {} amperes and the thermal voltage is {} volts. What \
             is the voltage across the diode in volts?",
            plain(p.source_voltage_v),
            plain(p.resistance_ohm),
            scientific(p.saturation_current_a),
            plain(p.thermal_voltage_v),
        ),
        DomainParams::Thermo(p) => format!(
            "A pressure vessel holds {} at {} atm and {} K. Model the gas with the van der Waals \
             equation using a = {} L^2*atm/mol^2, b = {} L/mol and R = {} L*atm/(mol*K). What is \
             the molar volume of the gas in liters per mole?",
            gas_label(p.gas),
            plain(p.pressure_atm),
            plain(p.temperature_k),
            plain(p.a),
            plain(p.b),
            plain(p.gas_constant),
        ),
        DomainParams::Heat(p) => format!(
            "A radiating surface behaves as a blackbody, and its spectral radiance peaks at a \
             wavelength of {} micrometers. Using Planck's radiation law, what is the temperature \
             of the surface in kelvin?",
            plain(p.peak_wavelength_um),
        ),
        DomainParams::Structural(p) => format!(
            "In a column stability analysis the governing condition reduces to a dimensionless \
             parameter x satisfying x times e raised to the power x equals {}. What is the value \
             of x?",
            plain(p.k),
        ),
        DomainParams::Chemical(p) => format!(
            "A nitrogen adsorption test on a porous catalyst support records an adsorbed volume \
             of {} cm^3(STP)/g at a relative pressure P/P0 of {}. The BET constant for this \
             adsorbate and surface is {}. Using the BET isotherm, what is the monolayer capacity \
             V_m in cm^3(STP)/g?",
            plain(p.adsorbed_volume),
            plain(p.relative_pressure),
            plain(p.bet_constant),
        ),
    }
}
