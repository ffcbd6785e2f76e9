//! Solve transcendental engineering equations by pairing a symbolic
//! formulator with a Newton-Raphson engine.
//!
//! The pieces, bottom-up:
//!
//! * [`expr`] parses, evaluates and renders single-variable residuals.
//! * [`autodiff`] differentiates them symbolically.
//! * [`solver`] runs Newton-Raphson and an independent bisection oracle.
//! * [`domains`] builds residuals, ground truths and queries for seven
//!   engineering equation families and generates seeded datasets.
//! * [`eval`] computes relative errors, MRE, improvement and convergence
//!   buckets.
//! * [`harness`] drives direct and solver-assisted runs against a live chat
//!   endpoint or an offline mock.

// `!(x > 0.0)` is the idiom used throughout for "not positive, or NaN".
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod expr;
pub mod solver;
pub mod domains;
pub mod eval;
pub mod harness;

/// Serializes NaN as JSON `null` and reads `null` back as NaN.
pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
