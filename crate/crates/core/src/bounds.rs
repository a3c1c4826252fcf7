//! Confidence-interval widths for split tests and leaf consistency.
//!
//! Every function here is pure. Natural logarithms are used throughout, except
//! for the constant of the McDiarmid entropy bound which is defined in base 2.
//! Widths are never clipped to the range of the criterion they are compared
//! against.

use std::f64::consts::LOG2_E;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static DELTA_UNDERFLOWS: AtomicU64 = AtomicU64::new(0);

/// Number of times [`split_confidence`] had to replace an underflowed δ' with
/// `f64::MIN_POSITIVE`, process-wide.
pub fn delta_underflow_count() -> u64 {
    DELTA_UNDERFLOWS.load(Ordering::Relaxed)
}

/// Which interval [`split_confidence`] composes with the union-bound δ'.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Entropy,
    Gini,
    KearnsMansour,
    Hoeffding { range: f64 },
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn check_count(name: &str, value: u64, min: u64) -> Result<()> {
    if value >= min {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be at least {min}, got {value}")))
    }
}

/// `R * sqrt(ln(1/δ) / 2m)`.
pub fn hoeffding_interval(m: u64, delta: f64, range: f64) -> Result<f64> {
    check_count("m", m, 1)?;
    check_delta(delta)?;
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::domain(format!("range must be positive, got {range}")));
    }
    Ok(range * ((1.0 / delta).ln() / (2.0 * m as f64)).sqrt())
}

/// McDiarmid-based entropy-gain interval for `num_classes` classes:
/// `C(K, m) * sqrt(ln(1/δ) / 2m)` with
/// `C(K, m) = 6 (K log2 e + log2 2m) + 2 log2 K`.
pub fn mcdiarmid_entropy_interval(m: u64, delta: f64, num_classes: u32) -> Result<f64> {
    check_count("m", m, 1)?;
    check_delta(delta)?;
    if num_classes < 2 {
        return Err(Error::domain(format!(
            "num_classes must be at least 2, got {num_classes}"
        )));
    }
    let k = f64::from(num_classes);
    let mf = m as f64;
    let constant = 6.0 * (k * LOG2_E + (2.0 * mf).log2()) + 2.0 * k.log2();
    Ok(constant * ((1.0 / delta).ln() / (2.0 * mf)).sqrt())
}

/// Deviation of the plug-in scaled conditional entropy:
/// `ln(m) * sqrt((2/m) ln(4/δ)) + 2/m`.
pub fn entropy_interval(m: u64, delta: f64) -> Result<f64> {
    check_count("m", m, 2)?;
    check_delta(delta)?;
    let mf = m as f64;
    Ok(mf.ln() * ((2.0 / mf) * (4.0 / delta).ln()).sqrt() + 2.0 / mf)
}

/// Deviation of the harmonic-mean Gini estimator:
/// `sqrt((8/m) ln(2/δ)) + 4/sqrt(m)`.
pub fn gini_interval(m: u64, delta: f64) -> Result<f64> {
    check_count("m", m, 1)?;
    check_delta(delta)?;
    let mf = m as f64;
    Ok(((8.0 / mf) * (2.0 / delta).ln()).sqrt() + 4.0 / mf.sqrt())
}

/// Deviation of the square-root (Kearns-Mansour) estimator: `4 sqrt(ln(8/δ) / m)`.
pub fn km_interval(m: u64, delta: f64) -> Result<f64> {
    check_count("m", m, 1)?;
    check_delta(delta)?;
    Ok(4.0 * ((8.0 / delta).ln() / m as f64).sqrt())
}

/// The δ' used when a leaf at depth `depth`, holding `m` labeled examples, is
/// tested at stream time `t` among `d` attributes:
/// `δ / ((h+1)(h+2) t d m)`.
///
/// Underflow to zero is replaced by `f64::MIN_POSITIVE` and counted.
pub fn composed_delta(m: u64, t: u64, d: usize, depth: u32, delta: f64) -> Result<f64> {
    check_count("m", m, 1)?;
    check_count("t", t, 1)?;
    check_count("d", d as u64, 1)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    let h = f64::from(depth);
    let denominator = (h + 1.0) * (h + 2.0) * t as f64 * d as f64 * m as f64;
    let composed = delta / denominator;
    if composed == 0.0 {
        DELTA_UNDERFLOWS.fetch_add(1, Ordering::Relaxed);
        return Ok(f64::MIN_POSITIVE);
    }
    if composed >= 1.0 {
        return Err(Error::domain(format!(
            "composed delta {composed} is not below 1"
        )));
    }
    Ok(composed)
}

/// Interval width of `kind` evaluated at `m` and the composed δ'.
pub fn split_confidence(
    m: u64,
    t: u64,
    d: usize,
    depth: u32,
    delta: f64,
    kind: BoundKind,
) -> Result<f64> {
    let composed = composed_delta(m, t, d, depth, delta)?;
    match kind {
        BoundKind::Entropy => entropy_interval(m, composed),
        BoundKind::Gini => gini_interval(m, composed),
        BoundKind::KearnsMansour => km_interval(m, composed),
        BoundKind::Hoeffding { range } => hoeffding_interval(m, composed, range),
    }
}

/// Tunable interval `c * sqrt(ln(m² h² t d) / m)`, with `h` clamped to at
/// least 1 so the root does not zero the logarithm.
pub fn heuristic_interval(m: u64, t: u64, d: usize, depth: u32, c: f64) -> Result<f64> {
    check_count("m", m, 1)?;
    check_count("t", t, 1)?;
    check_count("d", d as u64, 1)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("c must be positive, got {c}")));
    }
    let mf = m as f64;
    let h = f64::from(depth.max(1));
    let argument = mf * mf * h * h * t as f64 * d as f64;
    if argument <= 1.0 {
        return Err(Error::domain(format!(
            "log argument m²h²td = {argument} must exceed 1"
        )));
    }
    Ok(c * (argument.ln() / mf).sqrt())
}

/// Half-width around the leaf's positive rate beyond which the leaf is
/// δ-consistent: `sqrt(ln(2t/δ) / 2m)`.
pub fn leaf_consistency_interval(m: u64, t: u64, delta: f64) -> Result<f64> {
    check_count("m", m, 1)?;
    check_count("t", t, 1)?;
    check_delta(delta)?;
    Ok(((2.0 * t as f64 / delta).ln() / (2.0 * m as f64)).sqrt())
}
