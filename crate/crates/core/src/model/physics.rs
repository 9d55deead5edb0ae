//! Cost and physics coefficient calculators for pipes.

use crate::error::{Error, Result};

/// Quadratic-in-scale cost coefficient of the construction cost law.
pub const COST_COEFF: f64 = 1.04081e-6;
/// Diameter exponent of the construction cost law.
pub const COST_EXPONENT: f64 = 2.5;
/// Per-length constant of the construction cost law.
pub const COST_CONSTANT: f64 = 11.2155;

/// Construction cost of a pipe of length `length` and diameter `diameter`:
/// `l * (1.04081e-6 * D^2.5 + 11.2155)`.
pub fn pipe_cost(length: f64, diameter: f64) -> Result<f64> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("pipe length must be positive, got {length}")));
    }
    if !(diameter >= 0.0) || !diameter.is_finite() {
        return Err(Error::invalid(format!("pipe diameter must be non-negative, got {diameter}")));
    }
    Ok(length * (COST_COEFF * diameter.powf(COST_EXPONENT) + COST_CONSTANT))
}

/// Weymouth-style potential loss coefficient `c_alpha * l / D^5`.
pub fn loss_coefficient(length: f64, diameter: f64, c_alpha: f64) -> Result<f64> {
    if !(diameter > 0.0) {
        return Err(Error::invalid(format!("loss coefficient needs a positive diameter, got {diameter}")));
    }
    if !(length > 0.0) || !(c_alpha > 0.0) {
        return Err(Error::invalid(format!(
            "loss coefficient needs positive length and constant, got l={length}, c={c_alpha}"
        )));
    }
    Ok(c_alpha * length / diameter.powi(5))
}

/// Flow cap proportional to the cross-sectional area: `c_q * pi * D^2 / 4`.
pub fn max_flow(diameter: f64, c_q: f64) -> Result<f64> {
    if !(diameter >= 0.0) || !(c_q >= 0.0) {
        return Err(Error::invalid(format!("max flow needs non-negative inputs, got D={diameter}, c={c_q}")));
    }
    Ok(c_q * std::f64::consts::PI * diameter * diameter / 4.0)
}

/// Potential (squared pressure) of a pressure.
pub fn potential_of(pressure: f64) -> f64 {
    pressure * pressure
}

/// Pressure of a non-negative potential.
pub fn pressure_of(potential: f64) -> f64 {
    potential.max(0.0).sqrt()
}

/// Potential loss `sgn(q) * alpha * q^2` of a passive arc.
pub fn signed_loss(alpha: f64, flow: f64) -> f64 {
    alpha * flow * flow.abs()
}
