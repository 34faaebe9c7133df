//! Tangent lower bound on `log(1+z)` used for successive convex
//! approximation of rate objectives.

use crate::{Error, Result};

/// Coefficients of the bound `alpha * log(z) + beta <= log(1+z)`.
///
/// The bound is tight at the expansion point `z0`: it touches `log(1+z)`
/// there and lies below it everywhere else (it is the tangent of
/// `u -> log(1+e^u)` at `u = log(z0)`). The high-SINR variant `alpha = 1`,
/// `beta = 0` is the limit `z0 -> inf` and is used to start the iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleCoeffs {
    /// Slope in log-z coordinates, `z0 / (z0 + 1)`, in `[0, 1)` for finite
    /// `z0` and exactly `1` for the high-SINR start.
    pub alpha: f64,
    /// Offset `log(1 + z0) - alpha * log(z0)`; `0` for the high-SINR start.
    pub beta: f64,
    /// Expansion point; `None` marks the high-SINR start.
    pub z0: Option<f64>,
}

impl ScaleCoeffs {
    /// The `alpha = 1, beta = 0` starting approximation, exact as `z -> inf`.
    pub fn high_sinr() -> Self {
        ScaleCoeffs { alpha: 1.0, beta: 0.0, z0: None }
    }

    /// Evaluates the lower bound `alpha * log(z) + beta` at `z > 0`.
    pub fn bound(&self, z: f64) -> f64 {
        self.alpha * z.ln() + self.beta
    }
}

/// Computes the bound coefficients at expansion point `z0 > 0`.
pub fn scale_coeffs(z0: f64) -> Result<ScaleCoeffs> {
    if !z0.is_finite() || z0 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "expansion point must be positive and finite, got {z0}"
        )));
    }
    let alpha = z0 / (z0 + 1.0);
    let beta = (1.0 + z0).ln() - alpha * z0.ln();
    Ok(ScaleCoeffs { alpha, beta, z0: Some(z0) })
}
