//! Arithmetic-geometric-mean condensation: bounds a sum of positive terms
//! below by a monomial, which is what turns the rate-ratio denominators
//! into geometric-program form.

use crate::{Error, Result};

/// Condenses `sum(terms)` into the monomial lower bound
/// `prod_i (terms[i] / u_i)^{u_i}` with weights `u_i` taken from the anchor
/// point: `u_i = anchor[i] / sum(anchor)`.
///
/// Returns `(weights, bound)`. The bound never exceeds `sum(terms)` and
/// matches it exactly when `terms` is proportional to `anchor`.
pub fn agma_condense(terms: &[f64], anchor: &[f64]) -> Result<(Vec<f64>, f64)> {
    if terms.is_empty() || terms.len() != anchor.len() {
        return Err(Error::InvalidArgument(format!(
            "terms ({}) and anchor ({}) must be the same nonzero length",
            terms.len(),
            anchor.len()
        )));
    }
    if let Some(v) = terms.iter().chain(anchor).find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "all terms and anchor entries must be positive and finite, got {v}"
        )));
    }

    let total: f64 = anchor.iter().sum();
    let weights: Vec<f64> = anchor.iter().map(|a| a / total).collect();
    // Work in logs; the ratios can span many decades.
    let log_bound: f64 = terms
        .iter()
        .zip(&weights)
        .map(|(v, u)| u * (v / u).ln())
        .sum();
    Ok((weights, log_bound.exp()))
}
