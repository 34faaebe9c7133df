//! Projected-subgradient state for the per-station power budget multipliers.

/// Dual multipliers for the per-station power budgets plus the step size
/// and iteration counter of the subgradient loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    /// One nonnegative multiplier per base station.
    pub lambda: Vec<f64>,
    /// Subgradient step size, strictly positive.
    pub step: f64,
    /// Iteration counter.
    pub iteration: usize,
}

impl DualState {
    /// Fresh state with the given multipliers and step size.
    pub fn new(lambda: Vec<f64>, step: f64) -> Self {
        debug_assert!(step > 0.0);
        debug_assert!(lambda.iter().all(|l| *l >= 0.0));
        DualState { lambda, step, iteration: 0 }
    }
}

/// One projected subgradient step on the budget multipliers:
/// `lambda_f <- max(0, lambda_f - step * residual_f)` where
/// `residual_f = p_max_f - consumed_f` is the remaining budget slack.
///
/// A station over budget has negative residual, so its price rises; slack
/// drives the price toward zero, with the projection keeping it nonnegative.
pub fn subgradient_update(state: &DualState, residual_per_bs: &[f64]) -> DualState {
    debug_assert_eq!(state.lambda.len(), residual_per_bs.len());
    let lambda = state
        .lambda
        .iter()
        .zip(residual_per_bs)
        .map(|(l, r)| (l - state.step * r).max(0.0))
        .collect();
    DualState { lambda, step: state.step, iteration: state.iteration + 1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_step() {
        let s = DualState::new(vec![1.0], 0.1);
        let s2 = subgradient_update(&s, &[2.0]);
        assert!((s2.lambda[0] - 0.8).abs() < 1e-15);
        assert_eq!(s2.iteration, 1);
    }

    #[test]
    fn projection_clamps_to_zero() {
        let s = DualState::new(vec![0.1], 1.0);
        let s2 = subgradient_update(&s, &[2.0]);
        assert_eq!(s2.lambda[0], 0.0);
    }

    #[test]
    fn zero_residual_is_stationary() {
        let s = DualState::new(vec![0.7, 0.0], 0.3);
        let s2 = subgradient_update(&s, &[0.0, 0.0]);
        assert_eq!(s2.lambda, s.lambda);
    }

    #[test]
    fn never_negative() {
        let mut s = DualState::new(vec![0.5, 1.5], 0.25);
        for k in 0..100 {
            let r = [(k as f64) - 50.0, 2.0 * ((k % 7) as f64) - 6.0];
            s = subgradient_update(&s, &r);
            assert!(s.lambda.iter().all(|l| *l >= 0.0));
        }
    }
}
