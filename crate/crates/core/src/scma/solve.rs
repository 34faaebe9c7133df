//! Outer alternation between codebook assignment and power allocation.

use crate::config::SolverConfig;
use crate::convex::DualState;
use crate::hetnet::ChannelState;
use crate::power_engine::{PowerDiagnostics, ScaleField};
use crate::Result;

use super::{
    allocate_codebooks, allocate_power_scma, enumerate_codebooks, CodebookSet, EtaRule,
    ScmaAssignment, ScmaPower,
};

/// Final solve result for the sparse-codebook scheme.
#[derive(Debug, Clone)]
pub struct ScmaSolution {
    /// The codebook dictionary the solve ran over.
    pub codebooks: CodebookSet,
    /// Binary codebook assignment.
    pub assignment: ScmaAssignment,
    /// Budget-feasible powers.
    pub power: ScmaPower,
    /// True sum rate at the returned pair, nats.
    pub sum_rate_nats: f64,
    /// Outer alternations performed.
    pub outer_iters: usize,
    /// The power-change stopping criterion was met.
    pub converged: bool,
    /// Budget multipliers of the returned power solve.
    pub dual: DualState,
    /// Bound coefficients of the returned power solve.
    pub scale: ScaleField,
    /// Convergence flags of the returned power solve.
    pub power_diag: PowerDiagnostics,
}

fn probe_lift(state: &ChannelState, cbs: &CodebookSet, p: &ScmaPower, p_max: &[f64]) -> ScmaPower {
    let mut out = p.clone();
    for (f, users) in state.users_of_bs.iter().enumerate() {
        let probe = p_max[f] / (users.len() * cbs.count()) as f64;
        for &m in users {
            for c in 0..cbs.count() {
                if out.get(f, m, c) < probe {
                    out.set(f, m, c, probe);
                }
            }
        }
    }
    out
}

/// Alternates codebook assignment and power allocation over the full
/// `C(N, U)` dictionary, starting from a uniform relaxed assignment and a
/// uniform power split, until the powers stop moving or the iteration cap.
/// Returns the best-feasible iterate by true sum rate.
pub fn solve_scma(
    state: &ChannelState,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> Result<ScmaSolution> {
    let cbs = enumerate_codebooks(state.num_subcarriers, cfg.codebook_size, EtaRule::Uniform)?;
    let mut q_relaxed = ScmaAssignment::uniform_relaxed(state, &cbs, cfg.reuse_cap);
    let mut p = ScmaPower::uniform(state, &cbs, p_max);
    let mut p_prev: Option<Vec<f64>> = None;
    let mut best: Option<ScmaSolution> = None;
    let mut iters = 0;
    let mut converged = false;

    for _k in 0..cfg.outer_iters.max(1) {
        iters += 1;
        let p_probe = probe_lift(state, &cbs, &p, p_max);
        let assign = allocate_codebooks(state, &cbs, &p_probe, &q_relaxed, p_max, cfg)?;
        let pow = allocate_power_scma(state, &cbs, &assign.assignment, &p, p_max, cfg)?;

        if best.as_ref().map_or(true, |b| pow.sum_rate_nats > b.sum_rate_nats) {
            best = Some(ScmaSolution {
                codebooks: cbs.clone(),
                assignment: assign.assignment.clone(),
                power: pow.power.clone(),
                sum_rate_nats: pow.sum_rate_nats,
                outer_iters: iters,
                converged: false,
                dual: pow.dual.clone(),
                scale: pow.scale.clone(),
                power_diag: pow.diag.clone(),
            });
        }

        let flat = pow.power.p.clone();
        if let Some(prev) = &p_prev {
            let mut stable = true;
            for (f, users) in state.users_of_bs.iter().enumerate() {
                let tol = cfg.outer_tol_rel * p_max[f];
                for &m in users {
                    for c in 0..cbs.count() {
                        let i = pow.power.idx(f, m, c);
                        if (flat[i] - prev[i]).abs() > tol {
                            stable = false;
                        }
                    }
                }
            }
            if stable {
                converged = true;
            }
        }
        p_prev = Some(flat);
        p = pow.power;
        q_relaxed = assign.relaxed;
        if converged {
            break;
        }
    }

    let mut out = best.expect("at least one alternation runs");
    out.outer_iters = iters;
    out.converged = converged;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma::tests::state_from_gains;
    use crate::scma::scma_sum_rate;

    #[test]
    fn single_user_single_cell() {
        let state = state_from_gains(vec![vec![0]], 4, vec![2e-9, 1e-9, 3e-9, 5e-10], 1e-12);
        let cfg = SolverConfig { codebook_size: 2, reuse_cap: 2, ..SolverConfig::default() };
        let sol = solve_scma(&state, &[2.0], &cfg).unwrap();
        sol.assignment.check(&state, &sol.codebooks, cfg.reuse_cap).unwrap();
        assert!(sol.sum_rate_nats > 0.0);
        let used = sol.power.consumed(&sol.assignment, &state, 0);
        assert!(used <= 2.0 * (1.0 + 1e-6));
        let recomputed =
            scma_sum_rate(&state, &sol.codebooks, &sol.assignment, &sol.power, false);
        assert!((recomputed - sol.sum_rate_nats).abs() < 1e-9 * recomputed.max(1.0));
    }
}
