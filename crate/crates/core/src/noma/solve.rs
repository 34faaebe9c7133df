//! Outer alternation between subcarrier assignment and power allocation.

use crate::config::SolverConfig;
use crate::convex::DualState;
use crate::hetnet::ChannelState;
use crate::power_engine::{PowerDiagnostics, ScaleField};
use crate::Result;

use super::{
    allocate_power, allocate_subcarriers, round_assignment, NomaAssignment, NomaPower,
};

/// Final solve result: best-feasible assignment and powers by true sum rate.
#[derive(Debug, Clone)]
pub struct NomaSolution {
    /// Binary subcarrier assignment.
    pub assignment: NomaAssignment,
    /// Budget-feasible powers.
    pub power: NomaPower,
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

// Candidate powers for the assignment subproblem: keep solved powers where
// they exist, and give starved or unassigned entries a nominal uniform
// share so the assignment stage can still consider them.
fn probe_lift(state: &ChannelState, p: &NomaPower, p_max: &[f64]) -> NomaPower {
    let mut out = p.clone();
    for (f, users) in state.users_of_bs.iter().enumerate() {
        let probe = p_max[f] / (users.len() * state.num_subcarriers) as f64;
        for &m in users {
            for n in 0..state.num_subcarriers {
                if out.get(f, m, n) < probe {
                    out.set(f, m, n, probe);
                }
            }
        }
    }
    out
}

/// Alternates relaxed subcarrier allocation (plus rounding) with power
/// allocation, starting from a uniform relaxed assignment and a uniform
/// power split, until the rounded powers stop moving or the iteration cap.
/// Returns the best-feasible iterate by true sum rate.
pub fn solve_noma(
    state: &ChannelState,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> Result<NomaSolution> {
    let mut rho_relaxed = NomaAssignment::uniform_relaxed(state, cfg.max_superposed);
    let mut p = NomaPower::uniform(state, p_max);
    let mut p_prev: Option<Vec<f64>> = None;
    let mut best: Option<NomaSolution> = None;
    let mut iters = 0;
    let mut converged = false;

    for _k in 0..cfg.outer_iters.max(1) {
        iters += 1;
        let p_probe = probe_lift(state, &p, p_max);
        let sub = allocate_subcarriers(state, &p_probe, &rho_relaxed, p_max, cfg)?;
        let rho_bin =
            round_assignment(state, &sub.assignment, cfg.max_superposed, cfg.round_threshold);
        let pow = allocate_power(state, &rho_bin, &p, p_max, cfg)?;

        if best.as_ref().map_or(true, |b| pow.sum_rate_nats > b.sum_rate_nats) {
            best = Some(NomaSolution {
                assignment: rho_bin.clone(),
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
                    for n in 0..state.num_subcarriers {
                        let i = pow.power.idx(f, m, n);
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
        rho_relaxed = sub.assignment;
        if converged {
            break;
        }
    }

    let mut out = best.expect("at least one alternation runs");
    out.outer_iters = iters;
    out.converged = converged;
    Ok(out)
}
