//! Power allocation for a fixed binary codebook assignment.

use crate::config::SolverConfig;
use crate::convex::DualState;
use crate::hetnet::ChannelState;
use crate::power_engine::{allocate_power_engine, PowerDiagnostics, PowerModel, ScaleField};
use crate::{Error, Result};

use super::{AssignmentMode, CodebookSet, ScmaAssignment, ScmaPower};

pub(crate) struct ScmaModel {
    pub model: PowerModel,
    pub flat_of_entry: Vec<usize>,
}

pub(crate) fn build_model(
    state: &ChannelState,
    cbs: &CodebookSet,
    q: &ScmaAssignment,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> ScmaModel {
    let mut flat_of_entry = Vec::new();
    let mut entry_of_flat = vec![usize::MAX; q.values.len()];
    let mut bs_of = Vec::new();
    let mut own_coef = Vec::new();
    let mut noise = Vec::new();
    let mut coords = Vec::new();
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for c in 0..cbs.count() {
                if q.get(f, m, c) != 0.0 {
                    let flat = q.idx(f, m, c);
                    entry_of_flat[flat] = flat_of_entry.len();
                    flat_of_entry.push(flat);
                    bs_of.push(f);
                    own_coef.push(cbs.combined_gain(state, f, m, c));
                    noise.push(cbs.combined_noise(state, f, m, c));
                    coords.push((f, m, c));
                }
            }
        }
    }
    // Only same-codebook entries of other stations interfere.
    let inter_rows = coords
        .iter()
        .map(|&(f, m, c)| {
            let mut row = Vec::new();
            for (f2, users2) in state.users_of_bs.iter().enumerate() {
                if f2 == f {
                    continue;
                }
                let w = cbs.cross_gain(state, f2, m, c, cfg.literal_scma_interference);
                for &m2 in users2 {
                    let e = entry_of_flat[q.idx(f2, m2, c)];
                    if e != usize::MAX {
                        row.push((e, w));
                    }
                }
            }
            row
        })
        .collect();
    let model = PowerModel {
        p_max: p_max.to_vec(),
        bs_of,
        own_coef,
        noise,
        inter_rows,
        harm_cols: Vec::new(),
        p_floor: cfg.p_floor_w,
    }
    .finish();
    ScmaModel { model, flat_of_entry }
}

/// One evaluation of the dual stationarity closed form: for every assigned
/// (user, codebook), `p = alpha / (lambda_f + coupling)` where the coupling
/// sums the marginal harm to same-codebook users of other stations.
/// Unassigned entries stay zero; results clamp to `[p_floor, p_max_f]`.
pub fn scma_power_closed_form(
    state: &ChannelState,
    cbs: &CodebookSet,
    q: &ScmaAssignment,
    p_current: &ScmaPower,
    scale: &ScaleField,
    duals: &DualState,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> ScmaPower {
    let sm = build_model(state, cbs, q, p_max, cfg);
    let p: Vec<f64> = sm
        .flat_of_entry
        .iter()
        .map(|&flat| p_current.p[flat].max(cfg.p_floor_w))
        .collect();
    let alpha: Vec<f64> = sm.flat_of_entry.iter().map(|&flat| scale.alpha[flat]).collect();
    let updated = sm.model.closed_form_sweep(&p, &duals.lambda, &alpha);
    let mut out = ScmaPower::zeros(state, cbs);
    for (e, &flat) in sm.flat_of_entry.iter().enumerate() {
        out.p[flat] = updated[e];
    }
    out
}

/// Power allocation result for the sparse-codebook scheme.
#[derive(Debug, Clone)]
pub struct ScmaPowerOutcome {
    /// The (budget-feasible) power field.
    pub power: ScmaPower,
    /// True sum rate at the returned powers, nats.
    pub sum_rate_nats: f64,
    /// Final budget multipliers; `iteration` holds the retightening rounds.
    pub dual: DualState,
    /// Bound coefficients at the returned operating point.
    pub scale: ScaleField,
    /// Convergence flags of the returned iterate.
    pub diag: PowerDiagnostics,
}

/// Allocates powers for a fixed binary codebook assignment with the same
/// retightening / dual / refinement loop as the power-domain scheme.
pub fn allocate_power_scma(
    state: &ChannelState,
    cbs: &CodebookSet,
    q: &ScmaAssignment,
    p_init: &ScmaPower,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> Result<ScmaPowerOutcome> {
    if q.mode != AssignmentMode::Binary {
        return Err(Error::InvalidArgument(
            "power allocation requires a binary assignment".into(),
        ));
    }
    let sm = build_model(state, cbs, q, p_max, cfg);
    let p0: Vec<f64> = sm.flat_of_entry.iter().map(|&flat| p_init.p[flat]).collect();
    let solve = allocate_power_engine(&sm.model, &p0, cfg);

    let mut power = ScmaPower::zeros(state, cbs);
    let mut scale = ScaleField::high_sinr(power.p.len());
    for (e, &flat) in sm.flat_of_entry.iter().enumerate() {
        power.p[flat] = solve.p[e];
        scale.alpha[flat] = solve.alpha[e];
        scale.beta[flat] = solve.beta[e];
    }
    Ok(ScmaPowerOutcome {
        power,
        sum_rate_nats: solve.sum_rate,
        dual: DualState {
            lambda: solve.lambda,
            step: cfg.step_rel,
            iteration: solve.rounds,
        },
        scale,
        diag: PowerDiagnostics {
            dual_converged: solve.dual_converged,
            fixed_point: solve.fixed_point,
            slack_ok: solve.slack_ok,
            rounds: solve.rounds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma::tests::state_from_gains;
    use crate::scma::{enumerate_codebooks, scma_sum_rate, EtaRule};

    #[test]
    fn closed_form_direct_value() {
        // alpha = 1, lambda = 0.25, no interferers: p = 4.
        let state = state_from_gains(vec![vec![0]], 2, vec![1.0, 1.0], 1.0);
        let cbs = enumerate_codebooks(2, 2, EtaRule::Uniform).unwrap();
        let cfg = SolverConfig::default();
        let mut q = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
        q.set(0, 0, 0, 1.0);
        let mut p = ScmaPower::zeros(&state, &cbs);
        p.set(0, 0, 0, 1.0);
        let scale = ScaleField::high_sinr(p.p.len());
        let duals = DualState::new(vec![0.25], 0.05);
        let out =
            scma_power_closed_form(&state, &cbs, &q, &p, &scale, &duals, &[10.0], &cfg);
        assert!((out.get(0, 0, 0) - 4.0).abs() < 1e-12);
        // Unassigned entries stay zero.
        assert_eq!(out.get(0, 0, 1), 0.0);
    }

    #[test]
    fn sole_user_spends_the_budget_on_its_codebook() {
        let state = state_from_gains(vec![vec![0]], 2, vec![3e-9, 1e-9], 1e-12);
        let cbs = enumerate_codebooks(2, 2, EtaRule::Uniform).unwrap();
        let cfg = SolverConfig::default();
        let mut q = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
        q.set(0, 0, 0, 1.0);
        let p0 = ScmaPower::uniform(&state, &cbs, &[2.0]);
        let out = allocate_power_scma(&state, &cbs, &q, &p0, &[2.0], &cfg).unwrap();
        assert!((out.power.get(0, 0, 0) - 2.0).abs() < 1e-5 * 2.0);
        assert!(out.diag.slack_ok && out.diag.fixed_point);
    }

    #[test]
    fn budget_feasible_and_beats_power_grid() {
        // One user holding two codebooks: classic two-channel split.
        let state = state_from_gains(vec![vec![0]], 4, vec![4e-9, 1e-9, 2e-9, 5e-10], 1e-12);
        let cbs = enumerate_codebooks(4, 2, EtaRule::Uniform).unwrap();
        let cfg = SolverConfig::default();
        let p_max = [2.0];
        let mut q = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
        let (ca, cb) = (0usize, 5usize); // {0,1} and {2,3}
        q.set(0, 0, ca, 1.0);
        q.set(0, 0, cb, 1.0);
        let p0 = ScmaPower::uniform(&state, &cbs, &p_max);
        let out = allocate_power_scma(&state, &cbs, &q, &p0, &p_max, &cfg).unwrap();
        assert!(out.power.consumed(&q, &state, 0) <= p_max[0] * (1.0 + 1e-6));

        let grid = crate::oracle::power_grid(1e-12, p_max[0], 100);
        let mut best = 0.0f64;
        for &pa in &grid {
            for &pb in &grid {
                if pa + pb > p_max[0] {
                    continue;
                }
                let mut p = ScmaPower::zeros(&state, &cbs);
                p.set(0, 0, ca, pa);
                p.set(0, 0, cb, pb);
                best = best.max(scma_sum_rate(&state, &cbs, &q, &p, false));
            }
        }
        assert!(
            out.sum_rate_nats >= 0.95 * best,
            "solver {} vs grid {best}",
            out.sum_rate_nats
        );
    }
}
