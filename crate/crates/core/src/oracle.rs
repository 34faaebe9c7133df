//! Exhaustive baselines for tiny instances.
//!
//! Enumerates every binary assignment within the scheme's caps and, for
//! each, every combination of powers on a geometric grid within the
//! station budgets, and returns the best true sum rate found. Instances
//! whose enumeration would be too large are rejected with exact counts.

use crate::config::SolverConfig;
use crate::hetnet::ChannelState;
use crate::noma::{AssignmentMode, NomaAssignment};
use crate::power_engine::PowerModel;
use crate::scma::{enumerate_codebooks, CodebookSet, EtaRule, ScmaAssignment};
use crate::{Error, Result};

/// Which scheme the baseline enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Power-domain superposition on subcarriers.
    Noma,
    /// Sparse codebook assignment.
    Scma,
}

const MAX_ASSIGNMENTS: u128 = 10_000;
const MAX_LEAVES: u128 = 500_000_000;

/// Geometric grid of `points` powers from `lo` to `hi` inclusive.
pub fn power_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![hi];
    }
    let ratio = (hi / lo).powf(1.0 / (points - 1) as f64);
    let mut grid: Vec<f64> = (0..points).map(|k| lo * ratio.powi(k as i32)).collect();
    grid[points - 1] = hi;
    grid
}

/// Largest grid point at or below `value`, or 0 when `value` is below the
/// grid (budget-safe snapping for dominance checks).
pub fn snap_down(value: f64, grid: &[f64]) -> f64 {
    let mut best = 0.0;
    for &g in grid {
        if g <= value {
            best = g;
        } else {
            break;
        }
    }
    best
}

// Depth-first maximization over grid powers for the active entries of one
// assignment, with per-station budget pruning.
fn best_rate_over_grid(model: &PowerModel, grid: &[f64]) -> f64 {
    let ne = model.bs_of.len();
    if ne == 0 {
        return 0.0;
    }
    let mut p = vec![0.0; ne];
    let mut remaining: Vec<f64> = model.p_max.clone();
    let mut best = 0.0f64;
    fn dfs(
        model: &PowerModel,
        grid: &[f64],
        e: usize,
        p: &mut Vec<f64>,
        remaining: &mut Vec<f64>,
        best: &mut f64,
    ) {
        if e == p.len() {
            let rate = model.sum_rate(p);
            if rate > *best {
                *best = rate;
            }
            return;
        }
        let f = model.bs_of[e];
        let budget = remaining[f] * (1.0 + 1e-12);
        for &v in grid {
            if v > budget {
                break;
            }
            p[e] = v;
            remaining[f] -= v;
            dfs(model, grid, e + 1, p, remaining, best);
            remaining[f] += v;
        }
        p[e] = 0.0;
    }
    dfs(model, grid, 0, &mut p, &mut remaining, &mut best);
    best
}

fn validate_grid(grid_points: usize) -> Result<()> {
    if grid_points == 0 || grid_points > 100 {
        return Err(Error::InvalidArgument(format!(
            "grid_points must lie in 1..=100, got {grid_points}"
        )));
    }
    Ok(())
}

/// Exhaustive best sum rate for the power-domain scheme: all per-subcarrier
/// user subsets of size at most `max_superposed`, crossed with grid powers.
pub fn noma_oracle(
    state: &ChannelState,
    p_max: &[f64],
    cfg: &SolverConfig,
    grid_points: usize,
) -> Result<f64> {
    validate_grid(grid_points)?;
    let l_t = cfg.max_superposed;
    // Per-slot subset counts for the size guard.
    let mut total: u128 = 1;
    for users in &state.users_of_bs {
        if users.len() > 16 {
            return Err(Error::InstanceTooLarge(format!(
                "{} users in one cell (max 16 for enumeration)",
                users.len()
            )));
        }
        let per_slot: u128 = (0..=l_t.min(users.len()))
            .map(|j| crate::rxcomplexity::binomial(users.len() as u64, j as u64).unwrap_or(0))
            .sum();
        for _ in 0..state.num_subcarriers {
            total = total.saturating_mul(per_slot);
        }
    }
    if total > MAX_ASSIGNMENTS {
        return Err(Error::InstanceTooLarge(format!(
            "{total} assignments exceed the {MAX_ASSIGNMENTS} cap"
        )));
    }

    // Materialize per-(station, subcarrier) subset choices.
    let mut slots: Vec<(usize, usize, Vec<u32>)> = Vec::new();
    for (f, users) in state.users_of_bs.iter().enumerate() {
        let masks: Vec<u32> = (0..(1u32 << users.len()))
            .filter(|m| m.count_ones() as usize <= l_t)
            .collect();
        for n in 0..state.num_subcarriers {
            slots.push((f, n, masks.clone()));
        }
    }

    // Leaf-count guard across all assignments.
    let grid_f = grid_points as u128;
    let mut leaves: u128 = 0;
    let mut odometer = vec![0usize; slots.len()];
    loop {
        let active: u32 = odometer
            .iter()
            .zip(&slots)
            .map(|(&k, (_, _, masks))| masks[k].count_ones())
            .sum();
        leaves = leaves.saturating_add(grid_f.saturating_pow(active));
        if leaves > MAX_LEAVES {
            return Err(Error::InstanceTooLarge(format!(
                "more than {MAX_LEAVES} grid evaluations required"
            )));
        }
        if !advance(&mut odometer, &slots) {
            break;
        }
    }

    let orders = crate::noma::DecodeOrders::compute(state);
    let grid = power_grid(cfg.p_floor_w, p_max.iter().cloned().fold(f64::MIN, f64::max), grid_points);
    let mut best = 0.0f64;
    let mut odometer = vec![0usize; slots.len()];
    loop {
        let mut rho = NomaAssignment::zeros(state, AssignmentMode::Binary);
        for (&k, (f, n, masks)) in odometer.iter().zip(&slots) {
            let mask = masks[k];
            for (bit, &m) in state.users_of_bs[*f].iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    rho.set(*f, m, *n, 1.0);
                }
            }
        }
        let nm = crate::noma::power::build_model(state, &rho, &orders, p_max, cfg.p_floor_w);
        // Per-station grids would differ only in the top point; prune by
        // budget instead and share one grid capped at each station budget.
        best = best.max(best_rate_over_grid(&nm.model, &grid));
        if !advance(&mut odometer, &slots) {
            break;
        }
    }
    Ok(best)
}

fn advance(odometer: &mut [usize], slots: &[(usize, usize, Vec<u32>)]) -> bool {
    for (k, slot) in odometer.iter_mut().zip(slots) {
        *k += 1;
        if *k < slot.2.len() {
            return true;
        }
        *k = 0;
    }
    false
}

/// Exhaustive best sum rate for the sparse-codebook scheme: all binary
/// (user, codebook) assignments within the reuse cap, crossed with grid
/// powers.
pub fn scma_oracle(
    state: &ChannelState,
    cbs: &CodebookSet,
    p_max: &[f64],
    cfg: &SolverConfig,
    grid_points: usize,
) -> Result<f64> {
    validate_grid(grid_points)?;
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for c in 0..cbs.count() {
                candidates.push((f, m, c));
            }
        }
    }
    if candidates.len() > 13 {
        return Err(Error::InstanceTooLarge(format!(
            "{} (user, codebook) pairs give 2^{} assignments (cap {MAX_ASSIGNMENTS})",
            candidates.len(),
            candidates.len()
        )));
    }

    let grid = power_grid(cfg.p_floor_w, p_max.iter().cloned().fold(f64::MIN, f64::max), grid_points);
    let mut best = 0.0f64;
    'mask: for mask in 0u32..(1u32 << candidates.len()) {
        let mut load = vec![vec![0usize; state.num_subcarriers]; state.num_bs];
        let mut per_user = vec![0usize; state.num_users];
        let mut q = ScmaAssignment::zeros(state, cbs, AssignmentMode::Binary);
        for (bit, &(f, m, c)) in candidates.iter().enumerate() {
            if mask & (1 << bit) == 0 {
                continue;
            }
            per_user[m] += 1;
            if let Some(cap) = cfg.per_user_codebook_cap {
                if per_user[m] > cap {
                    continue 'mask;
                }
            }
            for &n in cbs.subcarriers(c) {
                load[f][n] += 1;
                if load[f][n] > cfg.reuse_cap {
                    continue 'mask;
                }
            }
            q.set(f, m, c, 1.0);
        }
        let sm = crate::scma::power::build_model(state, cbs, &q, p_max, cfg);
        best = best.max(best_rate_over_grid(&sm.model, &grid));
    }
    Ok(best)
}

/// Dispatch by scheme: scheme parameters (superposition cap, codebook
/// shape, reuse cap) come from the solver config.
pub fn brute_force_oracle(
    state: &ChannelState,
    p_max: &[f64],
    scheme: Scheme,
    cfg: &SolverConfig,
    grid_points: usize,
) -> Result<f64> {
    match scheme {
        Scheme::Noma => noma_oracle(state, p_max, cfg, grid_points),
        Scheme::Scma => {
            let cbs =
                enumerate_codebooks(state.num_subcarriers, cfg.codebook_size, EtaRule::Uniform)?;
            scma_oracle(state, &cbs, p_max, cfg, grid_points)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma::tests::state_from_gains;
    use crate::noma::{noma_sum_rate, NomaPower};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_includes_endpoints() {
        let g = power_grid(1e-12, 10.0, 16);
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], 1e-12);
        assert_eq!(g[15], 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(power_grid(1e-12, 4.0, 1), vec![4.0]);
    }

    #[test]
    fn snap_down_lands_on_grid() {
        let g = power_grid(1e-12, 10.0, 10);
        assert_eq!(snap_down(10.0, &g), 10.0);
        assert_eq!(snap_down(1e-13, &g), 0.0);
        let s = snap_down(0.5, &g);
        assert!(g.contains(&s) && s <= 0.5);
    }

    #[test]
    fn single_user_single_subcarrier_oracle() {
        let state = state_from_gains(vec![vec![0]], 1, vec![1e-9], 1e-12);
        let cfg = SolverConfig::default();
        let r = noma_oracle(&state, &[10.0], &cfg, 10).unwrap();
        let expect = (1.0 + 1e-9 * 10.0 / 1e-12).ln();
        assert!((r - expect).abs() < 1e-12);
    }

    #[test]
    fn oracle_dominates_random_feasible_grid_points() {
        let state = state_from_gains(vec![vec![0, 1]], 2, vec![2e-9, 1e-9, 5e-10, 3e-9], 1e-12);
        let cfg = SolverConfig { max_superposed: 1, ..SolverConfig::default() };
        let p_max = [4.0];
        let oracle = noma_oracle(&state, &p_max, &cfg, 12).unwrap();
        let grid = power_grid(cfg.p_floor_w, p_max[0], 12);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            // Random cap-respecting assignment with random grid powers.
            let mut rho = NomaAssignment::zeros(&state, AssignmentMode::Binary);
            let mut p = NomaPower::zeros(&state);
            let mut budget = p_max[0];
            for n in 0..2 {
                if rng.random::<f64>() < 0.8 {
                    let m = rng.random_range(0..2);
                    let v = grid[rng.random_range(0..grid.len())];
                    if v <= budget {
                        rho.set(0, m, n, 1.0);
                        p.set(0, m, n, v);
                        budget -= v;
                    }
                }
            }
            let rate = noma_sum_rate(&state, &rho, &p);
            assert!(rate <= oracle + 1e-9, "sampled {rate} beats oracle {oracle}");
        }
    }

    #[test]
    fn too_large_is_rejected_with_counts() {
        let state = state_from_gains(
            vec![(0..10).collect()],
            4,
            vec![1e-9; 40],
            1e-12,
        );
        let cfg = SolverConfig::default();
        match noma_oracle(&state, &[10.0], &cfg, 10) {
            Err(Error::InstanceTooLarge(msg)) => assert!(msg.contains("assignments")),
            other => panic!("expected InstanceTooLarge, got {other:?}"),
        }
        match brute_force_oracle(&state, &[10.0], Scheme::Scma, &cfg, 10) {
            Err(Error::InstanceTooLarge(_)) => {}
            other => panic!("expected InstanceTooLarge, got {other:?}"),
        }
    }
}
