//! Power-domain superposition scheme: system model and solver.
//!
//! Each subcarrier of a station may carry up to `L_T` superimposed user
//! signals. Receivers cancel the signals of users that come later in the
//! per-subcarrier decode order (sorted by descending channel gain) and see
//! the earlier ones as interference, together with all cross-station power
//! on the same subcarrier.

pub(crate) mod power;
mod solve;
mod subcarrier;

pub use power::{allocate_power, noma_power_closed_form, NomaPowerOutcome};
pub use solve::{solve_noma, NomaSolution};
pub use subcarrier::{allocate_subcarriers, SubcarrierOutcome};

use crate::hetnet::ChannelState;
use crate::{Error, Result};

/// Whether assignment values are binary or relaxed into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentMode {
    /// Values in `{0, 1}`.
    Binary,
    /// Values in `[0, 1]`, interpreted as time shares.
    Relaxed,
}

/// Subcarrier-to-user assignment, one value per (station, user, subcarrier).
#[derive(Debug, Clone, PartialEq)]
pub struct NomaAssignment {
    pub num_bs: usize,
    pub num_users: usize,
    pub num_subcarriers: usize,
    /// Flat layout `(f * num_users + m) * num_subcarriers + n`.
    pub values: Vec<f64>,
    pub mode: AssignmentMode,
}

impl NomaAssignment {
    /// All-zero assignment in the given mode.
    pub fn zeros(state: &ChannelState, mode: AssignmentMode) -> Self {
        NomaAssignment {
            num_bs: state.num_bs,
            num_users: state.num_users,
            num_subcarriers: state.num_subcarriers,
            values: vec![0.0; state.num_bs * state.num_users * state.num_subcarriers],
            mode,
        }
    }

    /// Uniform relaxed start `min(1, L_T / M_f)` on every served
    /// (user, subcarrier) pair, which meets the per-subcarrier cap exactly.
    pub fn uniform_relaxed(state: &ChannelState, max_superposed: usize) -> Self {
        let mut a = Self::zeros(state, AssignmentMode::Relaxed);
        for (f, users) in state.users_of_bs.iter().enumerate() {
            let share = (max_superposed as f64 / users.len() as f64).min(1.0);
            for &m in users {
                for n in 0..state.num_subcarriers {
                    a.set(f, m, n, share);
                }
            }
        }
        a
    }

    #[inline]
    pub(crate) fn idx(&self, f: usize, m: usize, n: usize) -> usize {
        (f * self.num_users + m) * self.num_subcarriers + n
    }

    /// Assignment value for (station, user, subcarrier).
    #[inline]
    pub fn get(&self, f: usize, m: usize, n: usize) -> f64 {
        self.values[self.idx(f, m, n)]
    }

    /// Sets the assignment value for (station, user, subcarrier).
    #[inline]
    pub fn set(&mut self, f: usize, m: usize, n: usize, v: f64) {
        let i = self.idx(f, m, n);
        self.values[i] = v;
    }

    /// Verifies mode-consistent values and the per-subcarrier cap.
    pub fn check(&self, state: &ChannelState, max_superposed: usize) -> Result<()> {
        for (f, users) in state.users_of_bs.iter().enumerate() {
            for n in 0..self.num_subcarriers {
                let mut total = 0.0;
                for &m in users {
                    let v = self.get(f, m, n);
                    let ok = match self.mode {
                        AssignmentMode::Binary => v == 0.0 || v == 1.0,
                        AssignmentMode::Relaxed => (0.0..=1.0 + 1e-12).contains(&v),
                    };
                    if !ok {
                        return Err(Error::InvalidArgument(format!(
                            "assignment value {v} at ({f}, {m}, {n}) violates {:?} mode",
                            self.mode
                        )));
                    }
                    total += v;
                }
                if total > max_superposed as f64 * (1.0 + 1e-9) {
                    return Err(Error::InvalidArgument(format!(
                        "subcarrier ({f}, {n}) loaded {total} > cap {max_superposed}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Transmit powers, one value per (station, user, subcarrier), watts.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaPower {
    pub num_bs: usize,
    pub num_users: usize,
    pub num_subcarriers: usize,
    /// Same flat layout as [`NomaAssignment`].
    pub p: Vec<f64>,
}

impl NomaPower {
    /// All-zero power field.
    pub fn zeros(state: &ChannelState) -> Self {
        NomaPower {
            num_bs: state.num_bs,
            num_users: state.num_users,
            num_subcarriers: state.num_subcarriers,
            p: vec![0.0; state.num_bs * state.num_users * state.num_subcarriers],
        }
    }

    /// Uniform split of each station's budget over its served
    /// (user, subcarrier) pairs.
    pub fn uniform(state: &ChannelState, p_max: &[f64]) -> Self {
        let mut pw = Self::zeros(state);
        for (f, users) in state.users_of_bs.iter().enumerate() {
            let share = p_max[f] / (users.len() * state.num_subcarriers) as f64;
            for &m in users {
                for n in 0..state.num_subcarriers {
                    pw.set(f, m, n, share);
                }
            }
        }
        pw
    }

    #[inline]
    pub(crate) fn idx(&self, f: usize, m: usize, n: usize) -> usize {
        (f * self.num_users + m) * self.num_subcarriers + n
    }

    /// Power on (station, user, subcarrier).
    #[inline]
    pub fn get(&self, f: usize, m: usize, n: usize) -> f64 {
        self.p[self.idx(f, m, n)]
    }

    /// Sets the power on (station, user, subcarrier).
    #[inline]
    pub fn set(&mut self, f: usize, m: usize, n: usize, v: f64) {
        let i = self.idx(f, m, n);
        self.p[i] = v;
    }

    /// Budget consumed by station `f` under assignment `rho`.
    pub fn consumed(&self, rho: &NomaAssignment, state: &ChannelState, f: usize) -> f64 {
        state.users_of_bs[f]
            .iter()
            .flat_map(|&m| (0..self.num_subcarriers).map(move |n| (m, n)))
            .map(|(m, n)| rho.get(f, m, n) * self.get(f, m, n))
            .sum()
    }
}

/// Users of station `f` on subcarrier `n` sorted by descending channel
/// gain, ties broken by ascending user index. This is the decode order:
/// position 0 sees no same-station interference.
pub fn decode_order(state: &ChannelState, f: usize, n: usize) -> Vec<usize> {
    let mut users = state.users_of_bs[f].clone();
    users.sort_by(|a, b| {
        state
            .gain(f, *b, n)
            .partial_cmp(&state.gain(f, *a, n))
            .expect("channel gains are finite")
    });
    users
}

/// Decode orders for every (station, subcarrier), computed once per state.
#[derive(Debug, Clone)]
pub struct DecodeOrders {
    /// `orders[f][n]` lists global user ids in decode order.
    pub orders: Vec<Vec<Vec<usize>>>,
}

impl DecodeOrders {
    /// Computes all per-(station, subcarrier) orders.
    pub fn compute(state: &ChannelState) -> Self {
        let orders = (0..state.num_bs)
            .map(|f| (0..state.num_subcarriers).map(|n| decode_order(state, f, n)).collect())
            .collect();
        DecodeOrders { orders }
    }
}

/// SINR of user `m` on subcarrier `n` under station `f`: own received power
/// over same-station power of earlier-decoded users plus cross-station
/// power plus noise. Zero when the entry is unassigned.
pub fn noma_sinr(
    state: &ChannelState,
    rho: &NomaAssignment,
    p: &NomaPower,
    f: usize,
    m: usize,
    n: usize,
) -> f64 {
    let own_share = rho.get(f, m, n);
    if own_share == 0.0 {
        return 0.0;
    }
    let g = state.gain(f, m, n);
    let mut interference = 0.0;
    for &i in &decode_order(state, f, n) {
        if i == m {
            break;
        }
        interference += g * rho.get(f, i, n) * p.get(f, i, n);
    }
    for f2 in 0..state.num_bs {
        if f2 == f {
            continue;
        }
        let cell_power: f64 = state.users_of_bs[f2]
            .iter()
            .map(|&m2| rho.get(f2, m2, n) * p.get(f2, m2, n))
            .sum();
        interference += state.gain(f2, m, n) * cell_power;
    }
    own_share * g * p.get(f, m, n) / (interference + state.noise(f, m, n))
}

/// System sum rate `sum log(1 + sinr)` over all served
/// (station, user, subcarrier) triples, in nats.
pub fn noma_sum_rate(state: &ChannelState, rho: &NomaAssignment, p: &NomaPower) -> f64 {
    let mut rate = 0.0;
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for n in 0..state.num_subcarriers {
                rate += (1.0 + noma_sinr(state, rho, p, f, m, n)).ln();
            }
        }
    }
    rate
}

/// Rounds a relaxed assignment to binary: per (station, subcarrier), the up
/// to `max_superposed` users with the largest relaxed values among those at
/// or above `threshold` are selected, ties broken by ascending user index.
pub fn round_assignment(
    state: &ChannelState,
    relaxed: &NomaAssignment,
    max_superposed: usize,
    threshold: f64,
) -> NomaAssignment {
    let mut out = NomaAssignment::zeros(state, AssignmentMode::Binary);
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for n in 0..state.num_subcarriers {
            let mut candidates: Vec<(f64, usize)> = users
                .iter()
                .map(|&m| (relaxed.get(f, m, n), m))
                .filter(|(v, _)| *v >= threshold)
                .collect();
            candidates.sort_by(|a, b| {
                b.0.partial_cmp(&a.0).expect("finite values").then(a.1.cmp(&b.1))
            });
            for (_, m) in candidates.into_iter().take(max_superposed) {
                out.set(f, m, n, 1.0);
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::hetnet::ChannelState;

    /// Hand-built state: explicit gains, unit noise by default.
    pub(crate) fn state_from_gains(
        users_of_bs: Vec<Vec<usize>>,
        num_subcarriers: usize,
        gains: Vec<f64>,
        noise: f64,
    ) -> ChannelState {
        let num_bs = users_of_bs.len();
        let num_users = users_of_bs.iter().map(|u| u.len()).sum();
        assert_eq!(gains.len(), num_bs * num_users * num_subcarriers);
        ChannelState {
            num_bs,
            num_users,
            num_subcarriers,
            noise: vec![noise; gains.len()],
            gain: gains,
            users_of_bs,
        }
    }

    #[test]
    fn decode_order_sorts_by_gain() {
        // Users (0, 1, 2) with gains (4, 1, 9) -> order (2, 0, 1).
        let state = state_from_gains(vec![vec![0, 1, 2]], 1, vec![4.0, 1.0, 9.0], 1.0);
        assert_eq!(decode_order(&state, 0, 0), vec![2, 0, 1]);
    }

    #[test]
    fn decode_order_tie_break_and_singleton() {
        let state = state_from_gains(vec![vec![0, 1, 2]], 1, vec![2.0, 2.0, 2.0], 1.0);
        assert_eq!(decode_order(&state, 0, 0), vec![0, 1, 2]);
        let single = state_from_gains(vec![vec![0]], 1, vec![5.0], 1.0);
        assert_eq!(decode_order(&single, 0, 0), vec![0]);
    }

    #[test]
    fn sinr_unassigned_is_zero() {
        let state = state_from_gains(vec![vec![0]], 1, vec![3.0], 1.0);
        let rho = NomaAssignment::zeros(&state, AssignmentMode::Binary);
        let mut p = NomaPower::zeros(&state);
        p.set(0, 0, 0, 5.0);
        assert_eq!(noma_sinr(&state, &rho, &p, 0, 0, 0), 0.0);
    }

    #[test]
    fn sinr_weaker_user_sees_stronger_power() {
        // Two users, gains (2, 1): user 1 is weaker, decoded second, and
        // sees user 0's power through its own channel. gamma_1 = 2/(1+1).
        let state = state_from_gains(vec![vec![0, 1]], 1, vec![2.0, 1.0], 1.0);
        let mut rho = NomaAssignment::zeros(&state, AssignmentMode::Binary);
        rho.set(0, 0, 0, 1.0);
        rho.set(0, 1, 0, 1.0);
        let mut p = NomaPower::zeros(&state);
        p.set(0, 0, 0, 1.0);
        p.set(0, 1, 0, 2.0);
        let gamma = noma_sinr(&state, &rho, &p, 0, 1, 0);
        assert!((gamma - 1.0).abs() < 1e-15);
        // First in decode order sees no same-station interference.
        let gamma0 = noma_sinr(&state, &rho, &p, 0, 0, 0);
        assert!((gamma0 - 2.0 * 1.0 / 1.0).abs() < 1e-15);
    }

    #[test]
    fn sum_rate_trivial_cases() {
        let state = state_from_gains(vec![vec![0]], 1, vec![1.0], 1.0);
        let mut rho = NomaAssignment::zeros(&state, AssignmentMode::Binary);
        rho.set(0, 0, 0, 1.0);
        let p = NomaPower::zeros(&state);
        assert_eq!(noma_sum_rate(&state, &rho, &p), 0.0);
        let mut p1 = NomaPower::zeros(&state);
        p1.set(0, 0, 0, 1.0);
        // gamma = 1 -> rate log 2.
        assert!((noma_sum_rate(&state, &rho, &p1) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn sum_rate_of_isolated_cells_adds_up() {
        // Two single-user stations with zero cross gains.
        let users = vec![vec![0], vec![1]];
        // gain layout: f, m, n with N = 1 and M = 2.
        let gains = vec![
            4.0, 0.0, // station 0 to users 0, 1
            0.0, 9.0, // station 1 to users 0, 1
        ];
        let state = state_from_gains(users, 1, gains, 1.0);
        let mut rho = NomaAssignment::zeros(&state, AssignmentMode::Binary);
        rho.set(0, 0, 0, 1.0);
        rho.set(1, 1, 0, 1.0);
        let mut p = NomaPower::zeros(&state);
        p.set(0, 0, 0, 2.0);
        p.set(1, 1, 0, 0.5);
        let expected = (1.0 + 4.0 * 2.0).ln() + (1.0 + 9.0 * 0.5).ln();
        assert!((noma_sum_rate(&state, &rho, &p) - expected).abs() < 1e-12);
    }

    #[test]
    fn rounding_keeps_top_values_over_threshold() {
        let state =
            state_from_gains(vec![vec![0, 1, 2, 3]], 1, vec![1.0, 1.0, 1.0, 1.0], 1.0);
        let mut relaxed = NomaAssignment::zeros(&state, AssignmentMode::Relaxed);
        for (m, v) in [(0, 0.9), (1, 0.7), (2, 0.2), (3, 0.05)] {
            relaxed.set(0, m, 0, v);
        }
        let rounded = round_assignment(&state, &relaxed, 3, 0.1);
        assert_eq!(
            [0, 1, 2, 3].map(|m| rounded.get(0, m, 0)),
            [1.0, 1.0, 1.0, 0.0]
        );
    }

    #[test]
    fn rounding_drops_all_below_threshold() {
        let state = state_from_gains(vec![vec![0, 1]], 1, vec![1.0, 1.0], 1.0);
        let mut relaxed = NomaAssignment::zeros(&state, AssignmentMode::Relaxed);
        relaxed.set(0, 0, 0, 0.09);
        relaxed.set(0, 1, 0, 0.05);
        let rounded = round_assignment(&state, &relaxed, 2, 0.1);
        assert!(rounded.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rounding_tie_breaks_by_index() {
        let state = state_from_gains(vec![vec![0, 1]], 1, vec![1.0, 1.0], 1.0);
        let mut relaxed = NomaAssignment::zeros(&state, AssignmentMode::Relaxed);
        relaxed.set(0, 0, 0, 0.5);
        relaxed.set(0, 1, 0, 0.5);
        let rounded = round_assignment(&state, &relaxed, 1, 0.1);
        assert_eq!(rounded.get(0, 0, 0), 1.0);
        assert_eq!(rounded.get(0, 1, 0), 0.0);
    }

    #[test]
    fn uniform_relaxed_meets_cap() {
        let state = state_from_gains(
            vec![vec![0, 1, 2]],
            2,
            vec![1.0; 6],
            1.0,
        );
        let a = NomaAssignment::uniform_relaxed(&state, 2);
        assert!((a.get(0, 0, 0) - 2.0 / 3.0).abs() < 1e-15);
        a.check(&state, 2).unwrap();
    }
}
