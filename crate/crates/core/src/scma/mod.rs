//! Sparse-codebook scheme: system model and solver.
//!
//! Users are assigned codebooks, fixed size-`U` subsets of the `N`
//! subcarriers with power-split weights `eta` summing to one. Receivers
//! resolve same-station codebook collisions in code space, so a user's
//! SINR sees only cross-station power on its own codebook plus noise.

mod assignment;
pub(crate) mod power;
mod solve;

pub use assignment::{allocate_codebooks, round_codebooks, CodebookOutcome};
pub use power::{allocate_power_scma, scma_power_closed_form, ScmaPowerOutcome};
pub use solve::{solve_scma, ScmaSolution};

pub use crate::noma::AssignmentMode;

use crate::hetnet::ChannelState;
use crate::{Error, Result};

/// Rule for the per-subcarrier power-split weights of a codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaRule {
    /// Every subcarrier of a codebook gets weight `1 / U`.
    Uniform,
}

/// The codebook dictionary: all size-`U` subcarrier subsets (lexicographic)
/// with their power-split weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    /// Number of subcarriers the set is built over.
    pub num_subcarriers: usize,
    /// Subcarriers per codebook.
    pub size: usize,
    /// Sorted subcarrier ids per codebook, lexicographic order.
    pub codebooks: Vec<Vec<usize>>,
    /// Weights aligned with `codebooks`; each row sums to 1.
    pub eta: Vec<Vec<f64>>,
}

impl CodebookSet {
    /// Number of codebooks.
    pub fn count(&self) -> usize {
        self.codebooks.len()
    }

    /// Subcarriers of codebook `c`.
    pub fn subcarriers(&self, c: usize) -> &[usize] {
        &self.codebooks[c]
    }

    /// Whether codebook `c` contains subcarrier `n`.
    pub fn contains(&self, c: usize, n: usize) -> bool {
        self.codebooks[c].binary_search(&n).is_ok()
    }

    /// Weight of subcarrier `n` in codebook `c` (zero when absent).
    pub fn eta(&self, c: usize, n: usize) -> f64 {
        match self.codebooks[c].binary_search(&n) {
            Ok(k) => self.eta[c][k],
            Err(_) => 0.0,
        }
    }

    /// Own-link combined gain of codebook `c` for user `m` under station
    /// `f`: the eta-weighted sum of the member subcarrier gains.
    pub fn combined_gain(&self, state: &ChannelState, f: usize, m: usize, c: usize) -> f64 {
        self.codebooks[c]
            .iter()
            .zip(&self.eta[c])
            .map(|(&n, &w)| w * state.gain(f, m, n))
            .sum()
    }

    /// Eta-weighted noise power seen by user `m` on codebook `c`.
    pub fn combined_noise(&self, state: &ChannelState, f: usize, m: usize, c: usize) -> f64 {
        self.codebooks[c]
            .iter()
            .zip(&self.eta[c])
            .map(|(&n, &w)| w * state.noise(f, m, n))
            .sum()
    }

    /// Cross-link combined gain from station `f_src` to user `m` for
    /// codebook `c`. The default sums the member subcarriers with their
    /// weights; the literal variant sums the raw gain over all subcarriers.
    pub fn cross_gain(
        &self,
        state: &ChannelState,
        f_src: usize,
        m: usize,
        c: usize,
        literal: bool,
    ) -> f64 {
        if literal {
            (0..state.num_subcarriers).map(|n| state.gain(f_src, m, n)).sum()
        } else {
            self.codebooks[c]
                .iter()
                .zip(&self.eta[c])
                .map(|(&n, &w)| w * state.gain(f_src, m, n))
                .sum()
        }
    }
}

/// Enumerates all `C(N, U)` codebooks in lexicographic order with weights
/// per `eta_rule`.
pub fn enumerate_codebooks(n: usize, u: usize, eta_rule: EtaRule) -> Result<CodebookSet> {
    if u == 0 || u > n {
        return Err(Error::InvalidArgument(format!(
            "codebook size {u} must lie in 1..={n}"
        )));
    }
    let mut codebooks = Vec::new();
    let mut current: Vec<usize> = (0..u).collect();
    loop {
        codebooks.push(current.clone());
        // Advance the rightmost position that has room, lexicographically.
        let Some(i) = (0..u).rev().find(|&i| current[i] != i + n - u) else {
            break;
        };
        current[i] += 1;
        for j in i + 1..u {
            current[j] = current[j - 1] + 1;
        }
    }
    let eta = match eta_rule {
        EtaRule::Uniform => vec![vec![1.0 / u as f64; u]; codebooks.len()],
    };
    Ok(CodebookSet { num_subcarriers: n, size: u, codebooks, eta })
}

/// Codebook-to-user assignment, one value per (station, user, codebook).
#[derive(Debug, Clone, PartialEq)]
pub struct ScmaAssignment {
    pub num_bs: usize,
    pub num_users: usize,
    pub num_codebooks: usize,
    /// Flat layout `(f * num_users + m) * num_codebooks + c`.
    pub values: Vec<f64>,
    pub mode: AssignmentMode,
}

impl ScmaAssignment {
    /// All-zero assignment in the given mode.
    pub fn zeros(state: &ChannelState, cbs: &CodebookSet, mode: AssignmentMode) -> Self {
        ScmaAssignment {
            num_bs: state.num_bs,
            num_users: state.num_users,
            num_codebooks: cbs.count(),
            values: vec![0.0; state.num_bs * state.num_users * cbs.count()],
            mode,
        }
    }

    /// Uniform relaxed start meeting the per-subcarrier reuse cap exactly:
    /// every subcarrier belongs to `C(N-1, U-1)` codebooks, so the share is
    /// `min(1, K / (M_f * C(N-1, U-1)))`.
    pub fn uniform_relaxed(state: &ChannelState, cbs: &CodebookSet, reuse_cap: usize) -> Self {
        let mut a = Self::zeros(state, cbs, AssignmentMode::Relaxed);
        let membership = if cbs.num_subcarriers > 0 {
            cbs.count() * cbs.size / cbs.num_subcarriers
        } else {
            1
        };
        for (f, users) in state.users_of_bs.iter().enumerate() {
            let share =
                (reuse_cap as f64 / (users.len() * membership.max(1)) as f64).min(1.0);
            for &m in users {
                for c in 0..cbs.count() {
                    a.set(f, m, c, share);
                }
            }
        }
        a
    }

    #[inline]
    pub(crate) fn idx(&self, f: usize, m: usize, c: usize) -> usize {
        (f * self.num_users + m) * self.num_codebooks + c
    }

    /// Assignment value for (station, user, codebook).
    #[inline]
    pub fn get(&self, f: usize, m: usize, c: usize) -> f64 {
        self.values[self.idx(f, m, c)]
    }

    /// Sets the assignment value for (station, user, codebook).
    #[inline]
    pub fn set(&mut self, f: usize, m: usize, c: usize, v: f64) {
        let i = self.idx(f, m, c);
        self.values[i] = v;
    }

    /// Occupancy of subcarrier `n` at station `f`: assignments touching it.
    pub fn subcarrier_load(
        &self,
        state: &ChannelState,
        cbs: &CodebookSet,
        f: usize,
        n: usize,
    ) -> f64 {
        state.users_of_bs[f]
            .iter()
            .map(|&m| {
                (0..cbs.count())
                    .filter(|&c| cbs.contains(c, n))
                    .map(|c| self.get(f, m, c))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Verifies mode-consistent values and the reuse cap on every
    /// (station, subcarrier).
    pub fn check(&self, state: &ChannelState, cbs: &CodebookSet, reuse_cap: usize) -> Result<()> {
        for v in &self.values {
            let ok = match self.mode {
                AssignmentMode::Binary => *v == 0.0 || *v == 1.0,
                AssignmentMode::Relaxed => (0.0..=1.0 + 1e-12).contains(v),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "assignment value {v} violates {:?} mode",
                    self.mode
                )));
            }
        }
        for f in 0..state.num_bs {
            for n in 0..state.num_subcarriers {
                let load = self.subcarrier_load(state, cbs, f, n);
                if load > reuse_cap as f64 * (1.0 + 1e-9) {
                    return Err(Error::InvalidArgument(format!(
                        "subcarrier ({f}, {n}) reused {load} > cap {reuse_cap}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Transmit powers, one value per (station, user, codebook), watts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmaPower {
    pub num_bs: usize,
    pub num_users: usize,
    pub num_codebooks: usize,
    /// Same flat layout as [`ScmaAssignment`].
    pub p: Vec<f64>,
}

impl ScmaPower {
    /// All-zero power field.
    pub fn zeros(state: &ChannelState, cbs: &CodebookSet) -> Self {
        ScmaPower {
            num_bs: state.num_bs,
            num_users: state.num_users,
            num_codebooks: cbs.count(),
            p: vec![0.0; state.num_bs * state.num_users * cbs.count()],
        }
    }

    /// Uniform split of each station's budget over its (user, codebook)
    /// pairs.
    pub fn uniform(state: &ChannelState, cbs: &CodebookSet, p_max: &[f64]) -> Self {
        let mut pw = Self::zeros(state, cbs);
        for (f, users) in state.users_of_bs.iter().enumerate() {
            let share = p_max[f] / (users.len() * cbs.count()) as f64;
            for &m in users {
                for c in 0..cbs.count() {
                    pw.set(f, m, c, share);
                }
            }
        }
        pw
    }

    #[inline]
    pub(crate) fn idx(&self, f: usize, m: usize, c: usize) -> usize {
        (f * self.num_users + m) * self.num_codebooks + c
    }

    /// Power on (station, user, codebook).
    #[inline]
    pub fn get(&self, f: usize, m: usize, c: usize) -> f64 {
        self.p[self.idx(f, m, c)]
    }

    /// Sets the power on (station, user, codebook).
    #[inline]
    pub fn set(&mut self, f: usize, m: usize, c: usize, v: f64) {
        let i = self.idx(f, m, c);
        self.p[i] = v;
    }

    /// Budget consumed by station `f` under assignment `q`.
    pub fn consumed(&self, q: &ScmaAssignment, state: &ChannelState, f: usize) -> f64 {
        state.users_of_bs[f]
            .iter()
            .flat_map(|&m| (0..self.num_codebooks).map(move |c| (m, c)))
            .map(|(m, c)| q.get(f, m, c) * self.get(f, m, c))
            .sum()
    }
}

/// SINR of user `m` on codebook `c` under station `f`: eta-weighted own
/// received power over cross-station same-codebook power plus noise. Zero
/// when unassigned. `literal_interference` selects the all-subcarrier
/// cross-gain variant.
pub fn scma_sinr(
    state: &ChannelState,
    cbs: &CodebookSet,
    q: &ScmaAssignment,
    p: &ScmaPower,
    f: usize,
    m: usize,
    c: usize,
    literal_interference: bool,
) -> f64 {
    let share = q.get(f, m, c);
    if share == 0.0 {
        return 0.0;
    }
    let own = cbs.combined_gain(state, f, m, c) * p.get(f, m, c);
    let mut interference = 0.0;
    for (f2, users2) in state.users_of_bs.iter().enumerate() {
        if f2 == f {
            continue;
        }
        let cell_power: f64 =
            users2.iter().map(|&m2| q.get(f2, m2, c) * p.get(f2, m2, c)).sum();
        interference += cbs.cross_gain(state, f2, m, c, literal_interference) * cell_power;
    }
    share * own / (interference + cbs.combined_noise(state, f, m, c))
}

/// System sum rate `sum log(1 + sinr)` over all served
/// (station, user, codebook) triples, in nats.
pub fn scma_sum_rate(
    state: &ChannelState,
    cbs: &CodebookSet,
    q: &ScmaAssignment,
    p: &ScmaPower,
    literal_interference: bool,
) -> f64 {
    let mut rate = 0.0;
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for c in 0..cbs.count() {
                rate +=
                    (1.0 + scma_sinr(state, cbs, q, p, f, m, c, literal_interference)).ln();
            }
        }
    }
    rate
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::noma::tests::state_from_gains;

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_codebooks(8, 2, EtaRule::Uniform).unwrap().count(), 28);
        assert_eq!(enumerate_codebooks(5, 5, EtaRule::Uniform).unwrap().count(), 1);
        let cbs = enumerate_codebooks(4, 2, EtaRule::Uniform).unwrap();
        assert_eq!(cbs.count(), 6);
        assert_eq!(
            cbs.codebooks,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        for c in 0..cbs.count() {
            assert_eq!(cbs.eta[c], vec![0.5, 0.5]);
        }
        assert!(enumerate_codebooks(4, 5, EtaRule::Uniform).is_err());
        assert!(enumerate_codebooks(4, 0, EtaRule::Uniform).is_err());
    }

    #[test]
    fn eta_rows_sum_to_one() {
        let cbs = enumerate_codebooks(8, 2, EtaRule::Uniform).unwrap();
        for row in &cbs.eta {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sinr_direct_evaluation() {
        // Single cell, one user, N = 2, gains (2, 4), eta = (1/2, 1/2),
        // p = 2, noise 1: gamma = 2 * (0.5*2 + 0.5*4) / 1 = 6.
        let state = state_from_gains(vec![vec![0]], 2, vec![2.0, 4.0], 1.0);
        let cbs = enumerate_codebooks(2, 2, EtaRule::Uniform).unwrap();
        let mut q = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
        q.set(0, 0, 0, 1.0);
        let mut p = ScmaPower::zeros(&state, &cbs);
        p.set(0, 0, 0, 2.0);
        let gamma = scma_sinr(&state, &cbs, &q, &p, 0, 0, 0, false);
        assert!((gamma - 6.0).abs() < 1e-15);
        // Unassigned -> zero.
        q.set(0, 0, 0, 0.0);
        assert_eq!(scma_sinr(&state, &cbs, &q, &p, 0, 0, 0, false), 0.0);
    }

    #[test]
    fn interference_strictly_hurts() {
        // Two stations sharing codebook 0; raising the interferer's power
        // strictly lowers the victim's SINR.
        let gains = vec![
            2.0, 1.0, 0.5, 0.5, // station 0 to users 0, 1
            0.3, 0.3, 1.0, 2.0, // station 1 to users 0, 1
        ];
        let state = state_from_gains(vec![vec![0], vec![1]], 2, gains, 1.0);
        let cbs = enumerate_codebooks(2, 2, EtaRule::Uniform).unwrap();
        let mut q = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
        q.set(0, 0, 0, 1.0);
        q.set(1, 1, 0, 1.0);
        let mut p = ScmaPower::zeros(&state, &cbs);
        p.set(0, 0, 0, 2.0);
        p.set(1, 1, 0, 1.0);
        let before = scma_sinr(&state, &cbs, &q, &p, 0, 0, 0, false);
        p.set(1, 1, 0, 2.0);
        let after = scma_sinr(&state, &cbs, &q, &p, 0, 0, 0, false);
        assert!(after < before);
        // The literal variant counts more interference, never less.
        let literal = scma_sinr(&state, &cbs, &q, &p, 0, 0, 0, true);
        assert!(literal <= after);
    }

    #[test]
    fn sum_rate_cases() {
        let state = state_from_gains(vec![vec![0]], 2, vec![1.0, 1.0], 1.0);
        let cbs = enumerate_codebooks(2, 2, EtaRule::Uniform).unwrap();
        let q0 = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
        let p = ScmaPower::zeros(&state, &cbs);
        assert_eq!(scma_sum_rate(&state, &cbs, &q0, &p, false), 0.0);
        // gamma = 1 -> log 2.
        let mut q = q0.clone();
        q.set(0, 0, 0, 1.0);
        let mut p1 = ScmaPower::zeros(&state, &cbs);
        p1.set(0, 0, 0, 1.0);
        assert!((scma_sum_rate(&state, &cbs, &q, &p1, false) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn isolated_cells_add_up() {
        let gains = vec![
            4.0, 4.0, 0.0, 0.0, // station 0
            0.0, 0.0, 9.0, 9.0, // station 1
        ];
        let state = state_from_gains(vec![vec![0], vec![1]], 2, gains, 1.0);
        let cbs = enumerate_codebooks(2, 2, EtaRule::Uniform).unwrap();
        let mut q = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
        q.set(0, 0, 0, 1.0);
        q.set(1, 1, 0, 1.0);
        let mut p = ScmaPower::zeros(&state, &cbs);
        p.set(0, 0, 0, 2.0);
        p.set(1, 1, 0, 0.5);
        let expected = (1.0 + 4.0 * 2.0).ln() + (1.0 + 9.0 * 0.5).ln();
        assert!((scma_sum_rate(&state, &cbs, &q, &p, false) - expected).abs() < 1e-12);
    }

    #[test]
    fn single_cell_reduces_to_pure_snr() {
        let state = state_from_gains(vec![vec![0, 1]], 4, (1..=8).map(|v| v as f64).collect(), 2.0);
        let cbs = enumerate_codebooks(4, 2, EtaRule::Uniform).unwrap();
        let mut q = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
        let mut p = ScmaPower::zeros(&state, &cbs);
        q.set(0, 0, 1, 1.0);
        p.set(0, 0, 1, 3.0);
        q.set(0, 1, 4, 1.0);
        p.set(0, 1, 4, 5.0);
        for (f, m, c, pw) in [(0usize, 0usize, 1usize, 3.0f64), (0, 1, 4, 5.0)] {
            let direct = (1.0
                + pw * cbs.combined_gain(&state, f, m, c) / cbs.combined_noise(&state, f, m, c))
            .ln();
            let got = (1.0 + scma_sinr(&state, &cbs, &q, &p, f, m, c, false)).ln();
            assert!((direct - got).abs() < 1e-15);
        }
    }
}
