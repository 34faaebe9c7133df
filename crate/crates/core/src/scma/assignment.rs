//! Codebook assignment via relaxation, condensation, and a geometric
//! program, mirroring the subcarrier allocation of the power-domain scheme,
//! followed by reuse-cap-aware rounding.

use crate::config::SolverConfig;
use crate::convex::{agma_condense, solve_gp, GpProblem, Monomial, Posynomial};
use crate::hetnet::ChannelState;
use crate::{Error, Result};

use super::{scma_sum_rate, AssignmentMode, CodebookSet, ScmaAssignment, ScmaPower};

const T_BOUNDS: (f64, f64) = (1e-12, 1e6);

struct EntryBuild {
    t_var: Option<usize>,
    ratio: Posynomial,
}

struct GpBuild {
    problem: GpProblem,
    q_vars: Vec<(usize, usize, usize)>,
    entries: Vec<EntryBuild>,
}

fn build_gp(
    state: &ChannelState,
    cbs: &CodebookSet,
    p_eff: &ScmaPower,
    anchor: &ScmaAssignment,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> GpBuild {
    let mut q_vars = Vec::new();
    let mut var_of_flat = vec![usize::MAX; anchor.values.len()];
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for c in 0..cbs.count() {
                var_of_flat[anchor.idx(f, m, c)] = q_vars.len();
                q_vars.push((f, m, c));
            }
        }
    }
    let num_q = q_vars.len();
    let mut bounds = vec![(cfg.assign_floor, 1.0); num_q];
    let mut constraints = Vec::new();
    let mut entries = Vec::new();
    let mut obj_exps = vec![0.0; num_q];
    let mut t_vars_in_obj = Vec::new();

    for &(f, m, c) in &q_vars {
        let anchor_val =
            |f2: usize, m2: usize, c2: usize| anchor.get(f2, m2, c2).clamp(1e-3, 1.0);
        // Denominator: own eta-weighted power, cross-station same-codebook
        // power, noise.
        let mut x_terms: Vec<(Option<usize>, f64)> = Vec::new();
        let mut x_anchor: Vec<f64> = Vec::new();
        let own_coeff = cbs.combined_gain(state, f, m, c).max(1e-300)
            * p_eff.get(f, m, c).max(cfg.p_floor_w);
        x_terms.push((Some(var_of_flat[anchor.idx(f, m, c)]), own_coeff));
        x_anchor.push(own_coeff * anchor_val(f, m, c));
        for (f2, users2) in state.users_of_bs.iter().enumerate() {
            if f2 == f {
                continue;
            }
            let w = cbs.cross_gain(state, f2, m, c, cfg.literal_scma_interference).max(1e-300);
            for &m2 in users2 {
                let coeff = w * p_eff.get(f2, m2, c).max(cfg.p_floor_w);
                x_terms.push((Some(var_of_flat[anchor.idx(f2, m2, c)]), coeff));
                x_anchor.push(coeff * anchor_val(f2, m2, c));
            }
        }
        let sigma = cbs.combined_noise(state, f, m, c);
        x_terms.push((None, sigma));
        x_anchor.push(sigma);

        let (weights, _) = agma_condense(&x_anchor, &x_anchor).expect("positive anchor terms");
        let log_cx: f64 = x_terms
            .iter()
            .zip(&weights)
            .map(|((_, cf), u)| u * (cf / u).ln())
            .sum();
        // Numerator: everything except the own term (index 0).
        let ratio_terms: Vec<Monomial> = x_terms
            .iter()
            .enumerate()
            .skip(1)
            .map(|(_, (v, cf))| {
                let mut mono = Monomial::constant((cf.ln() - log_cx).exp());
                if let Some(vid) = v {
                    mono = mono.with_var(*vid, 1.0);
                }
                for ((v2, _), u) in x_terms.iter().zip(&weights) {
                    if let Some(vid2) = v2 {
                        mono = mono.with_var(*vid2, -u);
                    }
                }
                mono
            })
            .collect();
        let ratio = Posynomial { terms: ratio_terms };

        let t_var = if ratio.terms.len() == 1 {
            for &(v, e) in &ratio.terms[0].exponents {
                obj_exps[v] += e;
            }
            None
        } else {
            let t = bounds.len();
            bounds.push(T_BOUNDS);
            t_vars_in_obj.push(t);
            constraints
                .push(ratio.clone().scaled_by(&Monomial::constant(1.0).with_var(t, -1.0)));
            Some(t)
        };
        entries.push(EntryBuild { t_var, ratio });
    }

    // Per-station budget at the given powers.
    for (f, users) in state.users_of_bs.iter().enumerate() {
        let terms: Vec<Monomial> = users
            .iter()
            .flat_map(|&m| (0..cbs.count()).map(move |c| (m, c)))
            .map(|(m, c)| {
                Monomial::constant(p_eff.get(f, m, c).max(cfg.p_floor_w) / p_max[f])
                    .with_var(var_of_flat[anchor.idx(f, m, c)], 1.0)
            })
            .collect();
        constraints.push(Posynomial { terms });
    }
    // Per-(station, subcarrier) reuse cap, only where it can bind.
    let membership = cbs.count() * cbs.size / cbs.num_subcarriers.max(1);
    for (f, users) in state.users_of_bs.iter().enumerate() {
        if users.len() * membership <= cfg.reuse_cap {
            continue;
        }
        for n in 0..state.num_subcarriers {
            let terms: Vec<Monomial> = users
                .iter()
                .flat_map(|&m| {
                    (0..cbs.count()).filter(|&c| cbs.contains(c, n)).map(move |c| (m, c))
                })
                .map(|(m, c)| {
                    Monomial::constant(1.0 / cfg.reuse_cap as f64)
                        .with_var(var_of_flat[anchor.idx(f, m, c)], 1.0)
                })
                .collect();
            constraints.push(Posynomial { terms });
        }
    }
    // Optional per-user codebook cap.
    if let Some(cap) = cfg.per_user_codebook_cap {
        for (f, users) in state.users_of_bs.iter().enumerate() {
            for &m in users {
                let terms: Vec<Monomial> = (0..cbs.count())
                    .map(|c| {
                        Monomial::constant(1.0 / cap as f64)
                            .with_var(var_of_flat[anchor.idx(f, m, c)], 1.0)
                    })
                    .collect();
                constraints.push(Posynomial { terms });
            }
        }
    }

    let mut objective = Monomial::constant(1.0);
    for (v, e) in obj_exps.iter().enumerate() {
        if *e != 0.0 {
            objective = objective.with_var(v, *e);
        }
    }
    for t in t_vars_in_obj {
        objective = objective.with_var(t, 1.0);
    }
    let problem =
        GpProblem { bounds, objective: Posynomial::monomial(objective), constraints };
    GpBuild { problem, q_vars, entries }
}

fn prescale(
    state: &ChannelState,
    cbs: &CodebookSet,
    a: &mut ScmaAssignment,
    p_eff: &ScmaPower,
    p_max: &[f64],
    cfg: &SolverConfig,
) {
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for c in 0..cbs.count() {
                let v = a.get(f, m, c).clamp(cfg.assign_floor, 1.0);
                a.set(f, m, c, v);
            }
        }
        let used: f64 = users
            .iter()
            .flat_map(|&m| (0..cbs.count()).map(move |c| (m, c)))
            .map(|(m, c)| a.get(f, m, c) * p_eff.get(f, m, c).max(cfg.p_floor_w))
            .sum();
        if used > 0.98 * p_max[f] {
            let s = 0.98 * p_max[f] / used;
            for &m in users {
                for c in 0..cbs.count() {
                    a.set(f, m, c, (a.get(f, m, c) * s).max(cfg.assign_floor));
                }
            }
        }
        for n in 0..state.num_subcarriers {
            let load = a.subcarrier_load(state, cbs, f, n);
            let cap = 0.98 * cfg.reuse_cap as f64;
            if load > cap {
                let s = cap / load;
                for &m in users {
                    for c in 0..cbs.count() {
                        if cbs.contains(c, n) {
                            a.set(f, m, c, (a.get(f, m, c) * s).max(cfg.assign_floor));
                        }
                    }
                }
            }
        }
    }
}

/// Rounds a relaxed codebook assignment to binary greedily by relaxed
/// value (ties by user then codebook index), accepting a candidate only if
/// every subcarrier of its codebook stays within the reuse cap (and the
/// per-user cap, when configured). Values below `threshold` are dropped.
pub fn round_codebooks(
    state: &ChannelState,
    cbs: &CodebookSet,
    relaxed: &ScmaAssignment,
    cfg: &SolverConfig,
) -> ScmaAssignment {
    let mut out = ScmaAssignment::zeros(state, cbs, AssignmentMode::Binary);
    let mut load = vec![vec![0usize; state.num_subcarriers]; state.num_bs];
    let mut per_user = vec![0usize; state.num_users];
    let mut candidates: Vec<(f64, usize, usize, usize)> = Vec::new();
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for c in 0..cbs.count() {
                let v = relaxed.get(f, m, c);
                if v >= cfg.round_threshold {
                    candidates.push((v, f, m, c));
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite values")
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    for (_, f, m, c) in candidates {
        if let Some(cap) = cfg.per_user_codebook_cap {
            if per_user[m] >= cap {
                continue;
            }
        }
        if cbs.subcarriers(c).iter().all(|&n| load[f][n] < cfg.reuse_cap) {
            out.set(f, m, c, 1.0);
            for &n in cbs.subcarriers(c) {
                load[f][n] += 1;
            }
            per_user[m] += 1;
        }
    }
    out
}

/// Result of a codebook-assignment solve: the rounded binary assignment,
/// the relaxed iterate it came from, and the accepted relaxed objective
/// after each condensation round.
#[derive(Debug, Clone)]
pub struct CodebookOutcome {
    /// Rounded assignment within the reuse cap.
    pub assignment: ScmaAssignment,
    /// Relaxed assignment after the final accepted round.
    pub relaxed: ScmaAssignment,
    /// Relaxed sum rate (nats) at the start and after each accepted round.
    pub objective_trace: Vec<f64>,
    /// Every inner geometric program met its tolerance.
    pub gp_all_converged: bool,
}

/// Optimizes the relaxed codebook assignment at fixed powers by iterated
/// condensation plus geometric programming, then rounds within the reuse
/// cap.
pub fn allocate_codebooks(
    state: &ChannelState,
    cbs: &CodebookSet,
    p: &ScmaPower,
    q_init: &ScmaAssignment,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> Result<CodebookOutcome> {
    if q_init.mode != AssignmentMode::Relaxed {
        return Err(Error::InvalidArgument(
            "codebook allocation starts from a relaxed assignment".into(),
        ));
    }
    let mut current = q_init.clone();
    prescale(state, cbs, &mut current, p, p_max, cfg);
    let mut trace =
        vec![scma_sum_rate(state, cbs, &current, p, cfg.literal_scma_interference)];
    let mut gp_all_converged = true;

    for round in 0..cfg.condense_iters {
        let build = build_gp(state, cbs, p, &current, p_max, cfg);
        let mut x0 = vec![1.0; build.problem.num_vars()];
        for (vid, &(f, m, c)) in build.q_vars.iter().enumerate() {
            x0[vid] = current.get(f, m, c).clamp(cfg.assign_floor * 1.05, 0.999);
        }
        for e in &build.entries {
            if let Some(t) = e.t_var {
                x0[t] = (e.ratio.eval(&x0) * 1.2).clamp(T_BOUNDS.0 * 2.0, T_BOUNDS.1 * 0.5);
            }
        }
        let sol = solve_gp(&build.problem, cfg.gp_tol, cfg.gp_max_iter, Some(&x0)).map_err(
            |e| match e {
                Error::GpInfeasible(msg) => {
                    Error::GpInfeasible(format!("condensation round {round}: {msg}"))
                }
                other => other,
            },
        )?;
        gp_all_converged &= sol.converged;
        let mut cand = ScmaAssignment::zeros(state, cbs, AssignmentMode::Relaxed);
        for (vid, &(f, m, c)) in build.q_vars.iter().enumerate() {
            cand.set(f, m, c, sol.x[vid]);
        }
        let obj = scma_sum_rate(state, cbs, &cand, p, cfg.literal_scma_interference);
        let prev = *trace.last().expect("trace starts non-empty");
        if obj < prev - 1e-12 {
            break;
        }
        let gain = obj - prev;
        current = cand;
        trace.push(obj);
        if gain < cfg.condense_tol {
            break;
        }
    }
    let assignment = round_codebooks(state, cbs, &current, cfg);
    Ok(CodebookOutcome { assignment, relaxed: current, objective_trace: trace, gp_all_converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma::tests::state_from_gains;
    use crate::scma::{enumerate_codebooks, EtaRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> SolverConfig {
        SolverConfig { codebook_size: 2, reuse_cap: 2, ..SolverConfig::default() }
    }

    #[test]
    fn sole_user_gets_best_codebooks() {
        // One user, N = 4, U = 2, K = 2: reuse allows every subcarrier
        // twice, so the user can hold several codebooks; the best single
        // codebook (subcarriers with the largest gains) must be among them.
        let state = state_from_gains(vec![vec![0]], 4, vec![1e-8, 2e-9, 4e-9, 1e-9], 1e-12);
        let cbs = enumerate_codebooks(4, 2, EtaRule::Uniform).unwrap();
        let cfg = tiny_cfg();
        let p = ScmaPower::uniform(&state, &cbs, &[4.0]);
        let q0 = ScmaAssignment::uniform_relaxed(&state, &cbs, cfg.reuse_cap);
        let out = allocate_codebooks(&state, &cbs, &p, &q0, &[4.0], &cfg).unwrap();
        // Codebook {0, 2} has the two best subcarriers.
        let best_c = cbs.codebooks.iter().position(|c| c == &vec![0, 2]).unwrap();
        assert_eq!(out.assignment.get(0, 0, best_c), 1.0, "{:?}", out.assignment.values);
        out.assignment.check(&state, &cbs, cfg.reuse_cap).unwrap();
    }

    #[test]
    fn reuse_cap_never_exceeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let gains: Vec<f64> =
                (0..8).map(|_| 10f64.powf(rng.random_range(-10.0..-8.0))).collect();
            let state = state_from_gains(vec![vec![0, 1]], 4, gains, 1e-12);
            let cbs = enumerate_codebooks(4, 2, EtaRule::Uniform).unwrap();
            let cfg = tiny_cfg();
            let p = ScmaPower::uniform(&state, &cbs, &[4.0]);
            let q0 = ScmaAssignment::uniform_relaxed(&state, &cbs, cfg.reuse_cap);
            let out = allocate_codebooks(&state, &cbs, &p, &q0, &[4.0], &cfg).unwrap();
            out.assignment.check(&state, &cbs, cfg.reuse_cap).unwrap();
            for w in out.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8);
            }
        }
    }

    #[test]
    fn rounded_near_exhaustive_with_fixed_powers() {
        // F = 1, N = 4, U = 2, M = 2, K = 2: enumerate all q under the
        // reuse cap with fixed uniform powers.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for trial in 0..3 {
            let gains: Vec<f64> =
                (0..8).map(|_| 10f64.powf(rng.random_range(-10.0..-8.0))).collect();
            let state = state_from_gains(vec![vec![0, 1]], 4, gains, 1e-12);
            let cbs = enumerate_codebooks(4, 2, EtaRule::Uniform).unwrap();
            let cfg = tiny_cfg();
            let p = ScmaPower::uniform(&state, &cbs, &[4.0]);
            let q0 = ScmaAssignment::uniform_relaxed(&state, &cbs, cfg.reuse_cap);
            let out = allocate_codebooks(&state, &cbs, &p, &q0, &[4.0], &cfg).unwrap();
            let got = scma_sum_rate(&state, &cbs, &out.assignment, &p, false);

            let pairs = 2 * cbs.count();
            let mut best = 0.0f64;
            'mask: for mask in 0u32..(1 << pairs) {
                let mut q = ScmaAssignment::zeros(&state, &cbs, AssignmentMode::Binary);
                let mut load = vec![0usize; 4];
                let mut budget = 0.0;
                for bit in 0..pairs {
                    if mask & (1 << bit) == 0 {
                        continue;
                    }
                    let (m, c) = (bit / cbs.count(), bit % cbs.count());
                    for &n in cbs.subcarriers(c) {
                        load[n] += 1;
                        if load[n] > cfg.reuse_cap {
                            continue 'mask;
                        }
                    }
                    budget += p.get(0, m, c);
                    if budget > 4.0 * (1.0 + 1e-12) {
                        continue 'mask;
                    }
                    q.set(0, m, c, 1.0);
                }
                best = best.max(scma_sum_rate(&state, &cbs, &q, &p, false));
            }
            assert!(got >= 0.9 * best, "trial {trial}: rounded {got} vs exhaustive {best}");
        }
    }
}
