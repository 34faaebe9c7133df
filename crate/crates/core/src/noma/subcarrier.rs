//! Subcarrier assignment via relaxation, condensation, and a geometric
//! program.
//!
//! With powers fixed, maximizing the sum rate equals minimizing the product
//! over entries of `(interference + noise) / (interference + noise + own)`.
//! Relaxing the assignment to `[0, 1]` makes numerator and denominator
//! posynomials in the assignment variables; condensing each denominator
//! into a monomial around the current point turns every factor into a
//! posynomial ratio, giving a geometric program. Solving and re-condensing
//! repeats until the relaxed objective stops improving.

use crate::config::SolverConfig;
use crate::convex::{agma_condense, solve_gp, GpProblem, Monomial, Posynomial};
use crate::hetnet::ChannelState;
use crate::{Error, Result};

use super::{noma_sum_rate, AssignmentMode, DecodeOrders, NomaAssignment, NomaPower};

const T_BOUNDS: (f64, f64) = (1e-12, 1e6);

struct EntryBuild {
    t_var: Option<usize>,
    // num * condensed-denominator^{-1}, in assignment variables only.
    ratio: Posynomial,
}

struct GpBuild {
    problem: GpProblem,
    rho_vars: Vec<(usize, usize, usize)>,
    entries: Vec<EntryBuild>,
}

fn build_gp(
    state: &ChannelState,
    orders: &DecodeOrders,
    p_eff: &NomaPower,
    anchor: &NomaAssignment,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> GpBuild {
    let mut rho_vars = Vec::new();
    let mut var_of_flat = vec![usize::MAX; anchor.values.len()];
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for n in 0..state.num_subcarriers {
                var_of_flat[anchor.idx(f, m, n)] = rho_vars.len();
                rho_vars.push((f, m, n));
            }
        }
    }
    let num_rho = rho_vars.len();
    let mut bounds = vec![(cfg.assign_floor, 1.0); num_rho];
    let mut constraints = Vec::new();
    let mut entries = Vec::new();

    // Objective: product of the per-entry ratios. Monomial ratios fold in
    // directly; posynomial numerators go through an auxiliary variable
    // `t >= ratio` and contribute `t` to the product. The constant scale of
    // the objective is irrelevant to the argmin and is dropped to keep the
    // coefficient representable.
    let mut obj_exps = vec![0.0; num_rho];
    let mut t_vars_in_obj = Vec::new();

    for &(f, m, n) in &rho_vars {
        let anchor_val = |f2: usize, m2: usize, n2: usize| -> f64 {
            anchor.get(f2, m2, n2).clamp(1e-3, 1.0)
        };
        let gv = state.gain(f, m, n).max(1e-300);
        // Denominator term list: (variable, coefficient), None = constant.
        let mut x_terms: Vec<(Option<usize>, f64)> = Vec::new();
        let mut x_anchor: Vec<f64> = Vec::new();
        for &i in &orders.orders[f][n] {
            let coeff = gv * p_eff.get(f, i, n).max(cfg.p_floor_w);
            x_terms.push((Some(var_of_flat[anchor.idx(f, i, n)]), coeff));
            x_anchor.push(coeff * anchor_val(f, i, n));
            if i == m {
                break;
            }
        }
        let own_pos = x_terms.len() - 1;
        for (f2, users2) in state.users_of_bs.iter().enumerate() {
            if f2 == f {
                continue;
            }
            for &m2 in users2 {
                let coeff =
                    state.gain(f2, m, n).max(1e-300) * p_eff.get(f2, m2, n).max(cfg.p_floor_w);
                x_terms.push((Some(var_of_flat[anchor.idx(f2, m2, n)]), coeff));
                x_anchor.push(coeff * anchor_val(f2, m2, n));
            }
        }
        x_terms.push((None, state.noise(f, m, n)));
        x_anchor.push(state.noise(f, m, n));

        let (weights, _) = agma_condense(&x_anchor, &x_anchor).expect("positive anchor terms");
        // Condensed denominator: coeff exp(sum u_i ln(c_i / u_i)), variable
        // exponents u_i on each denominator variable.
        let log_cx: f64 = x_terms
            .iter()
            .zip(&weights)
            .map(|((_, c), u)| u * (c / u).ln())
            .sum();
        let ratio_terms: Vec<Monomial> = x_terms
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != own_pos)
            .map(|(_, (v, c))| {
                let mut mono = Monomial::constant((c.ln() - log_cx).exp());
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
            let mono = &ratio.terms[0];
            for &(v, e) in &mono.exponents {
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

    // Per-station budget with the given powers.
    for (f, users) in state.users_of_bs.iter().enumerate() {
        let terms: Vec<Monomial> = users
            .iter()
            .flat_map(|&m| (0..state.num_subcarriers).map(move |n| (m, n)))
            .map(|(m, n)| {
                Monomial::constant(p_eff.get(f, m, n).max(cfg.p_floor_w) / p_max[f])
                    .with_var(var_of_flat[anchor.idx(f, m, n)], 1.0)
            })
            .collect();
        constraints.push(Posynomial { terms });
    }
    // Per-subcarrier superposition cap, only where it can bind.
    for (f, users) in state.users_of_bs.iter().enumerate() {
        if users.len() <= cfg.max_superposed {
            continue;
        }
        for n in 0..state.num_subcarriers {
            let terms: Vec<Monomial> = users
                .iter()
                .map(|&m| {
                    Monomial::constant(1.0 / cfg.max_superposed as f64)
                        .with_var(var_of_flat[anchor.idx(f, m, n)], 1.0)
                })
                .collect();
            constraints.push(Posynomial { terms });
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
    GpBuild { problem, rho_vars, entries }
}

// Pulls a relaxed assignment into the box and scales each station (and
// each over-cap subcarrier group) to strict constraint feasibility.
fn prescale(
    state: &ChannelState,
    a: &mut NomaAssignment,
    p_eff: &NomaPower,
    p_max: &[f64],
    cfg: &SolverConfig,
) {
    for (f, users) in state.users_of_bs.iter().enumerate() {
        for &m in users {
            for n in 0..state.num_subcarriers {
                let v = a.get(f, m, n).clamp(cfg.assign_floor, 1.0);
                a.set(f, m, n, v);
            }
        }
        let used: f64 = users
            .iter()
            .flat_map(|&m| (0..state.num_subcarriers).map(move |n| (m, n)))
            .map(|(m, n)| a.get(f, m, n) * p_eff.get(f, m, n).max(cfg.p_floor_w))
            .sum();
        if used > 0.98 * p_max[f] {
            let s = 0.98 * p_max[f] / used;
            for &m in users {
                for n in 0..state.num_subcarriers {
                    a.set(f, m, n, (a.get(f, m, n) * s).max(cfg.assign_floor));
                }
            }
        }
        if users.len() > cfg.max_superposed {
            for n in 0..state.num_subcarriers {
                let tot: f64 = users.iter().map(|&m| a.get(f, m, n)).sum();
                let cap = 0.98 * cfg.max_superposed as f64;
                if tot > cap {
                    let s = cap / tot;
                    for &m in users {
                        a.set(f, m, n, (a.get(f, m, n) * s).max(cfg.assign_floor));
                    }
                }
            }
        }
    }
}

/// Relaxed assignment produced by the condensation loop, with the accepted
/// relaxed objective after each round (non-decreasing by construction).
#[derive(Debug, Clone)]
pub struct SubcarrierOutcome {
    /// Relaxed assignment, entries in `[assign_floor, 1]`.
    pub assignment: NomaAssignment,
    /// Relaxed sum rate (nats) at the start and after each accepted round.
    pub objective_trace: Vec<f64>,
    /// Every inner geometric program met its tolerance.
    pub gp_all_converged: bool,
}

/// Optimizes the relaxed subcarrier assignment at fixed powers: condense
/// the rate-ratio denominators around the current point, solve the
/// resulting geometric program, repeat until the relaxed objective change
/// drops below `condense_tol` or the round cap. A round that fails to
/// improve keeps the previous point and stops.
pub fn allocate_subcarriers(
    state: &ChannelState,
    p: &NomaPower,
    rho_init: &NomaAssignment,
    p_max: &[f64],
    cfg: &SolverConfig,
) -> Result<SubcarrierOutcome> {
    if rho_init.mode != AssignmentMode::Relaxed {
        return Err(Error::InvalidArgument(
            "subcarrier allocation starts from a relaxed assignment".into(),
        ));
    }
    let orders = DecodeOrders::compute(state);
    let mut current = rho_init.clone();
    prescale(state, &mut current, p, p_max, cfg);
    let mut trace = vec![noma_sum_rate(state, &current, p)];
    let mut gp_all_converged = true;

    for round in 0..cfg.condense_iters {
        let build = build_gp(state, &orders, p, &current, p_max, cfg);
        let mut x0 = vec![1.0; build.problem.num_vars()];
        for (vid, &(f, m, n)) in build.rho_vars.iter().enumerate() {
            x0[vid] = current.get(f, m, n).clamp(cfg.assign_floor * 1.05, 0.999);
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
        let mut cand = NomaAssignment::zeros(state, AssignmentMode::Relaxed);
        for (vid, &(f, m, n)) in build.rho_vars.iter().enumerate() {
            cand.set(f, m, n, sol.x[vid]);
        }
        let obj = noma_sum_rate(state, &cand, p);
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
    Ok(SubcarrierOutcome { assignment: current, objective_trace: trace, gp_all_converged })
}
