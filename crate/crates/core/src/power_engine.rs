//! Shared power-allocation engine.
//!
//! Both schemes reduce, once the assignment is fixed, to the same shape:
//! each active entry `e` (a user on a subcarrier, or a user on a codebook)
//! has SINR `gamma_e = k_e * p_e / D_e(p)` with a constant own-link gain
//! `k_e` and an affine denominator `D_e(p) = noise_e + sum_v A[e,v] p_v`
//! collecting interference from other active entries. The engine maximizes
//! the bound-tightened surrogate `sum alpha_e log(gamma_e) + beta_e`
//! subject to per-station budgets by alternating the closed-form
//! stationarity update with projected subgradient steps on the budget
//! multipliers, then polishing the pair to a complementary-slackness point
//! so the returned iterate is a genuine fixed point of the closed form.

use crate::config::SolverConfig;
use crate::convex::{scale_coeffs, subgradient_update, DualState, ScaleCoeffs};

/// Per-entry bound coefficients over a scheme's flat
/// (station, user, resource) layout. Entries outside the active assignment
/// keep the high-SINR start values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleField {
    /// Slope coefficients, one per flat entry.
    pub alpha: Vec<f64>,
    /// Offset coefficients, one per flat entry.
    pub beta: Vec<f64>,
}

impl ScaleField {
    /// High-SINR start: `alpha = 1`, `beta = 0` everywhere.
    pub fn high_sinr(len: usize) -> Self {
        ScaleField { alpha: vec![1.0; len], beta: vec![0.0; len] }
    }
}

/// Convergence diagnostics of a power solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerDiagnostics {
    /// The subgradient loop met its tolerance in the round that produced
    /// the returned iterate.
    pub dual_converged: bool,
    /// Re-evaluating the closed form moves the returned powers by less
    /// than 1e-8 relative.
    pub fixed_point: bool,
    /// Complementary slackness holds at the returned multipliers.
    pub slack_ok: bool,
    /// Bound-retightening rounds used.
    pub rounds: usize,
}

/// One active (station, entry) with its interference structure.
#[derive(Debug, Clone)]
pub(crate) struct PowerModel {
    /// Per-station budget in watts.
    pub p_max: Vec<f64>,
    /// Serving station of each active entry.
    pub bs_of: Vec<usize>,
    /// Own-link combined gain `k_e`.
    pub own_coef: Vec<f64>,
    /// Noise power in `D_e`.
    pub noise: Vec<f64>,
    /// Sparse rows of `A`: `D_e = noise_e + sum (coef * p_src)`.
    pub inter_rows: Vec<Vec<(usize, f64)>>,
    /// Transposed view: for entry `e`, the victims `v` with `A[v,e] != 0`.
    pub harm_cols: Vec<Vec<(usize, f64)>>,
    /// Smallest power kept on an active entry.
    pub p_floor: f64,
}

impl PowerModel {
    pub(crate) fn len(&self) -> usize {
        self.bs_of.len()
    }

    /// Builds the transposed interference view from the rows.
    pub(crate) fn finish(mut self) -> Self {
        let mut cols = vec![Vec::new(); self.len()];
        for (victim, row) in self.inter_rows.iter().enumerate() {
            for &(src, coef) in row {
                cols[src].push((victim, coef));
            }
        }
        self.harm_cols = cols;
        self
    }

    pub(crate) fn denominators(&self, p: &[f64]) -> Vec<f64> {
        self.inter_rows
            .iter()
            .zip(&self.noise)
            .map(|(row, sigma)| sigma + row.iter().map(|&(s, c)| c * p[s]).sum::<f64>())
            .collect()
    }

    pub(crate) fn gammas(&self, p: &[f64]) -> Vec<f64> {
        let denoms = self.denominators(p);
        (0..self.len()).map(|e| self.own_coef[e] * p[e] / denoms[e]).collect()
    }

    /// True sum rate `sum log(1 + gamma)` at `p`, in nats.
    pub(crate) fn sum_rate(&self, p: &[f64]) -> f64 {
        self.gammas(p).iter().map(|g| (1.0 + g).ln()).sum()
    }

    pub(crate) fn usage(&self, p: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.p_max.len()];
        for (e, &f) in self.bs_of.iter().enumerate() {
            u[f] += p[e];
        }
        u
    }

    /// One simultaneous closed-form update at fixed multipliers: for each
    /// entry, `p_e = alpha_e / (lambda_f + sum_v alpha_v A[v,e] / D_v)`,
    /// clamped to `[p_floor, p_max_f]`. A zero denominator (free budget, no
    /// victims) caps at the station budget.
    pub(crate) fn closed_form_sweep(&self, p: &[f64], lambda: &[f64], alpha: &[f64]) -> Vec<f64> {
        let denoms = self.denominators(p);
        (0..self.len())
            .map(|e| {
                let f = self.bs_of[e];
                let mut denom = lambda[f];
                for &(victim, coef) in &self.harm_cols[e] {
                    denom += alpha[victim] * coef / denoms[victim];
                }
                let raw = if denom > 0.0 { alpha[e] / denom } else { f64::INFINITY };
                raw.clamp(self.p_floor, self.p_max[f])
            })
            .collect()
    }
}

/// Power solve result in the engine's compact entry space.
#[derive(Debug, Clone)]
pub(crate) struct PowerSolve {
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sum_rate: f64,
    /// Subgradient loop met its tolerance in every retightening round used.
    pub dual_converged: bool,
    /// Closed-form re-evaluation moves `p` by < 1e-8 relative.
    pub fixed_point: bool,
    /// Complementary slackness holds to the refinement tolerance.
    pub slack_ok: bool,
    pub rounds: usize,
}

fn rel_delta(a: &[f64], b: &[f64], scale_floor: f64) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(scale_floor, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

// Iterates the closed form at fixed multipliers until it is a numerical
// fixed point. Damps on oscillation.
fn polish(
    model: &PowerModel,
    p: &mut Vec<f64>,
    lambda: &[f64],
    alpha: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> bool {
    let mut damping = 1.0;
    let mut prev = f64::INFINITY;
    for _ in 0..max_sweeps {
        let p_new = model.closed_form_sweep(p, lambda, alpha);
        let delta = rel_delta(&p_new, p, model.p_floor);
        if delta <= tol {
            *p = p_new;
            return true;
        }
        if delta > 0.9 * prev {
            damping = (damping * 0.7).max(0.05);
        }
        for (cur, new) in p.iter_mut().zip(&p_new) {
            *cur += damping * (new - *cur);
        }
        prev = delta;
    }
    false
}

// Drives each station's multiplier to complementary slackness by bisection,
// re-polishing the power fixed point at every probe. Stations whose budget
// is slack at zero price keep lambda = 0.
fn refine_kkt(
    model: &PowerModel,
    p: &mut Vec<f64>,
    lambda: &mut [f64],
    alpha: &[f64],
) -> (bool, bool) {
    let nf = model.p_max.len();
    let slack_tol: Vec<f64> = model.p_max.iter().map(|pm| 1e-10 * pm).collect();
    let mut fp = polish(model, p, lambda, alpha, 1e-11, 400);
    for _round in 0..6 {
        let mut all_ok = true;
        for f in 0..nf {
            let slack = model.p_max[f] - model.usage(p, f);
            if lambda[f] <= 0.0 && slack >= -slack_tol[f] {
                continue;
            }
            if slack.abs() <= slack_tol[f] {
                continue;
            }
            all_ok = false;
            // Bracket the budget-clearing price.
            let alpha_sum: f64 = (0..model.len())
                .filter(|e| model.bs_of[*e] == f)
                .map(|e| alpha[e])
                .sum();
            let scale = (alpha_sum / model.p_max[f]).max(1e-12);
            let (mut lo, mut hi);
            if slack < 0.0 {
                lo = lambda[f];
                hi = if lambda[f] > 0.0 { lambda[f] * 2.0 } else { scale };
                for _ in 0..200 {
                    lambda[f] = hi;
                    polish(model, p, lambda, alpha, 1e-9, 200);
                    if model.p_max[f] - model.usage(p, f) >= 0.0 {
                        break;
                    }
                    lo = hi;
                    hi *= 2.0;
                }
            } else {
                hi = lambda[f];
                lo = 0.0;
                // Zero price may already leave the budget slack; then the
                // constraint is simply inactive.
                lambda[f] = 0.0;
                polish(model, p, lambda, alpha, 1e-9, 200);
                if model.p_max[f] - model.usage(p, f) >= 0.0 {
                    continue;
                }
            }
            for _ in 0..120 {
                let mid = 0.5 * (lo + hi);
                lambda[f] = mid;
                polish(model, p, lambda, alpha, 1e-9, 200);
                let s = model.p_max[f] - model.usage(p, f);
                if s.abs() <= slack_tol[f] || (hi - lo) <= 1e-14 * hi.max(1.0) {
                    break;
                }
                if s < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        fp = polish(model, p, lambda, alpha, 1e-11, 400);
        if all_ok {
            let slack_ok = (0..nf).all(|f| {
                let slack = model.p_max[f] - model.usage(p, f);
                (lambda[f] <= 0.0 && slack >= -slack_tol[f]) || slack.abs() <= slack_tol[f]
            });
            if slack_ok {
                return (fp, true);
            }
        }
    }
    let slack_ok = (0..nf).all(|f| {
        let slack = model.p_max[f] - model.usage(p, f);
        lambda[f] * slack.abs() <= 1e-6 * model.p_max[f]
    });
    (fp, slack_ok)
}

impl PowerModel {
    fn usage(&self, p: &[f64], f: usize) -> f64 {
        self.bs_of
            .iter()
            .zip(p)
            .filter(|(bs, _)| **bs == f)
            .map(|(_, pw)| pw)
            .sum()
    }
}

/// Scales each station's powers down to its budget if needed. A refined
/// solve already satisfies the budgets; this is the safety net for
/// best-effort iterates.
fn enforce_budget(model: &PowerModel, p: &mut [f64]) {
    let usage = model.usage(p);
    let factors: Vec<f64> = usage
        .iter()
        .zip(&model.p_max)
        .map(|(u, pm)| if *u > *pm { pm / u } else { 1.0 })
        .collect();
    for (e, pw) in p.iter_mut().enumerate() {
        *pw *= factors[model.bs_of[e]];
    }
}

/// Full power allocation for a fixed assignment: bound-retightening outer
/// loop, subgradient dual loop inside, complementary-slackness refinement,
/// best-feasible tracking by true sum rate.
pub(crate) fn allocate_power_engine(
    model: &PowerModel,
    p_init: &[f64],
    cfg: &SolverConfig,
) -> PowerSolve {
    let ne = model.len();
    let nf = model.p_max.len();
    if ne == 0 {
        return PowerSolve {
            p: Vec::new(),
            lambda: vec![0.0; nf],
            alpha: Vec::new(),
            beta: Vec::new(),
            sum_rate: 0.0,
            dual_converged: true,
            fixed_point: true,
            slack_ok: true,
            rounds: 0,
        };
    }

    let mut alpha = vec![1.0; ne];
    let mut beta = vec![0.0; ne];
    let mut p: Vec<f64> = (0..ne)
        .map(|e| p_init[e].clamp(model.p_floor, model.p_max[model.bs_of[e]]))
        .collect();
    let mut lambda: Vec<f64> = (0..nf)
        .map(|f| {
            let a: f64 = (0..ne).filter(|e| model.bs_of[*e] == f).map(|e| alpha[e]).sum();
            a / model.p_max[f]
        })
        .collect();

    let mut best: Option<PowerSolve> = None;
    let mut rounds = 0;
    for _s in 0..cfg.inner_rounds.max(1) {
        rounds += 1;
        // Subgradient stage on the budget multipliers. Residuals are
        // normalized per station so one relative step size covers
        // heterogeneous budgets.
        let mut dual = DualState::new(lambda.clone(), cfg.step_rel);
        let mut dual_converged = false;
        for _t in 0..cfg.dual_iters {
            p = model.closed_form_sweep(&p, &dual.lambda, &alpha);
            let usage = model.usage(&p);
            let residual: Vec<f64> = usage
                .iter()
                .zip(&model.p_max)
                .map(|(u, pm)| (pm - u) / pm)
                .collect();
            let next = subgradient_update(&dual, &residual);
            let dl = next
                .lambda
                .iter()
                .zip(&dual.lambda)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            dual = next;
            if dl <= cfg.dual_tol {
                dual_converged = true;
                break;
            }
        }
        lambda = dual.lambda;

        let (fixed_point, slack_ok) = refine_kkt(model, &mut p, &mut lambda, &alpha);
        let mut p_feas = p.clone();
        enforce_budget(model, &mut p_feas);
        let rate = model.sum_rate(&p_feas);
        if best.as_ref().map_or(true, |b| rate > b.sum_rate) {
            best = Some(PowerSolve {
                p: p_feas,
                lambda: lambda.clone(),
                alpha: alpha.clone(),
                beta: beta.clone(),
                sum_rate: rate,
                dual_converged,
                fixed_point,
                slack_ok,
                rounds,
            });
        }

        // Retighten the rate bound at the current operating point.
        let gammas = model.gammas(&p);
        let mut max_shift = 0.0f64;
        for e in 0..ne {
            let c = match scale_coeffs(gammas[e].max(1e-30)) {
                Ok(c) => c,
                Err(_) => ScaleCoeffs::high_sinr(),
            };
            max_shift = max_shift.max((c.alpha - alpha[e]).abs());
            alpha[e] = c.alpha;
            beta[e] = c.beta;
        }
        if max_shift <= 1e-7 {
            break;
        }
    }
    let mut out = best.expect("at least one retightening round runs");
    out.rounds = rounds;
    out
}
