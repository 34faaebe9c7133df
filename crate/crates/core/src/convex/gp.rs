//! Log-space geometric-program solver.
//!
//! Variables are positive reals with box bounds; the objective and every
//! constraint are posynomials (sums of positive-coefficient power-law
//! terms), constraints in the form `posynomial <= 1`. Substituting
//! `y = log x` turns every posynomial into a log-sum-exp of affine
//! functions, so the problem becomes convex and is solved with a log
//! barrier driven by gradient descent with backtracking line search.

use crate::{Error, Result};

/// Index of a variable inside a [`GpProblem`].
pub type VarId = usize;

/// A single power-law term `coeff * prod_j x_j^{e_j}` with `coeff > 0`.
#[derive(Debug, Clone)]
pub struct Monomial {
    /// Positive multiplicative coefficient.
    pub coeff: f64,
    /// Sparse exponent list; variables absent from the list have exponent 0.
    pub exponents: Vec<(VarId, f64)>,
}

impl Monomial {
    /// Constant monomial with no variable dependence.
    pub fn constant(coeff: f64) -> Self {
        Monomial { coeff, exponents: Vec::new() }
    }

    /// Adds (or accumulates) an exponent on variable `v`.
    pub fn with_var(mut self, v: VarId, e: f64) -> Self {
        if e != 0.0 {
            if let Some(slot) = self.exponents.iter_mut().find(|(id, _)| *id == v) {
                slot.1 += e;
            } else {
                self.exponents.push((v, e));
            }
        }
        self
    }

    /// Evaluates the term at a positive point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeff * self.exponents.iter().map(|(v, e)| x[*v].powf(*e)).product::<f64>()
    }
}

/// Sum of monomials with positive coefficients.
#[derive(Debug, Clone, Default)]
pub struct Posynomial {
    /// The monomial terms; the posynomial is their sum.
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    /// Posynomial consisting of a single term.
    pub fn monomial(m: Monomial) -> Self {
        Posynomial { terms: vec![m] }
    }

    /// Evaluates the sum at a positive point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Multiplies every term by a monomial (used to fold ratios).
    pub fn scaled_by(mut self, m: &Monomial) -> Self {
        for t in &mut self.terms {
            t.coeff *= m.coeff;
            for &(v, e) in &m.exponents {
                *t = std::mem::replace(t, Monomial::constant(1.0)).with_var(v, e);
            }
        }
        self
    }
}

/// A geometric program: minimize a posynomial over box-bounded positive
/// variables subject to posynomial constraints `<= 1`.
#[derive(Debug, Clone)]
pub struct GpProblem {
    /// Per-variable bounds `(lo, hi)` with `0 < lo <= hi`.
    pub bounds: Vec<(f64, f64)>,
    /// Objective to minimize.
    pub objective: Posynomial,
    /// Constraints, each required `<= 1`.
    pub constraints: Vec<Posynomial>,
}

impl GpProblem {
    /// Number of variables.
    pub fn num_vars(&self) -> usize {
        self.bounds.len()
    }

    fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::InvalidArgument("geometric program has no variables".into()));
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo <= hi) {
                return Err(Error::InvalidArgument(format!(
                    "variable {i} has invalid bounds ({lo}, {hi})"
                )));
            }
        }
        if self.objective.terms.is_empty() {
            return Err(Error::InvalidArgument("objective has no terms".into()));
        }
        let all = std::iter::once(&self.objective).chain(&self.constraints);
        for (k, posy) in all.enumerate() {
            for t in &posy.terms {
                if !(t.coeff.is_finite() && t.coeff > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "posynomial {k} has nonpositive coefficient {}",
                        t.coeff
                    )));
                }
                for (v, e) in &t.exponents {
                    if *v >= self.bounds.len() || !e.is_finite() {
                        return Err(Error::InvalidArgument(format!(
                            "posynomial {k} references invalid variable {v} or exponent {e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Result of a GP solve. `converged` is false when the iteration budget ran
/// out first; the point is still feasible and `kkt_residual` reports how far
/// from stationarity it stopped.
#[derive(Debug, Clone)]
pub struct GpSolution {
    /// Optimal (or best-effort) positive variable values.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub objective: f64,
    /// Stationarity plus duality-gap estimate in relative-objective units.
    pub kkt_residual: f64,
    /// Whether `kkt_residual <= tol` was reached.
    pub converged: bool,
    /// Total gradient-descent steps across all barrier stages.
    pub iterations: usize,
}

// Affine form of a monomial in log coordinates: log_coeff + sum a_j y_j.
#[derive(Debug, Clone)]
struct LogTerm {
    log_coeff: f64,
    lin: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct LogSumExp {
    terms: Vec<LogTerm>,
}

impl LogSumExp {
    // Value, and optionally accumulate `scale * gradient` into `grad`.
    fn eval(&self, y: &[f64], grad: Option<(&mut [f64], f64)>) -> f64 {
        let mut zmax = f64::NEG_INFINITY;
        let mut zs = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let mut z = t.log_coeff;
            for &(j, a) in &t.lin {
                z += a * y[j];
            }
            zs.push(z);
            if z > zmax {
                zmax = z;
            }
        }
        let sum: f64 = zs.iter().map(|z| (z - zmax).exp()).sum();
        let val = zmax + sum.ln();
        if let Some((grad, scale)) = grad {
            for (t, z) in self.terms.iter().zip(&zs) {
                let w = scale * ((z - val).exp());
                for &(j, a) in &t.lin {
                    grad[j] += w * a;
                }
            }
        }
        val
    }
}

struct Compiled {
    n: usize,
    free_ids: Vec<usize>,
    y_lo: Vec<f64>,
    y_hi: Vec<f64>,
    objective: LogSumExp,
    constraints: Vec<LogSumExp>,
    // Count of barrier terms, for the duality-gap estimate.
    barrier_terms: f64,
}

fn compile(p: &GpProblem) -> Compiled {
    // Zero-width boxes freeze the variable; fold it into the coefficients.
    let mut free_of = vec![usize::MAX; p.num_vars()];
    let mut free_ids = Vec::new();
    let mut y_lo = Vec::new();
    let mut y_hi = Vec::new();
    for (v, (lo, hi)) in p.bounds.iter().enumerate() {
        if hi / lo > 1.0 + 1e-12 {
            free_of[v] = free_ids.len();
            free_ids.push(v);
            y_lo.push(lo.ln());
            y_hi.push(hi.ln());
        }
    }
    let lower = |posy: &Posynomial| -> LogSumExp {
        let terms = posy
            .terms
            .iter()
            .map(|t| {
                let mut log_coeff = t.coeff.ln();
                let mut lin = Vec::new();
                for &(v, e) in &t.exponents {
                    if free_of[v] == usize::MAX {
                        log_coeff += e * p.bounds[v].0.ln();
                    } else {
                        lin.push((free_of[v], e));
                    }
                }
                LogTerm { log_coeff, lin }
            })
            .collect();
        LogSumExp { terms }
    };
    let objective = lower(&p.objective);
    let constraints: Vec<_> = p.constraints.iter().map(lower).collect();
    let barrier_terms = constraints.len() as f64 + 2.0 * free_ids.len() as f64;
    Compiled { n: free_ids.len(), free_ids, y_lo, y_hi, objective, constraints, barrier_terms }
}

impl Compiled {
    // Barrier function value; +inf outside the strictly feasible region.
    fn barrier(&self, mu: f64, y: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut val = self.objective.eval(y, grad.as_deref_mut().map(|g| (g, 1.0)));
        for c in &self.constraints {
            let gval = c.eval(y, None);
            if gval >= 0.0 {
                return f64::INFINITY;
            }
            val -= mu * (-gval).ln();
            if let Some(g) = grad.as_deref_mut() {
                c.eval(y, Some((g, mu / (-gval))));
            }
        }
        for j in 0..self.n {
            let slo = y[j] - self.y_lo[j];
            let shi = self.y_hi[j] - y[j];
            if slo <= 0.0 || shi <= 0.0 {
                return f64::INFINITY;
            }
            val -= mu * (slo.ln() + shi.ln());
            if let Some(g) = grad.as_deref_mut() {
                g[j] += -mu / slo + mu / shi;
            }
        }
        val
    }

    fn max_constraint(&self, y: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.eval(y, None)).fold(f64::NEG_INFINITY, f64::max)
    }

    // Clamp into the box with a small interior margin.
    fn clamp_into_box(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let w = (self.y_hi[j] - self.y_lo[j]).max(1e-12);
            let margin = (1e-3 * w).min(1e-6);
            y[j] = y[j].clamp(self.y_lo[j] + margin, self.y_hi[j] - margin);
        }
    }
}

// Armijo backtracking descent on `f`; returns (value, grad_inf, steps).
fn descend<F>(
    f: &mut F,
    y: &mut [f64],
    grad_tol: f64,
    max_steps: usize,
    step_hint: &mut f64,
) -> (f64, f64, usize)
where
    F: FnMut(&[f64], Option<&mut [f64]>) -> f64,
{
    let n = y.len();
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut fv = f(y, Some(&mut grad));
    let mut steps = 0;
    loop {
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm <= grad_tol || steps >= max_steps {
            return (fv, gnorm, steps);
        }
        let gsq: f64 = grad.iter().map(|g| g * g).sum();
        // Cap the log-space displacement to keep exp() well-behaved.
        let mut t = step_hint.min(2.0 / gnorm);
        let mut accepted = false;
        for _ in 0..60 {
            for j in 0..n {
                trial[j] = y[j] - t * grad[j];
            }
            let fnew = f(&trial, None);
            if fnew <= fv - 1e-4 * t * gsq {
                y.copy_from_slice(&trial);
                *step_hint = (t * 2.0).min(1e6);
                fv = f(y, Some(&mut grad));
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Line search stalled at numerical precision.
            return (fv, gnorm, steps);
        }
        steps += 1;
    }
}

// Finds a strictly feasible y (constraints < 0) starting from y0, or
// reports infeasibility.
fn phase_one(c: &Compiled, y0: &[f64]) -> Result<Vec<f64>> {
    const FOUND: f64 = -1e-7;
    if c.constraints.is_empty() || c.max_constraint(y0) < FOUND {
        return Ok(y0.to_vec());
    }
    let n = c.n;
    // Augmented variables (y, s); minimize s subject to g_i(y) <= s.
    let mut z = vec![0.0; n + 1];
    z[..n].copy_from_slice(y0);
    z[n] = c.max_constraint(y0) + 1.0;
    let mut best = y0.to_vec();
    let mut found = false;
    let mut mu = 1.0;
    for _stage in 0..40 {
        let mut eval = |zv: &[f64], grad: Option<&mut [f64]>| -> f64 {
            let (y, s) = (&zv[..n], zv[n]);
            let mut val = s;
            let mut gbuf = grad;
            if let Some(g) = gbuf.as_deref_mut() {
                g.fill(0.0);
                g[n] = 1.0;
            }
            for con in &c.constraints {
                let gi = con.eval(y, None);
                let slack = s - gi;
                if slack <= 0.0 {
                    return f64::INFINITY;
                }
                val -= mu * slack.ln();
                if let Some(g) = gbuf.as_deref_mut() {
                    con.eval(y, Some((&mut g[..n], mu / slack)));
                    g[n] -= mu / slack;
                }
            }
            for j in 0..n {
                let slo = zv[j] - c.y_lo[j];
                let shi = c.y_hi[j] - zv[j];
                if slo <= 0.0 || shi <= 0.0 {
                    return f64::INFINITY;
                }
                val -= mu * (slo.ln() + shi.ln());
                if let Some(g) = gbuf.as_deref_mut() {
                    g[j] += -mu / slo + mu / shi;
                }
            }
            val
        };
        let mut hint = 1.0;
        let mut grad = vec![0.0; n + 1];
        let mut trial = vec![0.0; n + 1];
        let mut fv = eval(&z, Some(&mut grad));
        for _ in 0..400 {
            let maxg = c.max_constraint(&z[..n]);
            if maxg < FOUND {
                best.copy_from_slice(&z[..n]);
                found = true;
                break;
            }
            let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gnorm <= 1e-9 {
                break;
            }
            let gsq: f64 = grad.iter().map(|g| g * g).sum();
            let mut t = hint.min(2.0 / gnorm);
            let mut ok = false;
            for _ in 0..60 {
                for j in 0..=n {
                    trial[j] = z[j] - t * grad[j];
                }
                let fnew = eval(&trial, None);
                if fnew <= fv - 1e-4 * t * gsq {
                    z.copy_from_slice(&trial);
                    hint = (t * 2.0).min(1e6);
                    fv = eval(&z, Some(&mut grad));
                    ok = true;
                    break;
                }
                t *= 0.5;
            }
            if !ok {
                break;
            }
        }
        if found {
            break;
        }
        mu *= 0.25;
        if mu < 1e-10 {
            break;
        }
    }
    if !found {
        let worst = c.max_constraint(&z[..c.n]);
        return Err(Error::GpInfeasible(format!(
            "no strictly feasible point found; smallest attained max log-constraint = {worst:.3e}"
        )));
    }
    Ok(best)
}

/// Solves the geometric program to relative objective accuracy `tol`.
///
/// `max_iter` caps the gradient-descent steps of each barrier stage. An
/// optional strictly positive `init` warm-starts the solve; without one the
/// box midpoint is used, with a feasibility phase run first if needed.
/// Non-convergence within the budget returns the best iterate with
/// `converged = false`; an empty feasible set is an error.
pub fn solve_gp(
    problem: &GpProblem,
    tol: f64,
    max_iter: usize,
    init: Option<&[f64]>,
) -> Result<GpSolution> {
    problem.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let c = compile(problem);

    // Starting point in log coordinates.
    let mut y = vec![0.0; c.n];
    match init {
        Some(x0) => {
            if x0.len() != problem.num_vars() {
                return Err(Error::InvalidArgument(format!(
                    "init has {} entries for {} variables",
                    x0.len(),
                    problem.num_vars()
                )));
            }
            for (j, &v) in c.free_ids.iter().enumerate() {
                y[j] = if x0[v] > 0.0 { x0[v].ln() } else { c.y_lo[j] };
            }
        }
        None => {
            for j in 0..c.n {
                y[j] = 0.5 * (c.y_lo[j] + c.y_hi[j]);
            }
        }
    }
    c.clamp_into_box(&mut y);
    y = phase_one(&c, &y)?;
    c.clamp_into_box(&mut y);

    let mut mu = 1.0;
    let mut total_steps = 0usize;
    let mut hint = 1.0;
    let (mut fv, mut gnorm);
    loop {
        let mut eval = |yv: &[f64], grad: Option<&mut [f64]>| c.barrier(mu, yv, grad);
        let grad_tol = (0.3 * mu).max(0.5 * tol);
        let (v, g, steps) = descend(&mut eval, &mut y, grad_tol, max_iter, &mut hint);
        fv = v;
        gnorm = g;
        total_steps += steps;
        if mu * c.barrier_terms <= tol {
            break;
        }
        mu *= 0.5;
    }
    let _ = fv;

    let mut x: Vec<f64> = problem.bounds.iter().map(|(lo, _)| *lo).collect();
    for (j, &v) in c.free_ids.iter().enumerate() {
        x[v] = y[j].exp();
    }
    let objective = problem.objective.eval(&x);
    let kkt_residual = mu * c.barrier_terms + gnorm;
    Ok(GpSolution {
        x,
        objective,
        kkt_residual,
        converged: kkt_residual <= tol,
        iterations: total_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn var(v: VarId, e: f64) -> Monomial {
        Monomial::constant(1.0).with_var(v, e)
    }

    #[test]
    fn active_lower_bound() {
        // minimize x subject to x >= 1 written as x^-1 <= 1.
        let p = GpProblem {
            bounds: vec![(1e-3, 1e3)],
            objective: Posynomial::monomial(var(0, 1.0)),
            constraints: vec![Posynomial::monomial(var(0, -1.0))],
        };
        let s = solve_gp(&p, 1e-6, 500, None).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-3, "x = {}", s.x[0]);
        assert!(s.converged);
    }

    #[test]
    fn symmetric_product_constraint() {
        // minimize x + y subject to (xy)^-1 <= 1; optimum x = y = 1.
        let p = GpProblem {
            bounds: vec![(1e-3, 1e3), (1e-3, 1e3)],
            objective: Posynomial { terms: vec![var(0, 1.0), var(1, 1.0)] },
            constraints: vec![Posynomial::monomial(var(0, -1.0).with_var(1, -1.0))],
        };
        let s = solve_gp(&p, 1e-6, 500, None).unwrap();
        assert!((s.objective - 2.0).abs() < 2e-3, "obj = {}", s.objective);
        assert!((s.x[0] - 1.0).abs() < 5e-3);
        assert!((s.x[1] - 1.0).abs() < 5e-3);
    }

    #[test]
    fn fractional_exponent() {
        // minimize 2 sqrt(x) subject to 4/x <= 1; optimum x = 4, objective 4.
        let p = GpProblem {
            bounds: vec![(1e-3, 1e3)],
            objective: Posynomial::monomial(Monomial::constant(2.0).with_var(0, 0.5)),
            constraints: vec![Posynomial::monomial(Monomial::constant(4.0).with_var(0, -1.0))],
        };
        let s = solve_gp(&p, 1e-6, 500, None).unwrap();
        assert!((s.x[0] - 4.0).abs() < 4e-3, "x = {}", s.x[0]);
        assert!((s.objective - 4.0).abs() < 2e-3);
    }

    #[test]
    fn infeasible_is_reported() {
        // 2x <= 1 forces x <= 0.5 but the box starts at 1.
        let p = GpProblem {
            bounds: vec![(1.0, 2.0)],
            objective: Posynomial::monomial(var(0, 1.0)),
            constraints: vec![Posynomial::monomial(Monomial::constant(2.0).with_var(0, 1.0))],
        };
        match solve_gp(&p, 1e-6, 500, None) {
            Err(Error::GpInfeasible(_)) => {}
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn phase_one_recovers_from_infeasible_start() {
        // Feasible set requires xy >= 2; start deliberately at x = y = 0.1.
        let p = GpProblem {
            bounds: vec![(1e-2, 1e2), (1e-2, 1e2)],
            objective: Posynomial { terms: vec![var(0, 1.0), var(1, 1.0)] },
            constraints: vec![Posynomial::monomial(
                Monomial::constant(2.0).with_var(0, -1.0).with_var(1, -1.0),
            )],
        };
        let s = solve_gp(&p, 1e-6, 500, Some(&[0.1, 0.1])).unwrap();
        let sqrt2 = 2f64.sqrt();
        assert!((s.objective - 2.0 * sqrt2).abs() < 5e-3);
    }

    #[test]
    fn constraints_hold_and_beats_random_feasible_points() {
        // minimize x + y + z s.t. 2/(xy) <= 1 and y/(2z) <= 1.
        let bounds = vec![(0.1, 10.0); 3];
        let c1 = Posynomial::monomial(Monomial::constant(2.0).with_var(0, -1.0).with_var(1, -1.0));
        let c2 = Posynomial::monomial(Monomial::constant(0.5).with_var(1, 1.0).with_var(2, -1.0));
        let p = GpProblem {
            bounds: bounds.clone(),
            objective: Posynomial { terms: vec![var(0, 1.0), var(1, 1.0), var(2, 1.0)] },
            constraints: vec![c1.clone(), c2.clone()],
        };
        let s = solve_gp(&p, 1e-6, 500, None).unwrap();
        for con in &p.constraints {
            assert!(con.eval(&s.x) <= 1.0 + 1e-6);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut best = f64::INFINITY;
        let mut checked = 0;
        while checked < 1000 {
            let x: Vec<f64> = (0..3).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect();
            if c1.eval(&x) <= 1.0 && c2.eval(&x) <= 1.0 {
                best = best.min(p.objective.eval(&x));
                checked += 1;
            }
        }
        assert!(
            s.objective <= best + 1e-6,
            "solver {} vs best sampled {best}",
            s.objective
        );
    }

    #[test]
    fn frozen_variable_folds_into_coefficients() {
        // y is pinned to 2 by its box; minimize x*y s.t. 1/x <= 1 -> x = 1.
        let p = GpProblem {
            bounds: vec![(1e-3, 1e3), (2.0, 2.0)],
            objective: Posynomial::monomial(var(0, 1.0).with_var(1, 1.0)),
            constraints: vec![Posynomial::monomial(var(0, -1.0))],
        };
        let s = solve_gp(&p, 1e-6, 500, None).unwrap();
        assert_eq!(s.x[1], 2.0);
        assert!((s.objective - 2.0).abs() < 5e-3);
    }
}
