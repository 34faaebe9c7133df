//! Solver tunables shared by both schemes.

/// Knobs for the alternating solvers: iteration caps, tolerances, step
/// sizes, and the scheme parameters (superposition limit, codebook shape,
/// reuse cap).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Cap on outer alternations between assignment and power allocation.
    pub outer_iters: usize,
    /// Outer stop: max per-entry power change below this fraction of the
    /// station budget.
    pub outer_tol_rel: f64,
    /// Cap on condensation rounds inside an assignment solve.
    pub condense_iters: usize,
    /// Condensation stop: relaxed objective change below this many nats.
    pub condense_tol: f64,
    /// Cap on bound-retightening rounds inside a power solve.
    pub inner_rounds: usize,
    /// Cap on subgradient iterations per dual loop.
    pub dual_iters: usize,
    /// Dual stop: max multiplier change per iteration.
    pub dual_tol: f64,
    /// Subgradient step as a fraction of the station budget.
    pub step_rel: f64,
    /// Relative accuracy target for geometric-program solves.
    pub gp_tol: f64,
    /// Gradient-step cap per barrier stage of a geometric-program solve.
    pub gp_max_iter: usize,
    /// Max users superimposed per subcarrier (power-domain scheme).
    pub max_superposed: usize,
    /// Subcarriers per codebook (sparse-codebook scheme).
    pub codebook_size: usize,
    /// Max codebook assignments touching one subcarrier per station.
    pub reuse_cap: usize,
    /// Optional cap on codebooks per user; off by default so the
    /// assignment stays purely rate-driven.
    pub per_user_codebook_cap: Option<usize>,
    /// Sum cross-station codebook interference over all subcarriers
    /// instead of only the codebook's own, weighted, subcarriers.
    pub literal_scma_interference: bool,
    /// Smallest positive power kept on an assigned entry, in watts.
    pub p_floor_w: f64,
    /// Lower box bound for relaxed assignment values.
    pub assign_floor: f64,
    /// Relaxed values below this round to zero.
    pub round_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            outer_iters: 20,
            outer_tol_rel: 1e-4,
            condense_iters: 10,
            condense_tol: 1e-4,
            inner_rounds: 10,
            dual_iters: 500,
            dual_tol: 1e-5,
            step_rel: 0.05,
            gp_tol: 1e-6,
            gp_max_iter: 500,
            max_superposed: 3,
            codebook_size: 2,
            reuse_cap: 6,
            per_user_codebook_cap: None,
            literal_scma_interference: false,
            p_floor_w: 1e-12,
            assign_floor: 1e-4,
            round_threshold: 0.1,
        }
    }
}

impl SolverConfig {
    /// Throughput-oriented profile for wide sweeps: fewer alternations and
    /// looser subproblem accuracy. Feasibility guarantees are unchanged.
    pub fn sweep_profile() -> Self {
        SolverConfig {
            outer_iters: 4,
            condense_iters: 3,
            inner_rounds: 5,
            dual_iters: 200,
            gp_tol: 3e-5,
            gp_max_iter: 220,
            ..SolverConfig::default()
        }
    }
}
