//! Downlink resource allocation for two non-orthogonal multiple-access
//! schemes in a heterogeneous cellular network, plus the machinery to
//! benchmark them against each other.
//!
//! The library models one macro base station overlaid with small cells, all
//! sharing `N` subcarriers, and solves the sum-rate maximization problem for
//! two transmission schemes:
//!
//! * **Power-domain superposition** ([`noma`]): each subcarrier carries up to
//!   `L_T` superimposed user signals separated by successive interference
//!   cancellation at the receivers.
//! * **Sparse codebook assignment** ([`scma`]): users are assigned size-`U`
//!   subcarrier subsets (codebooks); each subcarrier may be reused by at most
//!   `K` codebook assignments.
//!
//! Both solvers share the same convex toolbox ([`convex`]): a tangent lower
//! bound on `log(1+z)`, arithmetic-geometric-mean condensation of posynomial
//! denominators, a log-space geometric-program solver, and a projected
//! subgradient engine for the per-station power budget duals.
//!
//! [`hetnet`] generates topologies and Rayleigh/path-loss channel gains,
//! [`rxcomplexity`] models receiver operation counts for the two schemes,
//! [`oracle`] provides exhaustive baselines for tiny instances, and
//! [`sweep`] runs seeded scenario sweeps and emits CSV/plot data.

pub mod config;
pub mod convex;
pub mod hetnet;
pub mod noma;
pub mod oracle;
pub mod rxcomplexity;
pub mod scma;
pub mod sweep;

mod power_engine;

pub use power_engine::{PowerDiagnostics, ScaleField};

use thiserror::Error;

/// Errors produced by configuration, generation, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Topology sampling could not satisfy the placement constraints.
    #[error("topology generation failed: {0}")]
    Topology(String),

    /// An operation was called with arguments outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The geometric program has no strictly feasible point.
    #[error("geometric program infeasible: {0}")]
    GpInfeasible(String),

    /// The exhaustive baseline was asked to enumerate too large a space.
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    /// Integer overflow in an exact operation count.
    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    /// A scenario file could not be parsed.
    #[error("scenario parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
