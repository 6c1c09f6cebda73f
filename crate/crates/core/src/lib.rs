//! Sparse non-negative autoregression for quantifying periodicity.
//!
//! Fits `x_t ≈ Σ_k w_k x_{t−k}` with `w ≥ 0`, `w ≤ M` and at most `τ`
//! nonzero lags, so the surviving lags (and their weights) read directly as
//! the dominant periodicities of a series. Three scales are supported:
//!
//! * a single series ([`models::fit_sar`]),
//! * a series cut into segments sharing one support ([`models::fit_tvsar`]),
//! * an `M × N` grid of segmented series sharing one global support, with
//!   per-cell coefficients ([`models::fit_stvsar`]).
//!
//! Solvers: greedy non-negative subspace pursuit ([`greedy`]), exact
//! branch-and-bound over supports ([`mio`]), and branch-and-bound restricted
//! to a greedily pruned candidate set. All of them work on the Gram form
//! `wᵀPw − 2wᵀq + C` ([`gram`]) through one bounded least-squares kernel
//! ([`bvls`]).

pub mod bench;
pub mod bvls;
pub mod design;
pub mod error;
pub mod gram;
pub mod greedy;
pub mod io;
pub mod mio;
pub mod models;
pub mod series;
pub mod support;
pub mod synth;

pub use bvls::{bvls_nonneg, restricted_fit, BoundedSupportSolution};
pub use design::{build_design, objective, ols_fit, DesignPair};
pub use error::{Result, SarError};
pub use gram::{gram_aggregate, gram_from_design, GramSystem};
pub use greedy::{dvp_candidates, nnsp, GreedyFit, NnspOptions};
pub use mio::{solve_sar, solve_shared_support, MioOptions, SolveStats, SparseFit};
pub use models::{
    fit_sar, fit_stvsar, fit_tvsar, seasonality_map, ModelConfig, SeasonalityMap, Solver, StvSarResult,
    TvSarResult,
};
pub use series::{segment, GridDims, GridSeries, SegmentedSeries, TimeSeries};
pub use support::Support;

/// Default box bound on AR coefficients.
pub const DEFAULT_BIG_M: f64 = 5.0;
