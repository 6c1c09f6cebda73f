//! User-facing fitting pipelines.
//!
//! * [`fit_sar`]: one sparse non-negative autoregression.
//! * [`fit_tvsar`]: per-segment coefficients on one shared support.
//! * [`fit_stvsar`]: grid-wide support from pooled Gram statistics, then
//!   per-cell coefficients restricted to that support.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvls::restricted_fit;
use crate::error::{Result, SarError};
use crate::gram::GramSystem;
use crate::greedy::{dvp_candidates_gram, nnsp_gram, NnspOptions, DEFAULT_MAX_ITER, TOL_RES};
use crate::mio::{solve_shared_support, MioOptions, SolveStats, SparseFit, BOX_FLAG_TOL};
use crate::series::{GridDims, GridSeries, SegmentedSeries, TimeSeries};
use crate::support::Support;

/// Cells summed per partial during stage-1 pooling. Fixed so the pooled
/// statistics do not depend on the thread count.
const POOL_CHUNK: usize = 2048;

/// Largest grid accepted by [`fit_cells_exact`].
pub const PER_CELL_EXACT_LIMIT: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Nnsp,
    Mio,
    MioDvp,
}

impl Solver {
    pub const ALL: [Solver; 3] = [Solver::Nnsp, Solver::MioDvp, Solver::Mio];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Nnsp => "nnsp",
            Solver::Mio => "mio",
            Solver::MioDvp => "mio-dvp",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = SarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nnsp" => Ok(Solver::Nnsp),
            "mio" => Ok(Solver::Mio),
            "mio-dvp" => Ok(Solver::MioDvp),
            other => Err(SarError::InvalidConfig(format!(
                "unknown solver '{other}' (expected nnsp, mio or mio-dvp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub order: usize,
    pub sparsity: usize,
    pub big_m: f64,
    pub solver: Solver,
    /// Relaxed sparsity for candidate pruning; required by `mio-dvp`.
    pub tau0: Option<usize>,
    pub max_iter: usize,
    pub tol_res: f64,
    pub tol_gap: f64,
    pub node_budget: usize,
}

impl ModelConfig {
    pub fn new(order: usize, sparsity: usize, solver: Solver) -> Self {
        Self {
            order,
            sparsity,
            big_m: crate::DEFAULT_BIG_M,
            solver,
            tau0: None,
            max_iter: DEFAULT_MAX_ITER,
            tol_res: TOL_RES,
            tol_gap: crate::mio::TOL_GAP,
            node_budget: crate::mio::DEFAULT_NODE_BUDGET,
        }
    }

    pub fn with_tau0(mut self, tau0: usize) -> Self {
        self.tau0 = Some(tau0);
        self
    }

    pub fn with_big_m(mut self, big_m: f64) -> Self {
        self.big_m = big_m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(SarError::InvalidConfig("order must be positive".into()));
        }
        if self.sparsity == 0 || self.sparsity > self.order {
            return Err(SarError::InvalidConfig(format!(
                "sparsity must satisfy 1 <= tau <= d (tau = {}, d = {})",
                self.sparsity, self.order
            )));
        }
        if !(self.big_m > 0.0) || !self.big_m.is_finite() {
            return Err(SarError::InvalidConfig("big-M bound must be a positive finite number".into()));
        }
        if self.solver == Solver::MioDvp {
            let tau0 = self.tau0.ok_or_else(|| {
                SarError::InvalidConfig("solver mio-dvp requires tau0".into())
            })?;
            if tau0 <= self.sparsity || tau0 > self.order {
                return Err(SarError::InvalidConfig(format!(
                    "tau0 must satisfy tau < tau0 <= d (tau = {}, tau0 = {tau0}, d = {})",
                    self.sparsity, self.order
                )));
            }
        }
        Ok(())
    }

    pub fn nnsp_options(&self) -> NnspOptions {
        NnspOptions {
            max_iter: self.max_iter,
            tol_res: self.tol_res,
            upper: self.big_m,
        }
    }

    pub fn mio_options(&self) -> MioOptions {
        MioOptions {
            upper: self.big_m,
            tol_gap: self.tol_gap,
            node_budget: self.node_budget,
            seed: self.nnsp_options(),
        }
    }
}

/// Sparse fit of one series.
pub fn fit_sar(series: &TimeSeries, cfg: &ModelConfig) -> Result<SparseFit> {
    cfg.validate()?;
    let gs = GramSystem::from_values(series.values(), cfg.order)?;
    fit_gram(std::slice::from_ref(&gs), &gs, cfg).map(|(fit, _)| fit)
}

/// Dispatches a shared-support fit over `blocks` (`pooled` is their sum).
/// Also returns the candidate set used by `mio-dvp`.
fn fit_gram(blocks: &[GramSystem], pooled: &GramSystem, cfg: &ModelConfig) -> Result<(SparseFit, Option<Support>)> {
    let d = cfg.order;
    match cfg.solver {
        Solver::Nnsp => {
            let start = Instant::now();
            let greedy = nnsp_gram(pooled, cfg.sparsity, &cfg.nnsp_options())?;
            let omega = Support::of_positive(&greedy.w);
            let fits: Vec<_> = if blocks.len() == 1 {
                vec![(greedy.w.clone(), greedy.objective, greedy.max_kkt_residual, true)]
            } else {
                blocks
                    .iter()
                    .map(|gs| {
                        let s = restricted_fit(gs, &omega, cfg.big_m);
                        (s.w, s.objective, s.kkt_residual, s.certified)
                    })
                    .collect()
            };
            let kkt = fits.iter().map(|f| f.2).fold(greedy.max_kkt_residual, f64::max);
            let uncertified = greedy.uncertified_solves + fits.iter().filter(|f| !f.3).count();
            let block_objectives: Vec<f64> = fits.iter().map(|f| f.1).collect();
            let objective = block_objectives.iter().sum();
            let coefs: Vec<Vec<f64>> = fits.into_iter().map(|f| f.0).collect();
            let support = coefs
                .iter()
                .fold(Support::empty(), |acc, w| acc.union(&Support::of_positive(w)));
            let box_limited = coefs
                .iter()
                .flatten()
                .any(|&v| v > 0.0 && v >= cfg.big_m - BOX_FLAG_TOL);
            Ok((
                SparseFit {
                    blocks: coefs,
                    support,
                    objective,
                    block_objectives,
                    stats: SolveStats::greedy(objective, start.elapsed().as_secs_f64(), kkt, uncertified),
                    box_limited,
                },
                None,
            ))
        }
        Solver::Mio => Ok((solve_shared_support(blocks, cfg.sparsity, &Support::full(d), &cfg.mio_options())?, None)),
        Solver::MioDvp => {
            let start = Instant::now();
            let tau0 = cfg.tau0.expect("validated");
            let nopts = cfg.nnsp_options();
            let pruned = dvp_candidates_gram(blocks, tau0, &nopts)?;
            // The greedy support at the target sparsity is kept as a candidate
            // so the reduced problem contains the solver's seed.
            let greedy = nnsp_gram(pooled, cfg.sparsity, &nopts)?;
            let candidates = pruned.union(&greedy.support);
            let mut fit = solve_shared_support(blocks, cfg.sparsity, &candidates, &cfg.mio_options())?;
            fit.stats.wall_time = start.elapsed().as_secs_f64();
            Ok((fit, Some(candidates)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvSarResult {
    pub support: Support,
    /// Row `γ` holds segment `γ`'s length-`d` coefficients.
    pub coefficients: Vec<Vec<f64>>,
    pub segment_objectives: Vec<f64>,
    pub objective: f64,
    pub stats: SolveStats,
    pub box_limited: bool,
    /// Reduced candidate set (`mio-dvp` only).
    pub candidates: Option<Support>,
    pub warnings: Vec<String>,
}

/// Shared-support fit over independent segments.
pub fn fit_tvsar(series: &SegmentedSeries, cfg: &ModelConfig) -> Result<TvSarResult> {
    cfg.validate()?;
    let d = cfg.order;
    let mut warnings = Vec::new();
    for (g, seg) in series.segments().iter().enumerate() {
        if seg.len() <= d {
            return Err(SarError::TooShort { len: seg.len(), order: d });
        }
        if seg.len() < 2 * d {
            warnings.push(format!(
                "segment {} has length {} < 2d = {}; few rows per coefficient",
                g + 1,
                seg.len(),
                2 * d
            ));
        }
    }
    let blocks: Vec<GramSystem> = series
        .segments()
        .par_iter()
        .map(|s| GramSystem::from_values(s.values(), d))
        .collect::<Result<_>>()?;
    let pooled = crate::gram::gram_aggregate(&blocks)?;
    let (fit, candidates) = fit_gram(&blocks, &pooled, cfg)?;
    Ok(TvSarResult {
        support: fit.support,
        coefficients: fit.blocks,
        segment_objectives: fit.block_objectives,
        objective: fit.objective,
        stats: fit.stats,
        box_limited: fit.box_limited,
        candidates,
        warnings,
    })
}

/// Stage-2 fit of one grid cell on the global support.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFit {
    /// Coefficients aligned with the support's columns.
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub certified: bool,
    /// Constant series: fit with zero coefficients instead.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StvSarResult {
    pub dims: GridDims,
    pub support: Support,
    /// Stage-1 minimizer of the pooled objective (length `d`).
    pub global_coefficients: Vec<f64>,
    pub global_objective: f64,
    pub stage1: SolveStats,
    /// One slot per grid cell in [`GridDims::index`] order; `None` if masked.
    pub cells: Vec<Option<CellFit>>,
    pub candidates: Option<Support>,
}

impl StvSarResult {
    pub fn cell(&self, m: usize, n: usize, gamma: usize) -> Option<&CellFit> {
        self.cells[self.dims.index(m, n, gamma)].as_ref()
    }

    pub fn constant_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.constant).count()
    }

    /// Full length-`d` coefficient vector of a cell.
    pub fn cell_vector(&self, cell: &CellFit) -> Vec<f64> {
        let mut w = vec![0.0; self.global_coefficients.len()];
        for (&j, &v) in self.support.columns().iter().zip(&cell.coefficients) {
            w[j] = v;
        }
        w
    }
}

fn check_grid(grid: &GridSeries, order: usize) -> Result<()> {
    if grid.unmasked_count() == 0 {
        return Err(SarError::EmptyGrid);
    }
    for (g, &len) in grid.segment_lengths().iter().enumerate() {
        if len <= order {
            return Err(SarError::InvalidConfig(format!(
                "segment {} has length {len}, which must exceed the order {order}",
                g + 1
            )));
        }
    }
    Ok(())
}

/// Sum of the Gram systems of every unmasked, non-constant cell.
pub fn pooled_gram(grid: &GridSeries, order: usize) -> Result<GramSystem> {
    check_grid(grid, order)?;
    let partials: Vec<GramSystem> = grid
        .cells()
        .par_chunks(POOL_CHUNK)
        .map(|chunk| {
            let mut acc = GramSystem::zeros(order);
            for ts in chunk.iter().flatten() {
                if !ts.is_constant() {
                    acc.add_assign(&GramSystem::from_values(ts.values(), order)?)?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    crate::gram::gram_aggregate(&partials)
}

/// Stage 2: restricted fit of every cell on `support`.
pub fn fit_cells_on_support(grid: &GridSeries, support: &Support, cfg: &ModelConfig) -> Result<Vec<Option<CellFit>>> {
    check_grid(grid, cfg.order)?;
    let d = cfg.order;
    if support.span() > d {
        return Err(SarError::InvalidConfig("support lag exceeds the AR order".into()));
    }
    grid.cells()
        .par_iter()
        .map(|cell| {
            let Some(ts) = cell else { return Ok(None) };
            let gs = GramSystem::from_values(ts.values(), d)?;
            if ts.is_constant() {
                return Ok(Some(CellFit {
                    coefficients: vec![0.0; support.len()],
                    objective: gs.c(),
                    kkt_residual: 0.0,
                    certified: true,
                    constant: true,
                }));
            }
            let sol = restricted_fit(&gs, support, cfg.big_m);
            Ok(Some(CellFit {
                coefficients: support.columns().iter().map(|&j| sol.w[j]).collect(),
                objective: sol.objective,
                kkt_residual: sol.kkt_residual,
                certified: sol.certified,
                constant: false,
            }))
        })
        .collect()
}

/// Two-stage grid fit: global support on pooled statistics, then per-cell
/// coefficients on that support.
pub fn fit_stvsar(grid: &GridSeries, cfg: &ModelConfig) -> Result<StvSarResult> {
    cfg.validate()?;
    let pooled = pooled_gram(grid, cfg.order)?;
    let (global, candidates) = fit_gram(std::slice::from_ref(&pooled), &pooled, cfg)?;
    let support = global.support.clone();
    let cells = fit_cells_on_support(grid, &support, cfg)?;
    Ok(StvSarResult {
        dims: grid.dims(),
        support,
        global_coefficients: global.blocks[0].clone(),
        global_objective: global.objective,
        stage1: global.stats,
        cells,
        candidates,
    })
}

/// Independent exact fit per cell, without a shared support. Only for small
/// grids, as a reference for the two-stage scheme.
pub fn fit_cells_exact(grid: &GridSeries, cfg: &ModelConfig) -> Result<Vec<Option<SparseFit>>> {
    cfg.validate()?;
    check_grid(grid, cfg.order)?;
    if grid.unmasked_count() > PER_CELL_EXACT_LIMIT {
        return Err(SarError::InvalidConfig(format!(
            "per-cell exact fitting is limited to {PER_CELL_EXACT_LIMIT} cells"
        )));
    }
    grid.cells()
        .par_iter()
        .map(|cell| cell.as_ref().map(|ts| fit_sar(ts, cfg)).transpose())
        .collect()
}

/// Per-cell coefficient of one lag, laid out like the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalityMap {
    pub dims: GridDims,
    /// 1-based lag.
    pub lag: usize,
    /// `None` for masked cells.
    pub values: Vec<Option<f64>>,
}

impl SeasonalityMap {
    pub fn get(&self, m: usize, n: usize, gamma: usize) -> Option<f64> {
        self.values[self.dims.index(m, n, gamma)]
    }
}

/// Coefficient of 1-based `lag` in every cell; the lag must be in the support.
pub fn seasonality_map(res: &StvSarResult, lag: usize) -> Result<SeasonalityMap> {
    let pos = lag
        .checked_sub(1)
        .and_then(|j| res.support.position(j))
        .ok_or_else(|| SarError::LagNotInSupport {
            lag,
            available: res.support.lags(),
        })?;
    Ok(SeasonalityMap {
        dims: res.dims,
        lag,
        values: res
            .cells
            .iter()
            .map(|c| c.as_ref().map(|c| c.coefficients[pos]))
            .collect(),
    })
}
