//! Exact branch-and-bound over lag supports.
//!
//! Solves `min Σ_γ f_γ(w_γ)` subject to `0 ≤ w_γ ≤ M`, every `w_γ` supported
//! on one shared set `Ω ⊆ candidates` with `|Ω| ≤ τ`. A single block is the
//! plain sparse autoregression; an aggregated Gram system is the grid-wide
//! global support problem.
//!
//! A node fixes some lags in (`forced_in`) and some out (`forced_out`). Its
//! bound drops the cardinality constraint and solves the box-constrained
//! problem over `candidates \ forced_out`, block by block. Once `τ` lags are
//! forced in, the node's problem is the exact fit on those lags.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rayon::prelude::*;

use crate::bvls::{bvls_nonneg, BoundedSupportSolution};
use crate::error::{Result, SarError};
use crate::gram::{gram_aggregate, GramSystem};
use crate::greedy::{nnsp_within, NnspOptions};
use crate::support::Support;

pub const TOL_GAP: f64 = 1e-8;
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;
/// Coefficients this close to the box bound flag the fit as box-limited.
pub const BOX_FLAG_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct MioOptions {
    pub upper: f64,
    pub tol_gap: f64,
    pub node_budget: usize,
    /// Subspace-pursuit settings for the initial incumbent.
    pub seed: NnspOptions,
}

impl Default for MioOptions {
    fn default() -> Self {
        Self {
            upper: crate::DEFAULT_BIG_M,
            tol_gap: TOL_GAP,
            node_budget: DEFAULT_NODE_BUDGET,
            seed: NnspOptions::default(),
        }
    }
}

impl MioOptions {
    pub fn with_upper(upper: f64) -> Self {
        let mut opts = Self::default();
        opts.upper = upper;
        opts.seed.upper = upper;
        opts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportNode {
    pub forced_in: Support,
    pub forced_out: Support,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub nodes_explored: usize,
    pub incumbent_objective: f64,
    pub best_bound: f64,
    /// `incumbent − best_bound`.
    pub gap: f64,
    pub wall_time: f64,
    pub certified: bool,
    /// Kernel solves that did not meet the KKT tolerance.
    pub uncertified_kernel_solves: usize,
    pub max_kkt_residual: f64,
}

impl SolveStats {
    pub(crate) fn greedy(objective: f64, wall_time: f64, kkt: f64, uncertified: usize) -> Self {
        Self {
            nodes_explored: 0,
            incumbent_objective: objective,
            best_bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            wall_time,
            certified: false,
            uncertified_kernel_solves: uncertified,
            max_kkt_residual: kkt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit {
    /// One length-`d` coefficient vector per block.
    pub blocks: Vec<Vec<f64>>,
    /// Shared support: union of the positive entries over all blocks.
    pub support: Support,
    pub objective: f64,
    pub block_objectives: Vec<f64>,
    pub stats: SolveStats,
    /// Some coefficient sits within [`BOX_FLAG_TOL`] of the box bound.
    pub box_limited: bool,
}

impl SparseFit {
    pub fn order(&self) -> usize {
        self.blocks.first().map_or(0, Vec::len)
    }

    /// Coefficients of a single-block fit.
    pub fn coefficients(&self) -> &[f64] {
        &self.blocks[0]
    }
}

/// Free candidate with the largest relaxation weight; ties and all-zero
/// weights go to the smallest lag. `None` when nothing is free.
pub fn branch_select(node: &SupportNode, candidates: &Support, weights: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in candidates.columns() {
        if node.forced_in.contains(j) || node.forced_out.contains(j) {
            continue;
        }
        let v = weights[j];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

/// Relaxed solution of a node: per-block fits over its allowed set.
#[derive(Debug, Clone)]
pub struct NodeRelaxation {
    pub bound: f64,
    pub blocks: Vec<BoundedSupportSolution>,
    /// Union of positive entries over blocks.
    pub support: Support,
    /// Per-lag sum of coefficients over blocks.
    pub weights: Vec<f64>,
}

/// Lower bound of `node`'s subproblem: the cardinality constraint is dropped
/// unless `τ` lags are already forced in.
pub fn node_relaxation(
    systems: &[GramSystem],
    node: &SupportNode,
    candidates: &Support,
    tau: usize,
    upper: f64,
) -> NodeRelaxation {
    let allowed = if node.forced_in.len() >= tau {
        node.forced_in.clone()
    } else {
        candidates.difference(&node.forced_out)
    };
    let blocks: Vec<BoundedSupportSolution> = if systems.len() >= 8 {
        systems.par_iter().map(|gs| bvls_nonneg(gs, &allowed, upper)).collect()
    } else {
        systems.iter().map(|gs| bvls_nonneg(gs, &allowed, upper)).collect()
    };
    let d = systems[0].order();
    let mut weights = vec![0.0; d];
    let mut bound = 0.0;
    for b in &blocks {
        bound += b.objective;
        for (acc, v) in weights.iter_mut().zip(&b.w) {
            *acc += v;
        }
    }
    let support = blocks
        .iter()
        .fold(Support::empty(), |acc, b| acc.union(&b.active));
    NodeRelaxation {
        bound,
        blocks,
        support,
        weights,
    }
}

pub fn solve_sar(gs: &GramSystem, tau: usize, candidates: &Support, opts: &MioOptions) -> Result<SparseFit> {
    solve_shared_support(std::slice::from_ref(gs), tau, candidates, opts)
}

struct Queued {
    bound: f64,
    seq: usize,
    node: SupportNode,
    relaxation: NodeRelaxation,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    support: Support,
    objective: f64,
}

struct KernelTally {
    uncertified: usize,
    max_kkt: f64,
}

impl KernelTally {
    fn record(&mut self, sols: &[BoundedSupportSolution]) {
        for s in sols {
            if !s.certified {
                self.uncertified += 1;
            }
            self.max_kkt = self.max_kkt.max(s.kkt_residual);
        }
    }
}

/// Exact shared-support fit over `candidates` by best-bound-first search.
pub fn solve_shared_support(
    systems: &[GramSystem],
    tau: usize,
    candidates: &Support,
    opts: &MioOptions,
) -> Result<SparseFit> {
    let start = Instant::now();
    let order = systems
        .first()
        .ok_or_else(|| SarError::InvalidConfig("no blocks given".into()))?
        .order();
    if let Some(bad) = systems.iter().find(|g| g.order() != order) {
        return Err(SarError::MixedOrders {
            expected: order,
            found: bad.order(),
        });
    }
    if candidates.span() > order {
        return Err(SarError::InvalidConfig("candidate lag exceeds the AR order".into()));
    }
    if tau == 0 || tau > candidates.len() {
        return Err(SarError::SparsityTooLarge {
            tau,
            candidates: candidates.len(),
        });
    }
    if !(opts.upper > 0.0) {
        return Err(SarError::InvalidConfig("box bound must be positive".into()));
    }
    let upper = opts.upper;
    let mut tally = KernelTally {
        uncertified: 0,
        max_kkt: 0.0,
    };

    // Incumbent from subspace pursuit on the pooled system.
    let pooled = if systems.len() == 1 {
        systems[0].clone()
    } else {
        gram_aggregate(systems)?
    };
    let mut seed_opts = opts.seed;
    seed_opts.upper = upper;
    let seed = nnsp_within(&pooled, tau, candidates, &seed_opts)?;
    let seed_fit = evaluate_support(systems, &seed.support, upper);
    tally.record(&seed_fit);
    tally.uncertified += seed.uncertified_solves;
    tally.max_kkt = tally.max_kkt.max(seed.max_kkt_residual);
    let mut incumbent = Incumbent {
        support: seed.support.clone(),
        objective: seed_fit.iter().map(|b| b.objective).sum(),
    };

    let root = SupportNode {
        forced_in: Support::empty(),
        forced_out: Support::empty(),
    };
    let root_relax = node_relaxation(systems, &root, candidates, tau, upper);
    tally.record(&root_relax.blocks);

    let prune_eps = |inc: f64| opts.tol_gap.min(1e-12 * inc.abs().max(1.0));
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut pruned_floor = f64::INFINITY;
    heap.push(Queued {
        bound: root_relax.bound,
        seq,
        node: root,
        relaxation: root_relax,
    });
    let mut nodes = 0usize;
    let mut exhausted = false;

    while let Some(item) = heap.pop() {
        if item.bound >= incumbent.objective - prune_eps(incumbent.objective) {
            pruned_floor = pruned_floor.min(item.bound);
            continue;
        }
        if nodes >= opts.node_budget {
            heap.push(item);
            exhausted = true;
            break;
        }
        nodes += 1;
        let Queued { node, relaxation, .. } = item;

        if relaxation.support.len() <= tau {
            // Relaxation is feasible, hence optimal for this node.
            if relaxation.bound < incumbent.objective {
                incumbent = Incumbent {
                    support: relaxation.support.clone(),
                    objective: relaxation.bound,
                };
            }
            continue;
        }
        if node.forced_in.len() + 1 == tau {
            // One slot left: every completion is a leaf, so score them all
            // directly instead of growing a chain of exclusion nodes.
            for &x in candidates.columns() {
                if node.forced_in.contains(x) || node.forced_out.contains(x) {
                    continue;
                }
                let trial = node.forced_in.union(&Support::from_columns([x]));
                let fits = evaluate_support(systems, &trial, upper);
                tally.record(&fits);
                let total: f64 = fits.iter().map(|b| b.objective).sum();
                if total < incumbent.objective {
                    incumbent = Incumbent {
                        support: fits.iter().fold(Support::empty(), |acc, b| acc.union(&b.active)),
                        objective: total,
                    };
                }
            }
            continue;
        }
        let Some(k) = branch_select(&node, candidates, &relaxation.weights) else {
            continue;
        };

        let mut with_k = node.clone();
        with_k.forced_in = with_k.forced_in.union(&Support::from_columns([k]));
        let in_relax = if with_k.forced_in.len() >= tau {
            let r = node_relaxation(systems, &with_k, candidates, tau, upper);
            tally.record(&r.blocks);
            r
        } else {
            relaxation
        };

        let mut without_k = node;
        without_k.forced_out = without_k.forced_out.union(&Support::from_columns([k]));
        let out_relax = node_relaxation(systems, &without_k, candidates, tau, upper);
        tally.record(&out_relax.blocks);

        for (child, relax) in [(with_k, in_relax), (without_k, out_relax)] {
            if relax.bound >= incumbent.objective - prune_eps(incumbent.objective) {
                pruned_floor = pruned_floor.min(relax.bound);
                continue;
            }
            seq += 1;
            heap.push(Queued {
                bound: relax.bound,
                seq,
                node: child,
                relaxation: relax,
            });
        }
    }

    let open_floor = heap.iter().map(|q| q.bound).fold(f64::INFINITY, f64::min);
    let best_bound = incumbent.objective.min(pruned_floor).min(open_floor);

    // Final coefficients: exact fit on the incumbent support.
    let final_blocks = evaluate_support(systems, &incumbent.support, upper);
    tally.record(&final_blocks);
    let block_objectives: Vec<f64> = final_blocks.iter().map(|b| b.objective).collect();
    let objective: f64 = block_objectives.iter().sum();
    let support = final_blocks
        .iter()
        .fold(Support::empty(), |acc, b| acc.union(&b.active));
    let blocks: Vec<Vec<f64>> = final_blocks.into_iter().map(|b| b.w).collect();
    let box_limited = blocks
        .iter()
        .flatten()
        .any(|&v| v > 0.0 && v >= upper - BOX_FLAG_TOL);
    let gap = (objective - best_bound).max(0.0);

    Ok(SparseFit {
        blocks,
        support,
        objective,
        block_objectives,
        stats: SolveStats {
            nodes_explored: nodes,
            incumbent_objective: objective,
            best_bound: best_bound.min(objective),
            gap,
            wall_time: start.elapsed().as_secs_f64(),
            certified: !exhausted && gap <= opts.tol_gap,
            uncertified_kernel_solves: tally.uncertified,
            max_kkt_residual: tally.max_kkt,
        },
        box_limited,
    })
}

fn evaluate_support(systems: &[GramSystem], support: &Support, upper: f64) -> Vec<BoundedSupportSolution> {
    systems.iter().map(|gs| bvls_nonneg(gs, support, upper)).collect()
}
