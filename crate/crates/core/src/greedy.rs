//! Non-negative subspace pursuit and greedy candidate pruning.
//!
//! Correlations `Aᵀr` are read off the Gram system as `q − P w`, so a pass
//! never touches the design matrix after the system is built.

use rayon::prelude::*;

use crate::bvls::bvls_nonneg;
use crate::design::DesignPair;
use crate::error::{Result, SarError};
use crate::gram::{gram_from_design, GramSystem};
use crate::support::Support;

pub const DEFAULT_MAX_ITER: usize = 50;
/// Relative residual improvement below which the pursuit stops.
pub const TOL_RES: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct NnspOptions {
    pub max_iter: usize,
    pub tol_res: f64,
    /// Box bound applied in every refit.
    pub upper: f64,
}

impl Default for NnspOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol_res: TOL_RES,
            upper: crate::DEFAULT_BIG_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyFit {
    pub w: Vec<f64>,
    /// Working support; `supp(w) ⊆ support` and `|support| ≤ s`.
    pub support: Support,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Kernel solves over the run that missed the KKT tolerance.
    pub uncertified_solves: usize,
    pub max_kkt_residual: f64,
}

/// Subspace pursuit on one lag regression with a single sparsity level `s`
/// used both for the correlation merge and for the pruning step.
pub fn nnsp(dp: &DesignPair, s: usize, opts: &NnspOptions) -> Result<GreedyFit> {
    nnsp_gram(&gram_from_design(dp), s, opts)
}

pub fn nnsp_gram(gs: &GramSystem, s: usize, opts: &NnspOptions) -> Result<GreedyFit> {
    nnsp_within(gs, s, &Support::full(gs.order()), opts)
}

/// Subspace pursuit with every selection confined to `candidates`.
pub fn nnsp_within(
    gs: &GramSystem,
    s: usize,
    candidates: &Support,
    opts: &NnspOptions,
) -> Result<GreedyFit> {
    if s == 0 || s > candidates.len() {
        return Err(SarError::SparsityTooLarge {
            tau: s,
            candidates: candidates.len(),
        });
    }
    if candidates.span() > gs.order() {
        return Err(SarError::InvalidConfig("candidate lag exceeds the AR order".into()));
    }
    let d = gs.order();
    let mut w = vec![0.0; d];
    let mut support = Support::empty();
    let mut objective = gs.c();
    let mut best = GreedyFit {
        w: w.clone(),
        support: support.clone(),
        objective,
        iterations: 0,
        converged: false,
        uncertified_solves: 0,
        max_kkt_residual: 0.0,
    };
    let mut uncertified = 0;
    let mut max_kkt = 0.0f64;
    let mut previous_merge: Option<Support> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let grad = gs.half_gradient_all(&w);
        let picked = largest(candidates.columns().iter().map(|&j| (j, grad[j].abs())), s);
        let merged = support.union(&Support::from_columns(picked));
        if previous_merge.as_ref() == Some(&merged) {
            converged = true;
            break;
        }
        iterations += 1;

        let wide = bvls_nonneg(gs, &merged, opts.upper);
        let kept = largest(merged.columns().iter().map(|&j| (j, wide.w[j])), s);
        let pruned = Support::from_columns(kept);
        let refit = bvls_nonneg(gs, &pruned, opts.upper);
        for sol in [&wide, &refit] {
            uncertified += usize::from(!sol.certified);
            max_kkt = max_kkt.max(sol.kkt_residual);
        }

        let improvement = objective - refit.objective;
        let stable = pruned == support;
        w = refit.w;
        support = pruned;
        let last = objective;
        objective = refit.objective;
        previous_merge = Some(merged);

        if objective < best.objective {
            best = GreedyFit {
                w: w.clone(),
                support: support.clone(),
                objective,
                iterations,
                converged: false,
                uncertified_solves: 0,
                max_kkt_residual: 0.0,
            };
        }
        if stable || objective <= 0.0 || improvement < opts.tol_res * last.abs() {
            converged = true;
            break;
        }
    }
    best.iterations = iterations;
    best.converged = converged;
    best.uncertified_solves = uncertified;
    best.max_kkt_residual = max_kkt;
    Ok(best)
}

/// Indices of the `s` largest scores; ties go to the smaller index.
fn largest<I: Iterator<Item = (usize, f64)>>(scores: I, s: usize) -> Vec<usize> {
    let mut all: Vec<(usize, f64)> = scores.collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(s);
    all.into_iter().map(|(j, _)| j).collect()
}

/// Union of the per-segment pursuit supports at sparsity `tau0`.
pub fn dvp_candidates(segments: &[DesignPair], tau0: usize, opts: &NnspOptions) -> Result<Support> {
    let systems: Vec<GramSystem> = segments.iter().map(gram_from_design).collect();
    dvp_candidates_gram(&systems, tau0, opts)
}

pub fn dvp_candidates_gram(systems: &[GramSystem], tau0: usize, opts: &NnspOptions) -> Result<Support> {
    let order = systems
        .first()
        .ok_or_else(|| SarError::InvalidConfig("no segments given".into()))?
        .order();
    if let Some(bad) = systems.iter().find(|g| g.order() != order) {
        return Err(SarError::MixedOrders {
            expected: order,
            found: bad.order(),
        });
    }
    let fits: Vec<GreedyFit> = systems
        .par_iter()
        .map(|gs| nnsp_gram(gs, tau0, opts))
        .collect::<Result<_>>()?;
    Ok(fits
        .iter()
        .fold(Support::empty(), |acc, fit| acc.union(&fit.support)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvls::restricted_fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> NnspOptions {
        NnspOptions::default()
    }

    fn noisy_ar(rng: &mut ChaCha8Rng, len: usize, lags: &[(usize, f64)], noise: f64) -> Vec<f64> {
        let maxlag = lags.iter().map(|l| l.0).max().unwrap();
        let mut x: Vec<f64> = (0..maxlag).map(|_| rng.random_range(0.5..1.5)).collect();
        while x.len() < len + maxlag * 5 {
            let t = x.len();
            let mut v: f64 = lags.iter().map(|&(k, c)| c * x[t - k]).sum();
            v += noise * rng.random_range(-1.0..1.0);
            x.push(v);
        }
        x.split_off(x.len() - len)
    }

    #[test]
    fn period_three_single_lag() {
        let x: Vec<f64> = (0..30).map(|i| (i % 3 + 1) as f64).collect();
        let dp = DesignPair::from_values(&x, 6).unwrap();
        let fit = nnsp(&dp, 1, &opts()).unwrap();
        assert_eq!(fit.support.lags(), vec![3]);
        assert!((fit.w[2] - 1.0).abs() < 1e-12);
        assert!(fit.objective.abs() < 1e-12);
        assert!(fit.converged);
    }

    #[test]
    fn never_beats_exhaustive_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let x = noisy_ar(&mut rng, 80, &[(2, 0.4), (7, 0.5)], 0.3);
            let gs = GramSystem::from_values(&x, 10).unwrap();
            let mut oracle = gs.c();
            for a in 0..10 {
                oracle = oracle.min(restricted_fit(&gs, &Support::from_columns([a]), 5.0).objective);
                for b in a + 1..10 {
                    let s = Support::from_columns([a, b]);
                    oracle = oracle.min(restricted_fit(&gs, &s, 5.0).objective);
                }
            }
            let fit = nnsp_gram(&gs, 2, &opts()).unwrap();
            assert!(fit.objective >= oracle - 1e-9);
            assert!(fit.support.len() <= 2);
            assert!(Support::of_positive(&fit.w).is_subset(&fit.support));
        }
    }

    #[test]
    fn full_sparsity_is_plain_nnls() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = noisy_ar(&mut rng, 60, &[(1, 0.3), (4, 0.5)], 0.2);
        let gs = GramSystem::from_values(&x, 5).unwrap();
        let fit = nnsp_gram(&gs, 5, &opts()).unwrap();
        let full = bvls_nonneg(&gs, &Support::full(5), 5.0);
        assert_eq!(fit.iterations, 1);
        assert!(fit.converged);
        assert!((fit.objective - full.objective).abs() <= 1e-10 * full.objective.max(1.0));
    }

    #[test]
    fn rejects_bad_sparsity() {
        let gs = GramSystem::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert!(nnsp_gram(&gs, 0, &opts()).is_err());
        assert!(nnsp_gram(&gs, 3, &opts()).is_err());
    }

    #[test]
    fn dvp_single_segment_and_full_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = noisy_ar(&mut rng, 100, &[(1, 0.3), (6, 0.6)], 0.1);
        let dp = DesignPair::from_values(&x, 8).unwrap();
        let single = dvp_candidates(std::slice::from_ref(&dp), 3, &opts()).unwrap();
        assert_eq!(single, nnsp(&dp, 3, &opts()).unwrap().support);
        let all = dvp_candidates(std::slice::from_ref(&dp), 8, &opts()).unwrap();
        assert_eq!(all, Support::full(8));
    }

    #[test]
    fn dvp_recovers_planted_lags_and_ignores_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let segs: Vec<DesignPair> = (0..3)
            .map(|_| {
                let x = noisy_ar(&mut rng, 200, &[(1, 0.35), (24, 0.55)], 0.05);
                DesignPair::from_values(&x, 30).unwrap()
            })
            .collect();
        // Exhaustive check: {1, 24} is the best two-lag support of every segment.
        for dp in &segs {
            let gs = gram_from_design(dp);
            let mut best = (f64::INFINITY, (0, 0));
            for a in 0..30 {
                for b in a + 1..30 {
                    let f = restricted_fit(&gs, &Support::from_columns([a, b]), 5.0).objective;
                    if f < best.0 {
                        best = (f, (a, b));
                    }
                }
            }
            assert_eq!(best.1, (0, 23));
        }
        let cand = dvp_candidates(&segs, 5, &opts()).unwrap();
        assert!(Support::from_lags([1, 24]).is_subset(&cand), "{cand}");
        assert!(cand.len() <= 15);
        let mut rev = segs.clone();
        rev.reverse();
        assert_eq!(dvp_candidates(&rev, 5, &opts()).unwrap(), cand);
    }
}
