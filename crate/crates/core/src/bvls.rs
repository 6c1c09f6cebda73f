//! Bounded-variable non-negative least squares on a Gram system.
//!
//! Minimizes `f(w) = wᵀPw − 2wᵀq + C` over `0 ≤ w_k ≤ M` for `k` in an
//! allowed set, with every other coordinate pinned to zero. The method is a
//! primal active-set scheme in the style of Lawson–Hanson extended to upper
//! bounds: each coordinate is at its lower bound, at its upper bound, or free,
//! and free coordinates solve the reduced normal equations exactly.

use nalgebra::{DMatrix, DVector};

use crate::gram::GramSystem;
use crate::support::Support;

/// Absolute KKT tolerance on half gradients scaled by `max(1, ‖q‖∞)`.
pub const TOL_KKT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSupportSolution {
    /// Length-`d` coefficients; zero outside the allowed set.
    pub w: Vec<f64>,
    /// Columns with strictly positive coefficients.
    pub active: Support,
    pub objective: f64,
    /// Worst scaled KKT violation over the allowed set.
    pub kkt_residual: f64,
    /// False when the change cap was hit or the KKT residual exceeds the tolerance.
    pub certified: bool,
    /// Number of active-set changes performed.
    pub changes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

#[derive(Debug, Clone, Copy)]
pub struct BvlsOptions {
    pub tol_kkt: f64,
    /// Cap on active-set changes; `None` means `10 · d`.
    pub max_changes: Option<usize>,
}

impl Default for BvlsOptions {
    fn default() -> Self {
        Self {
            tol_kkt: TOL_KKT,
            max_changes: None,
        }
    }
}

pub fn bvls_nonneg(gs: &GramSystem, allowed: &Support, upper: f64) -> BoundedSupportSolution {
    bvls_with_options(gs, allowed, upper, &BvlsOptions::default())
}

/// Fit restricted to the support `omega`; coordinates outside it are exactly zero.
pub fn restricted_fit(gs: &GramSystem, omega: &Support, upper: f64) -> BoundedSupportSolution {
    bvls_nonneg(gs, omega, upper)
}

/// Scale applied to gradients before comparing against `tol_kkt`.
pub fn kkt_scale(gs: &GramSystem) -> f64 {
    gs.q().iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

pub fn bvls_with_options(
    gs: &GramSystem,
    allowed: &Support,
    upper: f64,
    opts: &BvlsOptions,
) -> BoundedSupportSolution {
    assert!(upper > 0.0, "upper bound must be positive");
    let d = gs.order();
    assert!(allowed.span() <= d, "allowed set exceeds the model order");
    let cols = allowed.columns();
    let n = cols.len();
    let scale = kkt_scale(gs);
    let threshold = opts.tol_kkt * scale;
    let cap = opts.max_changes.unwrap_or(10 * d.max(1));

    let mut w = vec![0.0; d];
    let mut state = vec![Bound::Lower; n];
    let mut excluded = vec![false; n];
    let mut changes = 0usize;
    let mut capped = false;

    'outer: loop {
        // Pick the bound coordinate with the largest KKT violation.
        let mut pick: Option<(usize, f64)> = None;
        for a in 0..n {
            if excluded[a] || state[a] == Bound::Free {
                continue;
            }
            let g = gs.half_gradient(&w, cols[a]);
            let viol = match state[a] {
                Bound::Lower => -g,
                Bound::Upper => g,
                Bound::Free => unreachable!(),
            };
            if viol > threshold && pick.is_none_or(|(_, best)| viol > best) {
                pick = Some((a, viol));
            }
        }
        let Some((entering, _)) = pick else { break };
        if changes >= cap {
            capped = true;
            break;
        }
        changes += 1;
        let previous = state[entering];
        state[entering] = Bound::Free;
        let mut first_pass = true;

        loop {
            let free: Vec<usize> = (0..n).filter(|&a| state[a] == Bound::Free).collect();
            if free.is_empty() {
                break;
            }
            let Some(y) = solve_free(gs, cols, &state, &free, upper) else {
                if !first_pass {
                    // A principal submatrix of a factorizable block failed; the
                    // iterate stays feasible but is no longer certified.
                    capped = true;
                    break 'outer;
                }
                // Singular reduced system: the entering column is numerically
                // dependent on the free ones. Put it back and skip it.
                state[entering] = previous;
                excluded[entering] = true;
                continue 'outer;
            };

            let infeasible = |yi: f64| yi <= 0.0 || yi > upper;
            if first_pass {
                let pos = free.iter().position(|&a| a == entering).unwrap();
                let only_entering = free
                    .iter()
                    .zip(&y)
                    .all(|(&a, &yi)| a == entering || !infeasible(yi));
                let wrong_way = match previous {
                    Bound::Lower => y[pos] <= 0.0,
                    Bound::Upper => y[pos] >= upper,
                    Bound::Free => false,
                };
                if only_entering && wrong_way {
                    state[entering] = previous;
                    excluded[entering] = true;
                    continue 'outer;
                }
            }
            first_pass = false;

            if free.iter().zip(&y).all(|(_, &yi)| !infeasible(yi)) {
                for (&a, &yi) in free.iter().zip(&y) {
                    w[cols[a]] = yi;
                }
                break;
            }

            // Step toward y until the first free coordinate hits a bound.
            let mut alpha = 1.0f64;
            let mut blocking = None;
            for (i, &a) in free.iter().enumerate() {
                let cur = w[cols[a]];
                let step = if y[i] <= 0.0 {
                    let denom = cur - y[i];
                    if denom > 0.0 { cur / denom } else { 0.0 }
                } else if y[i] > upper {
                    let denom = y[i] - cur;
                    if denom > 0.0 { (upper - cur) / denom } else { 0.0 }
                } else {
                    continue;
                };
                if step < alpha || blocking.is_none() && step <= alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (i, &a) in free.iter().enumerate() {
                let cur = w[cols[a]];
                w[cols[a]] = cur + alpha * (y[i] - cur);
            }
            for (i, &a) in free.iter().enumerate() {
                let j = cols[a];
                let hit_lower = w[j] <= 0.0 || Some(i) == blocking && y[i] <= 0.0;
                let hit_upper = w[j] >= upper || Some(i) == blocking && y[i] > upper;
                if hit_lower {
                    w[j] = 0.0;
                    state[a] = Bound::Lower;
                    changes += 1;
                } else if hit_upper {
                    w[j] = upper;
                    state[a] = Bound::Upper;
                    changes += 1;
                }
            }
            if changes > cap {
                capped = true;
                break 'outer;
            }
        }
        excluded.iter_mut().for_each(|e| *e = false);
    }

    let mut kkt = 0.0f64;
    for (a, &j) in cols.iter().enumerate() {
        let g = gs.half_gradient(&w, j);
        let viol = match state[a] {
            Bound::Lower => (-g).max(0.0),
            Bound::Upper => g.max(0.0),
            Bound::Free => g.abs(),
        };
        kkt = kkt.max(viol / scale);
    }
    let objective = gs.eval(&w);
    BoundedSupportSolution {
        active: Support::of_positive(&w),
        objective,
        kkt_residual: kkt,
        certified: !capped && kkt <= opts.tol_kkt,
        changes,
        w,
    }
}

/// Solves `P_FF y = q_F − M · P_FU 1` by Cholesky with one refinement step.
/// Returns `None` when `P_FF` is not numerically positive definite.
fn solve_free(
    gs: &GramSystem,
    cols: &[usize],
    state: &[Bound],
    free: &[usize],
    upper: f64,
) -> Option<Vec<f64>> {
    let nf = free.len();
    let pff = DMatrix::from_fn(nf, nf, |r, c| gs.p(cols[free[r]], cols[free[c]]));
    let rhs = DVector::from_fn(nf, |r, _| {
        let j = cols[free[r]];
        let mut v = gs.q()[j];
        for (a, s) in state.iter().enumerate() {
            if *s == Bound::Upper {
                v -= upper * gs.p(j, cols[a]);
            }
        }
        v
    });
    let diag_max = (0..nf).map(|i| pff[(i, i)]).fold(0.0f64, f64::max);
    if diag_max <= 0.0 {
        return None;
    }
    let chol = pff.clone().cholesky()?;
    let l = chol.l();
    let min_pivot = (0..nf).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    // Reject pivots that are lost in round-off relative to the largest diagonal.
    if min_pivot * min_pivot <= diag_max * 1e-13 * nf as f64 {
        return None;
    }
    let mut y = chol.solve(&rhs);
    let resid = &rhs - &pff * &y;
    y += chol.solve(&resid);
    if y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(y.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_system(q: &[f64]) -> GramSystem {
        let d = q.len();
        let mut p = vec![0.0; d * d];
        for j in 0..d {
            p[j * d + j] = 1.0;
        }
        GramSystem::from_parts(d, p, q.to_vec(), 0.0).unwrap()
    }

    fn random_psd(rng: &mut ChaCha8Rng, d: usize, rows: usize) -> GramSystem {
        let b: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let t: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..2.0)).collect();
        let mut p = vec![0.0; d * d];
        let mut q = vec![0.0; d];
        for i in 0..rows {
            for j in 0..d {
                for k in 0..d {
                    p[j * d + k] += b[i][j] * b[i][k];
                }
                q[j] += b[i][j] * t[i];
            }
        }
        let c = t.iter().map(|v| v * v).sum();
        GramSystem::from_parts(d, p, q, c).unwrap()
    }

    /// Accelerated projected gradient on the box, used as an independent oracle.
    fn projected_gradient(gs: &GramSystem, allowed: &Support, upper: f64) -> Vec<f64> {
        let d = gs.order();
        let mut lmax = 0.0f64;
        for j in 0..d {
            lmax = lmax.max((0..d).map(|k| gs.p(j, k).abs()).sum());
        }
        let step = 1.0 / (2.0 * lmax);
        let project = |v: &mut Vec<f64>| {
            for j in 0..d {
                v[j] = if allowed.contains(j) { v[j].clamp(0.0, upper) } else { 0.0 };
            }
        };
        let mut x = vec![0.0; d];
        let mut yk = x.clone();
        let mut t = 1.0f64;
        for _ in 0..200_000 {
            let g = gs.half_gradient_all(&yk);
            let mut next: Vec<f64> = (0..d).map(|j| yk[j] - step * 2.0 * g[j]).collect();
            project(&mut next);
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
            yk = (0..d).map(|j| next[j] + (t - 1.0) / tn * (next[j] - x[j])).collect();
            x = next;
            t = tn;
            if moved < 1e-14 {
                break;
            }
        }
        x
    }

    #[test]
    fn separable_clips_negative() {
        let gs = identity_system(&[1.0, -1.0]);
        let sol = bvls_nonneg(&gs, &Support::full(2), 10.0);
        assert_eq!(sol.w, vec![1.0, 0.0]);
        assert!(sol.certified);
    }

    #[test]
    fn separable_clips_to_upper() {
        let gs = identity_system(&[5.0, 0.0]);
        let sol = bvls_nonneg(&gs, &Support::full(2), 2.0);
        assert_eq!(sol.w, vec![2.0, 0.0]);
        assert!(sol.certified);
        assert!(sol.kkt_residual <= TOL_KKT);
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let gs = random_psd(&mut rng, 8, 30);
            let allowed = Support::from_columns([0, 2, 5, 7]);
            let sol = bvls_nonneg(&gs, &allowed, 10.0);
            let oracle = projected_gradient(&gs, &allowed, 10.0);
            assert!(sol.certified);
            assert!(
                (sol.objective - gs.eval(&oracle)).abs() < 1e-8,
                "{} vs {}",
                sol.objective,
                gs.eval(&oracle)
            );
            for j in 0..8 {
                if !allowed.contains(j) {
                    assert_eq!(sol.w[j], 0.0);
                }
            }
        }
    }

    #[test]
    fn binding_upper_bounds_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let gs = random_psd(&mut rng, 6, 25);
            let sol = bvls_nonneg(&gs, &Support::full(6), 0.3);
            let oracle = projected_gradient(&gs, &Support::full(6), 0.3);
            assert!(sol.certified);
            assert!((sol.objective - gs.eval(&oracle)).abs() < 1e-8);
            assert!(sol.w.iter().all(|&v| (0.0..=0.3).contains(&v)));
        }
    }

    #[test]
    fn interior_optimum_matches_linear_solve() {
        // P = [[2,1],[1,2]], q = P·(0.3, 0.6)
        let gs = GramSystem::from_parts(2, vec![2.0, 1.0, 1.0, 2.0], vec![1.2, 1.5], 5.0).unwrap();
        let sol = bvls_nonneg(&gs, &Support::full(2), 5.0);
        assert!((sol.w[0] - 0.3).abs() < 1e-12 && (sol.w[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn periodic_series_restricted() {
        let x = [3.0, 7.0, 3.0, 7.0, 3.0, 7.0, 3.0, 7.0];
        let gs = GramSystem::from_values(&x, 4).unwrap();
        let sol = restricted_fit(&gs, &Support::from_lags([2]), 5.0);
        assert!((sol.w[1] - 1.0).abs() < 1e-12);
        assert!(sol.objective.abs() < 1e-10);
        assert_eq!(sol.w[0], 0.0);
        assert_eq!(sol.w[2], 0.0);
        assert_eq!(sol.w[3], 0.0);
    }

    #[test]
    fn empty_support_gives_constant() {
        let gs = GramSystem::from_values(&[1.0, 4.0, 2.0, 8.0, 5.0], 2).unwrap();
        let sol = restricted_fit(&gs, &Support::empty(), 5.0);
        assert_eq!(sol.w, vec![0.0, 0.0]);
        assert_eq!(sol.objective, gs.c());
        assert!(sol.certified);
    }

    #[test]
    fn restricted_equals_bvls_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gs = random_psd(&mut rng, 7, 20);
        let omega = Support::from_columns([1, 3, 6]);
        assert_eq!(restricted_fit(&gs, &omega, 5.0), bvls_nonneg(&gs, &omega, 5.0));
    }

    #[test]
    fn duplicate_columns_prefer_smallest_lag() {
        // Constant series: every lag column is identical.
        let gs = GramSystem::from_values(&[2.0; 20], 5).unwrap();
        let sol = bvls_nonneg(&gs, &Support::full(5), 5.0);
        assert_eq!(sol.active.columns(), &[0]);
        assert!((sol.w[0] - 1.0).abs() < 1e-12);
        assert!(sol.certified);
    }

    #[test]
    fn zero_system() {
        let gs = GramSystem::zeros(4);
        let sol = bvls_nonneg(&gs, &Support::full(4), 5.0);
        assert_eq!(sol.w, vec![0.0; 4]);
        assert_eq!(sol.objective, 0.0);
        assert!(sol.certified);
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_allowed_set(seed in 0u64..500, extra in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gs = random_psd(&mut rng, 6, 15);
            let small = Support::from_columns([extra % 6]);
            let large = small.union(&Support::from_columns([(extra + 2) % 6, (extra + 3) % 6]));
            let fs = bvls_nonneg(&gs, &small, 5.0);
            let fl = bvls_nonneg(&gs, &large, 5.0);
            proptest::prop_assert!(fl.objective <= fs.objective + 1e-9);
            proptest::prop_assert!(fs.certified && fl.certified);
            proptest::prop_assert!(fl.kkt_residual <= TOL_KKT);
        }

        #[test]
        fn ar_series_certified(values in proptest::collection::vec(0.0f64..10.0, 30..80), d in 1usize..10) {
            let gs = GramSystem::from_values(&values, d).unwrap();
            let sol = bvls_nonneg(&gs, &Support::full(d), 5.0);
            proptest::prop_assert!(sol.certified, "kkt {}", sol.kkt_residual);
            proptest::prop_assert!(sol.w.iter().all(|&v| (0.0..=5.0).contains(&v)));
        }
    }
}
