//! Lagged regression systems and the dense least-squares baseline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SarError};
use crate::series::TimeSeries;

/// The pair `(A, x̃)` of an order-`d` autoregression on a series of length `T`.
///
/// Row `i` (0-based) regresses `x̃[i] = x[d + i]` on the reversed window
/// `A[i][j] = x[d + i - 1 - j]`, so column `j` carries lag `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPair {
    design: DMatrix<f64>,
    target: DVector<f64>,
}

impl DesignPair {
    pub fn from_values(values: &[f64], order: usize) -> Result<Self> {
        let len = values.len();
        if order == 0 {
            return Err(SarError::InvalidConfig("AR order must be positive".into()));
        }
        if len <= order {
            return Err(SarError::TooShort { len, order });
        }
        let rows = len - order;
        let design = DMatrix::from_fn(rows, order, |i, j| values[order + i - 1 - j]);
        let target = DVector::from_fn(rows, |i, _| values[order + i]);
        Ok(Self { design, target })
    }

    pub fn order(&self) -> usize {
        self.design.ncols()
    }

    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }
}

pub fn build_design(series: &TimeSeries, order: usize) -> Result<DesignPair> {
    DesignPair::from_values(series.values(), order)
}

/// Unconstrained least-squares coefficients. Rank-deficient designs return
/// the minimum-norm solution.
pub fn ols_fit(dp: &DesignPair) -> Result<Vec<f64>> {
    let a = dp.design();
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * sigma_max;
    let w = svd
        .solve(dp.target(), eps)
        .map_err(|e| SarError::Numerical(e.to_string()))?;
    Ok(w.iter().copied().collect())
}

/// Residual sum of squares `‖x̃ − A w‖²`.
pub fn objective(dp: &DesignPair, w: &[f64]) -> f64 {
    assert_eq!(w.len(), dp.order(), "coefficient length must equal the AR order");
    let a = dp.design();
    let mut total = 0.0;
    for i in 0..dp.rows() {
        let mut r = dp.target()[i];
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                r -= a[(i, j)] * wj;
            }
        }
        total += r * r;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn layout_matches_reversed_windows() {
        let dp = build_design(&series(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2).unwrap();
        assert_eq!(dp.target().as_slice(), &[3.0, 4.0, 5.0]);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..2).map(|j| dp.design()[(i, j)]).collect())
            .collect();
        assert_eq!(rows, vec![vec![2.0, 1.0], vec![3.0, 2.0], vec![4.0, 3.0]]);
    }

    #[test]
    fn shapes() {
        let x: Vec<f64> = (0..337).map(|i| i as f64).collect();
        let dp = build_design(&series(&x), 168).unwrap();
        assert_eq!((dp.rows(), dp.order()), (169, 168));
        assert_eq!(dp.target().len(), 169);
    }

    #[test]
    fn order_must_be_below_length() {
        let err = build_design(&series(&[1.0, 2.0, 3.0]), 3).unwrap_err();
        assert!(matches!(err, SarError::TooShort { len: 3, order: 3 }));
        assert!(err.to_string().contains("length 3"));
        assert!(build_design(&series(&[1.0, 2.0]), 0).is_err());
    }

    #[test]
    fn exhaustive_window_reconstruction() {
        for len in 2..=50usize {
            let x: Vec<f64> = (0..len).map(|i| (i * 7 % 13) as f64 + 0.5 * i as f64).collect();
            for d in 1..=10.min(len - 1) {
                let dp = DesignPair::from_values(&x, d).unwrap();
                for i in 0..len - d {
                    assert_eq!(dp.target()[i], x[d + i]);
                    for k in 1..=d {
                        assert_eq!(dp.design()[(i, k - 1)], x[d + i - k]);
                    }
                }
            }
        }
    }

    #[test]
    fn ols_exact_recurrences() {
        let dp = build_design(&series(&[64.0, 32.0, 16.0, 8.0, 4.0, 2.0]), 1).unwrap();
        let w = ols_fit(&dp).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-14);
        assert!(objective(&dp, &w) <= 1e-12 * objective(&dp, &[0.0]));

        let dp = build_design(&series(&[3.5; 10]), 1).unwrap();
        let w = ols_fit(&dp).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dp = DesignPair::from_values(&x, 4).unwrap();
        // Normal equations by hand, solved with Gaussian elimination.
        let d = 4;
        let mut m = vec![vec![0.0; d + 1]; d];
        for i in 0..dp.rows() {
            for r in 0..d {
                for c in 0..d {
                    m[r][c] += dp.design()[(i, r)] * dp.design()[(i, c)];
                }
                m[r][d] += dp.design()[(i, r)] * dp.target()[i];
            }
        }
        for p in 0..d {
            let piv = (p..d).max_by(|&a, &b| m[a][p].abs().total_cmp(&m[b][p].abs())).unwrap();
            m.swap(p, piv);
            for r in 0..d {
                if r != p {
                    let f = m[r][p] / m[p][p];
                    for c in p..=d {
                        m[r][c] -= f * m[p][c];
                    }
                }
            }
        }
        let oracle: Vec<f64> = (0..d).map(|r| m[r][d] / m[r][r]).collect();
        let w = ols_fit(&dp).unwrap();
        for (a, b) in w.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn ols_rank_deficient_is_min_norm() {
        // Constant series with d = 2: both columns identical, min-norm splits evenly.
        let dp = build_design(&series(&[2.0; 8]), 2).unwrap();
        let w = ols_fit(&dp).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12, "{w:?}");
    }

    #[test]
    fn objective_at_zero_is_target_energy() {
        let dp = build_design(&series(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2).unwrap();
        assert_eq!(objective(&dp, &[0.0, 0.0]), 50.0);
    }

    proptest::proptest! {
        #[test]
        fn ols_is_optimal(
            x in proptest::collection::vec(-10.0f64..10.0, 20..60),
            w in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let dp = DesignPair::from_values(&x, 3).unwrap();
            let best = ols_fit(&dp).unwrap();
            let fb = objective(&dp, &best);
            proptest::prop_assert!(fb >= 0.0);
            proptest::prop_assert!(fb <= objective(&dp, &w) + 1e-9 * (1.0 + fb));
        }
    }
}
