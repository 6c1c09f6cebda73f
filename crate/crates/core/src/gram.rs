//! Sufficient statistics of least-squares objectives.
//!
//! Any residual sum of squares `‖x̃ − A w‖²` (or a sum of them over many
//! series) equals `wᵀ P w − 2 wᵀ q + C` with `P = Σ AᵀA`, `q = Σ Aᵀx̃` and
//! `C = Σ x̃ᵀx̃`. Every solver in the crate works on this form.

use crate::design::DesignPair;
use crate::error::{Result, SarError};

#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    order: usize,
    /// Row-major `order × order`.
    p: Vec<f64>,
    q: Vec<f64>,
    c: f64,
}

impl GramSystem {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            p: vec![0.0; order * order],
            q: vec![0.0; order],
            c: 0.0,
        }
    }

    /// Builds the system from raw parts. `p` is row-major and is symmetrized.
    pub fn from_parts(order: usize, p: Vec<f64>, q: Vec<f64>, c: f64) -> Result<Self> {
        if p.len() != order * order || q.len() != order {
            return Err(SarError::InvalidConfig(format!(
                "Gram parts do not match order {order}"
            )));
        }
        let mut gs = Self { order, p, q, c };
        for j in 0..order {
            for k in j + 1..order {
                let avg = 0.5 * (gs.p[j * order + k] + gs.p[k * order + j]);
                gs.p[j * order + k] = avg;
                gs.p[k * order + j] = avg;
            }
        }
        Ok(gs)
    }

    /// Builds the system of the order-`d` lag regression on `values` without
    /// materializing the design matrix. Bit-identical to
    /// [`gram_from_design`] on the same series.
    pub fn from_values(values: &[f64], order: usize) -> Result<Self> {
        if order == 0 {
            return Err(SarError::InvalidConfig("AR order must be positive".into()));
        }
        if values.len() <= order {
            return Err(SarError::TooShort {
                len: values.len(),
                order,
            });
        }
        let rows = values.len() - order;
        let mut row = vec![0.0; order];
        let mut gs = Self::zeros(order);
        for i in 0..rows {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = values[order + i - 1 - j];
            }
            gs.accumulate_row(&row, values[order + i]);
        }
        gs.mirror_upper();
        Ok(gs)
    }

    fn accumulate_row(&mut self, row: &[f64], target: f64) {
        let d = self.order;
        for j in 0..d {
            let aj = row[j];
            let prow = &mut self.p[j * d..(j + 1) * d];
            for k in j..d {
                prow[k] += aj * row[k];
            }
            self.q[j] += aj * target;
        }
        self.c += target * target;
    }

    fn mirror_upper(&mut self) {
        let d = self.order;
        for j in 0..d {
            for k in j + 1..d {
                self.p[k * d + j] = self.p[j * d + k];
            }
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn p(&self, j: usize, k: usize) -> f64 {
        self.p[j * self.order + k]
    }

    pub fn p_row(&self, j: usize) -> &[f64] {
        &self.p[j * self.order..(j + 1) * self.order]
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `f(w) = wᵀ P w − 2 wᵀ q + C`, skipping zero coordinates.
    pub fn eval(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.order, "coefficient length must equal the order");
        let nz: Vec<usize> = (0..self.order).filter(|&j| w[j] != 0.0).collect();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for &j in &nz {
            let row = self.p_row(j);
            let mut s = 0.0;
            for &k in &nz {
                s += row[k] * w[k];
            }
            quad += w[j] * s;
            lin += w[j] * self.q[j];
        }
        quad - 2.0 * lin + self.c
    }

    /// Half gradient `P w − q` at coordinate `j`.
    #[inline]
    pub fn half_gradient(&self, w: &[f64], j: usize) -> f64 {
        let row = self.p_row(j);
        let mut s = -self.q[j];
        for (k, &wk) in w.iter().enumerate() {
            if wk != 0.0 {
                s += row[k] * wk;
            }
        }
        s
    }

    /// Full half gradient `P w − q`.
    pub fn half_gradient_all(&self, w: &[f64]) -> Vec<f64> {
        (0..self.order).map(|j| self.half_gradient(w, j)).collect()
    }

    /// `max |P_jk − P_kj|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.order;
        let mut worst = 0.0f64;
        for j in 0..d {
            for k in 0..d {
                worst = worst.max((self.p(j, k) - self.p(k, j)).abs());
            }
        }
        worst
    }

    /// Adds `other` into `self` componentwise.
    pub fn add_assign(&mut self, other: &GramSystem) -> Result<()> {
        if other.order != self.order {
            return Err(SarError::MixedOrders {
                expected: self.order,
                found: other.order,
            });
        }
        for (a, b) in self.p.iter_mut().zip(&other.p) {
            *a += b;
        }
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a += b;
        }
        self.c += other.c;
        Ok(())
    }
}

/// `(AᵀA, Aᵀx̃, x̃ᵀx̃)` of one lag regression.
pub fn gram_from_design(dp: &DesignPair) -> GramSystem {
    let d = dp.order();
    let mut gs = GramSystem::zeros(d);
    let mut row = vec![0.0; d];
    for i in 0..dp.rows() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = dp.design()[(i, j)];
        }
        gs.accumulate_row(&row, dp.target()[i]);
    }
    gs.mirror_upper();
    gs
}

/// Componentwise sum of systems sharing one order, accumulated in list order.
pub fn gram_aggregate(systems: &[GramSystem]) -> Result<GramSystem> {
    let first = systems
        .first()
        .ok_or_else(|| SarError::InvalidConfig("cannot aggregate an empty list".into()))?;
    let mut total = first.clone();
    for gs in &systems[1..] {
        total.add_assign(gs)?;
    }
    Ok(total)
}
