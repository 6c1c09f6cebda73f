//! Synthetic series with planted autoregressive structure.
//!
//! Each series starts from a history window drawn uniformly from `[0.5, 1.5]`
//! (mean level 1, so `noise` is relative to that level), runs the recursion
//! `x_t = Σ c_k x_{t−k} + σ ε_t` for a burn-in of `10 · max_lag` steps, and
//! keeps the following `length` values. Grid cells draw from independent
//! ChaCha streams keyed by the cell index, so output depends only on the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SarError};
use crate::series::{GridSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedLag {
    /// 1-based lag.
    pub lag: usize,
    pub coef: f64,
}

/// Rows `rows_from..rows_to` (0-based, half-open) use their own lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOverride {
    pub rows_from: usize,
    pub rows_to: usize,
    pub lags: Vec<PlantedLag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub segments: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<RegionOverride>,
}

/// Everything needed to reproduce a synthetic data set; also the sidecar
/// record written next to generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Length of every generated series (per segment for grids).
    pub length: usize,
    pub lags: Vec<PlantedLag>,
    pub noise: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Synthetic {
    Series(TimeSeries),
    Grid(GridSeries),
}

/// Parses `"k:coef,k:coef,..."`.
pub fn parse_lags(text: &str) -> Result<Vec<PlantedLag>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (k, c) = item
                .split_once(':')
                .ok_or_else(|| SarError::InvalidConfig(format!("expected k:coef, got '{item}'")))?;
            let lag = k
                .trim()
                .parse()
                .map_err(|_| SarError::InvalidConfig(format!("bad lag '{k}'")))?;
            let coef = c
                .trim()
                .parse()
                .map_err(|_| SarError::InvalidConfig(format!("bad coefficient '{c}'")))?;
            Ok(PlantedLag { lag, coef })
        })
        .collect()
}

fn check_lags(lags: &[PlantedLag]) -> Result<()> {
    if lags.is_empty() {
        return Err(SarError::InvalidConfig("at least one planted lag is required".into()));
    }
    for l in lags {
        if l.lag == 0 {
            return Err(SarError::InvalidConfig("planted lags are 1-based".into()));
        }
        if !(l.coef >= 0.0) || !l.coef.is_finite() {
            return Err(SarError::InvalidConfig(format!(
                "planted coefficient for lag {} must be non-negative",
                l.lag
            )));
        }
    }
    let sum: f64 = lags.iter().map(|l| l.coef).sum();
    // A sum of exactly 1 is admitted so pure periodic series can be planted.
    if sum > 1.0 {
        return Err(SarError::Unstable { sum });
    }
    Ok(())
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(SarError::InvalidConfig("length must be positive".into()));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(SarError::InvalidConfig("noise must be a non-negative number".into()));
        }
        check_lags(&self.lags)?;
        if let Some(g) = &self.grid {
            if g.rows == 0 || g.cols == 0 || g.segments == 0 {
                return Err(SarError::InvalidConfig("grid dimensions must be positive".into()));
            }
            for o in &g.overrides {
                if o.rows_from >= o.rows_to || o.rows_to > g.rows {
                    return Err(SarError::InvalidConfig("override row range is outside the grid".into()));
                }
                check_lags(&o.lags)?;
            }
        }
        Ok(())
    }

    fn lags_for_row(&self, m: usize) -> &[PlantedLag] {
        self.grid
            .as_ref()
            .and_then(|g| g.overrides.iter().find(|o| (o.rows_from..o.rows_to).contains(&m)))
            .map_or(&self.lags, |o| &o.lags)
    }
}

/// Runs the planted recursion on ChaCha stream `stream`.
pub fn simulate(lags: &[PlantedLag], length: usize, noise: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let max_lag = lags.iter().map(|l| l.lag).max().unwrap_or(1);
    let burn_in = 10 * max_lag;
    let total = max_lag + burn_in + length;
    let mut x = Vec::with_capacity(total);
    for _ in 0..max_lag {
        x.push(rng.random_range(0.5..1.5));
    }
    while x.len() < total {
        let t = x.len();
        let mut v = 0.0;
        for l in lags {
            v += l.coef * x[t - l.lag];
        }
        if noise > 0.0 {
            let eps: f64 = rng.sample(StandardNormal);
            v += noise * eps;
        }
        x.push(v);
    }
    x.split_off(total - length)
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    spec.validate()?;
    match &spec.grid {
        None => Ok(Synthetic::Series(TimeSeries::new(simulate(
            &spec.lags,
            spec.length,
            spec.noise,
            spec.seed,
            0,
        ))?)),
        Some(g) => {
            let mut grid = GridSeries::empty(g.rows, g.cols, vec![spec.length; g.segments])?;
            let dims = grid.dims();
            let series: Vec<TimeSeries> = (0..dims.cell_count())
                .into_par_iter()
                .map(|idx| {
                    let (m, _, _) = dims.coords(idx);
                    TimeSeries::new(simulate(
                        spec.lags_for_row(m),
                        spec.length,
                        spec.noise,
                        spec.seed,
                        idx as u64 + 1,
                    ))
                })
                .collect::<Result<_>>()?;
            for (idx, ts) in series.into_iter().enumerate() {
                let (m, n, gamma) = dims.coords(idx);
                grid.set_cell(m, n, gamma, ts)?;
            }
            Ok(Synthetic::Grid(grid))
        }
    }
}
