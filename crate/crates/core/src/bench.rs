//! Solver comparison over a corpus of univariate series.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SarError};
use crate::io::{fmt_f64, read_univariate};
use crate::models::{fit_sar, ModelConfig, Solver};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub order: usize,
    pub tau: usize,
    pub solver: String,
    pub objective: f64,
    pub wall_time: f64,
    pub certified: bool,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub orders: Vec<usize>,
    pub sparsities: Vec<usize>,
    pub tau0: usize,
    pub big_m: f64,
}

/// Runs every solver on one series for each `(order, τ)` pair. Pairs with
/// `τ > d` or `T ≤ d` are skipped; `mio-dvp` is skipped when no
/// `τ < τ₀ ≤ d` exists and otherwise clamps `τ₀` into that range.
pub fn bench_series(dataset: &str, series: &TimeSeries, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &d in &cfg.orders {
        if series.len() <= d {
            continue;
        }
        for &tau in &cfg.sparsities {
            if tau == 0 || tau > d {
                continue;
            }
            for solver in Solver::ALL {
                let mut model = ModelConfig::new(d, tau, solver).with_big_m(cfg.big_m);
                if solver == Solver::MioDvp {
                    if tau >= d {
                        continue;
                    }
                    model = model.with_tau0(cfg.tau0.clamp(tau + 1, d));
                }
                let fit = fit_sar(series, &model)?;
                rows.push(BenchRow {
                    dataset: dataset.to_string(),
                    order: d,
                    tau,
                    solver: solver.name().to_string(),
                    objective: fit.objective,
                    wall_time: fit.stats.wall_time,
                    certified: fit.stats.certified,
                    nodes: fit.stats.nodes_explored,
                });
            }
        }
    }
    Ok(rows)
}

/// Benchmarks every `*.csv` file in `corpus`, in file-name order. The data
/// set id is the file stem.
pub fn run_bench(corpus: &Path, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(SarError::InvalidConfig(format!(
            "no .csv files in corpus {}",
            corpus.display()
        )));
    }
    let mut rows = Vec::new();
    for f in files {
        let id = f.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let series = read_univariate(&f, None)?;
        rows.extend(bench_series(&id, &series, cfg)?);
    }
    Ok(rows)
}

pub fn write_bench(path: impl AsRef<Path>, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "order", "tau", "solver", "objective", "wall_time", "certified", "nodes"])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.order.to_string(),
            r.tau.to_string(),
            r.solver.clone(),
            fmt_f64(r.objective),
            fmt_f64(r.wall_time),
            r.certified.to_string(),
            r.nodes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bench(path: impl AsRef<Path>) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_per_pair_and_dominance() {
        let x: Vec<f64> = (0..120).map(|i| ((i % 7) as f64) + 0.3 * ((i * 13 % 5) as f64)).collect();
        let ts = TimeSeries::new(x).unwrap();
        let cfg = BenchConfig {
            orders: vec![8, 200],
            sparsities: vec![1, 2, 9],
            tau0: 4,
            big_m: 5.0,
        };
        let rows = bench_series("toy", &ts, &cfg).unwrap();
        assert_eq!(rows.len(), 6);
        for pair in rows.chunks(3) {
            let f = |s: &str| pair.iter().find(|r| r.solver == s).unwrap().objective;
            assert!(f("mio") <= f("mio-dvp") + 1e-12);
            assert!(f("mio-dvp") <= f("nnsp") + 1e-9);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        write_bench(&p, &rows).unwrap();
        assert_eq!(read_bench(&p).unwrap(), rows);
    }
}
