use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sparsear::bench::{run_bench, write_bench, BenchConfig};
use sparsear::io::{
    read_grid, read_univariate, write_grid, write_json, write_sar_coefficients, write_seasonality_map,
    write_stvsar_coefficients, write_tvsar_coefficients, write_univariate, RunSummary,
};
use sparsear::synth::{gen_synthetic, parse_lags, GridSpec, Synthetic, SyntheticSpec};
use sparsear::{fit_sar, fit_stvsar, fit_tvsar, seasonality_map, segment, ModelConfig, SarError, Solver};

#[derive(Parser)]
#[command(name = "sparsear", version, about = "Sparse non-negative autoregression for periodicity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a sparse AR model and write coefficients plus a run summary.
    Fit(FitArgs),
    /// Generate a synthetic series or grid with planted lags.
    Gen(GenArgs),
    /// Compare nnsp, mio-dvp and mio over a corpus of series.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Sar,
    Tvsar,
    Stvsar,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Nnsp,
    Mio,
    MioDvp,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Nnsp => Solver::Nnsp,
            SolverArg::Mio => Solver::Mio,
            SolverArg::MioDvp => Solver::MioDvp,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Univariate CSV (sar, tvsar) or long-format grid CSV (stvsar).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    order: usize,
    #[arg(long)]
    sparsity: usize,
    #[arg(long, value_enum, default_value = "mio")]
    solver: SolverArg,
    /// Relaxed sparsity for mio-dvp [default: 10, clamped to tau < tau0 <= d].
    #[arg(long)]
    tau0: Option<usize>,
    #[arg(long, default_value_t = sparsear::DEFAULT_BIG_M)]
    bigm: f64,
    /// Segment length for tvsar.
    #[arg(long)]
    segment_length: Option<usize>,
    /// Output prefix [default: input path without extension].
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    /// Exit with status 2 if the solve is not certified optimal.
    #[arg(long)]
    require_certified: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also write the per-cell map of this lag (stvsar).
    #[arg(long)]
    seasonality_lag: Option<usize>,
    /// Column of a univariate input, by header name or 1-based number.
    #[arg(long)]
    column: Option<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    length: usize,
    /// Planted lags, e.g. "1:0.3,12:0.6".
    #[arg(long)]
    lags: String,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid dimensions MxNxG; omitted for a single series.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    orders: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    sparsities: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    tau0: usize,
    #[arg(long, default_value_t = sparsear::DEFAULT_BIG_M)]
    bigm: f64,
    #[arg(long)]
    out: PathBuf,
}

enum Outcome {
    Done,
    Uncertified,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Gen(args) => cmd_gen(args).map(|_| Outcome::Done),
        Command::Bench(args) => cmd_bench(args).map(|_| Outcome::Done),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Uncertified) => {
            eprintln!("error: solve was not certified optimal");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_fit(args: FitArgs) -> sparsear::Result<Outcome> {
    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .map_err(|e| SarError::InvalidConfig(e.to_string()))?;
    }
    let solver = Solver::from(args.solver);
    let mut cfg = ModelConfig::new(args.order, args.sparsity, solver).with_big_m(args.bigm);
    if solver == Solver::MioDvp {
        let tau0 = match args.tau0 {
            Some(t) => t,
            None if args.sparsity < args.order => 10usize.clamp(args.sparsity + 1, args.order),
            None => args.order,
        };
        cfg = cfg.with_tau0(tau0);
    }
    cfg.validate()?;
    if args.seasonality_lag.is_some() && !matches!(args.model, Model::Stvsar) {
        return Err(SarError::InvalidConfig("--seasonality-lag applies to stvsar only".into()));
    }
    let prefix = args.out_prefix.clone().unwrap_or_else(|| args.input.with_extension(""));
    let coef_path = with_suffix(&prefix, ".coef.csv");
    let summary_path = with_suffix(&prefix, ".summary.json");
    let mut outputs = vec![coef_path.clone()];

    let (summary, certified) = match args.model {
        Model::Sar => {
            let series = read_univariate(&args.input, args.column.as_deref())?;
            let fit = fit_sar(&series, &cfg)?;
            write_sar_coefficients(&coef_path, &fit)?;
            let exact = solver != Solver::Nnsp;
            let summary = RunSummary {
                model: "sar".into(),
                solver: solver.name().into(),
                order: cfg.order,
                sparsity: cfg.sparsity,
                tau0: cfg.tau0,
                big_m: cfg.big_m,
                omega: fit.support.lags(),
                objective: fit.objective,
                best_bound: exact.then_some(fit.stats.best_bound),
                gap: exact.then_some(fit.stats.gap),
                nodes_explored: fit.stats.nodes_explored,
                certified: fit.stats.certified,
                box_limited: fit.box_limited,
                wall_time_secs: fit.stats.wall_time,
                candidates: None,
                warnings: Vec::new(),
                outputs: Vec::new(),
            };
            (summary, fit.stats.certified)
        }
        Model::Tvsar => {
            let len = args.segment_length.ok_or_else(|| {
                SarError::InvalidConfig("--segment-length is required for tvsar".into())
            })?;
            let series = read_univariate(&args.input, args.column.as_deref())?;
            let segs = segment(&series, len)?;
            let mut warnings = Vec::new();
            if !segs.dropped_tail().is_empty() {
                warnings.push(format!("dropped {} trailing observations", segs.dropped_tail().len()));
            }
            let res = fit_tvsar(&segs, &cfg)?;
            warnings.extend(res.warnings.iter().cloned());
            write_tvsar_coefficients(&coef_path, &res)?;
            let exact = solver != Solver::Nnsp;
            let summary = RunSummary {
                model: "tvsar".into(),
                solver: solver.name().into(),
                order: cfg.order,
                sparsity: cfg.sparsity,
                tau0: cfg.tau0,
                big_m: cfg.big_m,
                omega: res.support.lags(),
                objective: res.objective,
                best_bound: exact.then_some(res.stats.best_bound),
                gap: exact.then_some(res.stats.gap),
                nodes_explored: res.stats.nodes_explored,
                certified: res.stats.certified,
                box_limited: res.box_limited,
                wall_time_secs: res.stats.wall_time,
                candidates: res.candidates.as_ref().map(|c| c.lags()),
                warnings,
                outputs: Vec::new(),
            };
            (summary, res.stats.certified)
        }
        Model::Stvsar => {
            let grid = read_grid(&args.input)?;
            let res = fit_stvsar(&grid, &cfg)?;
            write_stvsar_coefficients(&coef_path, &res)?;
            if let Some(k) = args.seasonality_lag {
                let map = seasonality_map(&res, k)?;
                let path = with_suffix(&prefix, &format!(".season_k{k}.csv"));
                write_seasonality_map(&path, &map)?;
                outputs.push(path);
            }
            let cells_ok = res.cells.iter().flatten().all(|c| c.certified);
            let mut warnings = Vec::new();
            if res.constant_cells() > 0 {
                warnings.push(format!("{} constant cells fit with zero coefficients", res.constant_cells()));
            }
            let exact = solver != Solver::Nnsp;
            let objective = res.cells.iter().flatten().map(|c| c.objective).sum();
            let summary = RunSummary {
                model: "stvsar".into(),
                solver: solver.name().into(),
                order: cfg.order,
                sparsity: cfg.sparsity,
                tau0: cfg.tau0,
                big_m: cfg.big_m,
                omega: res.support.lags(),
                objective,
                best_bound: exact.then_some(res.stage1.best_bound),
                gap: exact.then_some(res.stage1.gap),
                nodes_explored: res.stage1.nodes_explored,
                certified: res.stage1.certified && cells_ok,
                box_limited: res
                    .cells
                    .iter()
                    .flatten()
                    .flat_map(|c| c.coefficients.iter())
                    .any(|&v| v >= cfg.big_m - sparsear::mio::BOX_FLAG_TOL),
                wall_time_secs: res.stage1.wall_time,
                candidates: res.candidates.as_ref().map(|c| c.lags()),
                warnings,
                outputs: Vec::new(),
            };
            (summary, res.stage1.certified && cells_ok)
        }
    };
    let mut summary = summary;
    outputs.push(summary_path.clone());
    summary.outputs = outputs;
    write_json(&summary_path, &summary)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    if summary.box_limited {
        eprintln!("warning: a coefficient is at the box bound {}; consider a larger --bigm", cfg.big_m);
    }
    let lags: Vec<String> = summary.omega.iter().map(ToString::to_string).collect();
    println!(
        "omega={{{}}} objective={} gap={} certified={} time={:.3}s",
        lags.join(","),
        summary.objective,
        summary.gap.map_or_else(|| "n/a".to_string(), |g| g.to_string()),
        summary.certified,
        summary.wall_time_secs
    );
    Ok(if args.require_certified && !certified {
        Outcome::Uncertified
    } else {
        Outcome::Done
    })
}

fn parse_grid_dims(text: &str) -> sparsear::Result<(usize, usize, usize)> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let bad = || SarError::InvalidConfig(format!("--grid expects MxNxG, got '{text}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<sparsear::Result<_>>()?;
    Ok((nums[0], nums[1], nums[2]))
}

fn cmd_gen(args: GenArgs) -> sparsear::Result<()> {
    let grid = args
        .grid
        .as_deref()
        .map(parse_grid_dims)
        .transpose()?
        .map(|(rows, cols, segments)| GridSpec {
            rows,
            cols,
            segments,
            overrides: Vec::new(),
        });
    let spec = SyntheticSpec {
        length: args.length,
        lags: parse_lags(&args.lags)?,
        noise: args.noise,
        seed: args.seed,
        grid,
    };
    match gen_synthetic(&spec)? {
        Synthetic::Series(ts) => write_univariate(&args.out, &ts)?,
        Synthetic::Grid(g) => write_grid(&args.out, &g)?,
    }
    write_json(with_suffix(&args.out, ".truth.json"), &spec)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> sparsear::Result<()> {
    let cfg = BenchConfig {
        orders: args.orders,
        sparsities: args.sparsities,
        tau0: args.tau0,
        big_m: args.bigm,
    };
    let rows = run_bench(&args.corpus, &cfg)?;
    write_bench(&args.out, &rows)?;
    println!("{} rows written to {}", rows.len(), args.out.display());
    Ok(())
}
