//! Command implementations behind the `gridnk` binary.

pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use gridnk::oracle::candidate_count;
use gridnk::{
    compute_phi, fixtures, is_feasible_attack, parse_case, parse_geo, solve_exhaustive, solve_interdiction,
    AttackerModel, BoundsMode, DistanceMode, HighsBackend, Network, SolveConfig,
};

use report::{geojson, join_ids, CertifyRow, RunReport, SweepRow, Verdict};

pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gridnk", version, about = "Worst-case N-k line interdiction on DC power networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one interdiction problem.
    Run(RunArgs),
    /// Solve a grid of k (and D) values.
    Sweep(SweepArgs),
    /// Compare the engine against exhaustive enumeration.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CaseArgs {
    /// Case file path, or a built-in case name.
    #[arg(long)]
    pub case: String,
    /// Bus geolocation CSV (`bus_id,lat,lon`).
    #[arg(long)]
    pub geo: Option<PathBuf>,
    #[arg(long, default_value = "haversine")]
    pub distance: DistanceMode,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value = "heuristic")]
    pub bounds: BoundsMode,
    /// Pin the spatial center to this bus id.
    #[arg(long)]
    pub center: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Override the Ohm-row big-M.
    #[arg(long)]
    pub big_m: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, default_value = "traditional")]
    pub model: String,
    #[arg(long)]
    pub k: usize,
    /// Spatial diameter in km.
    #[arg(long = "D")]
    pub d_km: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Directory for `report.json` and `overlay.geojson`; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report zero wall time so repeated runs are byte-identical.
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, default_value = "traditional")]
    pub model: String,
    /// `2..6`, `2,4,6` or a single value.
    #[arg(long)]
    pub k: String,
    /// `100..1000:100`, a comma list, or a single value. Spatial only.
    #[arg(long = "D")]
    pub d_km: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Directory for `sweep.csv`; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cells solved concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Comma list of models.
    #[arg(long, default_value = "traditional,spatial,topological")]
    pub model: String,
    #[arg(long, default_value = "1..2")]
    pub k: String,
    /// Spatial diameter in km; required when certifying the spatial model.
    #[arg(long = "D")]
    pub d_km: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value = "valid")]
    pub bounds: BoundsMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Largest number of candidate subsets the oracle may enumerate per cell.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u128,
    /// Directory for `certify.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads a case from a path or a built-in name, then applies `--geo`.
pub fn load_network(args: &CaseArgs) -> Result<(String, Network)> {
    let path = Path::new(&args.case);
    let (name, mut net) = if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let net = parse_case(&text).with_context(|| format!("parsing {}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("case").to_string();
        (stem, net)
    } else if let Some(net) = fixtures::builtin(&args.case) {
        (args.case.clone(), net)
    } else {
        bail!(
            "unknown case `{}`: not a file and not one of {}",
            args.case,
            fixtures::BUILTIN_NAMES.join(", ")
        );
    };
    if let Some(geo) = &args.geo {
        let text = fs::read_to_string(geo).with_context(|| format!("reading {}", geo.display()))?;
        net = parse_geo(&text, &net).with_context(|| format!("parsing {}", geo.display()))?;
    }
    Ok((name, net))
}

pub fn build_model(name: &str, k: usize, d_km: Option<f64>) -> Result<AttackerModel> {
    Ok(match name {
        "traditional" => AttackerModel::traditional(k)?,
        "topological" => AttackerModel::topological(k)?,
        "spatial" => {
            let d = d_km.ok_or_else(|| anyhow!("the spatial model needs --D"))?;
            AttackerModel::spatial(k, d)?
        }
        other => bail!("unknown model `{other}` (expected traditional|spatial|topological)"),
    })
}

fn check_geo(net: &Network, model: &AttackerModel) -> Result<()> {
    if model.is_spatial() && !net.all_geolocated() {
        bail!("the spatial model needs bus geolocation; pass --geo");
    }
    Ok(())
}

fn solve_config(solver: &SolverArgs, distance: DistanceMode) -> SolveConfig {
    SolveConfig {
        epsilon: solver.eps,
        max_iters: solver.max_iters,
        bounds_mode: solver.bounds,
        big_m: solver.big_m,
        distance_mode: distance,
        center_bus: solver.center,
        ..SolveConfig::default()
    }
}

fn solve_one(
    name: &str,
    net: &Network,
    model: &AttackerModel,
    config: &SolveConfig,
    seed: u64,
    reproducible: bool,
) -> Result<RunReport> {
    check_geo(net, model)?;
    let backend = HighsBackend::with_seed(seed);
    let out = solve_interdiction(net, model, config, &backend)?;
    Ok(RunReport::new(name, net, model, config, seed, &out, reproducible))
}

/// Solves one problem and writes its artifacts. Returns the report and the
/// process exit code.
pub fn cmd_run(args: &RunArgs) -> Result<(RunReport, i32)> {
    let (name, net) = load_network(&args.case)?;
    let model = build_model(&args.model, args.k, args.d_km)?;
    let config = solve_config(&args.solver, args.case.distance);
    let report = solve_one(&name, &net, &model, &config, args.solver.seed, args.reproducible)?;

    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join("report.json"), &text)?;
            if net.all_geolocated() {
                let overlay = serde_json::to_string_pretty(&geojson(&net, &report))? + "\n";
                fs::write(dir.join("overlay.geojson"), overlay)?;
            }
        }
        None => print!("{text}"),
    }
    let code = if report.status.is_converged() { 0 } else { EXIT_NOT_CONVERGED };
    Ok((report, code))
}

/// Solves every grid point; failures land in the `error` column.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let (name, net) = load_network(&args.case)?;
    let ks = parse_k_list(&args.k)?;
    let spatial = args.model == "spatial";
    let ds: Vec<Option<f64>> = match (&args.d_km, spatial) {
        (Some(spec), true) => parse_d_list(spec)?.into_iter().map(Some).collect(),
        (None, true) => Vec::new(),
        (_, false) => vec![None],
    };
    let cells: Vec<(usize, Option<f64>)> = ks.iter().flat_map(|&k| ds.iter().map(move |&d| (k, d))).collect();
    if cells.is_empty() {
        bail!("empty sweep grid");
    }

    let config = solve_config(&args.solver, args.case.distance);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, d)| {
                let report = build_model(&args.model, k, d)
                    .and_then(|m| solve_one(&name, &net, &m, &config, args.solver.seed, args.reproducible));
                match report {
                    Ok(r) => SweepRow::from_report(&r),
                    Err(e) => SweepRow::failed(&args.model, k, d, format!("{e:#}")),
                }
            })
            .collect()
    });

    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| anyhow!("{e}"))?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("sweep.csv"), bytes)?;
        }
        None => print!("{}", String::from_utf8(bytes)?),
    }
    Ok(rows)
}

/// Runs engine and oracle on every (model, k) cell and classifies the pair.
pub fn cmd_certify(args: &CertifyArgs) -> Result<Vec<CertifyRow>> {
    let (_, net) = load_network(&args.case)?;
    let ks = parse_k_list(&args.k)?;
    let mut models = Vec::new();
    for name in args.model.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        for &k in &ks {
            models.push(build_model(name, k, args.d_km)?);
        }
    }
    if models.is_empty() {
        bail!("empty certification grid");
    }
    for m in &models {
        check_geo(&net, m)?;
        let count = candidate_count(net.num_lines(), m);
        if count > args.budget {
            return Err(gridnk::Error::BudgetExceeded {
                count,
                budget: args.budget,
            }
            .into());
        }
    }

    let backend = HighsBackend::with_seed(args.seed);
    let config = SolveConfig {
        epsilon: args.eps,
        max_iters: args.max_iters,
        bounds_mode: args.bounds,
        distance_mode: args.case.distance,
        ..SolveConfig::default()
    };
    let mut rows = Vec::with_capacity(models.len());
    for model in &models {
        let footprint = match model.d_km() {
            Some(d) => compute_phi(&net, d, config.distance_mode).ok(),
            None => None,
        };
        let engine = solve_interdiction(&net, model, &config, &backend);
        let oracle = match (&footprint, model.is_spatial()) {
            (None, true) => Err(gridnk::Error::SpatiallyInfeasible {
                d_km: model.d_km().unwrap_or_default(),
            }),
            _ => solve_exhaustive(&net, model, footprint.as_ref(), &backend, args.budget),
        };
        let mut row = CertifyRow {
            model: model.name().to_string(),
            k: model.k(),
            d_km: model.d_km(),
            verdict: Verdict::Agree,
            engine_eta: None,
            oracle_eta: None,
            engine_lines: Vec::new(),
            oracle_lines: Vec::new(),
            evaluated: 0,
            note: String::new(),
        };
        match (engine, oracle) {
            (Err(e), Err(o)) => row.note = format!("engine: {e}; oracle: {o}"),
            (Err(e), Ok(o)) => {
                row.verdict = Verdict::Violation;
                row.oracle_eta = Some(o.best_eta);
                row.note = format!("engine failed: {e}");
            }
            (Ok(e), Err(o)) => {
                row.verdict = Verdict::Violation;
                row.engine_eta = Some(e.eta_star);
                row.note = format!("oracle failed: {o}");
            }
            (Ok(e), Ok(o)) => {
                row.engine_eta = Some(e.eta_star);
                row.oracle_eta = Some(o.best_eta);
                row.engine_lines = e.attack.line_ids(&net);
                row.oracle_lines = o.best_attack.line_ids(&net);
                row.evaluated = o.evaluated;
                let tol = 1e-6 * o.best_eta.max(1.0);
                let allowed = config.epsilon * e.eta_star.max(config.abs_floor) + tol;
                row.verdict = if !is_feasible_attack(&net, model, footprint.as_ref(), &e.attack.lines) {
                    row.note = "engine attack is infeasible".into();
                    Verdict::Violation
                } else if (e.eta_star - o.best_eta).abs() <= tol {
                    Verdict::Agree
                } else if e.eta_star < o.best_eta && o.best_eta - e.eta_star <= allowed {
                    Verdict::WithinGap
                } else {
                    row.note = format!("engine {} vs oracle {}", e.eta_star, o.best_eta);
                    Verdict::Violation
                };
            }
        }
        rows.push(row);
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("certify.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    }
    Ok(rows)
}

pub fn print_certify(rows: &[CertifyRow]) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for r in rows {
        let d = r.d_km.map(|d| format!(" D={d}")).unwrap_or_default();
        let verdict = match r.verdict {
            Verdict::Agree => "agree",
            Verdict::WithinGap => "within-gap",
            Verdict::Violation => "violation",
        };
        println!(
            "{} k={}{}: {} (engine {} [{}], oracle {} [{}]){}",
            r.model,
            r.k,
            d,
            verdict,
            fmt(r.engine_eta),
            join_ids(&r.engine_lines),
            fmt(r.oracle_eta),
            join_ids(&r.oracle_lines),
            if r.note.is_empty() { String::new() } else { format!(" {}", r.note) },
        );
    }
}

/// Parses `a..b`, `a..=b`, `a,b,c` or a single integer.
pub fn parse_k_list(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let b = b.trim_start_matches('=');
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().with_context(|| format!("bad k value `{s}`")))
        .collect()
}

/// Parses `a..b:step` (inclusive of `b` up to rounding), a comma list, or a
/// single value.
pub fn parse_d_list(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if let Some((range, step)) = spec.split_once(':') {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| anyhow!("bad D range `{spec}` (expected start..end:step)"))?;
        let (a, b, step): (f64, f64, f64) = (a.trim().parse()?, b.trim().parse()?, step.trim().parse()?);
        if !(step > 0.0) {
            bail!("D step must be positive");
        }
        let n = ((b - a) / step + 1e-9).floor();
        if n < 0.0 {
            return Ok(Vec::new());
        }
        return Ok((0..=n as usize).map(|i| a + step * i as f64).collect());
    }
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().with_context(|| format!("bad D value `{s}`")))
        .collect()
}
