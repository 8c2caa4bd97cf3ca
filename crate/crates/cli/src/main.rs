use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hopfid_core::montecarlo::{simulate_success, TrialSpec};
use hopfid_core::search::{DEFAULT_K_MAX, DEFAULT_N0_MAX};
use hopfid_core::sweep::{export, ExportFormat, FloatRange};
use hopfid_core::{
    all_in_success, boundary_w0, fixed_target_budget, min_copy_search, run_sweep, Family, GridSpec, PathSpec,
    ProtocolRegistry, ScheduleConfig, ScheduleTrace, SearchResult, SearchSpace, SweepSummary, WernerParameter,
};

mod range;

/// Minimum raw-copy budgets for hop-independent Werner recovery.
#[derive(Parser)]
#[command(name = "hopfid", version, about)]
struct Cli {
    /// Protocol registry (JSON). Without one only BBPSSW is available.
    #[arg(long, global = true, env = "HOPFID_REGISTRY")]
    registry: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest copy budget restoring w_out ≥ w0 at one operating point.
    Mincopy(MincopyArgs),
    /// Grid sweep over (ℓ, w0, p_th) with CSV or JSON export.
    Sweep(SweepArgs),
    /// Copy budget at the self-consistent target below a quality cap.
    Fixedpoint(FixedpointArgs),
    /// Entanglement boundary 3^(-1/ℓ) per path length.
    Boundary(BoundaryArgs),
    /// Compare the exact all-in success probability with Monte Carlo.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SearchArgs {
    /// Protocol families to search (comma list); default is every loaded family.
    #[arg(long = "family", value_delimiter = ',', value_parser = range::family)]
    families: Vec<Family>,

    /// Block sizes to search (comma list); default depends on the family.
    #[arg(long = "block-sizes", value_delimiter = ',', value_parser = range::block_size)]
    block_sizes: Vec<usize>,

    /// Largest recursion depth.
    #[arg(long, default_value_t = DEFAULT_K_MAX, value_parser = range::positive)]
    k_max: usize,

    /// Largest copy budget evaluated by the exact DP.
    #[arg(long, default_value_t = DEFAULT_N0_MAX, value_parser = range::block_size)]
    n0_max: usize,
}

#[derive(Args)]
struct MincopyArgs {
    /// Elementary-link Werner parameter.
    #[arg(long, value_parser = range::werner)]
    w0: f64,
    /// Number of links on the path.
    #[arg(long, value_parser = range::links)]
    ell: u32,
    /// Required success probability.
    #[arg(long, value_parser = range::probability)]
    pth: f64,
    #[command(flatten)]
    search: SearchArgs,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Path lengths, `lo:hi`.
    #[arg(long, default_value = "2:10", value_parser = range::link_range)]
    ell: range::LinkRange,
    /// Link quality grid, `lo:hi[:step]`.
    #[arg(long, default_value = "0.5:1.0:0.0025", value_parser = range::werner_range)]
    w0: FloatRange,
    /// Success thresholds (comma list).
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.7,0.99", value_parser = range::probability)]
    pth: Vec<f64>,
    #[command(flatten)]
    search: SearchArgs,
    /// Output file; format follows the extension unless `--format` is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<ExportFormat>,
}

#[derive(Args)]
struct FixedpointArgs {
    /// Upper bound on the self-consistent target.
    #[arg(long, value_parser = range::werner)]
    wth: f64,
    #[arg(long, value_parser = range::links)]
    ell: u32,
    #[arg(long, value_parser = range::probability)]
    pth: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundaryArgs {
    /// Path lengths, `lo:hi`.
    #[arg(long, default_value = "1:10", value_parser = range::link_range)]
    ell: range::LinkRange,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Raw copy budget.
    #[arg(long, value_parser = range::positive)]
    n0: usize,
    /// Block size.
    #[arg(long, value_parser = range::block_size)]
    r: usize,
    /// Per-level block success probabilities (comma list).
    #[arg(long, value_delimiter = ',', required = true, value_parser = range::unit_probability)]
    p: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000, value_parser = range::positive)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_USAGE: u8 = 1;
/// Infeasible operating point, or Monte Carlo disagreeing with the DP.
const EXIT_REJECTED: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let registry = match &cli.registry {
        Some(path) => ProtocolRegistry::from_path(path).with_context(|| format!("loading registry {}", path.display()))?,
        None => ProtocolRegistry::builtin(),
    };
    match cli.command {
        Command::Mincopy(args) => mincopy(registry, args),
        Command::Sweep(args) => sweep(registry, args),
        Command::Fixedpoint(args) => fixedpoint(registry, args),
        Command::Boundary(args) => boundary(args),
        Command::Validate(args) => validate(args),
    }
}

fn space(registry: ProtocolRegistry, args: &SearchArgs) -> Result<SearchSpace> {
    let mut space = SearchSpace::new(registry).with_limits(args.k_max, args.n0_max);
    if !args.families.is_empty() {
        space.families = Some(args.families.clone());
    }
    if !args.block_sizes.is_empty() {
        space.block_sizes = Some(args.block_sizes.iter().copied().collect::<BTreeSet<_>>());
    }
    space.validate()?;
    if space.candidates().next().is_none() {
        anyhow::bail!("no protocol in the registry matches the requested families and block sizes");
    }
    Ok(space)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_trace(out: &mut impl Write, trace: &ScheduleTrace) -> io::Result<()> {
    writeln!(out, "  level  w           p")?;
    for (j, w) in trace.w_levels.iter().enumerate() {
        match j.checked_sub(1).map(|i| trace.p_levels[i]) {
            Some(p) => writeln!(out, "  {j:<5}  {w:<10.6}  {p:.6}")?,
            None => writeln!(out, "  {j:<5}  {w:<10.6}  -")?,
        }
    }
    Ok(())
}

/// Success probability at `n0_min` and one copy fewer.
fn neighbourhood(result: &SearchResult) -> Option<(usize, f64, f64)> {
    let n0 = result.n0_min?;
    let r = result.selected.as_ref()?.r;
    let trace = result.trace.as_ref()?;
    let at = all_in_success(ScheduleConfig::new(r, n0), &trace.p_levels);
    let below = all_in_success(ScheduleConfig::new(r, n0 - 1), &trace.p_levels);
    Some((n0, at, below))
}

fn print_result(out: &mut impl Write, result: &SearchResult) -> io::Result<()> {
    writeln!(out, "status     {}", result.status.as_str())?;
    let (Some(sel), Some((n0, at, below)), Some(trace)) = (&result.selected, neighbourhood(result), &result.trace)
    else {
        if let Some(reason) = &result.reason {
            writeln!(out, "reason     {reason}")?;
        }
        return Ok(());
    };
    writeln!(out, "n0_min     {n0}")?;
    writeln!(out, "selected   {} ({}, r={}, k={})", sel.protocol, sel.family, sel.r, sel.k)?;
    writeln!(out, "P_succ({n0}) = {at:.6}")?;
    writeln!(out, "P_succ({}) = {below:.6}", n0 - 1)?;
    print_trace(out, trace)
}

fn result_json(result: &SearchResult) -> serde_json::Value {
    let mut value = serde_json::to_value(result).expect("search result serialises");
    if let Some((_, at, below)) = neighbourhood(result) {
        value["p_succ_at_min"] = json!(at);
        value["p_succ_below_min"] = json!(below);
    }
    value
}

fn exit_for(result: &SearchResult) -> ExitCode {
    if result.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_REJECTED)
    }
}

fn mincopy(registry: ProtocolRegistry, args: MincopyArgs) -> Result<ExitCode> {
    let space = space(registry, &args.search)?;
    let w0 = WernerParameter::new(args.w0)?;
    let path = PathSpec::new(args.ell)?;
    let result = min_copy_search(w0, path, args.pth, &space)?;

    let mut out = io::stdout().lock();
    writeln!(out, "w0 = {}  ell = {}  p_th = {}", args.w0, args.ell, args.pth)?;
    writeln!(out, "feasible   {}", if result.feasible { "yes" } else { "no" })?;
    print_result(&mut out, &result)?;

    if let Some(path_out) = &args.out {
        let mut doc = result_json(&result);
        doc["w0"] = json!(args.w0);
        doc["ell"] = json!(args.ell);
        doc["pth"] = json!(args.pth);
        write_json(path_out, &doc)?;
    }
    Ok(exit_for(&result))
}

fn print_summary(out: &mut impl Write, summary: &SweepSummary) -> io::Result<()> {
    writeln!(
        out,
        "{:<8} {:>5} {:>8} {:>8} {:>9} {:>8} {:>5} {:>5} {:>8}",
        "family", "p_th", "feasible", "budget", "median_n0", "n0<=10", "med_k", "max_k", "gap"
    )?;
    let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
    for f in &summary.families {
        writeln!(
            out,
            "{:<8} {:>5} {:>8} {:>8} {:>9} {:>8} {:>5} {:>5} {:>8}",
            f.family.as_str(),
            f.pth,
            f.feasible,
            f.budget_exceeded,
            opt(f.median_n0, 1),
            f.low_copy,
            opt(f.median_k, 1),
            f.max_k.map_or("-".to_string(), |k| k.to_string()),
            opt(f.mean_boundary_gap, 4),
        )?;
    }
    for c in &summary.comparisons {
        writeln!(
            out,
            "p_th {}: jansen needs fewer copies at {}/{} shared feasible points ({}), shallower at {}",
            c.pth,
            c.jansen_fewer_copies,
            c.shared_feasible,
            opt(c.fraction_fewer_copies, 4),
            c.jansen_shallower,
        )?;
    }
    Ok(())
}

fn sweep(registry: ProtocolRegistry, args: SweepArgs) -> Result<ExitCode> {
    let families = if args.search.families.is_empty() {
        registry.families()
    } else {
        args.search.families.clone()
    };
    let space = space(registry, &args.search)?;
    let grid = GridSpec {
        ell_values: args.ell.0,
        w0: args.w0,
        p_th_values: args.pth,
        families,
    };
    grid.validate()?;
    let sweep = run_sweep(&grid, &space)?;

    let mut out = io::stdout().lock();
    writeln!(out, "{} grid points", sweep.points.len())?;
    print_summary(&mut out, &sweep.summary)?;

    if let Some(path) = &args.out {
        let format = args.format.unwrap_or_else(|| ExportFormat::for_path(path));
        export(&sweep.points, &sweep.summary, format, path)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn fixedpoint(registry: ProtocolRegistry, args: FixedpointArgs) -> Result<ExitCode> {
    let space = space(registry, &args.search)?;
    let w_th = WernerParameter::new(args.wth)?;
    let path = PathSpec::new(args.ell)?;
    let found = fixed_target_budget(w_th, path, args.pth, &space)?;

    let mut out = io::stdout().lock();
    writeln!(out, "w_th = {}  ell = {}  p_th = {}", args.wth, args.ell, args.pth)?;
    match found.target {
        Some(t) => writeln!(out, "target     {t:.8}")?,
        None => writeln!(out, "target     none")?,
    }
    print_result(&mut out, &found.result)?;

    if let Some(path_out) = &args.out {
        let mut doc = result_json(&found.result);
        doc["target"] = json!(found.target);
        doc["w_th"] = json!(args.wth);
        doc["ell"] = json!(args.ell);
        doc["pth"] = json!(args.pth);
        write_json(path_out, &doc)?;
    }
    Ok(exit_for(&found.result))
}

fn boundary(args: BoundaryArgs) -> Result<ExitCode> {
    let rows: Vec<(u32, f64)> = args
        .ell
        .0
        .iter()
        .map(|&ell| Ok((ell, boundary_w0(PathSpec::new(ell)?).value())))
        .collect::<Result<_>>()?;

    let mut out = io::stdout().lock();
    writeln!(out, "ell  boundary_w0")?;
    for (ell, b) in &rows {
        writeln!(out, "{ell:<4} {b:.5}")?;
    }
    if let Some(path) = &args.out {
        let doc: Vec<_> = rows.iter().map(|(ell, b)| json!({"ell": ell, "boundary_w0": b})).collect();
        write_json(path, &json!(doc))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(args: ValidateArgs) -> Result<ExitCode> {
    let config = ScheduleConfig::new(args.r, args.n0);
    let spec = TrialSpec::new(config, args.p.clone(), args.trials as u64, args.seed)?;
    let exact = all_in_success(config, &args.p);
    let estimate = simulate_success(&spec);
    let z = estimate.z_score(exact);
    let agrees = z.abs() <= 3.0;

    let mut out = io::stdout().lock();
    writeln!(out, "dp         {exact:.6}")?;
    writeln!(out, "mc         {:.6}  ({} / {})", estimate.p_hat, estimate.successes, estimate.trials)?;
    writeln!(out, "stderr     {:.6}", estimate.stderr)?;
    writeln!(out, "z          {z:.3}")?;
    writeln!(out, "agreement  {}", if agrees { "yes" } else { "no" })?;

    if let Some(path) = &args.out {
        let doc = json!({
            "n0": args.n0,
            "r": args.r,
            "p": args.p,
            "trials": args.trials,
            "seed": args.seed,
            "dp": exact,
            "p_hat": estimate.p_hat,
            "stderr": estimate.stderr,
            "z": if z.is_finite() { json!(z) } else { json!(null) },
            "agrees": agrees,
        });
        write_json(path, &doc)?;
    }
    Ok(if agrees { ExitCode::SUCCESS } else { ExitCode::from(EXIT_REJECTED) })
}
