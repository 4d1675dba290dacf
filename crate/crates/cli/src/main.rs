//! `ras`: run scenarios, compare planner variants, benchmark latency and
//! extract key points from global trajectories.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ras_core::fusion::select_key_points;
use ras_core::GlobalTrajectory;
use ras_sim::{bench, comparison_table, run, BenchConfig, Method, MethodSummary, RunOptions, Scenario, SimError};

#[derive(Parser)]
#[command(name = "ras", version, about = "Risk-aware local planner simulator")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run one method over a seed list, writing traces and metrics.
    Run(RunArgs),
    /// Run several methods over the same seeds and print a comparison table.
    Compare(RunArgs),
    /// Time planning cycles on synthetic particle fields.
    Bench(BenchArgs),
    /// Extract key points from a global trajectory file.
    Keypoints(KeypointArgs),
    /// Check a scenario file and overrides without running it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Method name; for `compare`, a comma-separated list (default: all).
    #[arg(long)]
    method: Option<String>,
    /// `3`, `1,4,9` or an inclusive range `1..20` (default: the scenario's).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Config override `dotted.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Exit with status 1 if any run ends frozen short of its goal.
    #[arg(long)]
    strict: bool,
    /// Record wall-clock planner latency (makes traces non-deterministic).
    #[arg(long)]
    latency: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario supplying planner settings (default: built-in defaults).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    cycles: usize,
    #[arg(long, default_value_t = 5000)]
    particles: usize,
    #[arg(long, default_value_t = 4)]
    snapshots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report to `DIR/bench.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct KeypointArgs {
    /// Global trajectory file.
    #[arg(long)]
    global: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fusion overrides, e.g. `fusion.max_gap=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(e) => Failure::Runtime(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Usage(format!("bad --seeds '{spec}' (expected N, N,M,... or A..B)"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds = if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn parse_methods(spec: Option<&str>) -> Result<Vec<Method>, Failure> {
    match spec {
        None => Ok(Method::ALL.to_vec()),
        Some(s) => s.split(',').map(|m| m.trim().parse::<Method>().map_err(Failure::from)).collect(),
    }
}

fn run_seeds(args: &RunArgs, s: &Scenario, method: Method, seeds: &[u64]) -> Result<Vec<ras_sim::RunMetrics>, Failure> {
    fs::create_dir_all(&args.out).map_err(io(&args.out))?;
    let opts = RunOptions { record_latency: args.latency };
    let mut summary = String::from("seed,collision_count,freezing_count,flight_time,reached_goal,min_clearance\n");
    let mut all = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let o = run(s, method, seed, opts)?;
        let stem = args.out.join(format!("{}_{}_seed{}", s.name, method, seed));
        let trace = stem.with_extension("csv");
        fs::write(&trace, o.trace_csv()).map_err(io(&trace))?;
        let metrics = stem.with_extension("metrics.txt");
        fs::write(&metrics, o.metrics.to_text()).map_err(io(&metrics))?;
        let m = &o.metrics;
        summary.push_str(&format!(
            "{seed},{},{},{:.3},{},{:.6}\n",
            m.collision_count, m.freezing_count, m.flight_time, m.reached_goal, m.min_clearance
        ));
        all.push(o.metrics);
    }
    let path = args.out.join(format!("{}_{}_summary.csv", s.name, method));
    fs::write(&path, &summary).map_err(io(&path))?;
    Ok(all)
}

fn stuck(runs: &[ras_sim::RunMetrics]) -> usize {
    runs.iter().filter(|m| m.freezing_count > 0 && !m.reached_goal).count()
}

fn load(args: &RunArgs) -> Result<(Scenario, Vec<u64>), Failure> {
    let s = Scenario::load(&args.scenario, &args.overrides)?;
    let seeds = match &args.seeds {
        Some(spec) => parse_seeds(spec)?,
        None => s.seeds.clone(),
    };
    Ok((s, seeds))
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let (s, seeds) = load(args)?;
    let method = match &args.method {
        Some(m) => m.parse::<Method>()?,
        None => Method::Ras,
    };
    let runs = run_seeds(args, &s, method, &seeds)?;
    let row = MethodSummary::from_runs(method.as_str(), &runs);
    print!("{}", comparison_table(&s.name, &[row]));
    let n = stuck(&runs);
    if args.strict && n > 0 {
        return Err(Failure::Runtime(format!("{n} run(s) ended frozen")));
    }
    Ok(())
}

fn cmd_compare(args: &RunArgs) -> Result<(), Failure> {
    let (s, seeds) = load(args)?;
    let methods = parse_methods(args.method.as_deref())?;
    if methods.len() < 2 {
        return Err(Failure::Usage("compare needs at least two methods".into()));
    }
    let mut rows = Vec::new();
    let mut frozen = 0;
    for m in methods {
        let runs = run_seeds(args, &s, m, &seeds)?;
        frozen += stuck(&runs);
        rows.push(MethodSummary::from_runs(m.as_str(), &runs));
    }
    let table = comparison_table(&s.name, &rows);
    let path = args.out.join(format!("{}_compare.txt", s.name));
    fs::write(&path, &table).map_err(io(&path))?;
    print!("{table}");
    if args.strict && frozen > 0 {
        return Err(Failure::Runtime(format!("{frozen} run(s) ended frozen")));
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let s = match &args.scenario {
        Some(p) => Scenario::load(p, &args.overrides)?,
        None => {
            let s = Scenario::from_toml("", &args.overrides)?;
            s.validate()?;
            s
        }
    };
    let cfg =
        BenchConfig { particles: args.particles, cycles: args.cycles, snapshots: args.snapshots, seed: args.seed };
    let report = bench(&s, &cfg)?;
    let text = report.to_text();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join("bench.txt");
        fs::write(&path, &text).map_err(io(&path))?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_keypoints(args: &KeypointArgs) -> Result<(), Failure> {
    let fusion = Scenario::from_toml("", &args.overrides)?.fusion;
    let file = fs::File::open(&args.global).map_err(|e| Failure::Usage(format!("{}: {e}", args.global.display())))?;
    let g: GlobalTrajectory<f64> = GlobalTrajectory::read(BufReader::new(file))
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.global.display())))?;
    let key = select_key_points(&g, &fusion).map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(&args.out).map_err(io(&args.out))?;
    let stem = args.global.file_stem().and_then(|s| s.to_str()).unwrap_or("global");
    let path = args.out.join(format!("{stem}_keys.txt"));
    let mut buf = Vec::new();
    key.write(&g, &mut buf).map_err(io(&path))?;
    fs::write(&path, buf).map_err(io(&path))?;
    println!("points = {}", g.len());
    println!("key_points = {}", key.points.len());
    println!("written = {}", path.display());
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let s = Scenario::load(&args.scenario, &args.overrides)?;
    println!("{}: ok ({} obstacles, {} seeds)", s.name, s.obstacles.len(), s.seeds.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.verb {
        Verb::Run(a) => cmd_run(a),
        Verb::Compare(a) => cmd_compare(a),
        Verb::Bench(a) => cmd_bench(a),
        Verb::Keypoints(a) => cmd_keypoints(a),
        Verb::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
