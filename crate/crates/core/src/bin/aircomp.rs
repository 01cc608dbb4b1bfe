use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aircomp_core::benchmarks::SchemeId;
use aircomp_core::experiment::{
    emit_plots, record_files, reverify, run, ExperimentError, ExperimentSpec, Layout, ResultRecord,
    RunSummary, ScenarioSource, SweepAxis,
};
use aircomp_core::orchestrator::BcdOptions;
use aircomp_core::scenario::parse_quantity;

#[derive(Parser)]
#[command(name = "aircomp", version, about = "Multi-UAV AirComp task-count planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one or more schemes for each seed.
    Solve(RunArgs),
    /// Sweep power budget or mission duration.
    Sweep(RunArgs),
    /// Run every scheme, optionally over a sweep.
    Compare(RunArgs),
    /// Write trajectory and timeline CSV files for saved records.
    EmitPlots {
        /// Directory holding JSON records.
        #[arg(long, default_value = "results")]
        from: PathBuf,
        /// Output directory for CSV files (defaults to --from).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check saved records against every problem constraint.
    Verify {
        /// Record files or directories of records.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Write a generated scenario to a JSON file.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// `desk`, `paper` or a path to a scenario JSON file.
    #[arg(long, default_value = "desk")]
    scenario: String,
    /// UAV count for generated scenarios.
    #[arg(long, default_value_t = 1)]
    uavs: usize,
    /// Mission duration in seconds for generated scenarios.
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    /// Per-device energy budget for generated scenarios (W, or "dBm").
    #[arg(long, default_value = "0.8", value_parser = quantity)]
    power: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<SchemeId>,
    /// Seeds as a list with ranges, e.g. `1,2,5-8`.
    #[arg(long, default_value = "1", value_parser = seeds)]
    seeds: SeedList,
    #[arg(long, default_value = "none")]
    sweep_axis: SweepAxis,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', value_parser = quantity)]
    values: Vec<f64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Fractional-decrease stopping tolerance of the inner descent.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap of the inner descent.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Independent runs in parallel; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn seeds(text: &str) -> Result<SeedList, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range '{part}'"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range '{part}'"))?;
                if b < a {
                    return Err(format!("empty seed range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| format!("bad seed '{part}'"))?),
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(out))
}

fn quantity(text: &str) -> Result<f64, String> {
    parse_quantity(text).ok_or_else(|| format!("cannot parse '{text}' as a number"))
}

fn source(args: &ScenarioArgs) -> ScenarioSource {
    let layout = match args.scenario.as_str() {
        "desk" => Layout::Desk,
        "paper" => Layout::Paper,
        path => return ScenarioSource::File(PathBuf::from(path)),
    };
    ScenarioSource::Generated {
        layout,
        num_uavs: args.uavs,
        duration: args.duration,
        power: args.power,
    }
}

fn spec_from(args: RunArgs, default_schemes: &[SchemeId]) -> ExperimentSpec {
    let mut options = BcdOptions::default();
    if let Some(t) = args.tol {
        options.tol = t;
    }
    if let Some(m) = args.max_iters {
        options.max_iters = m;
    }
    let schemes = if args.scheme.is_empty() {
        default_schemes.to_vec()
    } else {
        args.scheme
    };
    ExperimentSpec {
        scenario: source(&args.scenario),
        schemes,
        sweep_axis: args.sweep_axis,
        values: args.values,
        seeds: args.seeds.0,
        out_dir: args.out,
        options,
        threads: args.threads,
    }
}

fn print_summary(summary: &RunSummary) {
    println!("{:<12} {:>10} {:>6} {:>6} {:>6} {:>10} {:>9}  status", "scheme", "value", "seed", "D*", "bound", "gamma", "seconds");
    for r in &summary.records {
        let value = r.sweep_value.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let gamma = r.gamma.map(|g| format!("{g:.4}")).unwrap_or_else(|| "-".into());
        let status = r.error.as_deref().unwrap_or("ok");
        println!(
            "{:<12} {:>10} {:>6} {:>6} {:>6} {:>10} {:>9.2}  {status}",
            r.scheme.as_str(),
            value,
            r.seed,
            r.d_star,
            r.upper_bound,
            gamma,
            r.runtime_seconds
        );
    }
    println!("aggregate: {}", summary.aggregate_file.display());
}

fn run_verb(spec: ExperimentSpec) -> Result<ExitCode, ExperimentError> {
    let summary = run(&spec)?;
    print_summary(&summary);
    Ok(if summary.failures > 0 {
        eprintln!("{} of {} runs failed", summary.failures, summary.records.len());
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn verify_paths(paths: &[PathBuf]) -> Result<ExitCode, ExperimentError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            files.extend(record_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    let mut failed = 0;
    for f in &files {
        let record = ResultRecord::load(f)?;
        match (&record.error, reverify(&record)) {
            (Some(e), _) => {
                failed += 1;
                println!("FAIL {}: {e}", f.display());
            }
            (None, Some(report)) if report.ok() => {
                println!("ok   {}: D*={} worst MSE/eps={:.4}", f.display(), record.d_star, report.worst_mse_ratio)
            }
            (None, Some(report)) => {
                failed += 1;
                println!("FAIL {}: {}", f.display(), report.violations.join("; "));
            }
            (None, None) if record.scheme == SchemeId::UpperBound => println!("ok   {}: analytic bound", f.display()),
            (None, None) => {
                failed += 1;
                println!("FAIL {}: record carries no plan", f.display());
            }
        }
    }
    Ok(if failed > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn generate(args: &ScenarioArgs, seed: u64, out: &Path) -> Result<ExitCode, ExperimentError> {
    let spec = ExperimentSpec {
        scenario: source(args),
        schemes: vec![SchemeId::Joint],
        sweep_axis: SweepAxis::None,
        values: Vec::new(),
        seeds: vec![seed],
        out_dir: PathBuf::new(),
        options: BcdOptions::default(),
        threads: 1,
    };
    spec.build_scenario(None, seed)?.save(out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(args) => run_verb(spec_from(args, &[SchemeId::Joint])),
        Command::Sweep(args) => {
            if args.sweep_axis == SweepAxis::None {
                eprintln!("error: sweep needs --sweep-axis power or duration");
                return ExitCode::from(1);
            }
            run_verb(spec_from(args, &[SchemeId::Joint]))
        }
        Command::Compare(args) => run_verb(spec_from(args, &SchemeId::ALL)),
        Command::EmitPlots { from, out } => {
            let out = out.unwrap_or_else(|| from.clone());
            emit_plots(&from, &out).map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            })
        }
        Command::Verify { paths } => verify_paths(&paths),
        Command::Generate { scenario, seed, out } => generate(&scenario, seed, &out),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
