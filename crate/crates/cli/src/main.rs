use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use fpp_lab::report::ExperimentReport;
use fpp_lab::{emit, selftest, ConfigError, ExperimentConfig, Format, RunOptions, BUDGET_VAR};
use fpp_lab_core::variational::time_constant_of;
use fpp_lab_core::weights::{CountableAtoms, ShiftMode, WeightFunction};

#[derive(Parser)]
#[command(
    name = "fpp-lab",
    version,
    about = "First-passage percolation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formats {
    Csv,
    Json,
    Both,
}

impl Formats {
    fn list(self) -> Vec<Format> {
        match self {
            Formats::Csv => vec![Format::Csv],
            Formats::Json => vec![Format::Json],
            Formats::Both => vec![Format::Json, Format::Csv],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        format: Formats,
    },
    /// Run the built-in oracle checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize the built-in weight families, or one given as JSON.
    DescribeWeights {
        #[arg(long)]
        weight: Option<String>,
        #[arg(long, default_value_t = 2)]
        arity: usize,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Config(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
            Failure::Runtime(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Config(anyhow!("--threads must be positive")));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.into()))?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("note: built without the parallel feature; --threads {n} ignored");
    Ok(())
}

fn budget_override() -> Result<Option<u64>, Failure> {
    match std::env::var(BUDGET_VAR) {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|b| *b > 0)
            .map(Some)
            .ok_or_else(|| {
                Failure::Config(anyhow!("{BUDGET_VAR}={text:?} is not a positive integer"))
            }),
        Err(_) => Ok(None),
    }
}

fn print_verdicts(report: &ExperimentReport) {
    for v in &report.verdicts {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {}: observed {} threshold {} ({})",
            v.rule,
            emit::format_number(v.observed),
            emit::format_number(v.threshold),
            v.detail
        );
    }
    let t = &report.telemetry;
    if t.budget_failures > 0 || !t.failures.is_empty() {
        println!(
            "{} replica failures ({} over budget {})",
            t.failures.len(),
            t.budget_failures,
            t.budget
        );
    }
}

fn finish(
    report: &ExperimentReport,
    out: Option<PathBuf>,
    formats: &[Format],
) -> Result<ExitCode, Failure> {
    print_verdicts(report);
    if let Some(dir) = out {
        let written = emit::emit(report, &dir, formats)
            .with_context(|| format!("writing artifacts to {}", dir.display()))
            .map_err(Failure::Runtime)?;
        eprintln!("wrote {} files to {}", written.len(), dir.display());
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run_command(
    config: PathBuf,
    threads: Option<usize>,
    out: Option<PathBuf>,
    format: Formats,
) -> Result<ExitCode, Failure> {
    let cfg = ExperimentConfig::from_path(&config).map_err(|e| match e {
        ConfigError::Io { .. } => Failure::Runtime(e.into()),
        e => Failure::Config(e.into()),
    })?;
    let options = RunOptions {
        budget_override: budget_override()?,
    };
    set_threads(threads)?;
    let started = Instant::now();
    let report = fpp_lab::run(&cfg, &options).map_err(|e| match e {
        fpp_lab::RunError::Config(e) => Failure::Config(e.into()),
        e => Failure::Runtime(e.into()),
    })?;
    eprintln!(
        "{} finished in {:.2}s",
        cfg.label(),
        started.elapsed().as_secs_f64()
    );
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("fpp-lab-out").join(cfg.label()));
    finish(&report, Some(out), &format.list())
}

fn selftest_command(
    seed: u64,
    threads: Option<usize>,
    out: Option<PathBuf>,
) -> Result<ExitCode, Failure> {
    set_threads(threads)?;
    let started = Instant::now();
    let report = selftest::full(seed);
    eprintln!(
        "selftest finished in {:.2}s",
        started.elapsed().as_secs_f64()
    );
    finish(&report, out, &Formats::Both.list())
}

fn built_in_families() -> Vec<(&'static str, WeightFunction)> {
    let mut v = vec![
        ("identity", WeightFunction::identity()),
        ("square", WeightFunction::square()),
        ("power 0.5", WeightFunction::power(0.5)),
        ("affine 1 + 2u", WeightFunction::affine(1.0, 2.0)),
        ("constant 1", WeightFunction::constant(1.0)),
        ("exponential rate 1", WeightFunction::exponential(1.0)),
        ("uniform [0.5, 2]", WeightFunction::uniform(0.5, 2.0)),
        (
            "indicator of [0.5, 1]",
            WeightFunction::indicator(0.5, 1.0).expect("valid"),
        ),
        (
            "shifted identity, +0.5 on positives",
            WeightFunction::identity().shift(0.5, ShiftMode::AddOnPositive),
        ),
    ];
    if let Ok(w) = WeightFunction::two_atom(0.3, 0.0, 1.0) {
        v.push(("two atoms {0: 0.3, 1: 0.7}", w));
    }
    if let Ok(w) = WeightFunction::piecewise(vec![0.6, 0.4], vec![0.0, 1.0]) {
        v.push(("piecewise {0: 0.6, 1: 0.4}", w));
    }
    if let Ok(c) = CountableAtoms::dense_discrete(0.2, 64, 1.5) {
        v.push(("dense countable atoms", WeightFunction::CountableAtoms(c)));
    }
    v
}

fn describe(name: &str, w: &WeightFunction, arity: usize) -> anyhow::Result<()> {
    let s = w.summarize(fpp_lab_core::measures::DEFAULT_GRID);
    println!("{name}");
    println!("  json: {}", serde_json::to_string(w)?);
    println!(
        "  zero mass {}  essential infimum {}  atom at infimum {}  atomless {}",
        emit::format_number(s.zero_mass),
        emit::format_number(s.essential_infimum),
        emit::format_number(s.atom_at_infimum_mass),
        w.is_atomless()
    );
    match time_constant_of(w, arity) {
        Ok(tc) if tc.boundary => println!(
            "  tree time constant (arity {arity}): {} (atom case)",
            emit::format_number(tc.mu)
        ),
        Ok(tc) => println!(
            "  tree time constant (arity {arity}): {} at alpha {}",
            emit::format_number(tc.mu),
            emit::format_number(tc.alpha_star)
        ),
        Err(e) => println!("  tree time constant (arity {arity}): unavailable, {e}"),
    }
    Ok(())
}

fn describe_command(weight: Option<String>, arity: usize) -> Result<ExitCode, Failure> {
    if arity < 2 {
        return Err(Failure::Config(anyhow!("--arity must be at least 2")));
    }
    match weight {
        Some(text) => {
            let w: WeightFunction = serde_json::from_str(&text)
                .context("parsing --weight")
                .map_err(Failure::Config)?;
            w.validate().map_err(|e| Failure::Config(e.into()))?;
            describe("custom", &w, arity).map_err(Failure::Runtime)?;
        }
        None => {
            for (name, w) in built_in_families() {
                describe(name, &w, arity).map_err(Failure::Runtime)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            threads,
            out,
            format,
        } => run_command(config, threads, out, format),
        Command::Selftest { seed, threads, out } => selftest_command(seed, threads, out),
        Command::DescribeWeights { weight, arity } => describe_command(weight, arity),
    };
    outcome.unwrap_or_else(Failure::exit)
}
