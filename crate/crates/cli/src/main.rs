use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ailtl_core::runtime::{self, CycleMetrics, EngineConfig, CSV_HEADER};
use ailtl_core::scenarios::{self, ScenarioKind, ScenarioSpec, Variant};
use ailtl_core::{parse_program, parse_trace, Program};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

/// Monitor event traces against interval temporal constraints.
#[derive(Parser)]
#[command(name = "ailtl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program over a trace and print the report.
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Append a per-cycle cost CSV block.
        #[arg(long)]
        metrics: bool,
    },
    /// Generate a scenario program and trace.
    Scenario {
        /// queue, supply, battery, temperature, ethics or ambulance
        name: String,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// standard, soft (supply), low-charge or extensive (battery)
        #[arg(long, default_value = "standard")]
        variant: String,
        /// Queue: drop the gate and force this many duplicate pushes.
        #[arg(long, num_args = 0..=1, default_missing_value = "1")]
        inject_duplicate: Option<usize>,
    },
    /// Measure per-cycle cost for a growing number of identical expressions.
    Bench {
        /// Expression counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        exprs: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        ticks: u64,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
    },
    /// Parse and validate a program (and optionally a trace).
    Check {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { program, trace, report, metrics } => {
            cmd_run(&program, &trace, report.as_deref(), metrics)
        }
        Command::Scenario { name, size, seed, out, variant, inject_duplicate } => {
            cmd_scenario(&name, size, seed, &out, &variant, inject_duplicate.unwrap_or(0))
        }
        Command::Bench { exprs, ticks, repeat } => cmd_bench(&exprs, ticks, repeat),
        Command::Check { program, trace } => cmd_check(&program, trace.as_deref()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_program(path: &Path) -> Result<Program> {
    let text = read(path)?;
    parse_program(&text).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn load_trace(path: &Path) -> Result<Vec<ailtl_core::Event>> {
    let text = read(path)?;
    parse_trace(&text).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn cmd_run(
    program: &Path,
    trace: &Path,
    report: Option<&Path>,
    metrics: bool,
) -> Result<ExitCode> {
    let p = load_program(program)?;
    let events = load_trace(trace)?;
    let cfg = EngineConfig { metrics, ..EngineConfig::from_program(&p) };
    let r = runtime::run(&p, &events, cfg).context("run aborted")?;
    let mut text = r.to_string();
    if metrics {
        writeln!(text, "\n{CSV_HEADER}").expect("writing to a String");
        if let Some(m) = CycleMetrics::mean(&r.metrics) {
            writeln!(text, "{}", m.csv_row()).expect("writing to a String");
        }
    }
    match report {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            println!(
                "violations={} rule-violations={} report={}",
                r.violations(),
                r.rule_violations(),
                path.display()
            );
        }
        None => print!("{text}"),
    }
    Ok(if r.has_violations() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_scenario(
    name: &str,
    size: Option<usize>,
    seed: u64,
    out: &Path,
    variant: &str,
    duplicates: usize,
) -> Result<ExitCode> {
    let kind = ScenarioKind::from_name(name).ok_or_else(|| {
        let names: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
        anyhow!("unknown scenario `{name}` (expected one of {})", names.join(", "))
    })?;
    let variant =
        Variant::from_name(variant).ok_or_else(|| anyhow!("unknown variant `{variant}`"))?;
    let mut spec = ScenarioSpec::new(kind).seed(seed).variant(variant).inject_duplicates(duplicates);
    if let Some(n) = size {
        spec = spec.size(n);
    }
    let s = scenarios::generate(&spec)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let stem = spec.file_stem();
    let prog = out.join(format!("{stem}.ailtl"));
    let trace = out.join(format!("{stem}.trace"));
    fs::write(&prog, &s.program).with_context(|| format!("cannot write {}", prog.display()))?;
    fs::write(&trace, &s.trace).with_context(|| format!("cannot write {}", trace.display()))?;
    println!("{}\n{}", prog.display(), trace.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(exprs: &[usize], ticks: u64, repeat: usize) -> Result<ExitCode> {
    if repeat == 0 || ticks == 0 {
        bail!("--ticks and --repeat must be at least 1");
    }
    println!("{CSV_HEADER}");
    for &f in exprs {
        let (prog, trace) = scenarios::scaling_workload(f, ticks);
        let p = parse_program(&prog)?;
        let events = parse_trace(&trace)?;
        let runs = runtime::measure(&p, &events, &EngineConfig::from_program(&p), repeat)?;
        let m = CycleMetrics::mean(&runs).expect("repeat is at least 1");
        println!("{}", m.csv_row());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(program: &Path, trace: Option<&Path>) -> Result<ExitCode> {
    let p = load_program(program)?;
    print!(
        "ok: {} facts, {} meta-rules, {} rules, {} expressions",
        p.facts.len(),
        p.metarules.len(),
        p.reactive.len(),
        p.evolutionary.len()
    );
    if let Some(t) = trace {
        print!(", {} events", load_trace(t)?.len());
    }
    println!();
    Ok(ExitCode::SUCCESS)
}
