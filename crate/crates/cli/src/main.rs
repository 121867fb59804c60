//! `splitsan`: plan sanitizer distributions and simulate the resulting
//! N-version runs.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use splitsan_core::{
    evaluate_plan, generate_trace, load_catalog, load_profile, oracle_partition, parse_trace, plan_partition,
    run_simulation, synthesize_variant, CostDistribution, PartitionError, PartitionPlan, SimError,
    SimulationConfig, SimulationReport, SyncMode, SyscallClass, Verdict, VariantTrace, WorkloadSpec,
};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "splitsan", version, about = "Distribute sanitizer checks across variants and simulate the N-version run")]
struct Cli {
    /// Seed for generation (gen) or scheduler tie-breaking (simulate).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (a directory for `synth`). Standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace.
    Gen(GenArgs),
    /// Partition a profile or sanitizer catalog across N variants.
    Plan(PlanArgs),
    /// Write one variant trace per plan variant.
    Synth(SynthArgs),
    /// Run the leader/follower simulation and write a report.
    Simulate(SimulateArgs),
    /// Pretty-print a report file.
    Report { path: PathBuf },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10)]
    units: usize,
    /// Body events per trace section.
    #[arg(long, default_value_t = 100)]
    events: usize,
    #[arg(long, default_value_t = 0.2)]
    syscall_ratio: f64,
    #[arg(long, default_value_t = 0.0)]
    lock_ratio: f64,
    /// Child processes forked from the main trace.
    #[arg(long, default_value_t = 0)]
    children: usize,
    /// Concentrate at least 95% of check cost in `u1`.
    #[arg(long)]
    heavy_tail: bool,
    /// Units with a triggered vulnerability (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    vuln: Vec<String>,
    /// Also write the profile implied by the trace's check costs.
    #[arg(long)]
    profile_out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// Profile (`profile-version 1`) or catalog (`catalog-version 1`).
    input: PathBuf,
    #[arg(long)]
    n: usize,
    /// Honour the catalog's conflict pairs.
    #[arg(long)]
    conflicts: bool,
    /// Also score the exhaustive optimum (up to 15 units).
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct SynthArgs {
    trace: PathBuf,
    #[arg(long)]
    plan: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Strict,
    Selective,
}

#[derive(Args)]
struct SimulateArgs {
    /// Variant traces, leader first.
    variants: Vec<PathBuf>,
    /// Base trace to synthesize variants from (needs --plan).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Plan used for synthesis; its units also name report writes.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Ring capacity per execution group (selective mode).
    #[arg(long)]
    ring: Option<usize>,
    #[arg(long)]
    handshake: Option<u64>,
    /// Classes that lockstep in selective mode, e.g. `iow,ioo`.
    #[arg(long, value_delimiter = ',')]
    selected: Option<Vec<String>>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const EXIT_ALERT: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_STALL: u8 = 5;

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(error: E) -> Self {
        Failure { code: EXIT_INVALID, error: error.into() }
    }
}

fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure { code, error: error.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.as_deref();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args, cli.seed, out),
        Command::Plan(args) => cmd_plan(args, out),
        Command::Synth(args) => cmd_synth(args, out),
        Command::Simulate(args) => cmd_simulate(args, cli.seed, out),
        Command::Report { path } => cmd_report(&path),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("splitsan: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(args: GenArgs, seed: Option<u64>, out: Option<&Path>) -> Result<u8, Failure> {
    let spec = WorkloadSpec {
        unit_count: args.units,
        event_count: args.events,
        syscall_ratio: args.syscall_ratio,
        lock_ratio: args.lock_ratio,
        cost_distribution: if args.heavy_tail { CostDistribution::HeavyTail } else { CostDistribution::Uniform },
        vuln_units: args.vuln,
        children: args.children,
        seed: seed.unwrap_or(WorkloadSpec::default().seed),
    };
    let trace = generate_trace(&spec)?;
    emit(out, &trace.to_string())?;
    if let Some(path) = args.profile_out {
        emit(Some(&path), &trace.check_profile().to_string())?;
    }
    Ok(0)
}

fn cmd_plan(args: PlanArgs, out: Option<&Path>) -> Result<u8, Failure> {
    let text = read(&args.input)?;
    let header = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let (units, conflicts) = if header.starts_with("catalog-version") {
        let catalog = load_catalog(&text).with_context(|| format!("in {}", args.input.display()))?;
        let conflicts = args.conflicts.then(|| catalog.conflicts().clone());
        (catalog.weighted_units(), conflicts)
    } else {
        let profile = load_profile(&text).with_context(|| format!("in {}", args.input.display()))?;
        (profile.weighted_units(), None)
    };

    let plan = plan_partition(&units, args.n, conflicts.as_ref()).map_err(partition_failure)?;
    let score = evaluate_plan(&plan, &units)?;
    let mut summary = format!("greedy {score}\n");
    if args.oracle {
        match oracle_partition(&units, args.n, conflicts.as_ref()) {
            Ok(oracle) => {
                let best = evaluate_plan(&oracle, &units)?;
                summary.push_str(&format!("oracle {best}\n"));
                if best.makespan > 0 {
                    summary.push_str(&format!(
                        "makespan-ratio {:.4}\n",
                        score.makespan as f64 / best.makespan as f64
                    ));
                }
            }
            Err(PartitionError::TooLarge { count, limit }) => {
                eprintln!("oracle skipped: {count} units exceeds the limit of {limit}");
            }
            Err(e) => return Err(partition_failure(e)),
        }
    }
    match out {
        Some(path) => {
            emit(Some(path), &plan.to_string())?;
            print!("{summary}");
        }
        None => print!("{plan}{summary}"),
    }
    Ok(0)
}

fn partition_failure(e: PartitionError) -> Failure {
    let code = match e {
        PartitionError::Infeasible(_) | PartitionError::TooLarge { .. } | PartitionError::Timeout => EXIT_INFEASIBLE,
        _ => EXIT_INVALID,
    };
    fail(code, e)
}

fn load_plan(path: &Path) -> anyhow::Result<PartitionPlan> {
    PartitionPlan::parse(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn synthesize_all(trace_path: &Path, plan: &PartitionPlan) -> anyhow::Result<Vec<VariantTrace>> {
    let base = parse_trace(&read(trace_path)?).with_context(|| format!("in {}", trace_path.display()))?;
    (0..plan.n())
        .map(|v| synthesize_variant(&base, plan, v).with_context(|| format!("synthesizing variant {v}")))
        .collect()
}

fn cmd_synth(args: SynthArgs, out: Option<&Path>) -> Result<u8, Failure> {
    let plan = load_plan(&args.plan)?;
    let variants = synthesize_all(&args.trace, &plan)?;
    let dir = out.unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for variant in &variants {
        let path = dir.join(format!("variant-{}.trace", variant.variant));
        emit(Some(&path), &variant.trace.to_string())?;
    }
    Ok(0)
}

fn parse_class(token: &str) -> anyhow::Result<SyscallClass> {
    SyscallClass::from_token(token.trim()).ok_or_else(|| anyhow!("unknown syscall class `{token}`"))
}

fn cmd_simulate(args: SimulateArgs, seed: Option<u64>, out: Option<&Path>) -> Result<u8, Failure> {
    let manifest = match &args.manifest {
        Some(path) => RunManifest::load(path)?,
        None => RunManifest::default(),
    };

    let plan_path = args.plan.or(manifest.plan);
    let plan = plan_path.as_deref().map(load_plan).transpose()?;
    let trace_path = args.trace.or(manifest.trace);
    let variant_paths = if args.variants.is_empty() { manifest.variants } else { args.variants };

    let variants: Vec<VariantTrace> = match (trace_path, &plan) {
        (Some(_), _) if !variant_paths.is_empty() => {
            return Err(anyhow!("give either a base trace or variant traces, not both").into())
        }
        (Some(path), Some(plan)) => synthesize_all(&path, plan)?,
        (Some(_), None) => return Err(anyhow!("--trace needs --plan").into()),
        (None, _) => variant_paths
            .iter()
            .enumerate()
            .map(|(i, path)| {
                let trace = parse_trace(&read(path)?).with_context(|| format!("in {}", path.display()))?;
                Ok(VariantTrace { variant: i, trace })
            })
            .collect::<anyhow::Result<_>>()?,
    };
    if let Some(n) = manifest.n {
        if n != variants.len() {
            return Err(anyhow!("manifest expects {n} variants, found {}", variants.len()).into());
        }
    }

    let mode = match args.mode.or(manifest.mode) {
        Some(ModeArg::Selective) => SyncMode::Selective,
        Some(ModeArg::Strict) | None => SyncMode::Strict,
    };
    let mut config = SimulationConfig { mode, ..SimulationConfig::default() };
    if let Some(ring) = args.ring.or(manifest.ring) {
        config.ring_capacity = ring;
    }
    if let Some(h) = args.handshake.or(manifest.handshake) {
        config.handshake_cost = h;
    }
    if let Some(classes) = args.selected.or(manifest.selected) {
        config.selected_classes = classes.iter().map(|c| parse_class(c)).collect::<anyhow::Result<_>>()?;
    }
    config.scheduler_seed = seed.or(manifest.seed).unwrap_or(0);
    if let Some(plan) = &plan {
        config.report_units = plan.assignment().keys().cloned().collect();
    }

    let sim = match run_simulation(&variants, &config) {
        Ok(sim) => sim,
        Err(SimError::Stall { blocked }) => {
            for b in &blocked {
                eprintln!("blocked: variant {} group {} ({}) waiting on {}", b.variant, b.egid, b.trace, b.waiting_on);
            }
            return Err(fail(EXIT_STALL, SimError::Stall { blocked }));
        }
        Err(e) => return Err(e.into()),
    };
    let out = out.map(Path::to_path_buf).or(manifest.out);
    emit(out.as_deref(), &sim.report.to_string())?;
    if out.is_some() {
        print!("{}", sim.report.pretty());
    }
    Ok(match sim.report.verdict {
        Verdict::Clean => 0,
        Verdict::Alert { .. } => EXIT_ALERT,
    })
}

fn cmd_report(path: &Path) -> Result<u8, Failure> {
    let report: SimulationReport = read(path)?.parse().with_context(|| format!("in {}", path.display()))?;
    print!("{}", report.pretty());
    Ok(0)
}
