use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use beamalign::config::{Estimator, JammerMode, Scenario};
use beamalign::harness::{self, Cell, Realization};
use beamalign::signal::{JammerProfile, ProbingMode};
use beamalign::snapshot::Snapshot;
use beamalign::{trace, verify};

#[derive(Parser)]
#[command(name = "beamalign", version, about = "Beam alignment under jamming: Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate P_BA for one cell.
    Run(RunArgs),
    /// Sweep the full grid of the scenario.
    Sweep(SweepArgs),
    /// Run oracle and consistency self-checks.
    Verify(VerifyArgs),
    /// Per-run bound diagnostics as JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario file (.toml or .json); unset fields take full-size defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Full-size profile instead of the desk profile (ignored with --config).
    #[arg(long)]
    full: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn scenario(&self) -> anyhow::Result<Scenario> {
        let mut s = match &self.config {
            Some(p) => Scenario::load(p).with_context(|| format!("loading {}", p.display()))?,
            None if self.full => Scenario::default(),
            None => Scenario::desk(),
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(runs) = self.runs {
            s.runs = runs;
        }
        s.validate()?;
        Ok(s)
    }

    fn init_threads(&self) -> anyhow::Result<()> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct CellArgs {
    /// Beacon slots; defaults to the first grid value.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    sjr: Option<f64>,
    /// random, omnidirectional or copy-bs.
    #[arg(long)]
    mode: Option<JammerMode>,
    #[arg(long)]
    gamma_j: Option<f64>,
}

impl CellArgs {
    fn cell(&self, s: &Scenario) -> Cell {
        Cell {
            q: self.q.unwrap_or(s.sweep.q[0]),
            sjr_db: self.sjr.unwrap_or(s.sweep.sjr_db[0]),
            jammer_mode: self.mode.unwrap_or(s.sweep.jammer_modes[0]),
            gamma_j: self.gamma_j.unwrap_or(s.sweep.gamma_j[0]),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    cell: CellArgs,
    /// unaware, antijam or reference; all three when omitted.
    #[arg(long)]
    estimator: Option<Estimator>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Dump the randomized-probing beacon of run 0 as a binary trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Dump the codebooks of run 0 as JSON.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Instances per check.
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    cell: CellArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_points(points: &[harness::CurvePoint], format: Format, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let mut w = output(out)?;
    match format {
        Format::Csv => harness::write_csv(points, &mut w)?,
        Format::Json => harness::write_json(points, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    args.common.init_threads()?;
    let s = args.common.scenario()?;
    let cell = args.cell.cell(&s);
    let estimators = args.estimator.map_or_else(|| s.sweep.estimators.clone(), |e| vec![e]);
    let points = estimators
        .iter()
        .map(|&e| harness::run_cell(&s, &cell, e))
        .collect::<beamalign::Result<Vec<_>>>()?;
    for p in &points {
        if p.unconverged > 0 {
            eprintln!("{}: {} runs hit the NNLS iteration cap", p.estimator.name(), p.unconverged);
        }
    }
    write_points(&points, args.format, &args.out)?;

    if args.trace.is_some() || args.snapshot.is_some() {
        let real = Realization::generate(&s, cell.q, harness::run_seed(s.seed, cell.q, 0))?;
        if let Some(p) = &args.trace {
            let profile = JammerProfile::new(s.system.jammer_power(cell.sjr_db), cell.gamma_j)?;
            let rx = real.beacon(&s, ProbingMode::Randomized, Some((cell.jammer_mode, profile)))?;
            trace::encode(&rx, BufWriter::new(File::create(p)?))?;
        }
        if let Some(p) = &args.snapshot {
            std::fs::write(p, Snapshot::from_realization(&real, Some(cell.jammer_mode)).to_json()?)?;
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let s = args.common.scenario()?;
    let points = harness::sweep_with_threads(&s, args.common.threads)?;
    write_points(&points, args.format, &args.out)
}

fn verify_cmd(args: VerifyArgs) -> anyhow::Result<()> {
    let checks = verify::all(args.cases, args.seed)?;
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {:<22} cases={:<5} worst={:.3e} tol={:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.worst,
            c.tolerance
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        bail!("{failed} check(s) failed");
    }
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    args.common.init_threads()?;
    let s = args.common.scenario()?;
    let cell = args.cell.cell(&s);
    let reports = harness::bound_reports(&s, &cell, s.runs)?;
    let mut w = output(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &reports)?;
    writeln!(w)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
