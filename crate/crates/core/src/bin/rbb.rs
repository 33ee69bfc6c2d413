//! `rbb` command-line harness.
//!
//! Seed precedence: `--seed` flag, then the `RBB_SEED` environment variable,
//! then 42. Exit status: 0 on success, 1 when a check fails, 2 on a
//! configuration or runtime error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rbb::exact::{
    enumerate_states, stationary_dense, stationary_distribution, stationary_pairs, transition_kernel,
    write_distribution_csv, write_kernel_csv, DEFAULT_STATE_CAP, DEFAULT_TUPLE_CAP, DENSE_SOLVE_LIMIT,
};
use rbb::experiments::{
    parse_csv, run_experiment, AlphaPreset, ExperimentConfig, ExperimentKind, ExperimentRows, MSpec, OutputFormat,
    TieBreakChoice,
};
use rbb::observables::{ObservationRow, Observable};
use rbb::plot::{plot_rows, PlotKind};
use rbb::suite::run_checks;
use rbb::validation::CheckReport;
use rbb::{InitialConfig, Process, RandomSource, RbbError, Simulation};

#[derive(Parser, Debug)]
#[command(name = "rbb", version, about = "Repeated balls-into-bins simulation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed (flag > RBB_SEED > 42).
    #[arg(long, env = "RBB_SEED", default_value_t = 42, global = true)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Worker threads for repetitions.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct Grid {
    /// Bin counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Absolute ball counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Vec<u64>,
    /// Ball counts as multiples of n, comma separated.
    #[arg(long = "m-mult", value_delimiter = ',')]
    m_mult: Vec<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    /// uniform, single or file:<path>
    #[arg(long)]
    init: Option<String>,
    /// paper, practical or a positive number
    #[arg(long, default_value = "practical")]
    alpha: String,
    /// Convergence target as a multiple of (m/n) ln n.
    #[arg(long = "threshold-factor")]
    threshold_factor: Option<f64>,
    /// First averaged round of the empty fraction.
    #[arg(long = "burn-in")]
    burn_in: Option<u64>,
    /// Also write an SVG chart next to the output.
    #[arg(long)]
    plot: bool,
    /// Use the full grids of the original figures.
    #[arg(long = "paper-scale")]
    paper_scale: bool,
    #[arg(long, value_enum, default_value_t = Tie::Random)]
    tie: Tie,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Tie {
    BallId,
    Random,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    MaxLoad,
    EmptyFraction,
    Convergence,
    Traversal,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ProcessArg {
    Rbb,
    Idealized,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one trace and print per-round observables.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        m: u64,
        #[arg(long, default_value_t = 1000)]
        rounds: u64,
        #[arg(long, default_value = "uniform")]
        init: String,
        #[arg(long, default_value = "practical")]
        alpha: String,
        #[arg(long, value_enum, default_value_t = ProcessArg::Rbb)]
        process: ProcessArg,
        /// Print every k-th round (the last round is always printed).
        #[arg(long, default_value_t = 1)]
        every: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Run an experiment grid.
    Experiment {
        #[arg(value_enum)]
        kind: Kind,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
    },
    /// FIFO traversal cover times (shorthand for `experiment traversal`).
    Traversal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
    },
    /// Exact stationary law (or transition kernel) of a tiny system.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: u64,
        /// Start state for the recurrent class; uniform by default.
        #[arg(long, default_value = "uniform")]
        init: String,
        /// Write the transition kernel instead of the stationary law.
        #[arg(long)]
        kernel: bool,
    },
    /// Run validation checks (the default suite when none are named).
    Check {
        names: Vec<String>,
        #[command(flatten)]
        common: Common,
        /// List available checks and exit.
        #[arg(long)]
        list: bool,
    },
    /// Render an experiment CSV as SVG.
    Plot {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Style::Line)]
        style: Style,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Style {
    Line,
    Scatter,
}

fn output(path: &Option<PathBuf>) -> rbb::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn format_of(f: Format) -> OutputFormat {
    match f {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    }
}

fn experiment_config(kind: ExperimentKind, common: &Common, grid: &Grid) -> rbb::Result<ExperimentConfig> {
    let mut cfg = if grid.paper_scale {
        ExperimentConfig::paper_scale(kind)
    } else {
        ExperimentConfig::defaults(kind)
    };
    if !grid.n.is_empty() {
        cfg.n_list = grid.n.clone();
    }
    if !grid.m.is_empty() || !grid.m_mult.is_empty() {
        cfg.m_spec = grid.m.iter().map(|&m| MSpec::Absolute(m)).chain(grid.m_mult.iter().map(|&k| MSpec::Multiple(k))).collect();
    }
    if let Some(r) = grid.rounds {
        cfg.rounds = r;
    }
    if let Some(r) = grid.reps {
        cfg.reps = r;
    }
    if let Some(i) = &grid.init {
        cfg.init = InitialConfig::parse(i)?;
    }
    cfg.alpha_preset = AlphaPreset::parse(&grid.alpha)?;
    if let Some(t) = grid.threshold_factor {
        cfg.threshold_factor = t;
    }
    cfg.burn_in = grid.burn_in;
    cfg.tie = match grid.tie {
        Tie::BallId => TieBreakChoice::BallId,
        Tie::Random => TieBreakChoice::Random,
    };
    cfg.seed = common.seed;
    cfg.output_path = common.out.clone();
    cfg.format = format_of(common.format);
    cfg.plot = grid.plot;
    cfg.threads = common.threads;
    cfg.validate()?;
    Ok(cfg)
}

fn write_svg(path: &Path, svg: &str) -> rbb::Result<()> {
    std::fs::write(path, svg)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn experiment(kind: ExperimentKind, common: &Common, grid: &Grid) -> rbb::Result<u8> {
    let cfg = experiment_config(kind, common, grid)?;
    let rows = run_experiment(&cfg)?;
    let mut w = output(&cfg.output_path)?;
    rows.write(&mut w, cfg.format)?;
    w.flush()?;
    for s in rows.summary() {
        eprintln!(
            "n={} m={} mean={:.6} se={:.6} reps={} missing={}",
            s.n, s.m, s.mean, s.std_error, s.reps, s.missing
        );
    }
    if cfg.plot {
        let svg_path = cfg
            .output_path
            .as_ref()
            .map(|p| p.with_extension("svg"))
            .unwrap_or_else(|| PathBuf::from(format!("{}.svg", kind.name())));
        write_svg(&svg_path, &plot_rows(&rows, PlotKind::Line)?)?;
    }
    Ok(0)
}

fn simulate(
    common: &Common,
    (n, m, rounds): (usize, u64, u64),
    init: &str,
    alpha: &str,
    process: ProcessArg,
    every: u64,
    stream: u64,
) -> rbb::Result<u8> {
    if every == 0 {
        return Err(RbbError::InvalidConfig("--every must be positive".into()));
    }
    let state = InitialConfig::parse(init)?.build(n, m)?;
    let alpha = AlphaPreset::parse(alpha)?.resolve(n as u64, m.max(1))?;
    let process = match process {
        ProcessArg::Rbb => Process::Rbb,
        ProcessArg::Idealized => Process::Idealized,
    };
    let observers = [Observable::EmptyBins, Observable::Quadratic, Observable::Exponential { alpha }, Observable::MaxLoad];
    let mut sim = Simulation::new(process, state, RandomSource::new(common.seed, stream));
    let mut w = output(&common.out)?;
    let json = matches!(common.format, Format::Json);
    if !json {
        writeln!(w, "{}", ObservationRow::CSV_HEADER)?;
    }
    let mut rows = Vec::new();
    loop {
        if sim.round() % every == 0 || sim.round() == rounds {
            let row = ObservationRow::observe(sim.round(), sim.state(), &observers);
            if json {
                rows.push(row);
            } else {
                writeln!(w, "{}", row.csv_line())?;
            }
        }
        if sim.round() == rounds {
            break;
        }
        sim.step();
    }
    if json {
        serde_json::to_writer_pretty(&mut w, &rows).map_err(|e| RbbError::Io(e.into()))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(0)
}

fn oracle(common: &Common, n: usize, m: u64, init: &str, kernel_only: bool) -> rbb::Result<u8> {
    let space = enumerate_states(n, m, DEFAULT_STATE_CAP)?;
    let kernel = transition_kernel(space, DEFAULT_TUPLE_CAP)?;
    let mut w = output(&common.out)?;
    if kernel_only {
        write_kernel_csv(&mut w, &kernel)?;
    } else {
        let start = InitialConfig::parse(init)?.build(n, m)?;
        let pi = if kernel.space.len() <= DENSE_SOLVE_LIMIT {
            stationary_dense(&kernel, start.loads())?
        } else {
            stationary_distribution(&kernel, start.loads(), 1e-12, 1_000_000)?
        };
        write_distribution_csv(&mut w, stationary_pairs(&kernel.space, &pi))?;
    }
    w.flush()?;
    Ok(0)
}

fn check(common: &Common, names: &[String]) -> rbb::Result<u8> {
    let reports = run_checks(names, common.seed)?;
    let mut w = output(&common.out)?;
    match common.format {
        Format::Csv => {
            writeln!(w, "{}", CheckReport::CSV_HEADER)?;
            for r in &reports {
                writeln!(w, "{}", r.csv_line())?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &reports).map_err(|e| RbbError::Io(e.into()))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    for r in reports.iter().filter(|r| !r.passed()) {
        eprintln!("FAILED {}: {} ({})", r.name, r.statistic, r.detail);
    }
    Ok(if reports.iter().all(CheckReport::passed) { 0 } else { 1 })
}

fn plot(common: &Common, input: &Path, style: Style) -> rbb::Result<u8> {
    let rows: ExperimentRows = parse_csv(&std::fs::read_to_string(input)?)?;
    let kind = match style {
        Style::Line => PlotKind::Line,
        Style::Scatter => PlotKind::Scatter,
    };
    let svg = plot_rows(&rows, kind)?;
    match &common.out {
        Some(p) => write_svg(p, &svg)?,
        None => io::stdout().write_all(svg.as_bytes())?,
    }
    Ok(0)
}

fn kind_of(k: Kind) -> ExperimentKind {
    match k {
        Kind::MaxLoad => ExperimentKind::MaxLoad,
        Kind::EmptyFraction => ExperimentKind::EmptyFraction,
        Kind::Convergence => ExperimentKind::Convergence,
        Kind::Traversal => ExperimentKind::Traversal,
    }
}

fn run(cli: Cli) -> rbb::Result<u8> {
    match cli.command {
        Command::Simulate { common, n, m, rounds, init, alpha, process, every, stream } => {
            simulate(&common, (n, m, rounds), &init, &alpha, process, every, stream)
        }
        Command::Experiment { kind, common, grid } => experiment(kind_of(kind), &common, &grid),
        Command::Traversal { common, grid } => experiment(ExperimentKind::Traversal, &common, &grid),
        Command::Oracle { common, n, m, init, kernel } => oracle(&common, n, m, &init, kernel),
        Command::Check { names, common, list } => {
            if list {
                for name in rbb::suite::all_check_names() {
                    println!("{name}");
                }
                return Ok(0);
            }
            check(&common, &names)
        }
        Command::Plot { input, common, style } => plot(&common, &input, style),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
