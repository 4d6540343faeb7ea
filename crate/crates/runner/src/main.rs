use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ealab_runner::{emit_plots, run, ExperimentConfig, Kind, Overrides, RunResult};

/// Exit status when a run contradicts a mathematical invariant.
const EXIT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "ealab", version, about = "Zero-temperature Edwards-Anderson experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ground states with criterion and solver cross-checks.
    Gs(Common),
    /// Critical droplet sizes and the droplet exponent fit.
    Droplet(Common),
    /// Overlap curves, thresholds, exponent fits, collapse and relations.
    Chaos(Common),
    /// Replica-pair variance against its lower bound.
    Variance(Common),
    /// Periodic against antiperiodic ground energies.
    Stiffness(Common),
    /// Window energy vectors, crossings, stability and drift along paths.
    Window(Common),
    /// Gaussian identity, solver agreement and triangle checks.
    Selftest(Common),
    /// SVG plots from the outputs listed in a run manifest.
    Plot {
        /// Directory holding manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Box sizes, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// open, periodic, cylinder, or a per-axis list such as periodic,open.
    #[arg(long)]
    topology: Option<String>,
    #[arg(long = "n-real")]
    n_real: Option<usize>,
    /// Emit plots after the run.
    #[arg(long)]
    plot: bool,
}

fn experiment(kind: Kind, c: Common) -> RunResult<ExitCode> {
    let overrides = Overrides {
        seed: c.seed,
        out: c.out,
        workers: c.workers,
        d: c.d,
        sizes: c.sizes,
        topology: c.topology,
        n_real: c.n_real,
    };
    let config = match &c.config {
        Some(path) => ExperimentConfig::load(path, kind, &overrides)?,
        None => ExperimentConfig::parse("", kind, &overrides)?,
    };
    let manifest = run(&config)?;
    for n in &manifest.notes {
        eprintln!("note: {n}");
    }
    if c.plot {
        for p in emit_plots(&config.out)? {
            println!("{}", config.out.join(p).display());
        }
    }
    println!("{} outputs in {} (config {})", manifest.outputs.len(), config.out.display(), manifest.config_hash);
    if manifest.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &manifest.violations {
            eprintln!("violation: {v}");
        }
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gs(c) => experiment(Kind::Gs, c),
        Command::Droplet(c) => experiment(Kind::Droplet, c),
        Command::Chaos(c) => experiment(Kind::Chaos, c),
        Command::Variance(c) => experiment(Kind::Variance, c),
        Command::Stiffness(c) => experiment(Kind::Stiffness, c),
        Command::Window(c) => experiment(Kind::Window, c),
        Command::Selftest(c) => experiment(Kind::Selftest, c),
        Command::Plot { out } => emit_plots(&out).map(|files| {
            for f in files {
                println!("{}", out.join(f).display());
            }
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
