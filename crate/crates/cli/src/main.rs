//! `qspread` — wave-packet uncertainty experiments from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qspread_cli::config::{Experiment, PotentialSection, RunConfig};
use qspread_cli::{run, RunError};

#[derive(Parser)]
#[command(
    name = "qspread",
    about = "Wave-packet spread dynamics: spectral evolution, effective packet \
             dynamics, and second-quantized uncertainty spectra",
    version
)]
struct Cli {
    /// TOML run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonFlags {
    /// Grid as `min,max,n` (n a power of two >= 16).
    #[arg(long)]
    grid: Option<String>,
    /// Packet as `q,p,alpha,beta,gamma,k`.
    #[arg(long)]
    packet: Option<String>,
    /// Potential: `zero`, `harmonic:OMEGA`, or `poly:V0,V2,V4`.
    #[arg(long)]
    potential: Option<String>,
    /// Nonlinear couplings `n:value,...` (e.g. `1:0.5,2:0.1`).
    #[arg(long)]
    kappa: Option<String>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Number of steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Record cadence in steps.
    #[arg(long)]
    record_every: Option<usize>,
    /// Snapshot cadence in steps (0 = none).
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Output directory (default: $QSPREAD_OUT or ./qspread-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    /// Seed for randomized suites.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Construct a packet, report its moments, and snapshot it.
    MakePacket(CommonFlags),
    /// Split-step evolution with trajectory export.
    Evolve(CommonFlags),
    /// Effective Hamiltonian dynamics of the packet parameters.
    Effective(CommonFlags),
    /// Run both layers and report discrepancies.
    Compare(CommonFlags),
    /// Casimir spectrum on correlation functionals.
    Spectrum {
        #[command(flatten)]
        common: CommonFlags,
        /// Correlation sector N (1, 2 or 3).
        #[arg(long = "N", default_value_t = 2)]
        sector: usize,
        /// Largest angular level to check.
        #[arg(long, default_value_t = 4)]
        n_max: u32,
        /// Per-axis grid size (0 = sector default).
        #[arg(long, default_value_t = 0)]
        grid_n: usize,
    },
    /// sl(2) commutator residuals over seeded random test functions.
    AlgebraCheck {
        #[command(flatten)]
        common: CommonFlags,
        /// Random test functions per sector.
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
}

fn apply_common(config: &mut RunConfig, flags: &CommonFlags) -> Result<(), String> {
    if let Some(text) = &flags.grid {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("--grid wants min,max,n; got '{text}'"));
        }
        config.grid.x_min = parts[0].parse().map_err(|e| format!("grid min: {e}"))?;
        config.grid.x_max = parts[1].parse().map_err(|e| format!("grid max: {e}"))?;
        config.grid.n = parts[2].parse().map_err(|e| format!("grid n: {e}"))?;
    }
    if let Some(text) = &flags.packet {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 6 {
            return Err(format!("--packet wants q,p,alpha,beta,gamma,k; got '{text}'"));
        }
        config.packet.q = parts[0].parse().map_err(|e| format!("packet q: {e}"))?;
        config.packet.p = parts[1].parse().map_err(|e| format!("packet p: {e}"))?;
        config.packet.alpha = parts[2].parse().map_err(|e| format!("packet alpha: {e}"))?;
        config.packet.beta = parts[3].parse().map_err(|e| format!("packet beta: {e}"))?;
        config.packet.gamma = parts[4].parse().map_err(|e| format!("packet gamma: {e}"))?;
        config.packet.k = parts[5].parse().map_err(|e| format!("packet k: {e}"))?;
    }
    if let Some(text) = &flags.potential {
        config.potential = PotentialSection::parse_flag(text)?;
    }
    if let Some(text) = &flags.kappa {
        let mut terms = Vec::new();
        for part in text.split(',') {
            let (n, v) = part
                .split_once(':')
                .ok_or_else(|| format!("--kappa wants n:value pairs; got '{part}'"))?;
            terms.push((
                n.parse().map_err(|e| format!("kappa n: {e}"))?,
                v.parse().map_err(|e| format!("kappa value: {e}"))?,
            ));
        }
        config.nonlinear.kappa = terms;
    }
    if let Some(dt) = flags.dt {
        config.evolution.dt = dt;
    }
    if let Some(steps) = flags.steps {
        config.evolution.steps = steps;
    }
    if let Some(r) = flags.record_every {
        config.evolution.record_every = r;
    }
    if let Some(s) = flags.snapshot_every {
        config.evolution.snapshot_every = s;
    }
    if let Some(out) = &flags.out {
        config.out_dir = Some(out.clone());
    }
    if let Some(hbar) = flags.hbar {
        config.physics.hbar = hbar;
    }
    if let Some(mass) = flags.mass {
        config.physics.mass = mass;
    }
    if let Some(seed) = flags.seed {
        config.algebra.seed = seed;
    }
    Ok(())
}

fn build_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::MakePacket(flags) => {
            config.experiment = Experiment::MakePacket;
            apply_common(&mut config, flags)?;
        }
        Command::Evolve(flags) => {
            config.experiment = Experiment::Evolve;
            apply_common(&mut config, flags)?;
        }
        Command::Effective(flags) => {
            config.experiment = Experiment::Effective;
            apply_common(&mut config, flags)?;
        }
        Command::Compare(flags) => {
            config.experiment = Experiment::Compare;
            apply_common(&mut config, flags)?;
        }
        Command::Spectrum { common, sector, n_max, grid_n } => {
            config.experiment = Experiment::Spectrum;
            apply_common(&mut config, common)?;
            config.spectrum.sector = *sector;
            config.spectrum.n_max = *n_max;
            config.spectrum.grid_n = *grid_n;
        }
        Command::AlgebraCheck { common, count } => {
            config.experiment = Experiment::AlgebraCheck;
            apply_common(&mut config, common)?;
            config.algebra.count = *count;
        }
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("qspread: config error: {msg}");
            return ExitCode::from(qspread_cli::EXIT_CONFIG as u8);
        }
    };
    match run(&config) {
        Ok(summary) => {
            println!("{}", summary.line);
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(err @ RunError::Config(_)) => {
            eprintln!("qspread: {err}");
            ExitCode::from(qspread_cli::EXIT_CONFIG as u8)
        }
        Err(err) => {
            eprintln!("qspread: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
