use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loopseries_cli::config::{
    overlay_file, ExperimentConfig, GeometryName, InitConfig, ModelConfig, OutputFormat, ReferenceConfig,
    ReferenceMethodName,
};
use loopseries_cli::error::{CliError, CliResult};
use loopseries_cli::experiments;
use loopseries_cli::formats::{FixedPointJson, NetworkJson};
use loopseries_cli::table::Table;

#[derive(Parser)]
#[command(
    name = "loopseries",
    version,
    about = "Loop-series corrections to belief propagation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum ModelName {
    Aklt,
    Random,
    Product,
}

#[derive(Args)]
struct Common {
    /// JSON config; its keys override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "hexagonal")]
    geometry: GeometryName,
    #[arg(long, global = true, value_enum, default_value = "aklt")]
    model: ModelName,
    /// Physical dimension of the random model.
    #[arg(long, global = true, default_value_t = 2)]
    d: usize,
    /// Bond dimension of the random model.
    #[arg(long, global = true, default_value_t = 3)]
    m: usize,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Site amplitudes of the product model, comma separated.
    #[arg(long, global = true, value_delimiter = ',', default_value = "1,1")]
    amplitudes: Vec<f64>,
    #[arg(long, global = true, default_value_t = 12)]
    max_degree: usize,
    #[arg(long, global = true)]
    damping: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_sweeps: Option<usize>,
    /// Random message initialization with this seed instead of identity.
    #[arg(long, global = true)]
    init_seed: Option<u64>,
    #[arg(long, global = true)]
    series_tol: Option<f64>,
    #[arg(long, global = true)]
    series_max_iter: Option<usize>,
    /// `method:resolution`, e.g. `boundary-mps:30`, `strip:8`, `torus:6`.
    /// Repeatable; the first one scores the series.
    #[arg(long = "reference", global = true, value_parser = parse_reference)]
    references: Vec<ReferenceConfig>,
    #[arg(long, global = true, default_value_t = 0)]
    bond: usize,
    #[arg(long, global = true, default_value_t = 0.0)]
    kagome_cutoff: f64,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Converge BP on the lattice or on a network file.
    Bp {
        /// Network JSON to run on instead of the lattice cell.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Write the normalized fixed point here.
        #[arg(long)]
        save_fixed_point: Option<PathBuf>,
    },
    /// Free energy per site against the reference, by degree cutoff.
    FreeEnergy,
    /// Transfer-matrix and density-matrix errors by degree cutoff.
    Transfer,
    /// Two-site density matrix by degree cutoff.
    Density,
    /// Single- against multi-excitation counting.
    CompareCounting,
    /// Closed-excitation catalog with weights.
    Catalog,
    /// Reference free energies only.
    Oracle,
}

fn parse_reference(s: &str) -> Result<ReferenceConfig, String> {
    let (m, r) = s.split_once(':').ok_or("expected method:resolution")?;
    let method = <ReferenceMethodName as clap::ValueEnum>::from_str(m, true)?;
    let resolution = r.parse().map_err(|e| format!("{e}"))?;
    Ok(ReferenceConfig { method, resolution })
}

fn build_config(c: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::aklt_hexagonal();
    cfg.geometry = c.geometry;
    cfg.model = match c.model {
        ModelName::Aklt => ModelConfig::Aklt,
        ModelName::Random => ModelConfig::Random {
            d: c.d,
            m: c.m,
            seed: c.seed,
        },
        ModelName::Product => ModelConfig::Product {
            amplitudes: c.amplitudes.clone(),
        },
    };
    cfg.max_degree = c.max_degree;
    if let Some(x) = c.damping {
        cfg.bp.damping = x;
    }
    if let Some(x) = c.tol {
        cfg.bp.tol = x;
    }
    if let Some(x) = c.max_sweeps {
        cfg.bp.max_sweeps = x;
    }
    if let Some(seed) = c.init_seed {
        cfg.bp.init = InitConfig::Random { seed };
    }
    if let Some(x) = c.series_tol {
        cfg.series.tol = x;
    }
    if let Some(x) = c.series_max_iter {
        cfg.series.max_iter = x;
    }
    if !c.references.is_empty() {
        cfg.references = c.references.clone();
    }
    cfg.bond = c.bond;
    cfg.kagome_cutoff = c.kagome_cutoff;
    cfg.output.path = c.output.clone();
    cfg.output.format = c.format;
    if let Some(path) = &c.config {
        cfg = overlay_file(&cfg, &fs::read_to_string(path)?)?;
    }
    Ok(cfg)
}

fn emit(cfg: &ExperimentConfig, table: &Table) -> CliResult<()> {
    match &cfg.output.path {
        Some(p) => table.write(io::BufWriter::new(fs::File::create(p)?), cfg.output.format),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write(&mut lock, cfg.output.format)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = build_config(&cli.common)?;
    let table = match &cli.command {
        Command::Bp {
            network,
            save_fixed_point,
        } => {
            let (table, net, fp) = match network {
                Some(path) => {
                    let js: NetworkJson = serde_json::from_str(&fs::read_to_string(path)?)?;
                    experiments::run_bp_network(&cfg, &js.to_network()?)?
                }
                None => experiments::run_bp(&cfg)?,
            };
            if let Some(path) = save_fixed_point {
                let f = io::BufWriter::new(fs::File::create(path)?);
                serde_json::to_writer_pretty(f, &FixedPointJson::new(&net, &fp))?;
            }
            table
        }
        Command::FreeEnergy => experiments::run_free_energy(&cfg)?,
        Command::Transfer => experiments::run_transfer_and_density(&cfg)?,
        Command::Density => experiments::run_density(&cfg)?,
        Command::CompareCounting => experiments::run_counting_comparison(&cfg)?,
        Command::Catalog => experiments::run_catalog(&cfg)?,
        Command::Oracle => experiments::run_oracle(&cfg)?,
    };
    emit(&cfg, &table)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code())
}
