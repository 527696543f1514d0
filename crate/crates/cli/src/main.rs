//! Command-line front end: run configured experiments, dump model spectra,
//! and exercise the oracle-equivalence self-test battery.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mpemba_core::experiments::{self, Cell, ExperimentConfig, OutputFormat, Table};
use mpemba_core::liouvillian::{build_liouvillian, spectral_decompose};
use mpemba_core::models::{
    embedding_model, two_qubit_markovian, two_qubit_thermal, EmbeddingParams, MarkovParams,
    ThermalParams,
};
use mpemba_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mpemba-reset",
    version,
    about = "Mpemba-accelerated qubit reset: spectral analysis and protocol simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    /// Two-qubit amplitude damping plus pure dephasing.
    Markov,
    /// Two-qubit thermal (finite-temperature) damping plus dephasing.
    Thermal,
    /// Qubit-TLS pair(s): coherent ZX coupling, TLS decay at rate kappa.
    Embedding,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write its records.
    Run {
        /// TOML experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the ensemble seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output path; overrides the config, stdout if neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format; overrides the config (default csv).
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Worker threads (default: all available cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Also write a speedup histogram (CSV) to this path.
        #[arg(long)]
        histogram: Option<PathBuf>,
        /// Number of uniform histogram bins.
        #[arg(long, default_value_t = 50)]
        histogram_bins: usize,
        /// Lower edge of the histogram range.
        #[arg(long, default_value_t = 1.0)]
        histogram_min: f64,
        /// Upper edge of the histogram range.
        #[arg(long, default_value_t = 2.0)]
        histogram_max: f64,
    },
    /// Print the sorted Liouvillian spectrum of a model as CSV.
    Spectrum {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Qubit frequency (markov, embedding).
        #[arg(long, default_value_t = 1.0)]
        omega_q: f64,
        /// Energy relaxation rate Gamma_1 (markov, embedding).
        #[arg(long, default_value_t = 1.0)]
        gamma1: f64,
        /// Pure dephasing rate Gamma_phi.
        #[arg(long, default_value_t = 1.0 / 6.0)]
        gamma_phi: f64,
        /// Qubit frequency (thermal).
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Thermal coupling rate gamma (thermal).
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Mean bath occupation (thermal).
        #[arg(long, default_value_t = 0.0)]
        nbar: f64,
        /// TLS frequency (embedding).
        #[arg(long, default_value_t = 2.0)]
        omega_t: f64,
        /// Qubit-TLS ZX coupling (embedding).
        #[arg(long, default_value_t = 2.0)]
        nu_zx: f64,
        /// TLS decay rate (embedding).
        #[arg(long, default_value_t = 0.1)]
        kappa: f64,
        /// Number of qubit-TLS pairs for the embedding model (1 or 2).
        #[arg(long, default_value_t = 1)]
        pairs: usize,
    },
    /// Run the oracle-equivalence self-test battery.
    Validate,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidParameter(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn emit(table: &Table, out: Option<&PathBuf>, format: OutputFormat) -> Result<(), Error> {
    match out {
        Some(path) => table.write(path, format),
        None => {
            let text = match format {
                OutputFormat::Csv => table.to_csv(),
                OutputFormat::Json => table.to_json(),
            };
            print!("{text}");
            Ok(())
        }
    }
}

/// Bin the `speedup` column of a record table into a small summary table.
fn speedup_histogram(table: &Table, bins: usize, lo: f64, hi: f64) -> Result<Table, Error> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidConfig(
            "histogram needs bins > 0 and max > min".into(),
        ));
    }
    let col = table
        .header
        .iter()
        .position(|h| *h == "speedup")
        .ok_or_else(|| Error::InvalidConfig("experiment has no speedup column".into()))?;
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for row in &table.rows {
        if let Cell::Num(s) = row[col] {
            if s >= lo && s < hi {
                counts[((s - lo) / width) as usize] += 1;
            } else if s == hi {
                counts[bins - 1] += 1;
            }
        }
    }
    let rows = counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            vec![
                Cell::Num(lo + k as f64 * width),
                Cell::Num(lo + (k + 1) as f64 * width),
                Cell::Int(c),
            ]
        })
        .collect();
    Ok(Table {
        header: vec!["bin_left", "bin_right", "count"],
        rows,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<FormatArg>,
    threads: Option<usize>,
    histogram: Option<PathBuf>,
    histogram_bins: usize,
    histogram_min: f64,
    histogram_max: f64,
) -> Result<(), Error> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let text = std::fs::read_to_string(config)?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = seed {
        cfg.ensemble.seed = s;
    }
    let out = out.or_else(|| cfg.output.as_ref().map(|o| o.path.clone()));
    let fmt = format
        .map(OutputFormat::from)
        .or_else(|| cfg.output.as_ref().map(|o| o.format))
        .unwrap_or(OutputFormat::Csv);
    let table = experiments::run(&cfg)?;
    emit(&table, out.as_ref(), fmt)?;
    if let Some(hist_path) = histogram {
        let hist = speedup_histogram(&table, histogram_bins, histogram_min, histogram_max)?;
        hist.write(&hist_path, OutputFormat::Csv)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_spectrum(
    model: ModelArg,
    omega_q: f64,
    gamma1: f64,
    gamma_phi: f64,
    omega: f64,
    gamma: f64,
    nbar: f64,
    omega_t: f64,
    nu_zx: f64,
    kappa: f64,
    pairs: usize,
) -> Result<(), Error> {
    let spec = match model {
        ModelArg::Markov => two_qubit_markovian(&MarkovParams {
            omega_q,
            gamma1,
            gamma_phi,
        })?,
        ModelArg::Thermal => two_qubit_thermal(&ThermalParams {
            omega,
            gamma,
            nbar,
            gamma_phi,
        })?,
        ModelArg::Embedding => embedding_model(
            &EmbeddingParams {
                omega_q,
                omega_t,
                nu_zx,
                gamma1,
                gamma_phi,
                kappa,
            },
            pairs,
        )?,
    };
    let dec = spectral_decompose(&build_liouvillian(&spec))?;
    println!("index,eigenvalue_re,eigenvalue_im");
    for (k, l) in dec.eigenvalues.iter().enumerate() {
        println!("{},{},{}", k + 1, l.re, l.im);
    }
    Ok(())
}

fn cmd_validate() -> Result<(), Error> {
    let results = experiments::validate();
    let mut all_ok = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status}  {}: {}", r.name, r.detail);
        all_ok &= r.passed;
    }
    if all_ok {
        Ok(())
    } else {
        let failed: Vec<&str> = results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name)
            .collect();
        Err(Error::SelfTestFailed(failed.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            format,
            threads,
            histogram,
            histogram_bins,
            histogram_min,
            histogram_max,
        } => cmd_run(
            &config,
            seed,
            out,
            format,
            threads,
            histogram,
            histogram_bins,
            histogram_min,
            histogram_max,
        ),
        Command::Spectrum {
            model,
            omega_q,
            gamma1,
            gamma_phi,
            omega,
            gamma,
            nbar,
            omega_t,
            nu_zx,
            kappa,
            pairs,
        } => cmd_spectrum(
            model, omega_q, gamma1, gamma_phi, omega, gamma, nbar, omega_t, nu_zx, kappa, pairs,
        ),
        Command::Validate => cmd_validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
