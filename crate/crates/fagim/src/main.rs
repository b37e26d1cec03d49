use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fagim::analysis::AbepMode;
use fagim::harness::{
    inspect_report, run_abep, run_sweep, write_abep_csv, write_ber_csv, SimContext,
    SimulationConfig,
};
use fagim::{Error, Result};

#[derive(Parser)]
#[command(name = "fagim", version, about = "FAG-IM MIMO link-level simulator and analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER sweep over the configured SNR grid
    Simulate {
        /// Flat TOML config file
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path ("-" for stdout)
        #[arg(long)]
        out: PathBuf,
        /// Override any config key, e.g. --set seed=3 --set 'detector="ml,mmse"'
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// SNR grid override: comma list "0,2,4" or range "0:2:10"
        #[arg(long)]
        snr: Option<String>,
        /// Detector list override, e.g. "ml,mmse,samp"
        #[arg(long)]
        detector: Option<String>,
        /// Master seed override
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Closed-form ABEP upper bound over an SNR grid
    Abep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// SNR grid: comma list or "start:step:stop"; defaults to the config grid
        #[arg(long)]
        snr: Option<String>,
        /// "exact" or "sampled"
        #[arg(long, default_value = "exact")]
        mode: String,
        /// Pair samples in sampled mode
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print geometry, grouping, label maps, coordinates, and the J_t spectrum
    Inspect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::config(format!("invalid SNR value '{s}'")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (start, step, stop) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if step <= 0.0 {
            return Err(Error::config("SNR range step must be positive"));
        }
        let mut grid = Vec::new();
        let mut k = 0u32;
        loop {
            let v = start + step * k as f64;
            if v > stop + 1e-9 {
                break;
            }
            grid.push(v);
            k += 1;
        }
        return Ok(grid);
    }
    text.split(',').map(parse).collect()
}

/// Loads the config file and layers CLI overrides on top of the TOML table
/// before deserializing.
fn load_config(path: &Path, overrides: &[String], extra: &[(&str, toml::Value)]) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| Error::config(format!("invalid config {}: {e}", path.display())))?;
    for entry in overrides {
        let patch: toml::Table = entry
            .parse()
            .map_err(|e| Error::config(format!("invalid --set '{entry}': {e}")))?;
        for (k, v) in patch {
            table.insert(k, v);
        }
    }
    for (key, value) in extra {
        table.insert((*key).to_string(), value.clone());
    }
    let merged =
        toml::to_string(&table).map_err(|e| Error::config(format!("config merge failed: {e}")))?;
    SimulationConfig::from_toml_str(&merged)
}

fn write_output(path: &Path, body: &[u8]) -> Result<()> {
    if path.as_os_str() == "-" {
        use std::io::Write;
        std::io::stdout().write_all(body)?;
    } else {
        std::fs::write(path, body)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, overrides, snr, detector, seed } => {
            let mut extra: Vec<(&str, toml::Value)> = Vec::new();
            if let Some(grid) = snr.as_deref() {
                let values = parse_snr_grid(grid)?;
                extra.push((
                    "snr_db",
                    toml::Value::Array(values.into_iter().map(toml::Value::Float).collect()),
                ));
            }
            if let Some(list) = detector {
                extra.push(("detector", toml::Value::String(list)));
            }
            if let Some(seed) = seed {
                extra.push(("seed", toml::Value::Integer(seed as i64)));
            }
            let ctx = SimContext::new(load_config(&config, &overrides, &extra)?)?;
            eprintln!(
                "fagim simulate: mode={} SE={} bpcu, detectors={:?}, {} SNR points, digest={}",
                ctx.codec.mode_name(),
                ctx.codec.spectral_efficiency(),
                ctx.detectors.iter().map(|d| d.name()).collect::<Vec<_>>(),
                ctx.config.snr_db.len(),
                ctx.digest
            );
            if ctx.detectors.iter().any(|d| d.name() == "samp") {
                eprintln!(
                    "fagim simulate: samp damping={} t_max={} eps_th={:e}",
                    ctx.config.delta, ctx.config.t_max, ctx.config.eps_th
                );
            }
            let records = run_sweep(&ctx)?;
            let mut buf = Vec::new();
            write_ber_csv(&mut buf, &records)?;
            write_output(&out, &buf)?;
            eprintln!("fagim simulate: wrote {} records", records.len());
            Ok(())
        }
        Command::Abep { config, out, snr, mode, samples, overrides } => {
            let ctx = SimContext::new(load_config(&config, &overrides, &[])?)?;
            let grid = match snr.as_deref() {
                Some(text) => parse_snr_grid(text)?,
                None => ctx.config.snr_db.clone(),
            };
            if grid.is_empty() {
                return Err(Error::config("abep needs an SNR grid (--snr or snr_db)"));
            }
            let mode = match mode.as_str() {
                "exact" => AbepMode::Exact,
                "sampled" => AbepMode::Sampled { samples, seed: ctx.config.seed },
                other => {
                    return Err(Error::config(format!(
                        "unknown abep mode '{other}' (expected exact or sampled)"
                    )))
                }
            };
            let records = run_abep(&ctx, &grid, &mode)?;
            let mut buf = Vec::new();
            write_abep_csv(&mut buf, &records)?;
            write_output(&out, &buf)?;
            eprintln!("fagim abep: wrote {} records ({} mode)", records.len(), mode.name());
            Ok(())
        }
        Command::Inspect { config, overrides } => {
            let ctx = SimContext::new(load_config(&config, &overrides, &[])?)?;
            print!("{}", inspect_report(&ctx));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
