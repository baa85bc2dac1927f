use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use modeswitch::harness::{
    decode_trip_states, read_trace, render_trace, run_experiment, run_sweep, run_trip, write_experiment, write_trace,
    Execution, SimConfig,
};
use modeswitch::{Error, Result, CONFIG_SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "modeswitch", about = "Driving-mode management simulator", disable_version_flag = true)]
struct Cli {
    /// Print the config schema version and exit.
    #[arg(long)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trip.
    Simulate {
        /// Built-in profile (paper-baseline, safer) or TOML file.
        #[arg(long, default_value = "paper-baseline")]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the per-interval trace as JSON lines.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Print the road with mode and speed annotations.
        #[arg(long)]
        render: bool,
        #[arg(long, default_value_t = 10)]
        width: usize,
    },
    /// Run independent replications and write per-replication and summary tables.
    Experiment {
        #[arg(long, default_value = "paper-baseline")]
        config: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Run replications on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Repeat the experiment over values of p(clean -> puddle).
    Sweep {
        #[arg(long, default_value = "paper-baseline")]
        config: String,
        /// Comma-separated puddle rates; defaults to the config's grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        serial: bool,
    },
    /// Decode the most likely driver-state path from a saved trace.
    Decode {
        #[arg(long)]
        trace_in: PathBuf,
        #[arg(long, default_value = "paper-baseline")]
        config: String,
    },
}

fn load(config: &str, seed: Option<u64>) -> Result<SimConfig> {
    let mut c = SimConfig::load(config)?;
    if let Some(s) = seed {
        c.seed = s;
    }
    Ok(c)
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn run(cli: Cli) -> Result<()> {
    if cli.version {
        println!("modeswitch {} (config schema {CONFIG_SCHEMA_VERSION})", env!("CARGO_PKG_VERSION"));
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Error::InvalidArgument("no subcommand given; try --help".into()));
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Simulate { config, seed, trace_out, render, width } => {
            let c = load(&config, seed)?;
            let run = run_trip(&c, c.seed)?;
            if let Some(path) = trace_out {
                let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
                write_trace(&run.trace, BufWriter::new(file))?;
            }
            if render {
                write!(out, "{}", render_trace(&run.trace, width)).map_err(stdout_err)?;
            }
            for (name, value) in run.metrics.numeric_fields() {
                writeln!(out, "{name:<28} {value}").map_err(stdout_err)?;
            }
        }
        Command::Experiment { config, reps, seed, out: dir, serial } => {
            let c = load(&config, seed)?;
            let summary = run_experiment(&c, reps.unwrap_or(c.replications), execution(serial))?;
            write_experiment(&summary, &dir)?;
            for f in &summary.fields {
                writeln!(out, "{:<28} mean {:>12.4}  sd {:>10.4}", f.metric, f.mean, f.sd).map_err(stdout_err)?;
            }
        }
        Command::Sweep { config, grid, reps, seed, out: dir, serial } => {
            let c = load(&config, seed)?;
            let grid = grid.unwrap_or_else(|| c.sweep_grid.clone());
            let result = run_sweep(&c, &grid, reps.unwrap_or(c.replications), execution(serial))?;
            result.write_csv(&dir)?;
            writeln!(out, "puddle_rate  mean_utility  sd_utility  aborted_prop").map_err(stdout_err)?;
            for p in &result.points {
                writeln!(
                    out,
                    "{:>11.2}  {:>12.3}  {:>10.3}  {:>12.4}",
                    p.puddle_rate, p.mean_utility, p.sd_utility, p.mean_aborted_proportion
                )
                .map_err(stdout_err)?;
            }
        }
        Command::Decode { trace_in, config } => {
            let c = SimConfig::load(&config)?;
            let file = File::open(&trace_in).map_err(|e| Error::io(&trace_in, e))?;
            let trace = read_trace(BufReader::new(file))?;
            let report = decode_trip_states(&trace, &c.trip.driver)?;
            let path: String = report.decoded.iter().map(|s| if s.index() == 0 { 'A' } else { 'D' }).collect();
            writeln!(out, "intervals          {}", report.truth.len()).map_err(stdout_err)?;
            writeln!(out, "agreement          {:.4}", report.agreement).map_err(stdout_err)?;
            writeln!(out, "majority baseline  {:.4}", report.majority_baseline).map_err(stdout_err)?;
            writeln!(out, "decoded            {path}").map_err(stdout_err)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
