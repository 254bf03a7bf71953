use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tldram::config::{RunConfig, WorkloadKind};
use tldram::engine::write_command_trace;
use tldram::geometry::{tradeoff_table, CalibrationAnchors, DecompositionRatios};
use tldram::harness;
use tldram::policy::write_profile;
use tldram::report::{write_sweep, write_tradeoff};
use tldram::sim::SimOptions;
use tldram::Result;

#[derive(Parser)]
#[command(
    name = "tldram-sim",
    version,
    about = "Segmented-bitline DRAM simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration and write its statistics report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replay this trace file instead of the configured workload.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the issued command stream.
        #[arg(long)]
        commands: Option<PathBuf>,
    },
    /// Vary the near segment size at a fixed total bitline length.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        near_sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare configuration `a` against baseline `b` on the same trace.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latency, area and power of unsegmented bitlines.
    Tradeoff {
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        cells: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count accesses per physical row for static placement.
    Profile {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run {
            config,
            trace,
            out,
            commands,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(t) = trace {
                cfg.workload.kind = WorkloadKind::File;
                cfg.workload.file = Some(t);
            }
            let opts = SimOptions {
                record_commands: commands.is_some(),
                ..SimOptions::default()
            };
            let run = harness::run_with(&cfg, opts)?;
            let mut w = output(out.as_deref())?;
            run.report.write_csv(&mut w)?;
            w.flush()?;
            if let Some(p) = commands {
                let mut cw = BufWriter::new(File::create(p)?);
                write_command_trace(&mut cw, &run.result.commands)?;
                cw.flush()?;
            }
        }
        Cmd::Sweep {
            config,
            near_sizes,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let rows = harness::sweep_near_size(&cfg, &near_sizes)?;
            let mut w = output(out.as_deref())?;
            write_sweep(&mut w, &rows)?;
            w.flush()?;
        }
        Cmd::Compare { a, b, out } => {
            let cmp = harness::compare(&RunConfig::load(&a)?, &RunConfig::load(&b)?)?;
            let mut w = output(out.as_deref())?;
            cmp.write_csv(&mut w)?;
            w.flush()?;
        }
        Cmd::Tradeoff { cells, out } => {
            let rows = tradeoff_table(
                &cells,
                &CalibrationAnchors::default(),
                &DecompositionRatios::default(),
            )?;
            let mut w = output(out.as_deref())?;
            write_tradeoff(&mut w, &rows)?;
            w.flush()?;
        }
        Cmd::Profile { config, out } => {
            let counts = harness::profile(&RunConfig::load(&config)?)?;
            let mut w = BufWriter::new(File::create(out)?);
            write_profile(&mut w, &counts)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors count as configuration errors; help and version exit cleanly.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tldram-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
