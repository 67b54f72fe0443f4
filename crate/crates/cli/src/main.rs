use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fa_isac_cli::config::{read_json, RunConfig};
use fa_isac_cli::table::{self, SweepRow};
use fa_isac_cli::{angle_grid, export_beampattern, run_single, run_sweep, RunRecord, SweepSpec};

/// Joint beamformer and fluid-antenna position optimization.
#[derive(Parser)]
#[command(name = "fa-isac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write the solution record.
    Run {
        config: PathBuf,
        #[command(flatten)]
        io: Io,
        /// PSO seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve every point of a sweep specification.
    Sweep {
        spec: PathBuf,
        #[command(flatten)]
        io: Io,
        /// Seed base (overrides the spec).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Radiated power versus angle for a solution record written by `run`.
    Beampattern {
        solution: PathBuf,
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 0.5)]
        step_deg: f64,
    },
}

#[derive(Args)]
struct Io {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn open(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(out: Option<&Path>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut w = open(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn single_row(rec: &RunRecord) -> SweepRow {
    let sol = &rec.solution;
    SweepRow {
        method: rec.method.name().into(),
        parameter: "pt".into(),
        value: rec.scenario.probe_threshold,
        rep: 0,
        seed: rec.pso.as_ref().map_or(0, |p| p.seed),
        sum_rate: Some(sol.sum_rate),
        probing: Some(sol.probing),
        power: Some(sol.power),
        wall_ms: sol.wall_ms,
        iterations: rec.pso.as_ref().map_or(sol.cycles, |p| p.evaluations),
        feasible: sol.feasible,
        error: String::new(),
    }
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, io, seed } => {
            let cfg: RunConfig = read_json(&config)?;
            match run_single(&cfg, seed)? {
                Ok(rec) => {
                    if io.format == Some(Format::Csv) {
                        table::write_sweep(open(io.out.as_deref())?, &[single_row(&rec)])?;
                    } else {
                        write_json(io.out.as_deref(), &rec)?;
                    }
                    Ok(rec.solution.feasible)
                }
                Err(err) => {
                    write_json(io.out.as_deref(), &err)?;
                    eprintln!("error: {}", err.message);
                    Ok(false)
                }
            }
        }
        Command::Sweep { spec, io, seed, workers } => {
            let mut spec: SweepSpec = read_json(&spec)?;
            if let Some(s) = seed {
                spec.seed_base = s;
            }
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = run_sweep(&spec, workers)?;
            let out = io.out.or_else(|| spec.out.clone());
            if io.format == Some(Format::Json) {
                let rounded: Vec<SweepRow> = rows.iter().cloned().map(SweepRow::rounded).collect();
                write_json(out.as_deref(), &rounded)?;
            } else {
                table::write_sweep(open(out.as_deref())?, &rows)?;
            }
            Ok(rows.iter().all(|r| r.feasible))
        }
        Command::Beampattern { solution, io, step_deg } => {
            let rec: RunRecord = read_json(&solution)?;
            let rows = export_beampattern(&rec, &angle_grid(step_deg)?);
            if io.format == Some(Format::Json) {
                write_json(io.out.as_deref(), &rows)?;
            } else {
                table::write_pattern(open(io.out.as_deref())?, &rows)?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
