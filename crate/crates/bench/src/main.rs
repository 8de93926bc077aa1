use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperpower::precond::SchurMode;
use hyperpower_bench::contour::{cmd_contour, contour_table};
use hyperpower_bench::output::Table;
use hyperpower_bench::scaling::{cmd_scaling, OperatorKind};
use hyperpower_bench::solve::{cmd_solve, cmd_solve_sweep};
use hyperpower_bench::spectra::cmd_spectra;
use hyperpower_bench::{BenchRecord, Result, RunConfig};
use log::error;

#[derive(Parser, Debug)]
#[command(name = "hyperpower-bench", version, about = "Hyper-power preconditioned lid-driven cavity benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the cavity problem and emit one CSV record per level.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Solve every level 0..=updates instead of only the requested one.
        #[arg(long)]
        sweep: bool,
    },
    /// Dense spectra of all preconditioner sequences (small meshes only), as JSON.
    Spectra {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Matvec timings and flop counts over several meshes.
    Scaling {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "16,24,32")]
        meshes: Vec<usize>,
        #[arg(long, default_value = "saddle")]
        operator: OperatorKind,
    },
    /// Solution-time model grid and measured points from solve records.
    Contour {
        /// CSV written by `solve --sweep`.
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    schur: Option<SchurMode>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    cpen: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lid_axis: Option<usize>,
    #[arg(long)]
    lid_tangent: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Permit meshes above 32 and degrees above 6.
    #[arg(long)]
    allow_large: bool,
    /// JSON object whose keys override the flags.
    #[arg(long)]
    json_config: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self, defaults: RunConfig) -> Result<RunConfig> {
        let mut c = defaults;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(mesh, degree, updates, schur, nu, cpen, tol, seed, lid_axis, lid_tangent, repeats);
        c.maxit = self.maxit.or(c.maxit);
        c.out = self.out.clone().or(c.out);
        c.allow_large |= self.allow_large;
        match &self.json_config {
            Some(path) => c.merge_json(&std::fs::read_to_string(path)?),
            None => {
                c.validate()?;
                Ok(c)
            }
        }
    }
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => write(&mut File::create(path)?),
        None => write(&mut io::stdout().lock()),
    }
}

fn emit_table(out: Option<&Path>, table: &Table) -> Result<()> {
    emit(out, |w| table.write_to(w))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { run, sweep } => {
            let config = run.config(RunConfig::default())?;
            let records = if sweep {
                cmd_solve_sweep(&config)?
            } else {
                vec![cmd_solve(&config)?]
            };
            emit_table(config.out.as_deref(), &BenchRecord::table(&records))?;
            if records.iter().all(|r| r.converged) {
                Ok(ExitCode::SUCCESS)
            } else {
                error!("MINRES did not converge within maxit");
                Ok(ExitCode::from(2))
            }
        }
        Command::Spectra { run } => {
            let defaults = RunConfig {
                mesh: 2,
                degree: 4,
                updates: 4,
                ..Default::default()
            };
            let config = run.config(defaults)?;
            let output = cmd_spectra(&config)?;
            emit(config.out.as_deref(), |w| {
                serde_json::to_writer_pretty(&mut *w, &output)?;
                writeln!(w)?;
                Ok(())
            })?;
            if output.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in output.failures() {
                    error!("check failed: {f}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Scaling { run, meshes, operator } => {
            let defaults = RunConfig {
                degree: 4,
                ..Default::default()
            };
            let config = run.config(defaults)?;
            let report = cmd_scaling(&config, &meshes, operator)?;
            emit_table(config.out.as_deref(), &report.table())?;
            eprintln!(
                "{operator}: time slope {:.4}, flop slope {:.6}",
                report.time_slope, report.flop_slope
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Contour { records, out } => {
            let table = Table::read_from(File::open(&records)?)?;
            let groups = cmd_contour(&BenchRecord::from_table(&table)?)?;
            emit_table(out.as_deref(), &contour_table(&groups))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
