use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use viscoduct::{generate_disk_mesh, MeshError};
use viscoduct_cli::config::{Format, MeshSource, Settings, SolverChoice};
use viscoduct_cli::{
    check_mesh, describe_mesh, reproduce_tables, run_solve, write_table, CliError,
    ReproduceOptions, RunConfig,
};

/// Viscoplastic duct flow: trust-region SQP and ALG2 solvers.
#[derive(Parser)]
#[command(name = "viscoduct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one flow problem and write field outputs.
    Solve(Box<SolveArgs>),
    /// Run the pipe-flow benchmark grid and print the comparison table.
    Reproduce(ReproduceArgs),
    /// Generate or validate mesh files.
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Args)]
struct SolveArgs {
    /// `key = value` settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverChoice>,
    /// `disk:N` or `file:PATH`
    #[arg(long, value_parser = parse_mesh)]
    mesh: Option<MeshSource>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Constant right-hand side f.
    #[arg(long)]
    force: Option<f64>,
    #[arg(long)]
    abstol: Option<f64>,
    #[arg(long)]
    reltol: Option<f64>,
    /// ALG2 augmentation parameter.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated list of csv, vtk, json.
    #[arg(long, value_delimiter = ',', value_parser = parse_format)]
    format: Option<Vec<Format>>,
    /// Write the divergence matrix D as `i j value` lines.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Directory for table.csv and table.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated disk refinements.
    #[arg(long, value_delimiter = ',', default_values_t = [13, 19, 26])]
    refinements: Vec<usize>,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write a disk mesh in the text mesh format.
    Gen {
        #[arg(long)]
        refinement: usize,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a mesh file and print its statistics.
    Check { path: PathBuf },
}

fn parse_solver(s: &str) -> Result<SolverChoice, String> {
    s.parse()
}

fn parse_mesh(s: &str) -> Result<MeshSource, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.trim().parse()
}

fn settings(args: &SolveArgs) -> anyhow::Result<Settings> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Settings::parse(&text)
                .map_err(|e| CliError::Config(e.to_string()))
                .with_context(|| format!("reading {}", path.display()))?
        }
        None => Settings::default(),
    };
    Ok(file.overlay(Settings {
        solver: args.solver,
        mesh: args.mesh.clone(),
        alpha: args.alpha,
        tau0: args.tau0,
        kappa: args.kappa,
        force: args.force,
        abstol: args.abstol,
        reltol: args.reltol,
        r: args.r,
        max_outer: args.max_outer,
        out: args.out.clone(),
        formats: args.format.clone().map(|mut f| {
            f.sort();
            f.dedup();
            f
        }),
    }))
}

fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_settings(settings(&args)?)?;
    let outcome = run_solve(&cfg, args.dump_matrix.as_deref())?;
    for s in &outcome.summaries {
        println!("{s}");
    }
    if let Some(table) = &outcome.table {
        print!("{}", table.to_text());
    }
    if !outcome.converged() {
        return Err(CliError::NotConverged("solver stopped at the iteration cap".into()).into());
    }
    Ok(())
}

fn reproduce(args: ReproduceArgs) -> anyhow::Result<()> {
    let opts = ReproduceOptions {
        refinements: args.refinements,
        ..ReproduceOptions::default()
    };
    let table = reproduce_tables(&opts)?;
    print!("{}", table.to_text());
    if let Some(dir) = &args.out {
        write_table(&table, dir)?;
    }
    if table.any_failed() {
        return Err(CliError::NotConverged("some cells FAILED".into()).into());
    }
    Ok(())
}

fn mesh(cmd: MeshCommand) -> anyhow::Result<()> {
    match cmd {
        MeshCommand::Gen { refinement, out } => {
            if refinement == 0 {
                return Err(CliError::Config("refinement must be at least 1".into()).into());
            }
            let mesh = generate_disk_mesh(refinement);
            match out {
                Some(path) => {
                    mesh.save(&path).map_err(|e| match e {
                        MeshError::Io(source) => CliError::Io {
                            path: path.clone(),
                            source,
                        },
                        other => CliError::Mesh(other),
                    })?;
                    eprintln!("{}", describe_mesh(&mesh));
                }
                None => print!("{}", mesh.to_text()),
            }
        }
        MeshCommand::Check { path } => println!("{}", check_mesh(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            // usage errors are configuration errors; help and version are not
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => solve(*args),
        Command::Reproduce(args) => reproduce(args),
        Command::Mesh(cmd) => mesh(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<CliError>()
                .map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
