//! Library side of the `viscoduct` command-line tool: run configuration,
//! solve and reproduce drivers, and field exporters.

pub mod config;
pub mod export;
pub mod table;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;
use viscoduct::{
    generate_disk_mesh, relative_error, solve_alg2, solve_trs, Alg2Config, DiscreteOperators,
    FluidParams, MeshError, PipeSolution, SolveReport, StressField, Triangulation, TrsConfig,
};

use config::{Format, MeshSource, Settings, SolverChoice};
use table::{ExperimentTable, Row};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid mesh: {0}")]
    Mesh(MeshError),
    #[error("cannot access {}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Mesh(_) => 1,
            Self::NotConverged(_) => 2,
            Self::Io { .. } => 3,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverChoice,
    pub mesh: MeshSource,
    pub params: FluidParams,
    pub force: f64,
    pub trs: TrsConfig,
    pub alg2: Alg2Config,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    /// Fills unset fields with defaults and validates everything.
    pub fn from_settings(s: Settings) -> Result<Self, CliError> {
        let config = |e: &dyn fmt::Display| CliError::Config(e.to_string());
        let params = FluidParams::new(
            s.alpha.unwrap_or(2.0),
            s.kappa.unwrap_or(1.0),
            s.tau0.unwrap_or(0.1),
        )
        .map_err(|e| config(&e))?;
        let force = s.force.unwrap_or(1.0);
        if !force.is_finite() {
            return Err(CliError::Config(format!(
                "force must be finite, got {force}"
            )));
        }

        let mut trs = TrsConfig::default();
        let mut alg2 = Alg2Config::default();
        if let Some(v) = s.abstol {
            trs.abstol = v;
            alg2.abstol = v;
        }
        if let Some(v) = s.reltol {
            trs.reltol = v;
            alg2.reltol = v;
        }
        if let Some(v) = s.r {
            alg2.r = v;
        }
        if let Some(v) = s.max_outer {
            trs.max_outer = v;
            alg2.max_outer = v;
        }
        trs.validate().map_err(|e| config(&e))?;
        alg2.validate().map_err(|e| config(&e))?;

        let formats = s.formats.unwrap_or_else(|| vec![Format::Csv]);
        if formats.is_empty() {
            return Err(CliError::Config(
                "at least one output format is required".into(),
            ));
        }
        Ok(Self {
            solver: s.solver.unwrap_or(SolverChoice::Trs),
            mesh: s.mesh.unwrap_or(MeshSource::Disk(13)),
            params,
            force,
            trs,
            alg2,
            out: s.out.unwrap_or_else(|| PathBuf::from("viscoduct-out")),
            formats,
        })
    }
}

pub fn load_mesh(source: &MeshSource) -> Result<Triangulation, CliError> {
    match source {
        MeshSource::Disk(n) => Ok(generate_disk_mesh(*n)),
        MeshSource::File(path) => Triangulation::load(path).map_err(|e| match e {
            MeshError::Io(source) => CliError::io(path, source),
            other => CliError::Mesh(other),
        }),
    }
}

fn assemble(mesh: &Triangulation, force: f64) -> Result<DiscreteOperators, CliError> {
    DiscreteOperators::assemble(mesh, force).map_err(|e| CliError::Config(e.to_string()))
}

/// One-line result of a single solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub solver: String,
    pub converged: bool,
    pub iterations: usize,
    pub kkt: f64,
    /// Relative error against the pipe solution, when that is defined.
    pub error: Option<f64>,
    pub max_velocity: f64,
    pub wall_time: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} after {} iterations, KKT residual {:.2e}, max velocity {:.4e}",
            self.solver,
            if self.converged {
                "converged"
            } else {
                "NOT converged"
            },
            self.iterations,
            self.kkt,
            self.max_velocity
        )?;
        if let Some(e) = self.error {
            write!(f, ", relative error {e:.2e}")?;
        }
        write!(f, ", {:.3}s", self.wall_time)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub summaries: Vec<Summary>,
    /// Comparison row when both solvers ran.
    pub table: Option<ExperimentTable>,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.summaries.iter().all(|s| s.converged)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn exact_error(cfg: &RunConfig, mesh: &Triangulation, y: &[f64]) -> Option<f64> {
    if !matches!(cfg.mesh, MeshSource::Disk(_)) {
        return None;
    }
    let exact = PipeSolution::new(cfg.params, cfg.force).ok()?;
    // undefined when the exact flow is at rest
    relative_error(y, mesh, &exact).ok()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Fields<'a> {
    name: &'a str,
    y: &'a [f64],
    tau: &'a StressField,
    report: &'a SolveReport,
}

fn write_outputs(cfg: &RunConfig, mesh: &Triangulation, fields: &Fields) -> Result<(), CliError> {
    let dir = &cfg.out;
    let name = fields.name;
    for format in &cfg.formats {
        match format {
            Format::Csv => {
                write_file(&dir.join(format!("{name}_nodes.csv")), |w| {
                    export::write_nodes_csv(mesh, fields.y, w)
                })?;
                write_file(&dir.join(format!("{name}_cells.csv")), |w| {
                    export::write_cells_csv(fields.tau, &cfg.params, w)
                })?;
            }
            Format::Vtk => {
                let title = format!(
                    "viscoduct {name} alpha={} tau0={}",
                    cfg.params.alpha(),
                    cfg.params.tau0()
                );
                write_file(&dir.join(format!("{name}.vtk")), |w| {
                    export::write_vtk(mesh, fields.y, fields.tau, &cfg.params, &title, w)
                })?;
            }
            // the report is always written
            Format::Json => {}
        }
    }
    write_file(&dir.join(format!("{name}_report.json")), |w| {
        export::write_report(fields.report, w)
    })
}

/// Runs the configured solver(s) from `tau = 0` and writes all outputs.
/// Non-convergence is not an error here; see [`SolveOutcome::converged`].
pub fn run_solve(cfg: &RunConfig, dump_matrix: Option<&Path>) -> Result<SolveOutcome, CliError> {
    let mesh = load_mesh(&cfg.mesh)?;
    let ops = assemble(&mesh, cfg.force)?;
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    if let Some(path) = dump_matrix {
        write_file(path, |w| ops.write_triplets(w))?;
    }

    let mut summaries = Vec::new();
    if cfg.solver.runs_trs() {
        let zero = StressField::zeros(ops.n_stress());
        let sol = solve_trs(&cfg.params, &ops, &zero, &cfg.trs)
            .map_err(|e| CliError::Config(e.to_string()))?;
        write_outputs(
            cfg,
            &mesh,
            &Fields {
                name: "trs",
                y: &sol.y,
                tau: &sol.tau,
                report: &sol.report,
            },
        )?;
        summaries.push(summarize(cfg, &mesh, &sol.y, &sol.report));
    }
    if cfg.solver.runs_alg2() {
        let sol = solve_alg2(&cfg.params, &ops, &cfg.alg2)
            .map_err(|e| CliError::NotConverged(e.to_string()))?;
        write_outputs(
            cfg,
            &mesh,
            &Fields {
                name: "alg2",
                y: &sol.y,
                tau: &sol.tau,
                report: &sol.report,
            },
        )?;
        summaries.push(summarize(cfg, &mesh, &sol.y, &sol.report));
    }

    let table = (summaries.len() == 2).then(|| {
        let (t, a) = (&summaries[0], &summaries[1]);
        ExperimentTable {
            rows: vec![Row {
                alpha: cfg.params.alpha(),
                tau0: cfg.params.tau0(),
                nodes: mesh.n_nodes(),
                error_trs: t.error,
                error_alg2: a.error,
                max_velocity: t.max_velocity,
                iterations_trs: Some(t.iterations),
                iterations_alg2: Some(a.iterations),
                kkt_trs: Some(t.kkt),
                kkt_alg2: Some(a.kkt),
                cpu_time_trs: Some(t.wall_time),
                cpu_time_alg2: Some(a.wall_time),
                failed: !(t.converged && a.converged),
            }],
        }
    });
    Ok(SolveOutcome { summaries, table })
}

fn summarize(cfg: &RunConfig, mesh: &Triangulation, y: &[f64], report: &SolveReport) -> Summary {
    Summary {
        solver: report.solver.clone(),
        converged: report.converged(),
        iterations: report.iterations,
        kkt: report.final_kkt_residual,
        error: exact_error(cfg, mesh, y),
        max_velocity: max_abs(y),
        wall_time: report.wall_time,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    /// Disk refinements, coarse to fine.
    pub refinements: Vec<usize>,
    pub alphas: Vec<f64>,
    pub tau0s: Vec<f64>,
    pub trs: TrsConfig,
    pub alg2: Alg2Config,
    /// Yield stress of the appended flow-stop row.
    pub stop_tau0: f64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            refinements: vec![13, 19, 26],
            alphas: vec![2.0, 1.75, 1.5],
            tau0s: vec![0.1, 0.2],
            trs: TrsConfig::default(),
            alg2: Alg2Config::default(),
            stop_tau0: 0.6,
        }
    }
}

/// Runs the pipe-flow grid with both solvers, then a TRS flow-stop row.
/// Cells that fail to converge are marked, never dropped.
pub fn reproduce_tables(opts: &ReproduceOptions) -> Result<ExperimentTable, CliError> {
    if opts.refinements.is_empty() || opts.refinements.contains(&0) {
        return Err(CliError::Config("refinements must be positive".into()));
    }
    let config = |e: &dyn fmt::Display| CliError::Config(e.to_string());
    let meshes: Vec<Triangulation> = opts
        .refinements
        .iter()
        .map(|&n| generate_disk_mesh(n))
        .collect();
    let ops: Vec<DiscreteOperators> = meshes
        .iter()
        .map(|m| assemble(m, 1.0))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for &alpha in &opts.alphas {
        for &tau0 in &opts.tau0s {
            let params = FluidParams::new(alpha, 1.0, tau0).map_err(|e| config(&e))?;
            let exact = PipeSolution::new(params, 1.0).map_err(|e| config(&e))?;
            for (mesh, ops) in meshes.iter().zip(&ops) {
                let zero = StressField::zeros(ops.n_stress());
                let trs = solve_trs(&params, ops, &zero, &opts.trs).map_err(|e| config(&e))?;
                let alg2 = solve_alg2(&params, ops, &opts.alg2);
                let trs_ok =
                    trs.report.converged() && trs.report.final_kkt_residual <= opts.trs.abstol;
                let (alg2_ok, alg2) = match alg2 {
                    Ok(sol) => (
                        sol.report.converged() && sol.report.final_kkt_residual <= opts.alg2.abstol,
                        Some(sol),
                    ),
                    Err(_) => (false, None),
                };
                rows.push(Row {
                    alpha,
                    tau0,
                    nodes: mesh.n_nodes(),
                    error_trs: relative_error(&trs.y, mesh, &exact).ok(),
                    error_alg2: alg2
                        .as_ref()
                        .and_then(|s| relative_error(&s.y, mesh, &exact).ok()),
                    max_velocity: max_abs(&trs.y),
                    iterations_trs: Some(trs.report.iterations),
                    iterations_alg2: alg2.as_ref().map(|s| s.report.iterations),
                    kkt_trs: Some(trs.report.final_kkt_residual),
                    kkt_alg2: alg2.as_ref().map(|s| s.report.final_kkt_residual),
                    cpu_time_trs: Some(trs.report.wall_time),
                    cpu_time_alg2: alg2.as_ref().map(|s| s.report.wall_time),
                    failed: !(trs_ok && alg2_ok),
                });
            }
        }
    }

    let params = FluidParams::new(2.0, 1.0, opts.stop_tau0).map_err(|e| config(&e))?;
    let (mesh, ops) = (&meshes[0], &ops[0]);
    let trs = solve_trs(&params, ops, &StressField::zeros(ops.n_stress()), &opts.trs)
        .map_err(|e| config(&e))?;
    let max_velocity = max_abs(&trs.y);
    rows.push(Row {
        alpha: 2.0,
        tau0: opts.stop_tau0,
        nodes: mesh.n_nodes(),
        error_trs: None,
        error_alg2: None,
        max_velocity,
        iterations_trs: Some(trs.report.iterations),
        iterations_alg2: None,
        kkt_trs: Some(trs.report.final_kkt_residual),
        kkt_alg2: None,
        cpu_time_trs: Some(trs.report.wall_time),
        cpu_time_alg2: None,
        failed: !(trs.report.converged() && max_velocity <= 1e-6),
    });
    Ok(ExperimentTable { rows })
}

/// Writes `table.csv` and `table.txt` into `dir`.
pub fn write_table(table: &ExperimentTable, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (name, text) in [
        ("table.csv", table.to_csv()),
        ("table.txt", table.to_text()),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

/// Human-readable mesh statistics.
pub fn describe_mesh(mesh: &Triangulation) -> String {
    format!(
        "nodes {}, triangles {}, free nodes {}, Dirichlet nodes {}, area {:.6}, max diameter {:.4}",
        mesh.n_nodes(),
        mesh.n_triangles(),
        mesh.n_free(),
        mesh.n_nodes() - mesh.n_free(),
        mesh.total_area(),
        mesh.max_diameter()
    )
}

/// Loads and validates a mesh file, including assembly of the operators.
pub fn check_mesh(path: &Path) -> Result<String, CliError> {
    let mesh = load_mesh(&MeshSource::File(path.to_owned()))?;
    assemble(&mesh, 1.0)?;
    Ok(describe_mesh(&mesh))
}
