//! Field output: CSV, legacy VTK and JSON reports.

use std::io::{self, Write};

use viscoduct::{FluidParams, SolveReport, StressField, Triangulation};

/// Writes `x,y,velocity` for every mesh node, Dirichlet nodes included.
pub fn write_nodes_csv(
    mesh: &Triangulation,
    y_free: &[f64],
    mut out: impl Write,
) -> io::Result<()> {
    let y = mesh.extend_by_zero(y_free);
    writeln!(out, "x,y,velocity")?;
    for (p, v) in mesh.nodes().iter().zip(&y) {
        writeln!(out, "{},{},{}", p[0], p[1], v)?;
    }
    Ok(())
}

/// Writes `k,tau_magnitude,yielded` for every triangle.
pub fn write_cells_csv(
    tau: &StressField,
    params: &FluidParams,
    mut out: impl Write,
) -> io::Result<()> {
    writeln!(out, "k,tau_magnitude,yielded")?;
    for (k, m) in tau.magnitudes().iter().enumerate() {
        writeln!(out, "{k},{m},{}", u8::from(*m > params.tau0()))?;
    }
    Ok(())
}

/// Legacy ASCII unstructured grid with point data `velocity` and cell data
/// `stress_magnitude` and `yielded`.
pub fn write_vtk(
    mesh: &Triangulation,
    y_free: &[f64],
    tau: &StressField,
    params: &FluidParams,
    title: &str,
    mut out: impl Write,
) -> io::Result<()> {
    let y = mesh.extend_by_zero(y_free);
    let n_t = mesh.n_triangles();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_nodes())?;
    for p in mesh.nodes() {
        writeln!(out, "{} {} 0", p[0], p[1])?;
    }
    writeln!(out, "CELLS {n_t} {}", 4 * n_t)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {n_t}")?;
    for _ in 0..n_t {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.n_nodes())?;
    writeln!(out, "SCALARS velocity double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in &y {
        writeln!(out, "{v}")?;
    }
    let mags = tau.magnitudes();
    writeln!(out, "CELL_DATA {n_t}")?;
    writeln!(out, "SCALARS stress_magnitude double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for m in &mags {
        writeln!(out, "{m}")?;
    }
    writeln!(out, "SCALARS yielded int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for m in &mags {
        writeln!(out, "{}", u8::from(*m > params.tau0()))?;
    }
    Ok(())
}

pub fn write_report(report: &SolveReport, out: impl Write) -> io::Result<()> {
    serde_json::to_writer_pretty(out, report).map_err(io::Error::from)
}
