//! Stress-based (dual) solvers for viscoplastic duct flow.
//!
//! Bingham and Herschel-Bulkley flow through a duct of polygonal
//! cross-section is posed as the minimisation of a convex stress functional
//! subject to the discrete momentum balance `D tau = f_h`, on P1 velocities and
//! P0 stresses. The crate provides
//!
//! - [`mesh`]: triangulations, a structured unit-disk mesher and a text format;
//! - [`fem`]: the constraint operator, area weights, loads and projections;
//! - [`dual`]: the objective, its gradient and blockwise Hessian;
//! - [`trs`]: the trust-region SQP solver with projected CG-Steihaug steps;
//! - [`alg2`]: the augmented Lagrangian (ALG2) baseline;
//! - [`analytic`]: the closed-form pipe solution and error measures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alg2;
pub mod analytic;
pub mod dual;
pub mod fem;
pub mod mesh;
pub mod report;
pub mod sparse;
pub mod trs;

pub use alg2::{
    shrink_magnitude, solve_alg2, Alg2Config, Alg2Error, Alg2Solution, RateOfStrainField,
};
pub use analytic::{relative_difference, relative_error, AnalyticError, PipeSolution};
pub use dual::{FluidParams, HessianBlocks, ParamsError};
pub use fem::{DiscreteOperators, FemError, StressField, VelocityField};
pub use mesh::{generate_disk_mesh, MeshError, TriangleGeometry, Triangulation};
pub use report::{CgExit, SolveReport, SolveStatus};
pub use trs::{cg_steihaug, solve_trs, update_radius, ConfigError, TrsConfig, TrsSolution};
