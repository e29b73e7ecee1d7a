//! P1-P0 discretization of the momentum constraint.
//!
//! Stresses are piecewise constant 2-vectors, stored per triangle as
//! `(tau[2k], tau[2k + 1])`. Velocities are continuous piecewise linear and
//! vanish on Dirichlet nodes, so only free-node values are stored. The
//! constraint operator `D` maps stresses to free-node loads,
//! `D[j, 2k + c] = |T_k| * d(phi_j)/dx_c` on `T_k`, and the constraint reads
//! `D tau = f_h`.

use std::io::Write;
use std::ops::{Deref, DerefMut};

use thiserror::Error;

use crate::mesh::Triangulation;
use crate::sparse::{CsrMatrix, FactorError, SpdFactor};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("factorization of {operator} failed: {source}")]
    RankDeficient {
        operator: &'static str,
        #[source]
        source: FactorError,
    },
}

/// Per-triangle stress vector of length `2 n_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField(pub Vec<f64>);

/// Free-node velocities of length `n_I`; Dirichlet nodes are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField(pub Vec<f64>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl $name {
            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

vector_newtype!(StressField);
vector_newtype!(VelocityField);

impl StressField {
    pub fn n_blocks(&self) -> usize {
        self.0.len() / 2
    }

    pub fn block(&self, k: usize) -> [f64; 2] {
        [self.0[2 * k], self.0[2 * k + 1]]
    }

    /// Euclidean norm of each triangle's stress vector.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.0.chunks_exact(2).map(|b| b[0].hypot(b[1])).collect()
    }
}

/// Assembled constraint operator, area weights, load vector and the two SPD
/// factorizations used by the solvers.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    d: CsrMatrix,
    /// diagonal of `A`, length `2 n_T`
    areas: Vec<f64>,
    f_h: Vec<f64>,
    ddt: CsrMatrix,
    stiffness: CsrMatrix,
    ddt_factor: SpdFactor,
    stiffness_factor: SpdFactor,
}

impl DiscreteOperators {
    /// Assembles with a constant force density; loads are exact (`f |T| / 3`
    /// per vertex).
    pub fn assemble(mesh: &Triangulation, force: f64) -> Result<Self, FemError> {
        Self::assemble_with(mesh, |_| force)
    }

    /// Assembles with a force density given pointwise. The load uses vertex
    /// quadrature, which is exact for constant densities.
    #[allow(clippy::needless_range_loop)]
    pub fn assemble_with(
        mesh: &Triangulation,
        force: impl Fn([f64; 2]) -> f64,
    ) -> Result<Self, FemError> {
        let n_free = mesh.n_free();
        let n_tri = mesh.n_triangles();
        let mut d_trip = Vec::with_capacity(6 * n_tri);
        let mut ddt_trip = Vec::with_capacity(9 * n_tri);
        let mut k_trip = Vec::with_capacity(9 * n_tri);
        let mut areas = Vec::with_capacity(2 * n_tri);
        let mut f_h = vec![0.0; n_free];

        for (k, (tri, geo)) in mesh.triangles().iter().zip(mesh.geometry()).enumerate() {
            let area = geo.area;
            areas.extend([area, area]);
            let free = tri.map(|node| mesh.free_index(node));
            for a in 0..3 {
                let Some(ia) = free[a] else { continue };
                let ga = geo.grad_phi[a];
                d_trip.push((ia, 2 * k, area * ga[0]));
                d_trip.push((ia, 2 * k + 1, area * ga[1]));
                f_h[ia] += force(mesh.nodes()[tri[a]]) * area / 3.0;
                for b in 0..3 {
                    let Some(ib) = free[b] else { continue };
                    let gb = geo.grad_phi[b];
                    let dot = ga[0] * gb[0] + ga[1] * gb[1];
                    ddt_trip.push((ia, ib, area * area * dot));
                    k_trip.push((ia, ib, area * dot));
                }
            }
        }

        let d = CsrMatrix::from_triplets(n_free, 2 * n_tri, &d_trip);
        let ddt = CsrMatrix::from_triplets(n_free, n_free, &ddt_trip);
        let stiffness = CsrMatrix::from_triplets(n_free, n_free, &k_trip);
        let ddt_factor = SpdFactor::new(&ddt).map_err(|source| FemError::RankDeficient {
            operator: "D D^T",
            source,
        })?;
        let stiffness_factor =
            SpdFactor::new(&stiffness).map_err(|source| FemError::RankDeficient {
                operator: "D A^-1 D^T",
                source,
            })?;

        Ok(Self {
            d,
            areas,
            f_h,
            ddt,
            stiffness,
            ddt_factor,
            stiffness_factor,
        })
    }

    pub fn n_free(&self) -> usize {
        self.d.rows()
    }

    /// Length of a stress vector, `2 n_T`.
    pub fn n_stress(&self) -> usize {
        self.d.cols()
    }

    pub fn n_triangles(&self) -> usize {
        self.d.cols() / 2
    }

    pub fn d(&self) -> &CsrMatrix {
        &self.d
    }

    /// Diagonal of the area matrix `A`.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Area of triangle `k`.
    pub fn area(&self, k: usize) -> f64 {
        self.areas[2 * k]
    }

    pub fn load(&self) -> &[f64] {
        &self.f_h
    }

    pub fn ddt(&self) -> &CsrMatrix {
        &self.ddt
    }

    /// `D A^-1 D^T`, the P1 stiffness matrix on free nodes.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn apply_d(&self, tau: &[f64]) -> Vec<f64> {
        self.d.mul_vec(tau)
    }

    pub fn apply_dt(&self, y: &[f64]) -> Vec<f64> {
        self.d.tr_mul_vec(y)
    }

    /// Discrete gradient `A^-1 D^T y`: the constant gradient of the P1
    /// function with free-node values `y` on each triangle.
    pub fn discrete_gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = self.d.tr_mul_vec(y);
        for (gi, a) in g.iter_mut().zip(&self.areas) {
            *gi /= a;
        }
        g
    }

    /// `||D tau - f_h||_inf`
    pub fn constraint_residual(&self, tau: &[f64]) -> f64 {
        self.apply_d(tau)
            .iter()
            .zip(&self.f_h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Solves `D D^T x = rhs`.
    pub fn solve_ddt(&self, rhs: &[f64]) -> Vec<f64> {
        self.ddt_factor.solve(rhs)
    }

    /// Solves `D A^-1 D^T x = rhs`.
    pub fn solve_stiffness(&self, rhs: &[f64]) -> Vec<f64> {
        self.stiffness_factor.solve(rhs)
    }

    /// Projects `tau` onto `{D tau = f_h}` in the `A`-weighted inner product:
    /// `tau - A^-1 D^T (D A^-1 D^T)^-1 (D tau - f_h)`.
    pub fn project_feasible(&self, tau: &StressField) -> StressField {
        let mut misfit = self.apply_d(tau);
        for (m, f) in misfit.iter_mut().zip(&self.f_h) {
            *m -= f;
        }
        let lambda = self.solve_stiffness(&misfit);
        let correction = self.discrete_gradient(&lambda);
        StressField(tau.iter().zip(&correction).map(|(t, c)| t - c).collect())
    }

    /// Least-squares multiplier `argmin_y |grad - D^T y|^2 = (D D^T)^-1 D grad`.
    pub fn recover_velocity(&self, grad: &[f64]) -> VelocityField {
        VelocityField(self.solve_ddt(&self.apply_d(grad)))
    }

    /// Euclidean projection onto the null space of `D`:
    /// `v - D^T (D D^T)^-1 D v`.
    pub fn project_nullspace(&self, v: &[f64]) -> Vec<f64> {
        let w = self.solve_ddt(&self.apply_d(v));
        let range = self.apply_dt(&w);
        v.iter().zip(&range).map(|(a, b)| a - b).collect()
    }

    /// Writes `D` as `i j value` lines.
    pub fn write_triplets(&self, mut out: impl Write) -> std::io::Result<()> {
        for (i, j, v) in self.d.triplets() {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}
