//! Closed-form flow through a circular pipe of unit radius, and error
//! measures against it.
//!
//! With `R = |x|`, plug radius `R0 = 2 tau0` and `beta = 1 / (alpha - 1)`,
//! the velocity for `kappa = 1` and `f = 1` is
//!
//! ```text
//! y(R) = c (1 - R0)^(1+beta)                        0 <= R <= R0
//! y(R) = c ((1 - R0)^(1+beta) - (R - R0)^(1+beta))  R0 < R <= 1
//! ```
//!
//! with `c = 1 / (2^beta (1 + beta))`. For `R0 >= 1` the fluid does not move.

use thiserror::Error;

use crate::dual::FluidParams;
use crate::mesh::Triangulation;

/// Nodes may sit outside the unit circle by this much due to rounding.
const RADIUS_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("the pipe solution assumes kappa = 1 and f = 1, got kappa = {kappa}, f = {force}")]
    Setting { kappa: f64, force: f64 },
    #[error("radius {0} lies outside [0, 1]")]
    Radius(f64),
    #[error("reference field is zero; relative error is undefined")]
    ZeroReference,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeSolution {
    beta: f64,
    plug_radius: f64,
    params: FluidParams,
}

impl PipeSolution {
    pub fn new(params: FluidParams, force: f64) -> Result<Self, AnalyticError> {
        if params.kappa() != 1.0 || force != 1.0 {
            return Err(AnalyticError::Setting {
                kappa: params.kappa(),
                force,
            });
        }
        Ok(Self {
            beta: 1.0 / (params.alpha() - 1.0),
            plug_radius: 2.0 * params.tau0(),
            params,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn plug_radius(&self) -> f64 {
        self.plug_radius
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn exact_velocity(&self, radius: f64) -> Result<f64, AnalyticError> {
        if !(0.0..=1.0 + RADIUS_SLACK).contains(&radius) {
            return Err(AnalyticError::Radius(radius));
        }
        let radius = radius.min(1.0);
        let r0 = self.plug_radius;
        if r0 >= 1.0 {
            return Ok(0.0);
        }
        let p = 1.0 + self.beta;
        let c = 1.0 / (2f64.powf(self.beta) * p);
        let plug = (1.0 - r0).powf(p);
        Ok(if radius <= r0 {
            c * plug
        } else {
            c * (plug - (radius - r0).powf(p))
        })
    }

    /// Exact velocity sampled at the free nodes of `mesh`.
    pub fn sample(&self, mesh: &Triangulation) -> Result<Vec<f64>, AnalyticError> {
        mesh.free_nodes()
            .iter()
            .map(|&node| {
                let p = mesh.nodes()[node];
                self.exact_velocity(p[0].hypot(p[1]))
            })
            .collect()
    }
}

/// `|y_num - y_exact| / |y_exact|` in the Euclidean norm over free nodes.
pub fn relative_error(
    y_num: &[f64],
    mesh: &Triangulation,
    sol: &PipeSolution,
) -> Result<f64, AnalyticError> {
    let exact = sol.sample(mesh)?;
    relative_difference(y_num, &exact)
}

/// `|a - b| / |b|` in the Euclidean norm.
pub fn relative_difference(a: &[f64], b: &[f64]) -> Result<f64, AnalyticError> {
    if a.len() != b.len() {
        return Err(AnalyticError::Length(a.len(), b.len()));
    }
    let denom = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(AnalyticError::ZeroReference);
    }
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}
