//! ALG2: alternating-direction augmented Lagrangian baseline.
//!
//! The velocity problem is split by introducing an auxiliary rate of strain
//! `q = grad y` with multiplier `tau`. Each pass performs
//!
//! 1. a velocity step, the SPD solve `r K y = f_h - D tau + r D q`;
//! 2. a per-triangle rate-of-strain step, a shrinkage of
//!    `w = tau_k + r (grad y)_k` whose magnitude solves
//!    `kappa m^(alpha-1) + r m = (|w| - tau0)_+`;
//! 3. a multiplier step `tau += r (grad y - q)`.
//!
//! All nonlinearity lives in step 2, which is closed form for Bingham fluids
//! and a scalar Newton solve otherwise.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::{gradient, kkt_residual_from_gradient, objective, FluidParams};
use crate::fem::{DiscreteOperators, StressField, VelocityField};
use crate::report::{SolveReport, SolveStatus};
use crate::trs::ConfigError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Alg2Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("Newton solve for the rate of strain did not converge on element {element} (|w| = {w_norm:e})")]
    Newton { element: usize, w_norm: f64 },
    #[error("Newton solve did not converge for |w| = {w_norm:e}")]
    Magnitude { w_norm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alg2Config {
    /// Augmentation parameter.
    pub r: f64,
    pub abstol: f64,
    pub reltol: f64,
    pub newton_abstol: f64,
    pub newton_reltol: f64,
    pub max_outer: usize,
    pub newton_max: usize,
}

impl Default for Alg2Config {
    fn default() -> Self {
        Self {
            r: 10.0,
            abstol: 1e-4,
            reltol: 1e-4,
            newton_abstol: 1e-4,
            newton_reltol: 1e-4,
            max_outer: 5000,
            newton_max: 100,
        }
    }
}

impl Alg2Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("r", self.r),
            ("abstol", self.abstol),
            ("reltol", self.reltol),
            ("newton_abstol", self.newton_abstol),
            ("newton_reltol", self.newton_reltol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.max_outer == 0 || self.newton_max == 0 {
            return Err(ConfigError::Invalid(
                "iteration caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-triangle auxiliary rate of strain, length `2 n_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateOfStrainField(pub Vec<f64>);

/// Magnitude `m >= 0` of the shrunk rate of strain: the root of
/// `kappa m^(alpha-1) + r m = (w_norm - tau0)_+`.
///
/// Exactly zero when `w_norm <= tau0`; closed form for `alpha = 2`.
pub fn shrink_magnitude(
    params: &FluidParams,
    r: f64,
    w_norm: f64,
    cfg: &Alg2Config,
) -> Result<f64, Alg2Error> {
    let excess = w_norm - params.tau0();
    if !(excess > 0.0) {
        return Ok(0.0);
    }
    if params.alpha() == 2.0 {
        return Ok(excess / (params.kappa() + r));
    }
    newton_magnitude(params, r, w_norm, cfg)
}

/// Newton iteration for [`shrink_magnitude`], usable for any `alpha` in
/// `(1, 2]`.
///
/// Works in `u = ln m`: the residual `kappa e^((alpha-1) u) + r e^u - c` is
/// convex and increasing in `u`, so iterates started right of the root fall
/// monotonically onto it, and tiny roots (`alpha` near 1) do not underflow
/// during the solve. Stops once the residual is within
/// `newton_abstol (1 + w_norm)` and the relative step in `m` is below
/// `newton_reltol`, or the residual stops decreasing at rounding level.
pub fn newton_magnitude(
    params: &FluidParams,
    r: f64,
    w_norm: f64,
    cfg: &Alg2Config,
) -> Result<f64, Alg2Error> {
    let excess = w_norm - params.tau0();
    if !(excess > 0.0) {
        return Ok(0.0);
    }
    let (kappa, p) = (params.kappa(), params.alpha() - 1.0);
    let residual = |u: f64| kappa * (p * u).exp() + r * u.exp() - excess;
    let tol = cfg.newton_abstol * (1.0 + w_norm);

    // either term alone reaches `excess` here, so the residual is positive
    let mut u = ((excess / kappa).ln() / p).min((excess / r).ln());
    let mut phi = residual(u);
    for _ in 0..cfg.newton_max {
        let slope = p * kappa * (p * u).exp() + r * u.exp();
        let next = u - phi / slope;
        let phi_next = residual(next);
        let stalled = !(phi_next.abs() < phi.abs());
        let step = (next - u).abs();
        if !stalled {
            u = next;
            phi = phi_next;
        }
        if phi.abs() <= tol && (step <= cfg.newton_reltol || stalled) {
            return Ok(u.exp());
        }
        if stalled {
            break;
        }
    }
    Err(Alg2Error::Magnitude { w_norm })
}

#[derive(Debug, Clone)]
pub struct Alg2Solution {
    pub y: VelocityField,
    pub q: RateOfStrainField,
    pub tau: StressField,
    pub report: SolveReport,
}

fn relative_change(prev: &[f64], next: &[f64]) -> (f64, f64) {
    let diff: f64 = prev.iter().zip(next).map(|(a, b)| (a - b) * (a - b)).sum();
    let size: f64 = next.iter().map(|v| v * v).sum();
    (diff.sqrt(), size.sqrt())
}

/// Runs ALG2 from `y = 0`, `q = 0`, `tau = 0`.
pub fn solve_alg2(
    params: &FluidParams,
    ops: &DiscreteOperators,
    cfg: &Alg2Config,
) -> Result<Alg2Solution, Alg2Error> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = SolveReport::new("alg2");
    let n_stress = ops.n_stress();
    let r = cfg.r;

    let mut y = vec![0.0; ops.n_free()];
    let mut q = vec![0.0; n_stress];
    let mut tau = vec![0.0; n_stress];

    for k in 1..=cfg.max_outer {
        // velocity step
        let d_tau = ops.apply_d(&tau);
        let d_q = ops.apply_d(&q);
        let rhs: Vec<f64> = ops
            .load()
            .iter()
            .zip(d_tau.iter().zip(&d_q))
            .map(|(f, (dt, dq))| (f - dt + r * dq) / r)
            .collect();
        let y_next = ops.solve_stiffness(&rhs);
        let grad_y = ops.discrete_gradient(&y_next);

        // rate-of-strain step
        let mut q_next = vec![0.0; n_stress];
        for (element, ((qk, tk), gk)) in q_next
            .chunks_exact_mut(2)
            .zip(tau.chunks_exact(2))
            .zip(grad_y.chunks_exact(2))
            .enumerate()
        {
            let w = [tk[0] + r * gk[0], tk[1] + r * gk[1]];
            let w_norm = w[0].hypot(w[1]);
            let m = shrink_magnitude(params, r, w_norm, cfg)
                .map_err(|_| Alg2Error::Newton { element, w_norm })?;
            if m > 0.0 {
                qk[0] = m * w[0] / w_norm;
                qk[1] = m * w[1] / w_norm;
            }
        }

        // multiplier step
        for ((t, g), qi) in tau.iter_mut().zip(&grad_y).zip(&q_next) {
            *t += r * (g - qi);
        }

        let grad_j = gradient(params, ops, &tau);
        let kkt = kkt_residual_from_gradient(ops, &grad_j, &y_next);
        report.kkt_history.push(kkt);
        report.objective_history.push(objective(params, ops, &tau));
        report
            .feasibility_history
            .push(ops.constraint_residual(&tau));
        report.final_kkt_residual = kkt;
        report.iterations = k;

        let (dy, ny) = relative_change(&y, &y_next);
        let (dq, nq) = relative_change(&q, &q_next);
        y = y_next;
        q = q_next;
        if kkt <= cfg.abstol && dy <= cfg.reltol * ny && dq <= cfg.reltol * nq {
            report.status = SolveStatus::Converged;
            break;
        }
    }

    report.wall_time = start.elapsed().as_secs_f64();
    Ok(Alg2Solution {
        y: VelocityField(y),
        q: RateOfStrainField(q),
        tau: StressField(tau),
        report,
    })
}
