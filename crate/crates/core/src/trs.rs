//! Trust-region SQP for the discrete dual problem
//! `min J(tau)` subject to `D tau = f_h`.
//!
//! The start point is projected onto the affine constraint once; every step
//! afterwards lies in the null space of `D`, so no normal subproblem is
//! needed. Tangential steps come from a projected CG-Steihaug iteration and
//! the trust radius is updated from the ratio of actual to predicted
//! reduction.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::{
    gradient, hessian, kkt_residual_from_gradient, objective, FluidParams, HessianBlocks,
};
use crate::fem::{DiscreteOperators, StressField, VelocityField};
use crate::report::{CgExit, CgRecord, SolveReport, SolveStatus};

/// Halvings allowed in the Armijo backtracking of the curvature branch.
const MAX_BACKTRACKS: usize = 60;
/// Inner iterations between re-projections of the CG iterate.
const REPROJECT_EVERY: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid solver configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrsConfig {
    pub abstol: f64,
    pub reltol: f64,
    pub divtol: f64,
    pub delta0: f64,
    pub delta_max: f64,
    pub eta: f64,
    pub gamma: f64,
    pub max_outer: usize,
    /// Inner iteration cap; `None` means `10 n_T`.
    pub max_cg: Option<usize>,
}

impl Default for TrsConfig {
    fn default() -> Self {
        Self {
            abstol: 1e-4,
            reltol: 1e-4,
            divtol: 1e-10,
            delta0: 10.0,
            delta_max: 1e5,
            eta: 1e-1,
            gamma: 1e-2,
            max_outer: 500,
            max_cg: None,
        }
    }
}

impl TrsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("abstol", self.abstol),
            ("reltol", self.reltol),
            ("divtol", self.divtol),
            ("delta0", self.delta0),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.delta0 <= self.delta_max) {
            return Err(ConfigError::Invalid(format!(
                "need delta0 <= delta_max, got {} > {}",
                self.delta0, self.delta_max
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.max_outer == 0 || self.max_cg == Some(0) {
            return Err(ConfigError::Invalid(
                "iteration caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one CG-Steihaug solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub step: Vec<f64>,
    pub exit: CgExit,
    pub iterations: usize,
    /// `|z^j|` for every inner iterate, starting with `z^0 = 0`.
    pub iterate_norms: Vec<f64>,
    /// `||D z^j||_inf` for every inner iterate.
    pub null_residuals: Vec<f64>,
}

impl CgOutcome {
    fn is_zero(&self) -> bool {
        self.step.iter().all(|&v| v == 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Positive root `s` of `|z + s d|^2 = delta^2`, assuming `|z| <= delta`.
pub fn boundary_step(z: &[f64], d: &[f64], delta: f64) -> f64 {
    let a = dot(d, d);
    let b = 2.0 * dot(z, d);
    let c = (dot(z, z) - delta * delta).min(0.0);
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    if b >= 0.0 {
        if b + disc == 0.0 {
            0.0
        } else {
            -2.0 * c / (b + disc)
        }
    } else {
        (disc - b) / (2.0 * a)
    }
}

/// Projected CG-Steihaug for
/// `min g^T s + 1/2 s^T H s` subject to `D s = 0`, `|s| <= delta`.
pub fn cg_steihaug(
    ops: &DiscreteOperators,
    grad: &[f64],
    hess: &HessianBlocks,
    delta: f64,
    cfg: &TrsConfig,
) -> CgOutcome {
    let n = grad.len();
    let max_cg = cfg.max_cg.unwrap_or(10 * hess.len()).max(1);
    let mut z = vec![0.0; n];
    let mut r = grad.to_vec();
    let mut g = ops.project_nullspace(&r);
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut hd = vec![0.0; n];
    let mut gr = dot(&g, &r).max(0.0);
    let gr0_sqrt = gr.sqrt();

    let mut outcome = CgOutcome {
        step: Vec::new(),
        exit: CgExit::Converged,
        iterations: 0,
        iterate_norms: vec![0.0],
        null_residuals: vec![0.0],
    };
    let record = |outcome: &mut CgOutcome, z: &[f64]| {
        outcome.iterate_norms.push(norm(z));
        outcome.null_residuals.push(norm_inf(&ops.apply_d(z)));
    };

    if gr0_sqrt < cfg.abstol {
        outcome.step = z;
        return outcome;
    }

    for j in 0..max_cg {
        outcome.iterations = j + 1;
        hess.apply_into(&d, &mut hd);
        let curvature = dot(&d, &hd);
        if curvature < cfg.divtol {
            // model is (nearly) flat along d: go to the boundary, then
            // backtrack until the Armijo condition holds
            outcome.exit = CgExit::Curvature;
            let mut s = boundary_step(&z, &d, delta);
            let slope = dot(&r, &d);
            let mut backtracks = 0;
            // Q(z + s d) - Q(z) = s r.d + s^2/2 d.Hd
            while s * slope + 0.5 * s * s * curvature > cfg.gamma * s * slope {
                if backtracks == MAX_BACKTRACKS {
                    outcome.step = vec![0.0; n];
                    return outcome;
                }
                s *= 0.5;
                backtracks += 1;
            }
            axpy(s, &d, &mut z);
            record(&mut outcome, &z);
            outcome.step = z;
            return outcome;
        }

        let alpha = gr / curvature;
        let mut z_next = z.clone();
        axpy(alpha, &d, &mut z_next);
        if norm(&z_next) >= delta {
            let s = boundary_step(&z, &d, delta);
            axpy(s, &d, &mut z);
            record(&mut outcome, &z);
            outcome.step = z;
            outcome.exit = CgExit::Boundary;
            return outcome;
        }

        z = z_next;
        if (j + 1) % REPROJECT_EVERY == 0 {
            z = ops.project_nullspace(&z);
        }
        record(&mut outcome, &z);
        axpy(alpha, &hd, &mut r);
        g = ops.project_nullspace(&r);
        let gr_next = dot(&g, &r).max(0.0);
        if gr_next.sqrt() < cfg.reltol * gr0_sqrt {
            outcome.step = z;
            return outcome;
        }
        let beta = gr_next / gr;
        for (di, gi) in d.iter_mut().zip(&g) {
            *di = -gi + beta * *di;
        }
        gr = gr_next;
    }
    outcome.step = z;
    outcome.exit = CgExit::Cap;
    outcome
}

/// Outcome of a trust-radius update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusUpdate {
    pub accepted: bool,
    pub delta: f64,
    pub rho: f64,
}

/// Accepts or rejects a step from `ared / pred` and updates the radius.
///
/// A rejected step shrinks the radius relative to the norm of the rejected
/// trial step. A non-positive `pred` counts as a model failure: reject and
/// shrink by the maximal factor.
pub fn update_radius(
    cfg: &TrsConfig,
    delta: f64,
    ared: f64,
    pred: f64,
    step_norm: f64,
) -> RadiusUpdate {
    if !(pred > 0.0) {
        return RadiusUpdate {
            accepted: false,
            delta: 0.1 * step_norm,
            rho: f64::NEG_INFINITY,
        };
    }
    let rho = ared / pred;
    if rho >= cfg.eta {
        let grown = if rho >= 0.9 {
            (10.0 * step_norm).max(delta).min(cfg.delta_max)
        } else if rho >= 0.3 {
            (2.0 * step_norm).max(delta).min(cfg.delta_max)
        } else {
            delta
        };
        RadiusUpdate {
            accepted: true,
            delta: grown,
            rho,
        }
    } else {
        let factor = ((1.0 - cfg.eta) / (1.0 - rho)).clamp(0.1, 0.5);
        RadiusUpdate {
            accepted: false,
            delta: factor * step_norm,
            rho,
        }
    }
}

/// Converged (or last) iterate of [`solve_trs`].
#[derive(Debug, Clone)]
pub struct TrsSolution {
    pub tau: StressField,
    pub y: VelocityField,
    pub report: SolveReport,
    /// Inner iterate norms of every CG call, for structural checks.
    pub cg_traces: Vec<CgOutcome>,
}

/// Runs the trust-region SQP iteration from `tau_init` (projected first).
pub fn solve_trs(
    params: &FluidParams,
    ops: &DiscreteOperators,
    tau_init: &StressField,
    cfg: &TrsConfig,
) -> Result<TrsSolution, ConfigError> {
    cfg.validate()?;
    assert_eq!(tau_init.len(), ops.n_stress());
    let start = Instant::now();
    let mut report = SolveReport::new("trs");
    let mut traces = Vec::new();

    let mut tau = ops.project_feasible(tau_init);
    let mut j_cur = objective(params, ops, &tau);
    let mut delta = cfg.delta0;
    let mut y_prev: Option<VelocityField> = None;

    let mut k = 0;
    let y = loop {
        let grad = gradient(params, ops, &tau);
        let y = ops.recover_velocity(&grad);
        let kkt = kkt_residual_from_gradient(ops, &grad, &y);
        report.kkt_history.push(kkt);
        report.objective_history.push(j_cur);
        report.radius_history.push(delta);
        report
            .feasibility_history
            .push(ops.constraint_residual(&tau));
        report.final_kkt_residual = kkt;

        let velocity_settled = y_prev.as_ref().is_some_and(|prev| {
            let change: f64 = prev
                .iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            change.sqrt() <= cfg.reltol * norm(&y)
        });
        if kkt <= cfg.abstol && velocity_settled {
            report.status = SolveStatus::Converged;
            break y;
        }
        if k == cfg.max_outer {
            break y;
        }

        let hess = hessian(params, ops, &tau);
        let cg = cg_steihaug(ops, &grad, &hess, delta, cfg);
        k += 1;
        report.iterations = k;
        report.cg_iterations.push(CgRecord {
            iterations: cg.iterations,
            exit: cg.exit,
        });

        if cg.exit == CgExit::Converged && cg.is_zero() {
            // projected gradient already below abstol: the iterate cannot move
            report.step_accepted.push(false);
            report.status = SolveStatus::Converged;
            traces.push(cg);
            break y;
        }

        let step = &cg.step;
        let step_norm = norm(step);
        let mut trial = tau.0.clone();
        axpy(1.0, step, &mut trial);
        let j_trial = objective(params, ops, &trial);
        let ared = j_cur - j_trial;
        let pred = -dot(step, &grad) - 0.5 * hess.quadratic_form(step);
        let mut update = update_radius(cfg, delta, ared, pred, step_norm);
        if step_norm == 0.0 {
            // failed backtracking yields an empty step; shrink from the radius
            update.accepted = false;
            update.delta = 0.1 * delta;
        }

        report.step_accepted.push(update.accepted);
        if update.accepted {
            report.accepted_steps += 1;
            tau = StressField(trial);
            j_cur = j_trial;
        } else {
            report.rejected_steps += 1;
        }
        delta = update.delta;
        traces.push(cg);
        y_prev = Some(y);
    };

    report.wall_time = start.elapsed().as_secs_f64();
    Ok(TrsSolution {
        tau,
        y,
        report,
        cg_traces: traces,
    })
}
