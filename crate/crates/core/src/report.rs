//! Iteration logs shared by both solvers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

/// Why the inner CG-Steihaug loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CgExit {
    /// Projected residual fell below tolerance (or was already negligible).
    Converged,
    /// Step was cut at the trust-region boundary.
    Boundary,
    /// Small or negative curvature along the search direction.
    Curvature,
    /// Inner iteration cap reached.
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgRecord {
    pub iterations: usize,
    pub exit: CgExit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    /// Outer loop passes executed.
    pub iterations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// `||grad J - D^T y||_inf` at each evaluated iterate.
    pub kkt_history: Vec<f64>,
    pub objective_history: Vec<f64>,
    /// Trust radius in force at each outer iteration (empty for ALG2).
    pub radius_history: Vec<f64>,
    /// `||D tau - f_h||_inf` at each evaluated iterate.
    pub feasibility_history: Vec<f64>,
    /// Whether the step computed at each outer iteration was accepted.
    pub step_accepted: Vec<bool>,
    pub cg_iterations: Vec<CgRecord>,
    pub status: SolveStatus,
    pub final_kkt_residual: f64,
    pub wall_time: f64,
}

impl SolveReport {
    pub(crate) fn new(solver: &str) -> Self {
        Self {
            solver: solver.to_owned(),
            iterations: 0,
            accepted_steps: 0,
            rejected_steps: 0,
            kkt_history: Vec::new(),
            objective_history: Vec::new(),
            radius_history: Vec::new(),
            feasibility_history: Vec::new(),
            step_accepted: Vec::new(),
            cg_iterations: Vec::new(),
            status: SolveStatus::MaxIterations,
            final_kkt_residual: f64::NAN,
            wall_time: 0.0,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Objective values at the iterates that followed accepted steps,
    /// preceded by the initial value.
    pub fn accepted_objectives(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(&first) = self.objective_history.first() {
            out.push(first);
        }
        for (k, &accepted) in self.step_accepted.iter().enumerate() {
            if accepted {
                if let Some(&j) = self.objective_history.get(k + 1) {
                    out.push(j);
                }
            }
        }
        out
    }
}
