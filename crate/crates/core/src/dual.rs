//! Discrete dual objective for Herschel-Bulkley duct flow.
//!
//! For stress blocks `tau_k` the objective is
//!
//! ```text
//! J(tau) = 1 / (alpha' kappa^(1/(alpha-1))) * sum_k |T_k| (|tau_k| - tau0)_+^alpha'
//! ```
//!
//! with `1/alpha + 1/alpha' = 1`. Its gradient is the area-weighted rate of
//! strain predicted by the constitutive law, and its Hessian is block diagonal
//! with one symmetric 2x2 block per triangle. Blocks inside the yield surface
//! (`|tau_k| <= tau0`) have zero gradient and a zero Hessian.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::DiscreteOperators;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error(
        "power-law exponent alpha = {0} is not supported: need 1 < alpha <= 2 \
         (shear-thickening fluids with alpha > 2 are excluded)"
    )]
    Exponent(f64),
    #[error("consistency kappa = {0} must be positive")]
    Consistency(f64),
    #[error("yield stress tau0 = {0} must be non-negative")]
    YieldStress(f64),
}

/// Herschel-Bulkley parameters. `alpha = 2` is the Bingham model with plastic
/// viscosity `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct FluidParams {
    alpha: f64,
    kappa: f64,
    tau0: f64,
    /// `kappa^(1/(alpha-1))`
    kappa_pow: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    kappa: f64,
    tau0: f64,
}

impl TryFrom<RawParams> for FluidParams {
    type Error = ParamsError;

    fn try_from(raw: RawParams) -> Result<Self, ParamsError> {
        Self::new(raw.alpha, raw.kappa, raw.tau0)
    }
}

impl From<FluidParams> for RawParams {
    fn from(p: FluidParams) -> Self {
        Self {
            alpha: p.alpha,
            kappa: p.kappa,
            tau0: p.tau0,
        }
    }
}

impl FluidParams {
    pub fn new(alpha: f64, kappa: f64, tau0: f64) -> Result<Self, ParamsError> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(ParamsError::Exponent(alpha));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(ParamsError::Consistency(kappa));
        }
        if !(tau0 >= 0.0 && tau0.is_finite()) {
            return Err(ParamsError::YieldStress(tau0));
        }
        Ok(Self {
            alpha,
            kappa,
            tau0,
            kappa_pow: kappa.powf(1.0 / (alpha - 1.0)),
        })
    }

    /// Bingham fluid with plastic viscosity `mu`.
    pub fn bingham(mu: f64, tau0: f64) -> Result<Self, ParamsError> {
        Self::new(2.0, mu, tau0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Conjugate exponent `alpha / (alpha - 1)`.
    pub fn alpha_conj(&self) -> f64 {
        self.alpha / (self.alpha - 1.0)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    /// Rate of strain of a single stress vector under the constitutive law,
    /// `kappa^(-1/(alpha-1)) (|tau| - tau0)_+^(1/(alpha-1)) tau / |tau|`.
    pub fn strain_rate(&self, tau: [f64; 2]) -> [f64; 2] {
        let norm = tau[0].hypot(tau[1]);
        let excess = norm - self.tau0;
        if excess <= 0.0 {
            return [0.0, 0.0];
        }
        let scale = excess.powf(1.0 / (self.alpha - 1.0)) / (self.kappa_pow * norm);
        [scale * tau[0], scale * tau[1]]
    }
}

/// One symmetric 2x2 Hessian block per triangle, stored as `[h11, h12, h22]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    pub blocks: Vec<[f64; 3]>,
}

impl HessianBlocks {
    pub fn zeros(n_blocks: usize) -> Self {
        Self {
            blocks: vec![[0.0; 3]; n_blocks],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block-diagonal product `H v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), 2 * self.blocks.len());
        assert_eq!(out.len(), v.len());
        for ((h, x), o) in self
            .blocks
            .iter()
            .zip(v.chunks_exact(2))
            .zip(out.chunks_exact_mut(2))
        {
            o[0] = h[0] * x[0] + h[1] * x[1];
            o[1] = h[1] * x[0] + h[2] * x[1];
        }
    }

    /// `v^T H v`
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), 2 * self.blocks.len());
        self.blocks
            .iter()
            .zip(v.chunks_exact(2))
            .map(|(h, x)| h[0] * x[0] * x[0] + 2.0 * h[1] * x[0] * x[1] + h[2] * x[1] * x[1])
            .sum()
    }
}

/// `J(tau)`. Summation runs in triangle order so results are reproducible.
pub fn objective(params: &FluidParams, ops: &DiscreteOperators, tau: &[f64]) -> f64 {
    assert_eq!(tau.len(), ops.n_stress());
    let p = params.alpha_conj();
    let sum: f64 = tau
        .chunks_exact(2)
        .enumerate()
        .map(|(k, b)| {
            let excess = b[0].hypot(b[1]) - params.tau0;
            if excess > 0.0 {
                ops.area(k) * excess.powf(p)
            } else {
                0.0
            }
        })
        .sum();
    sum / (p * params.kappa_pow)
}

/// `grad J(tau)`, length `2 n_T`.
pub fn gradient(params: &FluidParams, ops: &DiscreteOperators, tau: &[f64]) -> Vec<f64> {
    assert_eq!(tau.len(), ops.n_stress());
    let mut grad = vec![0.0; tau.len()];
    for (k, (b, g)) in tau
        .chunks_exact(2)
        .zip(grad.chunks_exact_mut(2))
        .enumerate()
    {
        let rate = params.strain_rate([b[0], b[1]]);
        let area = ops.area(k);
        g[0] = area * rate[0];
        g[1] = area * rate[1];
    }
    grad
}

/// Hessian blocks of `J` at `tau`. Blocks with `|tau_k| <= tau0` are zero.
pub fn hessian(params: &FluidParams, ops: &DiscreteOperators, tau: &[f64]) -> HessianBlocks {
    assert_eq!(tau.len(), ops.n_stress());
    let am1 = params.alpha - 1.0;
    let blocks = tau
        .chunks_exact(2)
        .enumerate()
        .map(|(k, b)| {
            let (t1, t2) = (b[0], b[1]);
            let norm = t1.hypot(t2);
            let excess = norm - params.tau0;
            if excess <= 0.0 {
                return [0.0; 3];
            }
            let scale = ops.area(k) / (params.kappa_pow * am1) * excess.powf(1.0 / am1 - 1.0)
                / (norm * norm * norm);
            let h11 = am1 * t2 * t2 * excess + t1 * t1 * norm;
            let h12 = -t1 * t2 * (am1 * excess - norm);
            let h22 = am1 * t1 * t1 * excess + t2 * t2 * norm;
            [scale * h11, scale * h12, scale * h22]
        })
        .collect();
    HessianBlocks { blocks }
}

/// `||grad J(tau) - D^T y||_inf`
pub fn kkt_residual(params: &FluidParams, ops: &DiscreteOperators, tau: &[f64], y: &[f64]) -> f64 {
    let grad = gradient(params, ops, tau);
    kkt_residual_from_gradient(ops, &grad, y)
}

pub(crate) fn kkt_residual_from_gradient(ops: &DiscreteOperators, grad: &[f64], y: &[f64]) -> f64 {
    let dty = ops.apply_dt(y);
    grad.iter()
        .zip(&dty)
        .map(|(g, d)| (g - d).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Triangulation;

    /// Single reference triangle (area 0.5), all nodes Dirichlet.
    fn one_triangle() -> DiscreteOperators {
        let mesh = Triangulation::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![true; 3],
        )
        .unwrap();
        DiscreteOperators::assemble(&mesh, 1.0).unwrap()
    }

    #[test]
    fn rejects_out_of_range_params() {
        assert!(matches!(
            FluidParams::new(2.5, 1.0, 0.1),
            Err(ParamsError::Exponent(_))
        ));
        assert!(FluidParams::new(2.5, 1.0, 0.1)
            .unwrap_err()
            .to_string()
            .contains("alpha <= 2"));
        assert!(FluidParams::new(1.0, 1.0, 0.1).is_err());
        assert!(FluidParams::new(2.0, 0.0, 0.1).is_err());
        assert!(FluidParams::new(2.0, 1.0, -0.1).is_err());
        assert!(FluidParams::new(f64::NAN, 1.0, 0.1).is_err());
    }

    #[test]
    fn conjugate_exponent() {
        for alpha in [1.25, 1.5, 1.75, 2.0] {
            let p = FluidParams::new(alpha, 1.0, 0.0).unwrap();
            assert!((1.0 / alpha + 1.0 / p.alpha_conj() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn params_serde_validates() {
        let p: FluidParams =
            serde_json::from_str(r#"{"alpha":1.5,"kappa":1.0,"tau0":0.2}"#).unwrap();
        assert_eq!(p.alpha(), 1.5);
        assert!(
            serde_json::from_str::<FluidParams>(r#"{"alpha":3.0,"kappa":1.0,"tau0":0.2}"#).is_err()
        );
    }

    #[test]
    fn hand_evaluated_single_triangle() {
        let ops = one_triangle();
        let params = FluidParams::new(2.0, 1.0, 0.2).unwrap();
        let tau = [1.0, 0.0];
        assert!((objective(&params, &ops, &tau) - 0.16).abs() < 1e-15);
        let g = gradient(&params, &ops, &tau);
        assert!((g[0] - 0.4).abs() < 1e-15 && g[1] == 0.0);
        let h = hessian(&params, &ops, &tau);
        let expected = [0.5, 0.0, 0.4];
        for (a, b) in h.blocks[0].iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{:?}", h.blocks[0]);
        }
    }

    #[test]
    fn unyielded_blocks_vanish() {
        let ops = one_triangle();
        let params = FluidParams::new(1.5, 1.0, 0.5).unwrap();
        for tau in [[0.0, 0.0], [0.3, -0.2], [0.5, 0.0]] {
            assert_eq!(objective(&params, &ops, &tau), 0.0);
            assert_eq!(gradient(&params, &ops, &tau), vec![0.0, 0.0]);
            assert_eq!(hessian(&params, &ops, &tau).blocks[0], [0.0; 3]);
        }
        let zero_stress = FluidParams::new(2.0, 1.0, 0.0).unwrap();
        assert_eq!(gradient(&zero_stress, &ops, &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn quadratic_limit() {
        let ops = one_triangle();
        let params = FluidParams::new(2.0, 1.0, 0.0).unwrap();
        let tau = [0.7, -1.3];
        let expected = 0.5 * 0.5 * (0.49 + 1.69);
        assert!((objective(&params, &ops, &tau) - expected).abs() < 1e-14);
    }

    #[test]
    fn hessian_apply_matches_dense() {
        let h = HessianBlocks {
            blocks: vec![[1.0, 2.0, 3.0], [0.5, -0.25, 4.0]],
        };
        let v = [1.0, -1.0, 2.0, 0.5];
        // dense block-diagonal matrix
        let dense = [
            [1.0, 2.0, 0.0, 0.0],
            [2.0, 3.0, 0.0, 0.0],
            [0.0, 0.0, 0.5, -0.25],
            [0.0, 0.0, -0.25, 4.0],
        ];
        let expected: Vec<f64> = dense
            .iter()
            .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        assert_eq!(h.apply(&v), expected);
        let quad: f64 = v.iter().zip(&expected).map(|(a, b)| a * b).sum();
        assert!((h.quadratic_form(&v) - quad).abs() < 1e-14);
        assert!(HessianBlocks::zeros(2).apply(&v).iter().all(|&x| x == 0.0));
        assert!(h.apply(&[0.0; 4]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn kkt_residual_vanishes_inside_yield_surface() {
        let ops = one_triangle();
        let params = FluidParams::new(2.0, 1.0, 1.0).unwrap();
        assert_eq!(kkt_residual(&params, &ops, &[0.2, 0.3], &[]), 0.0);
    }
}
