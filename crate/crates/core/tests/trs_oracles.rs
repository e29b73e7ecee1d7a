mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viscoduct::dual::{gradient, hessian, HessianBlocks};
use viscoduct::{
    cg_steihaug, generate_disk_mesh, solve_trs, CgExit, DiscreteOperators, FluidParams,
    SolveStatus, StressField, TrsConfig,
};

/// Dense solve of `[H D^T; D 0] [s; l] = [-g; 0]`.
fn dense_saddle_step(ops: &DiscreteOperators, grad: &[f64], hess: &HessianBlocks) -> Vec<f64> {
    let (m, n) = (ops.n_stress(), ops.n_free());
    let d = dense(ops.d());
    let mut kkt = DMatrix::zeros(m + n, m + n);
    for (k, [a, b, c]) in hess.blocks.iter().enumerate() {
        kkt[(2 * k, 2 * k)] = *a;
        kkt[(2 * k, 2 * k + 1)] = *b;
        kkt[(2 * k + 1, 2 * k)] = *b;
        kkt[(2 * k + 1, 2 * k + 1)] = *c;
    }
    kkt.view_mut((0, m), (m, n)).copy_from(&d.transpose());
    kkt.view_mut((m, 0), (n, m)).copy_from(&d);
    let mut rhs = DVector::zeros(m + n);
    for (i, g) in grad.iter().enumerate() {
        rhs[i] = -g;
    }
    let sol = kkt
        .lu()
        .solve(&rhs)
        .expect("saddle-point matrix is singular");
    sol.as_slice()[..m].to_vec()
}

fn random_stress(ops: &DiscreteOperators, seed: u64, scale: f64) -> StressField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StressField(
        (0..ops.n_stress())
            .map(|_| rng.random_range(-scale..scale))
            .collect(),
    )
}

fn tight() -> TrsConfig {
    TrsConfig {
        abstol: 1e-14,
        reltol: 1e-14,
        divtol: 1e-30,
        ..TrsConfig::default()
    }
}

#[test]
fn cg_matches_dense_saddle_point_solve_in_quadratic_case() {
    let mesh = square_mesh(2, on_left_side);
    assert!(mesh.n_triangles() <= 12);
    let ops = DiscreteOperators::assemble(&mesh, 1.0).unwrap();
    let params = FluidParams::new(2.0, 1.0, 0.0).unwrap();
    let tau = ops.project_feasible(&random_stress(&ops, 3, 1.0));
    let grad = gradient(&params, &ops, &tau);
    let hess = hessian(&params, &ops, &tau);
    let cg = cg_steihaug(&ops, &grad, &hess, 1e6, &tight());
    assert_eq!(cg.exit, CgExit::Converged);
    let expect = dense_saddle_step(&ops, &grad, &hess);
    assert!(max_abs_diff(&cg.step, &expect) < 1e-8);
}

#[test]
fn cg_matches_dense_saddle_point_solve_for_power_law() {
    let mesh = square_mesh(2, on_left_side);
    let ops = DiscreteOperators::assemble(&mesh, 1.0).unwrap();
    let params = FluidParams::new(1.5, 1.3, 0.1).unwrap();
    // keep every block yielded so the Hessian is definite
    let mut tau = random_stress(&ops, 5, 1.0);
    for b in tau.chunks_exact_mut(2) {
        b[0] += 2.0;
    }
    let grad = gradient(&params, &ops, &tau);
    let hess = hessian(&params, &ops, &tau);
    let cg = cg_steihaug(&ops, &grad, &hess, 1e6, &tight());
    assert_eq!(cg.exit, CgExit::Converged);
    let expect = dense_saddle_step(&ops, &grad, &hess);
    assert!(max_abs_diff(&cg.step, &expect) < 1e-8);
}

#[test]
fn flat_model_takes_the_curvature_exit() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(3), 1.0).unwrap();
    let grad: Vec<f64> = random_stress(&ops, 9, 1.0).into_inner();
    let hess = HessianBlocks::zeros(ops.n_triangles());
    let delta = 0.7;
    let cg = cg_steihaug(&ops, &grad, &hess, delta, &TrsConfig::default());
    assert_eq!(cg.exit, CgExit::Curvature);
    let step_norm = cg.step.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((step_norm - delta).abs() < 1e-12);
    let model: f64 = cg.step.iter().zip(&grad).map(|(s, g)| s * g).sum();
    assert!(model < 0.0);
    assert!(norm_inf(&ops.apply_d(&cg.step)) < 1e-10);
}

#[test]
fn zero_gradient_gives_zero_step() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(2), 1.0).unwrap();
    let grad = vec![0.0; ops.n_stress()];
    let hess = HessianBlocks::zeros(ops.n_triangles());
    let cg = cg_steihaug(&ops, &grad, &hess, 1.0, &TrsConfig::default());
    assert_eq!(cg.exit, CgExit::Converged);
    assert_eq!(cg.iterations, 0);
    assert!(cg.step.iter().all(|&v| v == 0.0));
}

#[test]
fn range_gradient_gives_zero_step() {
    // a gradient in range(D^T) has zero projection
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(3), 1.0).unwrap();
    let y: Vec<f64> = (0..ops.n_free()).map(|i| (i as f64).sin()).collect();
    let grad = ops.apply_dt(&y);
    let hess = HessianBlocks::zeros(ops.n_triangles());
    let cg = cg_steihaug(&ops, &grad, &hess, 1.0, &TrsConfig::default());
    assert!(cg.step.iter().all(|&v| v == 0.0));
}

#[test]
fn quadratic_limit_converges_in_one_iteration() {
    for mesh in [generate_disk_mesh(3), square_mesh(5, on_boundary)] {
        assert!(mesh.n_free() <= 50);
        let ops = DiscreteOperators::assemble(&mesh, 1.0).unwrap();
        let params = FluidParams::new(2.0, 1.0, 0.0).unwrap();
        let sol = solve_trs(
            &params,
            &ops,
            &StressField::zeros(ops.n_stress()),
            &TrsConfig::default(),
        )
        .unwrap();
        assert_eq!(sol.report.status, SolveStatus::Converged);
        assert_eq!(sol.report.iterations, 1);
        let k = dense(ops.stiffness());
        let poisson = k.cholesky().unwrap().solve(&vector(ops.load()));
        assert!(max_abs_diff(&sol.y, poisson.as_slice()) < 1e-8);
    }
}

#[test]
fn random_starts_keep_structure() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(5), 1.0).unwrap();
    let scale = 1.0 + norm_inf(ops.load());
    for (seed, alpha) in [(1, 2.0), (2, 1.75), (3, 1.5)] {
        let params = FluidParams::new(alpha, 1.0, 0.2).unwrap();
        let sol = solve_trs(
            &params,
            &ops,
            &random_stress(&ops, seed, 1.0),
            &TrsConfig::default(),
        )
        .unwrap();
        assert!(sol.report.converged());
        assert!(sol.report.final_kkt_residual <= 1e-4);
        assert!(sol
            .report
            .feasibility_history
            .iter()
            .all(|&r| r <= 1e-8 * scale));
        let accepted = sol.report.accepted_objectives();
        assert!(accepted.windows(2).all(|w| w[1] <= w[0]));
        for trace in &sol.cg_traces {
            assert!(trace.iterate_norms.windows(2).all(|w| w[1] > w[0]));
            assert!(trace.null_residuals.iter().all(|&r| r <= 1e-8));
        }
    }
}

#[test]
fn iteration_cap_is_reported() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(4), 1.0).unwrap();
    let params = FluidParams::new(1.5, 1.0, 0.2).unwrap();
    let cfg = TrsConfig {
        max_outer: 1,
        ..TrsConfig::default()
    };
    let sol = solve_trs(&params, &ops, &random_stress(&ops, 4, 1.0), &cfg).unwrap();
    assert_eq!(sol.report.status, SolveStatus::MaxIterations);
    assert_eq!(sol.report.iterations, 1);
}

#[test]
fn invalid_config_is_rejected() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(2), 1.0).unwrap();
    let params = FluidParams::new(2.0, 1.0, 0.1).unwrap();
    let cfg = TrsConfig {
        eta: 1.5,
        ..TrsConfig::default()
    };
    assert!(solve_trs(&params, &ops, &StressField::zeros(ops.n_stress()), &cfg).is_err());
}
