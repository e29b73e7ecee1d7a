mod common;

use common::*;
use proptest::prelude::*;
use viscoduct::{
    generate_disk_mesh, shrink_magnitude, solve_alg2, solve_trs, Alg2Config, DiscreteOperators,
    FluidParams, StressField, TrsConfig,
};

#[test]
fn quadratic_limit_reaches_poisson_velocity() {
    let mesh = square_mesh(5, on_boundary);
    let ops = DiscreteOperators::assemble(&mesh, 1.0).unwrap();
    let params = FluidParams::new(2.0, 1.0, 0.0).unwrap();
    let cfg = Alg2Config {
        abstol: 1e-9,
        reltol: 1e-9,
        ..Alg2Config::default()
    };
    let sol = solve_alg2(&params, &ops, &cfg).unwrap();
    assert!(sol.report.converged());
    let poisson = dense(ops.stiffness())
        .cholesky()
        .unwrap()
        .solve(&vector(ops.load()));
    assert!(max_abs_diff(&sol.y, poisson.as_slice()) < 1e-6);
}

#[test]
fn agrees_with_trs_on_bingham_disk() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(6), 1.0).unwrap();
    let params = FluidParams::bingham(1.0, 0.1).unwrap();
    let alg2 = solve_alg2(&params, &ops, &Alg2Config::default()).unwrap();
    let trs = solve_trs(
        &params,
        &ops,
        &StressField::zeros(ops.n_stress()),
        &TrsConfig::default(),
    )
    .unwrap();
    assert!(alg2.report.converged() && trs.report.converged());
    let scale = norm_inf(&trs.y);
    assert!(max_abs_diff(&alg2.y, &trs.y) < 1e-2 * scale);
}

#[test]
fn yield_stress_slows_the_flow() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(5), 1.0).unwrap();
    let mut peaks = Vec::new();
    for tau0 in [0.0, 0.1, 0.2, 0.3] {
        let params = FluidParams::new(1.5, 1.0, tau0).unwrap();
        let sol = solve_alg2(&params, &ops, &Alg2Config::default()).unwrap();
        assert!(sol.report.converged());
        assert!(sol.y.iter().all(|&v| v >= -1e-8));
        peaks.push(norm_inf(&sol.y));
    }
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
}

#[test]
fn auxiliary_strain_vanishes_in_the_plug() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(5), 1.0).unwrap();
    let params = FluidParams::bingham(1.0, 0.2).unwrap();
    let sol = solve_alg2(&params, &ops, &Alg2Config::default()).unwrap();
    let mags = sol.tau.magnitudes();
    for (k, q) in sol.q.0.chunks_exact(2).enumerate() {
        if mags[k] < 0.2 - 1e-3 {
            assert_eq!(q, [0.0, 0.0]);
        }
    }
}

#[test]
fn invalid_config_is_rejected() {
    let ops = DiscreteOperators::assemble(&generate_disk_mesh(2), 1.0).unwrap();
    let params = FluidParams::bingham(1.0, 0.1).unwrap();
    let cfg = Alg2Config {
        r: 0.0,
        ..Alg2Config::default()
    };
    assert!(solve_alg2(&params, &ops, &cfg).is_err());
}

proptest! {
    #[test]
    fn shrink_is_monotone_and_bounded(
        alpha in 1.01f64..=2.0,
        kappa in 0.1f64..5.0,
        r in 0.5f64..50.0,
        tau0 in 0.0f64..1.0,
        w1 in 0.0f64..20.0,
        w2 in 0.0f64..20.0,
    ) {
        let params = FluidParams::new(alpha, kappa, tau0).unwrap();
        let cfg = Alg2Config { newton_abstol: 1e-14, newton_reltol: 1e-14, ..Alg2Config::default() };
        let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        let m_lo = shrink_magnitude(&params, r, lo, &cfg).unwrap();
        let m_hi = shrink_magnitude(&params, r, hi, &cfg).unwrap();
        prop_assert!(m_lo <= m_hi + 1e-12);
        prop_assert!(m_hi >= 0.0);
        prop_assert!(m_hi <= (hi - tau0).max(0.0) / r + 1e-12);
    }
}
