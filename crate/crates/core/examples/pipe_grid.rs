//! Runs both solvers over the cylindrical-pipe parameter grid and prints
//! errors and iteration counts.

use viscoduct::*;

fn main() {
    for alpha in [2.0, 1.75, 1.5] {
        for tau0 in [0.1, 0.2] {
            for n in [13, 19, 26] {
                let mesh = generate_disk_mesh(n);
                let ops = DiscreteOperators::assemble(&mesh, 1.0).unwrap();
                let params = FluidParams::new(alpha, 1.0, tau0).unwrap();
                let sol = PipeSolution::new(params, 1.0).unwrap();
                let trs = solve_trs(
                    &params,
                    &ops,
                    &StressField::zeros(ops.n_stress()),
                    &TrsConfig::default(),
                )
                .unwrap();
                let alg2 = solve_alg2(&params, &ops, &Alg2Config::default()).unwrap();
                println!(
                    "alpha={alpha} tau0={tau0} nN={:5} | TRS err={:.2e} it={:3} kkt={:.1e} {:?} t={:.2}s | ALG2 err={:.2e} it={:4} kkt={:.1e} {:?} t={:.2}s",
                    mesh.n_nodes(),
                    relative_error(&trs.y, &mesh, &sol).unwrap(),
                    trs.report.iterations,
                    trs.report.final_kkt_residual,
                    trs.report.status,
                    trs.report.wall_time,
                    relative_error(&alg2.y, &mesh, &sol).unwrap(),
                    alg2.report.iterations,
                    alg2.report.final_kkt_residual,
                    alg2.report.status,
                    alg2.report.wall_time,
                );
            }
        }
    }
}
