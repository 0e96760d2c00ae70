//! Picard iteration for `H = -0.1 u + 1`, where the solution is an expected
//! discounted exit time. Prints the residual history and a grid refinement.

use std::sync::Arc;

use halfline_hjb::diffusion::{simulate_paths, DiffusionSpec, McParams};
use halfline_hjb::fixedpoint::{picard_solve, verify_residual, SemilinearProblem, SolveConfig};
use halfline_hjb::grid::Grid2D;
use halfline_hjb::hamiltonian::FnHamiltonian;
use halfline_hjb::numerics::mean_stderr;

fn main() -> halfline_hjb::Result<()> {
    let problem = SemilinearProblem::new(
        DiffusionSpec::constant(1.0),
        Arc::new(FnHamiltonian(|_, u: f64, _, _| -0.1 * u + 1.0)),
        |_, _| 0.0,
    );
    for n in [100, 200, 400] {
        let grid = Grid2D::new(8.0, n, 1.0, n)?;
        let (u, _, report) = picard_solve(&problem, &grid, &SolveConfig::default())?;
        println!(
            "n = {n}: kappa {:.2}, {} iterations, u(1, 0) = {:.7}, residual {:.2e}",
            report.kappa,
            report.iterations,
            u.interp(1.0, 0.0),
            verify_residual(&u, &problem, &grid)?
        );
        if n == 100 {
            for (k, r) in report.residuals.iter().enumerate() {
                println!("    iteration {k}: {r:.3e}");
            }
        }
    }
    let batch = simulate_paths(&DiffusionSpec::constant(1.0), 1.0, 0.0, 1.0, &McParams::new(1e-3, 50_000, 8))?;
    let samples: Vec<f64> = batch.absorption_times.iter().map(|&tau| (1.0 - (-0.1 * tau).exp()) / 0.1).collect();
    let (m, se) = mean_stderr(&samples);
    println!("Monte Carlo: {m:.6} ± {se:.1e}");
    Ok(())
}
