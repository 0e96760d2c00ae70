//! Measured contraction of the fixed-point map in the weighted norm as the
//! decay rate grows, and the rate picked automatically.

use std::sync::Arc;

use halfline_hjb::diffusion::DiffusionSpec;
use halfline_hjb::fixedpoint::{choose_kappa, estimate_contraction, SemilinearProblem};
use halfline_hjb::grid::Grid2D;
use halfline_hjb::hamiltonian::FnHamiltonian;

fn main() -> halfline_hjb::Result<()> {
    let grid = Grid2D::new(8.0, 200, 1.0, 100)?;
    let problem = SemilinearProblem::new(
        DiffusionSpec::constant(1.0),
        Arc::new(FnHamiltonian(|p: f64, u: f64, _, _| p.abs().min(3.0) - 0.5 * u)),
        |_, _| 0.0,
    );
    for kappa in [1.0, 4.0, 16.0, 64.0, 256.0] {
        let est = estimate_contraction(&problem, &grid, kappa, 10, 1, 1.0)?;
        println!("kappa {kappa:>6}: max ratio {:.4}", est.max_ratio);
    }
    println!("auto kappa = {}", choose_kappa(&problem, &grid)?);
    Ok(())
}
