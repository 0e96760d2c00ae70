//! Crank-Nicolson solve of the linear problem with a unit source and zero
//! boundary data, compared with the Feynman-Kac estimate.

use halfline_hjb::diffusion::{DiffusionSpec, McParams};
use halfline_hjb::grid::Grid2D;
use halfline_hjb::linear_pde::{default_x_max, evaluate_feynman_kac, solve_fd, FdScheme, LinearProblem, LinearReport};

fn main() -> halfline_hjb::Result<()> {
    let spec = DiffusionSpec::homogeneous(|x| 1.0 + 0.5 * x.tanh(), 1.0, 1.5);
    let x_max = default_x_max(2.0, spec.sigma_cap(), 1.0);
    let grid = Grid2D::new(x_max, 400, 1.0, 200)?;
    let problem = LinearProblem::new(spec.clone(), |_, _| 1.0, |_, _| 0.0);
    let u = solve_fd(&problem, &grid, FdScheme::default())?;
    let report = LinearReport::new(&grid, FdScheme::default(), 2.0, spec.sigma_cap());
    println!("x_max = {x_max:.3}, truncation bound {:.2e}", report.truncation_bound);
    let mc = McParams::new(2e-3, 20_000, 3);
    for x in [0.5, 1.0, 2.0] {
        let (m, se) = evaluate_feynman_kac(&problem, x, 0.0, 1.0, &mc)?;
        println!("u({x}, 0) = {:.6}   Monte Carlo {m:.6} ± {se:.1e}", u.interp(x, 0.0));
    }
    let mut csv = Vec::new();
    u.write_csv(&mut csv)?;
    println!("{} CSV rows", csv.iter().filter(|&&b| b == b'\n').count() - 1);
    Ok(())
}
