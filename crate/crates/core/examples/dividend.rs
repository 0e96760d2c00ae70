//! Optimal dividend rate for a Brownian surplus with square-root utility,
//! checked by simulating the extracted policy against constant rates.

use halfline_hjb::diffusion::McParams;
use halfline_hjb::dividend::{self, ConstantPolicy, DividendModel};
use halfline_hjb::fixedpoint::SolveConfig;
use halfline_hjb::grid::Grid2D;

fn main() -> halfline_hjb::Result<()> {
    let model = DividendModel::demo();
    let grid = Grid2D::new(10.0, 200, 1.0, 100)?;
    let (v, policy, report) = dividend::solve(&model, &grid, &SolveConfig::default())?;
    println!("kappa {:.3}, {} iterations, converged {}", report.kappa, report.iterations, report.converged);
    let mc = McParams::new(5e-3, 10_000, 1);
    for x in [0.5, 1.0, 2.0] {
        let (m, se) = dividend::simulate_policy(&model, &policy, x, 0.0, &mc)?;
        println!(
            "x = {x}: V = {:.5}, policy {m:.5} ± {se:.1e}, rate at t=0 {:.3}",
            v.interp(x, 0.0),
            policy.lookup(x, 0.0)
        );
        for c in [0.0, 1.0, 2.0] {
            let (mc_c, _) = dividend::simulate_policy(&model, &ConstantPolicy(c), x, 0.0, &mc)?;
            println!("    constant rate {c}: {mc_c:.5}");
        }
    }
    Ok(())
}
