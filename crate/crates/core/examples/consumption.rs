//! Consumption and investment with a stochastic factor absorbed at a barrier:
//! solve for the transformed value, extract the feedback policy, simulate.

use halfline_hjb::consumption::{extract_policy, simulate_consumption, solve_g, value_function, MarketModel};
use halfline_hjb::diffusion::McParams;
use halfline_hjb::fixedpoint::SolveConfig;
use halfline_hjb::grid::Grid2D;

fn main() -> halfline_hjb::Result<()> {
    let model = MarketModel::demo();
    let grid = Grid2D::new(3.0, 120, 1.0, 100)?;
    let sol = solve_g(&model, &grid, &SolveConfig::default())?;
    println!("constants {:?}", sol.constants);
    println!("consumption bounds {:?} after {} widenings, c range {:?}", sol.bounds, sol.widenings, sol.c_range());
    let policy = extract_policy(&model, &sol.g)?;
    let mc = McParams::new(5e-3, 10_000, 2);
    for y in [0.3, 0.6, 1.5] {
        let v = value_function(&model, &sol.g, 1.0, y, 0.0)?;
        let (m, se) = simulate_consumption(&model, &policy, 1.0, y, 0.0, &mc)?;
        let (g, _) = simulate_consumption(&model, &policy.scale_consumption(1.5), 1.0, y, 0.0, &mc)?;
        let i = grid.nearest_x(y);
        println!(
            "y = {y}: V = {v:.5}, simulated {m:.5} ± {se:.1e}, 1.5x consumption {g:.5}, pi* {:.3}, c* {:.3}",
            policy.pi.get(i, 0),
            policy.c.get(i, 0)
        );
    }
    Ok(())
}
