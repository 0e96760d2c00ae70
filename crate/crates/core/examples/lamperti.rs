//! Reduce a state-dependent volatility to unit diffusion and check that the
//! exit time is unchanged by the change of variables.

use halfline_hjb::diffusion::{expected_stopped_time_mc, lamperti_transform, DiffusionSpec, McParams};

fn main() -> halfline_hjb::Result<()> {
    let spec = DiffusionSpec::homogeneous(|x| 1.0 + 0.5 * x.tanh(), 1.0, 1.5);
    let map = lamperti_transform(&spec, 8.0)?;
    let mc = McParams::new(2e-3, 20_000, 7);
    for x in [0.5, 1.0, 2.0] {
        let y = map.zeta(x);
        let (direct, se1) = expected_stopped_time_mc(&spec, x, 0.0, 1.0, &mc)?;
        let (unit, se2) = expected_stopped_time_mc(&map.unit, y, 0.0, 1.0, &mc)?;
        println!("x = {x}: zeta = {y:.5}, zeta_inv(zeta) = {:.5}", map.zeta_inv(y));
        println!("    E[tau ^ T] original {direct:.5} ± {se1:.1e}, unit diffusion {unit:.5} ± {se2:.1e}");
    }
    Ok(())
}
