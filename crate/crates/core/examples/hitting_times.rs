//! Expected stopped exit time of Brownian motion from the half-line:
//! closed form against simulation, with and without the bridge correction.

use halfline_hjb::diffusion::{bm_stopped_time_analytic, expected_stopped_time_mc, DiffusionSpec, McParams};

fn main() -> halfline_hjb::Result<()> {
    let spec = DiffusionSpec::constant(1.0);
    println!("{:>5} {:>10} {:>20} {:>20}", "x", "exact", "bridge", "plain");
    for x in [0.25, 0.5, 1.0, 2.0] {
        let exact = bm_stopped_time_analytic(x, 0.0, 1.0)?;
        let mc = McParams::new(1e-2, 20_000, 42);
        let (b, bse) = expected_stopped_time_mc(&spec, x, 0.0, 1.0, &mc)?;
        let (p, pse) = expected_stopped_time_mc(&spec, x, 0.0, 1.0, &mc.without_bridge())?;
        println!("{x:>5} {exact:>10.5} {b:>11.5} ± {bse:.1e} {p:>11.5} ± {pse:.1e}");
    }
    Ok(())
}
