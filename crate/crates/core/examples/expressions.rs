//! Coefficient expressions as used in run configs.

use halfline_hjb::expr::{parse_expr, Env};

fn main() {
    for text in ["1 + 2*x", "max(0, min(c, 2))^0.5", "-2^2", "exp(-x^2) * (1 - t)", "log(x - 1)", "1 +* 2", "foo(x)"] {
        match parse_expr(text) {
            Ok(e) => {
                let env = Env { x: Some(0.5), t: Some(0.25), c: Some(9.0), ..Env::default() };
                match e.eval(&env) {
                    Ok(v) => println!("{text:<24} -> {e} = {v}"),
                    Err(err) => println!("{text:<24} -> {e}: {err}"),
                }
            }
            Err(err) => println!("{text:<24} -> {err}"),
        }
    }
}
