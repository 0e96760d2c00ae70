//! Uniform space-time grids on `[0, x_max] x [0, T]`, grid functions and the
//! exponentially time-weighted norms used throughout the fixed-point solver.
//!
//! Values are stored time-major: row `j` holds `u(x_0..=x_n, t_j)`.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    x_max: f64,
    n_x: usize,
    t_horizon: f64,
    n_t: usize,
}

impl Grid2D {
    pub fn new(x_max: f64, n_x: usize, t_horizon: f64, n_t: usize) -> Result<Self> {
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::InvalidGrid(format!("x_max must be positive, got {x_max}")));
        }
        if !(t_horizon.is_finite() && t_horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("T must be positive, got {t_horizon}")));
        }
        if n_x < 2 {
            return Err(Error::InvalidGrid(format!("n_x must be >= 2, got {n_x}")));
        }
        if n_t < 1 {
            return Err(Error::InvalidGrid("n_t must be >= 1".into()));
        }
        Ok(Self { x_max, n_x, t_horizon, n_t })
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn dx(&self) -> f64 {
        self.x_max / self.n_x as f64
    }
    pub fn dt(&self) -> f64 {
        self.t_horizon / self.n_t as f64
    }

    /// Node `x_i`; the last node is exactly `x_max`.
    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_x {
            self.x_max
        } else {
            i as f64 * self.x_max / self.n_x as f64
        }
    }

    /// Node `t_j`; the last node is exactly `T`.
    pub fn t(&self, j: usize) -> f64 {
        if j == self.n_t {
            self.t_horizon
        } else {
            j as f64 * self.t_horizon / self.n_t as f64
        }
    }

    /// `(n_x + 1, n_t + 1)`
    pub fn shape(&self) -> (usize, usize) {
        (self.n_x + 1, self.n_t + 1)
    }

    pub fn len(&self) -> usize {
        (self.n_x + 1) * (self.n_t + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest_x(&self, x: f64) -> usize {
        nearest(x, self.dx(), self.n_x)
    }

    pub fn nearest_t(&self, t: f64) -> usize {
        nearest(t, self.dt(), self.n_t)
    }
}

fn nearest(v: f64, h: f64, n: usize) -> usize {
    if !(v > 0.0) {
        return 0;
    }
    ((v / h).round() as usize).min(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid2D,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..=grid.n_t {
            let t = grid.t(j);
            for i in 0..=grid.n_x {
                values.push(f(grid.x(i), t));
            }
        }
        Self { grid, values }
    }

    /// Wraps time-major values; fails when the length does not match the grid.
    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.shape(), got: (values.len(), 1) });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.grid.n_x + 1) + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.grid.n_x + 1;
        self.values[j * n + i] = v;
    }

    /// Spatial slice at time index `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.grid.n_x + 1;
        &self.values[j * n..(j + 1) * n]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.grid.n_x + 1;
        &mut self.values[j * n..(j + 1) * n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(u, v)| a * u + b * v).collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch { expected: self.grid.shape(), got: other.grid.shape() });
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation in `x` at time node `j`; `x` is clamped to the grid.
    pub fn interp_x(&self, x: f64, j: usize) -> f64 {
        let g = &self.grid;
        let s = (x / g.dx()).clamp(0.0, g.n_x as f64);
        let i = (s.floor() as usize).min(g.n_x - 1);
        let w = s - i as f64;
        let row = self.row(j);
        (1.0 - w) * row[i] + w * row[i + 1]
    }

    /// Bilinear interpolation, clamped to the grid rectangle.
    pub fn interp(&self, x: f64, t: f64) -> f64 {
        let g = &self.grid;
        let s = (t / g.dt()).clamp(0.0, g.n_t as f64);
        let j = (s.floor() as usize).min(g.n_t.saturating_sub(1));
        let w = (s - j as f64).clamp(0.0, 1.0);
        (1.0 - w) * self.interp_x(x, j) + w * self.interp_x(x, (j + 1).min(g.n_t))
    }

    /// Writes the `x,t,u` CSV: outer loop over `t`, inner over `x`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_csv_string().as_bytes())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 60 + 8);
        s.push_str("x,t,u\n");
        for j in 0..=self.grid.n_t {
            let t = self.grid.t(j);
            for i in 0..=self.grid.n_x {
                let _ = writeln!(s, "{},{},{}", fmt_sig12(self.grid.x(i)), fmt_sig12(t), fmt_sig12(self.get(i, j)));
            }
        }
        s
    }
}

/// Fixed 12-significant-digit scientific notation.
pub fn fmt_sig12(v: f64) -> String {
    // normalise -0 so goldens do not depend on the sign of zero
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

/// Central differences inside, second-order one-sided stencils at `x_0` and `x_max`.
pub fn fd_derivative_x(u: &GridFunction) -> GridFunction {
    let g = *u.grid();
    let mut out = GridFunction::zeros(g);
    let h = g.dx();
    for j in 0..=g.n_t {
        let row = u.row(j);
        let d = out.row_mut(j);
        derivative_row(row, h, d);
    }
    out
}

pub(crate) fn derivative_row(row: &[f64], h: f64, d: &mut [f64]) {
    let n = row.len() - 1;
    if n == 1 {
        d[0] = (row[1] - row[0]) / h;
        d[1] = d[0];
        return;
    }
    d[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * h);
    for i in 1..n {
        d[i] = (row[i + 1] - row[i - 1]) / (2.0 * h);
    }
    d[n] = (3.0 * row[n] - 4.0 * row[n - 1] + row[n - 2]) / (2.0 * h);
}

/// `sup e^{-kappa (T - t)} |u| + sup e^{-kappa (T - t)} |D_x u|` over grid nodes.
pub fn weighted_norm(u: &GridFunction, kappa: f64) -> f64 {
    let du = fd_derivative_x(u);
    weighted_sup(u, kappa) + weighted_sup(&du, kappa)
}

/// `sup e^{-kappa (T - t)} |u|` over grid nodes.
pub fn weighted_sup(u: &GridFunction, kappa: f64) -> f64 {
    let g = u.grid();
    (0..=g.n_t)
        .map(|j| {
            let w = (-kappa * (g.t_horizon - g.t(j))).exp();
            w * u.row(j).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max)
}

pub fn sup_norm(u: &GridFunction) -> f64 {
    u.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(x_max: f64, n_x: usize) -> Grid2D {
        Grid2D::new(x_max, n_x, 1.0, 8).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid2D::new(0.0, 10, 1.0, 1).is_err());
        assert!(Grid2D::new(1.0, 1, 1.0, 1).is_err());
        assert!(Grid2D::new(1.0, 10, -1.0, 1).is_err());
        assert!(Grid2D::new(1.0, 10, 1.0, 0).is_err());
    }

    #[test]
    fn end_nodes_are_exact() {
        let g = Grid2D::new(0.3, 7, 0.7, 3).unwrap();
        assert_eq!(g.x(0), 0.0);
        assert_eq!(g.x(7), 0.3);
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(3), 0.7);
    }

    #[test]
    fn derivative_of_zero_linear_and_quadratic() {
        let g = grid(1.0, 10);
        let z = fd_derivative_x(&GridFunction::zeros(g));
        assert!(z.values().iter().all(|&v| v == 0.0));

        let d = fd_derivative_x(&GridFunction::from_fn(g, |x, _| x));
        for v in d.values() {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }

        let d = fd_derivative_x(&GridFunction::from_fn(g, |x, _| x * x));
        assert!((d.get(5, 0) - 1.0).abs() < 1e-12);
        // one-sided stencils are exact on quadratics too
        assert!(d.get(0, 0).abs() < 1e-12);
        assert!((d.get(10, 3) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn norm_examples() {
        let g = grid(1.0, 10);
        assert_eq!(weighted_norm(&GridFunction::zeros(g), 3.0), 0.0);
        assert_eq!(weighted_norm(&GridFunction::from_fn(g, |_, _| 1.0), 0.0), 1.0);
        let lin = GridFunction::from_fn(g, |x, _| x);
        assert!((weighted_norm(&lin, 0.0) - 2.0).abs() < 1e-12);

        assert_eq!(sup_norm(&GridFunction::zeros(g)), 0.0);
        assert_eq!(sup_norm(&GridFunction::from_fn(g, |_, _| -3.0)), 3.0);
        assert_eq!(sup_norm(&GridFunction::from_fn(grid(2.0, 10), |x, _| x)), 2.0);
    }

    #[test]
    fn csv_layout() {
        let g = Grid2D::new(1.0, 2, 1.0, 1).unwrap();
        let u = GridFunction::from_fn(g, |x, t| x + 10.0 * t);
        let s = u.to_csv_string();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "x,t,u");
        assert_eq!(lines.len(), 1 + 6);
        assert_eq!(lines[2], "5.00000000000e-1,0.00000000000e0,5.00000000000e-1");
        assert!(lines[4].starts_with("0.00000000000e0,1.00000000000e0,"));
        assert!(!s.contains('\r'));
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64, f64)> {
        let n = 6 * 4;
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
            -5.0..5.0f64,
            -5.0..5.0f64,
            0.0..20.0f64,
        )
    }

    proptest! {
        #[test]
        fn weighted_norm_is_a_norm((a, b, s, _t, kappa) in arb_pair()) {
            let g = Grid2D::new(2.0, 5, 1.0, 3).unwrap();
            let u = GridFunction::from_values(g, a).unwrap();
            let v = GridFunction::from_values(g, b).unwrap();
            let nu = weighted_norm(&u, kappa);
            let nv = weighted_norm(&v, kappa);
            let scaled = weighted_norm(&u.map(|x| s * x), kappa);
            prop_assert!((scaled - s.abs() * nu).abs() <= 1e-12 * (1.0 + scaled));
            let sum = weighted_norm(&u.lin_comb(1.0, &v, 1.0).unwrap(), kappa);
            prop_assert!(sum <= nu + nv + 1e-12 * (1.0 + nu + nv));
        }

        #[test]
        fn weighted_norm_nonincreasing_in_kappa((a, _b, _s, _t, kappa) in arb_pair(), extra in 0.0..10.0f64) {
            let g = Grid2D::new(2.0, 5, 1.0, 3).unwrap();
            let u = GridFunction::from_values(g, a).unwrap();
            prop_assert!(weighted_norm(&u, kappa + extra) <= weighted_norm(&u, kappa) + 1e-15);
        }

        #[test]
        fn derivative_is_linear((a, b, s, t, _k) in arb_pair()) {
            let g = Grid2D::new(2.0, 5, 1.0, 3).unwrap();
            let u = GridFunction::from_values(g, a).unwrap();
            let v = GridFunction::from_values(g, b).unwrap();
            let lhs = fd_derivative_x(&u.lin_comb(s, &v, t).unwrap());
            let rhs = fd_derivative_x(&u).lin_comb(s, &fd_derivative_x(&v), t).unwrap();
            for (l, r) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((l - r).abs() <= 1e-10 * (1.0 + l.abs()));
            }
        }
    }
}
