//! Linear Cauchy-Dirichlet problem
//! `D_t u + ½ sigma² D_x² u + b D_x u + f = 0` on `(0, x_max) x [0, T)`,
//! `u = beta` on `{x = 0} ∪ {t = T}`, solved backward in time with a
//! theta-scheme, plus the Feynman-Kac Monte Carlo estimator of the same
//! quantity.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{path_rng, run_path, validate_run, Coef, DiffusionSpec, McParams};
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid2D, GridFunction};
use crate::numerics::{mean_stderr, norm_cdf, solve_tridiagonal};

/// Condition imposed at the truncation level `x_max`.
#[derive(Clone)]
pub enum FarField {
    /// The equation holds at `x_max` with `D_x² u = 0`; linear functions
    /// pass through unchanged.
    ZeroCurvature,
    /// Known far-field values `u(x_max, t)`.
    Dirichlet(Coef),
}

impl std::fmt::Debug for FarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FarField::ZeroCurvature => f.write_str("ZeroCurvature"),
            FarField::Dirichlet(_) => f.write_str("Dirichlet(..)"),
        }
    }
}

#[derive(Clone)]
pub struct LinearProblem {
    pub spec: DiffusionSpec,
    pub source: Coef,
    pub boundary: Coef,
    pub farfield: FarField,
}

impl std::fmt::Debug for LinearProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearProblem")
            .field("spec", &self.spec)
            .field("farfield", &self.farfield)
            .finish_non_exhaustive()
    }
}

impl LinearProblem {
    pub fn new(
        spec: DiffusionSpec,
        source: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        boundary: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { spec, source: Arc::new(source), boundary: Arc::new(boundary), farfield: FarField::ZeroCurvature }
    }

    pub fn with_farfield(mut self, farfield: FarField) -> Self {
        self.farfield = farfield;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdScheme {
    /// 0 explicit, 1 implicit, 0.5 Crank-Nicolson.
    pub theta: f64,
    /// Fully implicit steps taken first from `t = T`.
    pub rannacher_steps: usize,
}

impl Default for FdScheme {
    fn default() -> Self {
        Self { theta: 0.5, rannacher_steps: 2 }
    }
}

impl FdScheme {
    pub fn theta(theta: f64) -> Self {
        let rannacher_steps = if theta > 0.0 && theta < 1.0 { 2 } else { 0 };
        Self { theta, rannacher_steps }
    }

    pub fn describe(&self) -> String {
        format!("theta={} rannacher={}", self.theta, self.rannacher_steps)
    }
}

/// Boundary data sampled on the grid.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    /// `beta(0, t_j)`
    pub left: Vec<f64>,
    /// `beta(x_i, T)`
    pub terminal: Vec<f64>,
    /// Dirichlet values at `x_max` when that far-field rule is active.
    pub right: Option<Vec<f64>>,
}

impl BoundaryData {
    pub fn sample(grid: &Grid2D, boundary: &Coef, farfield: &FarField) -> Self {
        let t_end = grid.t_horizon();
        Self {
            left: (0..=grid.n_t()).map(|j| boundary(0.0, grid.t(j))).collect(),
            terminal: (0..=grid.n_x()).map(|i| boundary(grid.x(i), t_end)).collect(),
            right: match farfield {
                FarField::ZeroCurvature => None,
                FarField::Dirichlet(v) => Some((0..=grid.n_t()).map(|j| v(grid.x_max(), grid.t(j))).collect()),
            },
        }
    }

    pub fn zero(grid: &Grid2D, dirichlet_right: bool) -> Self {
        Self {
            left: vec![0.0; grid.n_t() + 1],
            terminal: vec![0.0; grid.n_x() + 1],
            right: dirichlet_right.then(|| vec![0.0; grid.n_t() + 1]),
        }
    }
}

/// Space discretisation of `½ sigma² D_x² + b D_x` on a grid, frozen so it
/// can be reused across many right-hand sides.
#[derive(Debug, Clone)]
pub struct FdOperator {
    grid: Grid2D,
    scheme: FdScheme,
    dirichlet_right: bool,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl FdOperator {
    pub fn new(spec: &DiffusionSpec, grid: &Grid2D, farfield: &FarField, scheme: FdScheme) -> Result<Self> {
        if !(0.0..=1.0).contains(&scheme.theta) {
            return Err(invalid(format!("theta must lie in [0, 1], got {}", scheme.theta)));
        }
        let n = grid.n_x();
        let h = grid.dx();
        let len = grid.len();
        let mut lower = vec![0.0; len];
        let mut diag = vec![0.0; len];
        let mut upper = vec![0.0; len];
        let mut max_rate: f64 = 0.0;
        for j in 0..=grid.n_t() {
            let t = grid.t(j);
            let base = j * (n + 1);
            for i in 1..n {
                let x = grid.x(i);
                let s = spec.sigma(x, t);
                let a = 0.5 * s * s;
                let b = spec.drift(x, t);
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::NonFinite { value: if a.is_finite() { b } else { a }, x, t, control: None });
                }
                let diff = a / (h * h);
                let (l, d, r) = if b == 0.0 || b.abs() * h / a.max(f64::MIN_POSITIVE) <= 2.0 {
                    (diff - b / (2.0 * h), -2.0 * diff, diff + b / (2.0 * h))
                } else if b > 0.0 {
                    (diff, -2.0 * diff - b / h, diff + b / h)
                } else {
                    (diff - b / h, -2.0 * diff + b / h, diff)
                };
                lower[base + i] = l;
                diag[base + i] = d;
                upper[base + i] = r;
                max_rate = max_rate.max(2.0 * diff);
            }
            // zero curvature at x_max: only the transport term survives
            let b = spec.drift(grid.x_max(), t);
            lower[base + n] = -b / h;
            diag[base + n] = b / h;
        }
        if scheme.theta < 0.5 {
            let ratio = (1.0 - 2.0 * scheme.theta) * grid.dt() * max_rate;
            if ratio > 1.0 {
                return Err(Error::Unstable { theta: scheme.theta, ratio });
            }
        }
        Ok(Self {
            grid: *grid,
            scheme,
            dirichlet_right: matches!(farfield, FarField::Dirichlet(_)),
            lower,
            diag,
            upper,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn scheme(&self) -> FdScheme {
        self.scheme
    }

    pub fn dirichlet_right(&self) -> bool {
        self.dirichlet_right
    }

    /// Applies the space operator to row `j` of `u` at node `i`.
    fn apply(&self, row: &[f64], j: usize, i: usize) -> f64 {
        let k = j * (self.grid.n_x() + 1) + i;
        let up = if i + 1 < row.len() { self.upper[k] * row[i + 1] } else { 0.0 };
        self.lower[k] * row[i - 1] + self.diag[k] * row[i] + up
    }

    /// Marches backward from `t = T` with the given source values on the grid.
    pub fn solve(&self, source: &GridFunction, bc: &BoundaryData) -> Result<GridFunction> {
        let g = self.grid;
        if *source.grid() != g {
            return Err(Error::ShapeMismatch { expected: g.shape(), got: source.grid().shape() });
        }
        if bc.right.is_some() != self.dirichlet_right {
            return Err(invalid("boundary data do not match the far-field rule"));
        }
        let n = g.n_x();
        let dt = g.dt();
        let last = if self.dirichlet_right { n - 1 } else { n };
        let m = last; // unknowns are nodes 1..=last
        let mut u = GridFunction::zeros(g);
        {
            let row = u.row_mut(g.n_t());
            row.copy_from_slice(&bc.terminal);
            row[0] = bc.left[g.n_t()];
        }
        let mut lo = vec![0.0; m];
        let mut di = vec![0.0; m];
        let mut up = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for step in 0..g.n_t() {
            let j = g.n_t() - 1 - step;
            let theta = if step < self.scheme.rannacher_steps { 1.0 } else { self.scheme.theta };
            let next = u.row(j + 1).to_vec();
            let f_now = source.row(j);
            let f_next = source.row(j + 1);
            let left = bc.left[j];
            let right = bc.right.as_ref().map(|r| r[j]);
            let base = j * (n + 1);
            for i in 1..=last {
                let r = i - 1;
                let explicit = if theta < 1.0 { self.apply(&next, j + 1, i) } else { 0.0 };
                rhs[r] = next[i] + (1.0 - theta) * dt * explicit + dt * (theta * f_now[i] + (1.0 - theta) * f_next[i]);
                lo[r] = -theta * dt * self.lower[base + i];
                di[r] = 1.0 - theta * dt * self.diag[base + i];
                up[r] = -theta * dt * self.upper[base + i];
            }
            rhs[0] -= lo[0] * left;
            if let Some(rv) = right {
                rhs[m - 1] -= up[m - 1] * rv;
            }
            solve_tridiagonal(&lo, &di, &up, &mut rhs)?;
            let row = u.row_mut(j);
            row[0] = left;
            row[1..=last].copy_from_slice(&rhs);
            if let Some(rv) = right {
                row[n] = rv;
            }
        }
        Ok(u)
    }
}

/// Solves the linear problem on `grid`.
pub fn solve_fd(problem: &LinearProblem, grid: &Grid2D, scheme: FdScheme) -> Result<GridFunction> {
    let op = FdOperator::new(&problem.spec, grid, &problem.farfield, scheme)?;
    let f = problem.source.clone();
    let source = GridFunction::from_fn(*grid, |x, t| f(x, t));
    let bc = BoundaryData::sample(grid, &problem.boundary, &problem.farfield);
    op.solve(&source, &bc)
}

/// Probability that a drift-free path started at `x_query` reaches `x_max`
/// before `T`, bounded with the volatility cap (reflection principle).
pub fn truncation_bound(x_query: f64, x_max: f64, sigma_cap: f64, horizon: f64) -> f64 {
    let d = (x_max - x_query).max(0.0);
    (2.0 * norm_cdf(-d / (sigma_cap * horizon.sqrt()))).min(1.0)
}

/// Smallest truncation level with `truncation_bound < 1e-6`.
pub fn default_x_max(x_query: f64, sigma_cap: f64, horizon: f64) -> f64 {
    // 2 Phi(-z) = 1e-6 at z = 4.891638...
    x_query + 4.9 * sigma_cap * horizon.sqrt()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LinearReport {
    pub scheme: String,
    pub theta: f64,
    pub n_x: usize,
    pub n_t: usize,
    pub x_max: f64,
    pub query_x: f64,
    pub truncation_bound: f64,
}

impl LinearReport {
    pub fn new(grid: &Grid2D, scheme: FdScheme, query_x: f64, sigma_cap: f64) -> Self {
        Self {
            scheme: scheme.describe(),
            theta: scheme.theta,
            n_x: grid.n_x(),
            n_t: grid.n_t(),
            x_max: grid.x_max(),
            query_x,
            truncation_bound: truncation_bound(query_x, grid.x_max(), sigma_cap, grid.t_horizon()),
        }
    }
}

/// `E[beta(X_{T∧tau}, T∧tau) + ∫_t^{T∧tau} f(X_s, s) ds]` by simulation.
///
/// The running integral uses the trapezoid rule on surviving steps.
pub fn evaluate_feynman_kac(
    problem: &LinearProblem,
    x: f64,
    t: f64,
    t_horizon: f64,
    mc: &McParams,
) -> Result<(f64, f64)> {
    validate_run(x, t, t_horizon, mc)?;
    let f = &problem.source;
    let beta = &problem.boundary;
    let samples: Vec<f64> = (0..mc.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(mc.seed, k);
            let mut acc = 0.0;
            let out = run_path(&problem.spec, x, t, t_horizon, mc.dt, mc.bridge, &mut rng, |s, xa, se, xe| {
                acc += 0.5 * (f(xa, s) + f(xe, se)) * (se - s);
            });
            acc + beta(out.terminal, out.tau)
        })
        .collect();
    Ok(mean_stderr(&samples))
}
