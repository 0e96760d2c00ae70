//! Picard iteration for the semilinear problem
//! `D_t u + ½ sigma² D_x² u + H(D_x u, u, x, t) = 0`, `u = beta` on the
//! parabolic boundary.
//!
//! The map `T` freezes the Hamiltonian along the current iterate and solves
//! the resulting linear problem with the finite-difference operator:
//! `T u = solve_fd(source = H(D_x u, u, x, t), boundary = beta)`.
//! For `kappa` large enough `T` contracts in the weighted norm
//! `sup e^{-kappa (T - t)} (|u| + |D_x u|)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{Coef, DiffusionSpec};
use crate::error::{invalid, Error, Result};
use crate::grid::{derivative_row, fd_derivative_x, sup_norm, weighted_norm, Grid2D, GridFunction};
use crate::hamiltonian::{probe_growth, ControlSet, GrowthProbe, Hamiltonian};
use crate::linear_pde::{truncation_bound, BoundaryData, FarField, FdOperator, FdScheme};

#[derive(Clone)]
pub struct SemilinearProblem {
    pub spec: DiffusionSpec,
    pub hamiltonian: Arc<dyn Hamiltonian>,
    pub boundary: Coef,
    pub farfield: FarField,
}

impl SemilinearProblem {
    pub fn new(
        spec: DiffusionSpec,
        hamiltonian: Arc<dyn Hamiltonian>,
        boundary: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { spec, hamiltonian, boundary: Arc::new(boundary), farfield: FarField::ZeroCurvature }
    }

    pub fn with_farfield(mut self, farfield: FarField) -> Self {
        self.farfield = farfield;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaChoice {
    Auto(AutoTag),
    Fixed(f64),
}

/// Serialises as the string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl KappaChoice {
    pub const AUTO: KappaChoice = KappaChoice::Auto(AutoTag::Auto);
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub kappa: KappaChoice,
    pub tol: f64,
    pub max_iter: usize,
    pub u_init: Option<GridFunction>,
    pub scheme: FdScheme,
    /// Largest state of interest; only used for the truncation bound.
    pub query_x: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            kappa: KappaChoice::AUTO,
            tol: 1e-9,
            max_iter: 200,
            u_init: None,
            scheme: FdScheme::default(),
            query_x: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SolveReport {
    pub kappa: f64,
    pub iterations: usize,
    /// `||u_{n+1} - u_n||_kappa` per iteration.
    pub residuals: Vec<f64>,
    /// `sup |u_{n+1} - u_n|` per iteration.
    pub sup_residuals: Vec<f64>,
    /// Successive residual ratios, once the previous residual is above round-off.
    pub contraction_ratios: Vec<f64>,
    pub pde_residual_sup: f64,
    pub truncation_bound: f64,
    pub converged: bool,
    pub scheme: String,
    pub n_x: usize,
    pub n_t: usize,
    pub x_max: f64,
}

/// Argmax controls on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrid {
    pub controls: GridFunction,
}

impl PolicyGrid {
    pub fn grid(&self) -> &Grid2D {
        self.controls.grid()
    }

    /// Control at the nearest node.
    pub fn lookup(&self, x: f64, t: f64) -> f64 {
        let g = self.grid();
        self.controls.get(g.nearest_x(x), g.nearest_t(t))
    }

    pub fn within(&self, set: &ControlSet) -> bool {
        self.controls.values().iter().all(|&d| set.contains(d))
    }
}

/// `T` with the linear operator and boundary data cached for repeated use.
pub struct FixedPointMap<'a> {
    problem: &'a SemilinearProblem,
    op: FdOperator,
    bc: BoundaryData,
}

impl<'a> FixedPointMap<'a> {
    pub fn new(problem: &'a SemilinearProblem, grid: &Grid2D, scheme: FdScheme) -> Result<Self> {
        let op = FdOperator::new(&problem.spec, grid, &problem.farfield, scheme)?;
        let bc = BoundaryData::sample(grid, &problem.boundary, &problem.farfield);
        Ok(Self { problem, op, bc })
    }

    pub fn grid(&self) -> &Grid2D {
        self.op.grid()
    }

    /// Frozen source `H(D_x u, u, x, t)` and the maximising controls.
    pub fn frozen_source(&self, u: &GridFunction) -> Result<(GridFunction, Option<GridFunction>)> {
        let g = *self.grid();
        if *u.grid() != g {
            return Err(Error::ShapeMismatch { expected: g.shape(), got: u.grid().shape() });
        }
        let width = g.n_x() + 1;
        let h = g.dx();
        let ham = &self.problem.hamiltonian;
        let rows: Vec<Result<Vec<(f64, f64)>>> = (0..=g.n_t())
            .into_par_iter()
            .map(|j| {
                let row = u.row(j);
                let mut du = vec![0.0; width];
                derivative_row(row, h, &mut du);
                let t = g.t(j);
                (0..width)
                    .map(|i| {
                        let hv = ham.evaluate(du[i], row[i], g.x(i), t)?;
                        Ok((hv.value, hv.control.unwrap_or(f64::NAN)))
                    })
                    .collect()
            })
            .collect();
        let mut values = Vec::with_capacity(g.len());
        let mut controls = Vec::with_capacity(g.len());
        for row in rows {
            for (v, c) in row? {
                values.push(v);
                controls.push(c);
            }
        }
        let source = GridFunction::from_values(g, values)?;
        let policy = if ham.control_set().is_some() { Some(GridFunction::from_values(g, controls)?) } else { None };
        Ok((source, policy))
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        let (source, _) = self.frozen_source(u)?;
        self.op.solve(&source, &self.bc)
    }

    /// Linear solve with the source frozen at `(p, u) = (0, 0)`.
    pub fn initial_guess(&self) -> Result<GridFunction> {
        let g = *self.grid();
        let ham = &self.problem.hamiltonian;
        let mut values = Vec::with_capacity(g.len());
        for j in 0..=g.n_t() {
            for i in 0..=g.n_x() {
                values.push(ham.evaluate(0.0, 0.0, g.x(i), g.t(j))?.value);
            }
        }
        self.op.solve(&GridFunction::from_values(g, values)?, &self.bc)
    }

    /// `T u - T v`, computed as a zero-boundary solve with the source difference.
    fn difference(&self, u: &GridFunction, v: &GridFunction) -> Result<GridFunction> {
        let (su, _) = self.frozen_source(u)?;
        let (sv, _) = self.frozen_source(v)?;
        let zero = BoundaryData::zero(self.grid(), self.op.dirichlet_right());
        self.op.solve(&su.sub(&sv)?, &zero)
    }
}

pub fn apply_t(problem: &SemilinearProblem, u: &GridFunction, grid: &Grid2D) -> Result<GridFunction> {
    FixedPointMap::new(problem, grid, FdScheme::default())?.apply(u)
}

/// Iterates `u_{n+1} = T u_n` until both the weighted and the plain sup
/// residual drop below `tol`, or `max_iter` is reached (reported as not
/// converged).
pub fn picard_solve(
    problem: &SemilinearProblem,
    grid: &Grid2D,
    config: &SolveConfig,
) -> Result<(GridFunction, Option<PolicyGrid>, SolveReport)> {
    if !(config.tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    if config.max_iter == 0 {
        return Err(invalid("max_iter must be >= 1"));
    }
    let map = FixedPointMap::new(problem, grid, config.scheme)?;
    let kappa = match config.kappa {
        KappaChoice::Fixed(k) if k >= 0.0 && k.is_finite() => k,
        KappaChoice::Fixed(k) => return Err(invalid(format!("kappa must be finite and >= 0, got {k}"))),
        KappaChoice::Auto(_) => choose_kappa_with(&map, problem)?,
    };
    let mut u = match &config.u_init {
        Some(u0) => {
            u0.check_same_grid(&GridFunction::zeros(*grid))?;
            u0.clone()
        }
        None => map.initial_guess()?,
    };
    let mut residuals = Vec::new();
    let mut sup_residuals = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iter {
        let next = map.apply(&u)?;
        let diff = next.sub(&u)?;
        let r = weighted_norm(&diff, kappa);
        let rs = sup_norm(&diff);
        residuals.push(r);
        sup_residuals.push(rs);
        u = next;
        if !(r.is_finite() && rs.is_finite()) {
            return Err(Error::NonFinite { value: r, x: f64::NAN, t: f64::NAN, control: None });
        }
        if r < config.tol && rs < config.tol {
            converged = true;
            break;
        }
    }
    let scale = weighted_norm(&u, kappa).max(1.0);
    let contraction_ratios =
        residuals.windows(2).filter(|w| w[0] > 1e3 * f64::EPSILON * scale).map(|w| w[1] / w[0]).collect();
    let policy = map.frozen_source(&u)?.1.map(|controls| PolicyGrid { controls });
    let pde_residual_sup = verify_residual(&u, problem, grid)?;
    let query_x = config.query_x.unwrap_or(0.5 * grid.x_max());
    let report = SolveReport {
        kappa,
        iterations: residuals.len(),
        residuals,
        sup_residuals,
        contraction_ratios,
        pde_residual_sup,
        truncation_bound: truncation_bound(query_x, grid.x_max(), problem.spec.sigma_cap(), grid.t_horizon()),
        converged,
        scheme: config.scheme.describe(),
        n_x: grid.n_x(),
        n_t: grid.n_t(),
        x_max: grid.x_max(),
    };
    Ok((u, policy, report))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ContractionEstimate {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    /// Pairs dropped because `||u - v||_kappa < 1e-12`.
    pub skipped: usize,
}

/// Random smooth perturbation vanishing on `{x = 0} ∪ {t = T}`.
fn random_perturbation(grid: &Grid2D, rng: &mut ChaCha8Rng, amplitude: f64) -> GridFunction {
    let x_max = grid.x_max();
    let horizon = grid.t_horizon();
    let terms: Vec<(f64, u8, f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let a = amplitude * rng.random_range(-1.0..=1.0);
            let kind = rng.random_range(0..2u8);
            let centre = rng.random_range(0.1..0.7) * x_max;
            let width = rng.random_range(0.05..0.25) * x_max;
            let freq = rng.random_range(0.5..3.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (a, kind, centre, width, freq, phase)
        })
        .collect();
    GridFunction::from_fn(*grid, |x, t| {
        let time = (1.0 - t / horizon) * (1.0 + 0.5 * (std::f64::consts::TAU * 0.5 * t / horizon * 4.0).sin());
        terms
            .iter()
            .map(|&(a, kind, c, w, freq, phase)| {
                let space = if kind == 0 {
                    let s = (x - (c - w)) / (2.0 * w);
                    if (0.0..=1.0).contains(&s) {
                        (std::f64::consts::PI * s).sin().powi(2)
                    } else {
                        0.0
                    }
                } else {
                    // nonzero slope at the barrier
                    (x / w) * (-x / w).exp() * std::f64::consts::E
                };
                a * space * time * (1.0 + 0.25 * (freq * t + phase).cos())
            })
            .sum()
    })
}

fn estimate_with(
    map: &FixedPointMap<'_>,
    base: &GridFunction,
    kappa: f64,
    n_pairs: usize,
    seed: u64,
    amplitude: f64,
) -> Result<ContractionEstimate> {
    if n_pairs == 0 {
        return Err(invalid("n_pairs must be >= 1"));
    }
    let grid = *map.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(n_pairs);
    let mut skipped = 0;
    for _ in 0..n_pairs {
        let w = random_perturbation(&grid, &mut rng, amplitude);
        let u = base.lin_comb(1.0, &w, 0.5)?;
        let v = base.lin_comb(1.0, &w, -0.5)?;
        let denom = weighted_norm(&w, kappa);
        if denom < 1e-12 {
            skipped += 1;
            continue;
        }
        let tw = map.difference(&u, &v)?;
        ratios.push(weighted_norm(&tw, kappa) / denom);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ContractionEstimate { max_ratio, ratios, skipped })
}

/// Largest measured `||T u - T v||_kappa / ||u - v||_kappa` over random
/// smooth pairs sharing their boundary values.
pub fn estimate_contraction(
    problem: &SemilinearProblem,
    grid: &Grid2D,
    kappa: f64,
    n_pairs: usize,
    seed: u64,
    amplitude: f64,
) -> Result<ContractionEstimate> {
    let map = FixedPointMap::new(problem, grid, FdScheme::default())?;
    let base = map.initial_guess()?;
    estimate_with(&map, &base, kappa, n_pairs, seed, amplitude)
}

const KAPPA_PAIRS: usize = 5;
const KAPPA_SEED: u64 = 0x006b_6170_7061;
const KAPPA_TARGET: f64 = 0.5;

fn choose_kappa_with(map: &FixedPointMap<'_>, problem: &SemilinearProblem) -> Result<f64> {
    let g = map.grid();
    let k = probe_growth(problem.hamiltonian.as_ref(), &GrowthProbe::new(g.x_max(), g.t_horizon()))?.max(1.0);
    let base = map.initial_guess()?;
    let mut kappa = 4.0 * k;
    let mut seen = Vec::new();
    while kappa <= 65536.0 * k {
        let est = estimate_with(map, &base, kappa, KAPPA_PAIRS, KAPPA_SEED, 1.0)?;
        if est.max_ratio < KAPPA_TARGET {
            return Ok(kappa);
        }
        seen.push((kappa, est.max_ratio));
        kappa *= 2.0;
    }
    Err(Error::NoContractiveKappa { max_kappa: 65536.0 * k, ratios: seen })
}

/// Starts at `4 max(K, 1)` and doubles until the measured contraction ratio
/// over five random pairs is below 1/2.
pub fn choose_kappa(problem: &SemilinearProblem, grid: &Grid2D) -> Result<f64> {
    let map = FixedPointMap::new(problem, grid, FdScheme::default())?;
    choose_kappa_with(&map, problem)
}

/// Sup over interior nodes (time nodes `2..=n_t-2`) of
/// `|D_t u + ½ sigma² D_x² u + b D_x u + H(D_x u, u, x, t)|` with centred differences.
pub fn verify_residual(u: &GridFunction, problem: &SemilinearProblem, grid: &Grid2D) -> Result<f64> {
    if u.grid() != grid {
        return Err(Error::ShapeMismatch { expected: grid.shape(), got: u.grid().shape() });
    }
    if grid.n_t() < 4 {
        return Ok(0.0);
    }
    let du = fd_derivative_x(u);
    let h = grid.dx();
    let dt = grid.dt();
    let rows: Vec<Result<f64>> = (2..=grid.n_t() - 2)
        .into_par_iter()
        .map(|j| {
            let t = grid.t(j);
            let mut worst: f64 = 0.0;
            for i in 1..grid.n_x() {
                let x = grid.x(i);
                let ut = (u.get(i, j + 1) - u.get(i, j - 1)) / (2.0 * dt);
                let uxx = (u.get(i + 1, j) - 2.0 * u.get(i, j) + u.get(i - 1, j)) / (h * h);
                let s = problem.spec.sigma(x, t);
                let p = du.get(i, j);
                let hv = problem.hamiltonian.evaluate(p, u.get(i, j), x, t)?.value;
                let r = ut + 0.5 * s * s * uxx + problem.spec.drift(x, t) * p + hv;
                worst = worst.max(r.abs());
            }
            Ok(worst)
        })
        .collect();
    rows.into_iter().try_fold(0.0, |m, r| Ok(f64::max(m, r?)))
}
