//! Restricted dividend problem: surplus `dX = (g(X) - c) dt + sigma dW`,
//! dividend rate `c ∈ [m1, m2]`, ruin at `X = 0`.
//!
//! The value is discounted from the current time `t`:
//! `V(x,t) = sup E[∫_t^{T∧tau} e^{-r(k-t)} U(c_k, X_k) dk + e^{-r(T∧tau - t)} beta(X_{T∧tau})]`,
//! which solves `D_t V + ½ sigma² D_x² V + max_c [(g - c) D_x V + U(c, x)] - r V = 0`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::diffusion::{path_rng, run_path, validate_run, Coef, DiffusionSpec, McParams};
use crate::error::{invalid, Error, Result};
use crate::fixedpoint::{picard_solve, PolicyGrid, SemilinearProblem, SolveConfig, SolveReport};
use crate::grid::{Grid2D, GridFunction};
use crate::hamiltonian::{ControlSet, HJBCoefficients};
use crate::numerics::mean_stderr;

/// Running reward `U(c, x)`.
pub type Reward = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Payoff `beta(x)` at ruin and at the horizon.
pub type Payoff = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct DividendModel {
    /// Surplus drift `g(x, t)`.
    pub g: Coef,
    /// Volatility; any drift set here is ignored.
    pub volatility: DiffusionSpec,
    pub r: f64,
    pub reward: Reward,
    pub payoff: Payoff,
    pub m1: f64,
    pub m2: f64,
    pub t_horizon: f64,
}

impl std::fmt::Debug for DividendModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DividendModel")
            .field("r", &self.r)
            .field("m1", &self.m1)
            .field("m2", &self.m2)
            .field("t_horizon", &self.t_horizon)
            .finish_non_exhaustive()
    }
}

impl DividendModel {
    pub fn new(
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        volatility: DiffusionSpec,
        r: f64,
        reward: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        payoff: impl Fn(f64) -> f64 + Send + Sync + 'static,
        (m1, m2): (f64, f64),
        t_horizon: f64,
    ) -> Self {
        Self { g: Arc::new(g), volatility, r, reward: Arc::new(reward), payoff: Arc::new(payoff), m1, m2, t_horizon }
    }

    /// `g = 0.5`, `sigma = 1`, `r = 0.05`, `U(c, x) = sqrt(c)`, `c ∈ [0, 2]`,
    /// zero payoff, `T = 1`.
    pub fn demo() -> Self {
        Self::new(|_, _| 0.5, DiffusionSpec::constant(1.0), 0.05, |c, _| c.sqrt(), |_| 0.0, (0.0, 2.0), 1.0)
    }

    pub fn with_bounds(mut self, m1: f64, m2: f64) -> Self {
        self.m1 = m1;
        self.m2 = m2;
        self
    }

    pub fn control_set(&self) -> Result<ControlSet> {
        ControlSet::interval(self.m1, self.m2)
    }

    /// Checks the parameter ranges and that `g`, `U` and `beta` are finite on
    /// a sample of `[0, x_max] x [m1, m2]`.
    pub fn validate(&self, x_max: f64) -> Result<()> {
        if !(self.m1 >= 0.0 && self.m2 >= self.m1 && self.m2.is_finite()) {
            return Err(invalid(format!("need 0 <= m1 <= m2, got [{}, {}]", self.m1, self.m2)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(invalid(format!("discount rate must be >= 0, got {}", self.r)));
        }
        if !(self.t_horizon > 0.0 && self.t_horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {}", self.t_horizon)));
        }
        for i in 0..=100 {
            let x = x_max * i as f64 / 100.0;
            for k in 0..=8 {
                let c = self.m1 + (self.m2 - self.m1) * k as f64 / 8.0;
                let t = self.t_horizon * k as f64 / 8.0;
                for value in [(self.g)(x, t), (self.reward)(c, x), (self.payoff)(x)] {
                    if !value.is_finite() {
                        return Err(Error::NonFinite { value, x, t, control: Some(c) });
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn build_hjb(model: &DividendModel) -> Result<SemilinearProblem> {
    let set = model.control_set()?;
    let g = model.g.clone();
    let reward = model.reward.clone();
    let r = model.r;
    let coeffs = HJBCoefficients::new(move |x, t, c| g(x, t) - c, move |_, _, _| -r, move |x, _, c| reward(c, x), set);
    let payoff = model.payoff.clone();
    let spec = model.volatility.clone().without_drift();
    Ok(SemilinearProblem::new(spec, Arc::new(coeffs), move |x, _| payoff(x)))
}

pub fn solve(
    model: &DividendModel,
    grid: &Grid2D,
    config: &SolveConfig,
) -> Result<(GridFunction, PolicyGrid, SolveReport)> {
    model.validate(grid.x_max())?;
    let problem = build_hjb(model)?;
    let (value, policy, report) = picard_solve(&problem, grid, config)?;
    let policy = policy.ok_or_else(|| invalid("control-form Hamiltonian produced no policy"))?;
    Ok((value, policy, report))
}

/// Feedback control used by [`simulate_policy`].
pub trait Policy: Send + Sync {
    fn control(&self, x: f64, t: f64) -> f64;
}

impl Policy for PolicyGrid {
    fn control(&self, x: f64, t: f64) -> f64 {
        self.lookup(x, t)
    }
}

/// Constant dividend rate.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn control(&self, _: f64, _: f64) -> f64 {
        self.0
    }
}

/// Monte Carlo value of a feedback policy, discounted from `t`.
///
/// The running reward is integrated with the left-point rule at the control
/// in force on each step.
pub fn simulate_policy<P: Policy + Clone + 'static>(
    model: &DividendModel,
    policy: &P,
    x: f64,
    t: f64,
    mc: &McParams,
) -> Result<(f64, f64)> {
    validate_run(x, t, model.t_horizon, mc)?;
    let g = model.g.clone();
    let pol = policy.clone();
    let spec = model.volatility.clone().with_drift(move |x, s| g(x, s) - pol.control(x, s));
    let r = model.r;
    let samples: Vec<f64> = (0..mc.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(mc.seed, k);
            let mut acc = 0.0;
            let out = run_path(&spec, x, t, model.t_horizon, mc.dt, mc.bridge, &mut rng, |s, xa, se, _| {
                let c = policy.control(xa, s);
                acc += (-r * (s - t)).exp() * (model.reward)(c, xa) * (se - s);
            });
            acc + (-r * (out.tau - t)).exp() * (model.payoff)(out.terminal)
        })
        .collect();
    Ok(mean_stderr(&samples))
}
