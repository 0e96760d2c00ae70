//! One-dimensional diffusions killed at the barrier `x = 0`.
//!
//! Paths are advanced with Euler-Maruyama. After every step a path that
//! stayed positive at both ends is still declared absorbed with the
//! Brownian-bridge crossing probability `exp(-2 x_a x_b / (sigma^2 h))`.
//! Absorption inside a step is dated at the step midpoint.
//!
//! Each path owns a ChaCha8 stream selected by `(seed, path index)`, so the
//! output is bitwise identical for any rayon pool size.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numerics::{adaptive_simpson, gauss5, mean_stderr, MonotoneCubic};

/// Coefficient function of `(x, t)`.
pub type Coef = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct DiffusionSpec {
    sigma: Coef,
    drift: Option<Coef>,
    sigma_floor: f64,
    sigma_cap: f64,
    time_homogeneous: bool,
}

impl std::fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("sigma_floor", &self.sigma_floor)
            .field("sigma_cap", &self.sigma_cap)
            .field("has_drift", &self.drift.is_some())
            .field("time_homogeneous", &self.time_homogeneous)
            .finish()
    }
}

impl DiffusionSpec {
    /// Time-dependent volatility `sigma(x, t)` with declared bounds.
    pub fn new(sigma: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, sigma_floor: f64, sigma_cap: f64) -> Self {
        Self { sigma: Arc::new(sigma), drift: None, sigma_floor, sigma_cap, time_homogeneous: false }
    }

    /// Volatility depending on the state only.
    pub fn homogeneous(sigma: impl Fn(f64) -> f64 + Send + Sync + 'static, sigma_floor: f64, sigma_cap: f64) -> Self {
        Self { sigma: Arc::new(move |x, _| sigma(x)), drift: None, sigma_floor, sigma_cap, time_homogeneous: true }
    }

    pub fn constant(sigma: f64) -> Self {
        Self::homogeneous(move |_| sigma, sigma, sigma)
    }

    pub fn with_drift(mut self, drift: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(drift));
        self
    }

    pub fn with_drift_coef(mut self, drift: Coef) -> Self {
        self.drift = Some(drift);
        self
    }

    pub fn without_drift(mut self) -> Self {
        self.drift = None;
        self
    }

    /// Marks the volatility as time dependent (the Lamperti transform refuses it).
    pub fn time_dependent(mut self) -> Self {
        self.time_homogeneous = false;
        self
    }

    pub fn sigma(&self, x: f64, t: f64) -> f64 {
        (self.sigma)(x, t)
    }

    pub fn drift(&self, x: f64, t: f64) -> f64 {
        self.drift.as_ref().map_or(0.0, |b| b(x, t))
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    pub fn sigma_cap(&self) -> f64 {
        self.sigma_cap
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }

    pub fn sigma_coef(&self) -> Coef {
        self.sigma.clone()
    }

    pub fn drift_coef(&self) -> Option<Coef> {
        self.drift.clone()
    }

    /// Checks `floor <= sigma <= cap` and a finite drift on a probe lattice.
    pub fn check_bounds(&self, x_max: f64, t_horizon: f64, samples: usize) -> Result<()> {
        let n = samples.max(2);
        for a in 0..=n {
            let x = x_max * a as f64 / n as f64;
            for b in 0..=n {
                let t = t_horizon * b as f64 / n as f64;
                let s = self.sigma(x, t);
                if !(s >= self.sigma_floor && s <= self.sigma_cap) {
                    return Err(invalid(format!(
                        "sigma({x}, {t}) = {s} outside [{}, {}]",
                        self.sigma_floor, self.sigma_cap
                    )));
                }
                if !self.drift(x, t).is_finite() {
                    return Err(invalid(format!("drift not finite at ({x}, {t})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McParams {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Brownian-bridge crossing correction; plain sign detection when false.
    pub bridge: bool,
    pub store_trajectories: bool,
}

impl McParams {
    pub fn new(dt: f64, n_paths: usize, seed: u64) -> Self {
        Self { dt, n_paths, seed, bridge: true, store_trajectories: false }
    }

    pub fn without_bridge(mut self) -> Self {
        self.bridge = false;
        self
    }
}

/// Per-path RNG stream.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub n_paths: usize,
    pub dt: f64,
    /// `tau ∧ T` per path.
    pub absorption_times: Vec<f64>,
    /// `X_{tau ∧ T}` per path; exactly 0 for absorbed paths.
    pub terminal_states: Vec<f64>,
    pub trajectories: Option<Vec<Vec<f64>>>,
    pub t_horizon: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PathSummary {
    pub n_paths: usize,
    pub dt: f64,
    pub mean_tau: f64,
    pub stderr_tau: f64,
    pub absorbed_fraction: f64,
    pub mean_terminal: f64,
}

impl PathBatch {
    pub fn summary(&self) -> PathSummary {
        let (mean_tau, stderr_tau) = mean_stderr(&self.absorption_times);
        let absorbed = self.absorption_times.iter().filter(|&&tau| tau < self.t_horizon).count();
        let (mean_terminal, _) = mean_stderr(&self.terminal_states);
        PathSummary {
            n_paths: self.n_paths,
            dt: self.dt,
            mean_tau,
            stderr_tau,
            absorbed_fraction: absorbed as f64 / self.n_paths as f64,
            mean_terminal,
        }
    }
}

pub(crate) fn validate_run(x0: f64, t0: f64, t_horizon: f64, mc: &McParams) -> Result<()> {
    if !(x0 >= 0.0) {
        return Err(invalid(format!("start state must be >= 0, got {x0}")));
    }
    if !(t0 < t_horizon) {
        return Err(invalid(format!("need t0 < T, got t0 = {t0}, T = {t_horizon}")));
    }
    if !(mc.dt > 0.0) || mc.dt >= t_horizon - t0 {
        return Err(invalid(format!("time step {} must lie in (0, T - t0 = {})", mc.dt, t_horizon - t0)));
    }
    if mc.n_paths == 0 {
        return Err(invalid("n_paths must be >= 1"));
    }
    Ok(())
}

/// Outcome of one stopped path.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopped {
    pub tau: f64,
    pub terminal: f64,
}

/// Advances one path from `(x0, t0)` until absorption or `T`.
///
/// `segment(s, x_a, s_end, x_end)` is called for every surviving piece of
/// the path; on the absorbing step `s_end` is the absorption time and
/// `x_end = 0`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_path<R: Rng>(
    spec: &DiffusionSpec,
    x0: f64,
    t0: f64,
    t_horizon: f64,
    dt: f64,
    bridge: bool,
    rng: &mut R,
    mut segment: impl FnMut(f64, f64, f64, f64),
) -> Stopped {
    if x0 <= 0.0 {
        return Stopped { tau: t0, terminal: 0.0 };
    }
    let n_steps = ((t_horizon - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut x = x0;
    for k in 0..n_steps {
        let s = t0 + k as f64 * dt;
        let s_next = if k + 1 == n_steps { t_horizon } else { t0 + (k + 1) as f64 * dt };
        let h = s_next - s;
        let z: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let sig = spec.sigma(x, s);
        let x_next = x + spec.drift(x, s) * h + sig * h.sqrt() * z;
        let crossed = x_next <= 0.0 || (bridge && u < (-2.0 * x * x_next / (sig * sig * h)).exp());
        if crossed {
            let tau = s + 0.5 * h;
            segment(s, x, tau, 0.0);
            return Stopped { tau, terminal: 0.0 };
        }
        segment(s, x, s_next, x_next);
        x = x_next;
    }
    Stopped { tau: t_horizon, terminal: x }
}

pub fn simulate_paths(spec: &DiffusionSpec, x0: f64, t0: f64, t_horizon: f64, mc: &McParams) -> Result<PathBatch> {
    validate_run(x0, t0, t_horizon, mc)?;
    let store = mc.store_trajectories;
    let results: Vec<(Stopped, Option<Vec<f64>>)> = (0..mc.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(mc.seed, k);
            let mut traj = store.then(|| vec![x0]);
            let out = run_path(spec, x0, t0, t_horizon, mc.dt, mc.bridge, &mut rng, |_, _, _, xe| {
                if let Some(tr) = traj.as_mut() {
                    tr.push(xe);
                }
            });
            (out, traj)
        })
        .collect();
    let mut absorption_times = Vec::with_capacity(mc.n_paths);
    let mut terminal_states = Vec::with_capacity(mc.n_paths);
    let mut trajectories = store.then(|| Vec::with_capacity(mc.n_paths));
    for (s, tr) in results {
        absorption_times.push(s.tau);
        terminal_states.push(s.terminal);
        if let (Some(all), Some(tr)) = (trajectories.as_mut(), tr) {
            all.push(tr);
        }
    }
    Ok(PathBatch { n_paths: mc.n_paths, dt: mc.dt, absorption_times, terminal_states, trajectories, t_horizon })
}

/// `E[tau ∧ T]` for standard Brownian motion started at `(x, t)`:
/// `t + ∫_t^T (1 - 2 Phi(-x / sqrt(s - t))) ds`.
pub fn bm_stopped_time_analytic(x: f64, t: f64, t_horizon: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid(format!("x must be >= 0, got {x}")));
    }
    if t > t_horizon {
        return Err(invalid("need t <= T"));
    }
    if x == 0.0 {
        return Ok(t);
    }
    let survival = |u: f64| {
        if u <= 0.0 {
            1.0
        } else {
            statrs::function::erf::erf(x / (2.0 * u).sqrt())
        }
    };
    Ok(t + adaptive_simpson(&survival, 0.0, t_horizon - t, 1e-10))
}

/// Mean and standard error of `tau ∧ T` from simulation.
pub fn expected_stopped_time_mc(
    spec: &DiffusionSpec,
    x: f64,
    t: f64,
    t_horizon: f64,
    mc: &McParams,
) -> Result<(f64, f64)> {
    let batch = simulate_paths(spec, x, t, t_horizon, mc)?;
    Ok(mean_stderr(&batch.absorption_times))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LipschitzProbe {
    /// Largest adjacent difference quotient of `E[tau ∧ T]`.
    pub quotient: f64,
    pub x_values: Vec<f64>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
}

impl LipschitzProbe {
    pub fn max_stderr(&self) -> f64 {
        self.stderrs.iter().copied().fold(0.0, f64::max)
    }
}

/// Difference quotients of `x -> E[tau(x, t) ∧ T]` on sorted probe points,
/// all estimated with the same seed (common random numbers).
pub fn hitting_lipschitz_probe(
    spec: &DiffusionSpec,
    x_values: &[f64],
    t: f64,
    t_horizon: f64,
    mc: &McParams,
) -> Result<LipschitzProbe> {
    if x_values.len() < 2 {
        return Err(invalid("need at least two probe points"));
    }
    if x_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("probe points must be strictly increasing (no duplicates)"));
    }
    let mut means = Vec::with_capacity(x_values.len());
    let mut stderrs = Vec::with_capacity(x_values.len());
    for &x in x_values {
        let (m, se) = expected_stopped_time_mc(spec, x, t, t_horizon, mc)?;
        means.push(m);
        stderrs.push(se);
    }
    let quotient = x_values
        .windows(2)
        .zip(means.windows(2))
        .map(|(xs, ms)| (ms[1] - ms[0]).abs() / (xs[1] - xs[0]))
        .fold(0.0, f64::max);
    Ok(LipschitzProbe { quotient, x_values: x_values.to_vec(), means, stderrs })
}

/// Unit-diffusion reduction `Y = zeta(X)`, `zeta(x) = ∫_0^x dz / sigma(z)`,
/// giving `dY = -sigma'(zeta^{-1}(Y)) / 2 dt + dW`.
#[derive(Clone)]
pub struct LampertiTransform {
    pub unit: DiffusionSpec,
    zeta: Arc<TabulatedMap>,
    zeta_inv: Arc<TabulatedMap>,
}

/// Monotone cubic table with linear extrapolation past the right end.
struct TabulatedMap {
    table: MonotoneCubic,
    end_value: f64,
    end_slope: f64,
}

impl TabulatedMap {
    fn eval(&self, v: f64) -> f64 {
        let (lo, hi) = self.table.domain();
        if v > hi {
            self.end_value + self.end_slope * (v - hi)
        } else {
            self.table.eval(v.max(lo))
        }
    }
}

impl LampertiTransform {
    pub fn zeta(&self, x: f64) -> f64 {
        self.zeta.eval(x)
    }

    pub fn zeta_inv(&self, y: f64) -> f64 {
        self.zeta_inv.eval(y)
    }
}

/// Builds the transform for a time-homogeneous volatility, tabulating
/// `zeta` on `[0, 1.5 x_max]`.
pub fn lamperti_transform(spec: &DiffusionSpec, x_max: f64) -> Result<LampertiTransform> {
    if !spec.is_time_homogeneous() {
        return Err(invalid("Lamperti transform needs a time-independent sigma"));
    }
    if spec.has_drift() {
        return Err(invalid("Lamperti transform is implemented for drift-free diffusions"));
    }
    if !(x_max > 0.0) {
        return Err(invalid("x_max must be positive"));
    }
    let sigma = spec.sigma_coef();
    let sig = move |x: f64| sigma(x, 0.0);
    let upper = 1.5 * x_max;
    let n = ((upper / 0.005).ceil() as usize).max(200);
    let h = upper / n as f64;
    let xs: Vec<f64> = (0..=n).map(|k| if k == n { upper } else { k as f64 * h }).collect();
    let mut zs = Vec::with_capacity(n + 1);
    zs.push(0.0);
    for k in 0..n {
        let inc = gauss5(&|z| 1.0 / sig(z), xs[k], xs[k + 1]);
        zs.push(zs[k] + inc);
    }
    let inv_sigma: Vec<f64> = xs.iter().map(|&x| 1.0 / sig(x)).collect();
    let sigmas: Vec<f64> = xs.iter().map(|&x| sig(x)).collect();
    let zeta = TabulatedMap {
        end_value: zs[n],
        end_slope: inv_sigma[n],
        table: MonotoneCubic::new(xs.clone(), zs.clone(), inv_sigma),
    };
    let zeta_inv =
        Arc::new(TabulatedMap { end_value: xs[n], end_slope: sigmas[n], table: MonotoneCubic::new(zs, xs, sigmas) });
    let inv = zeta_inv.clone();
    let dsig = move |x: f64| {
        let e = 1e-5 * (1.0 + x.abs());
        (sig(x + e) - sig((x - e).max(0.0))) / (x + e - (x - e).max(0.0))
    };
    let unit = DiffusionSpec::constant(1.0).with_drift(move |y, _| -0.5 * dsig(inv.eval(y.max(0.0))));
    Ok(LampertiTransform { unit, zeta: Arc::new(zeta), zeta_inv })
}
