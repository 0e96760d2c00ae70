//! Consumption and investment with a horizon set by a factor process.
//!
//! Market: bond `dB = r(Y) B dt`, stock `dS = (r + b)(Y) S dt + sigma_s(Y) S dW¹`,
//! factor `dY = g_y(Y) dt + a(Y) (rho dW¹ + rho_bar dW²)`. The investor stops when
//! `Y` reaches `y0` or at `T`, and maximises discounted CRRA utility of the
//! consumption flow `c X` plus utility of terminal wealth.
//!
//! With `V = (x^gamma / gamma) F(y, t)` and `F = G^delta` the problem reduces to
//! `G_t + ½ a² G_yy + i G_y + h G + max_{m1 <= c <= m2} (-theta alpha c G + theta c^alpha) = 0`,
//! `G = 1` on `{y = y0} ∪ {t = T}`. Internally the state is `z = y - y0 >= 0`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{path_rng, DiffusionSpec, McParams};
use crate::error::{invalid, Error, Result};
use crate::fixedpoint::{picard_solve, KappaChoice, SemilinearProblem, SolveConfig, SolveReport};
use crate::grid::{fd_derivative_x, Grid2D, GridFunction};
use crate::hamiltonian::{ControlSet, HamValue, Hamiltonian};
use crate::numerics::mean_stderr;

/// Coefficient function of the factor level `y`.
pub type YCoef = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct MarketModel {
    pub r: YCoef,
    pub b: YCoef,
    pub sigma_s: YCoef,
    pub a: YCoef,
    pub g_y: YCoef,
    pub rho: f64,
    pub y0: f64,
    pub gamma: f64,
    pub w: f64,
    pub t_horizon: f64,
}

impl std::fmt::Debug for MarketModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MarketModel")
            .field("rho", &self.rho)
            .field("y0", &self.y0)
            .field("gamma", &self.gamma)
            .field("w", &self.w)
            .field("t_horizon", &self.t_horizon)
            .finish_non_exhaustive()
    }
}

fn konst(v: f64) -> YCoef {
    Arc::new(move |_| v)
}

impl MarketModel {
    /// Constant coefficients, `rho = 0`, `y0 = 0`, `gamma = 0.5`, `w = 0`, `T = 1`.
    pub fn constant(r: f64, b: f64, sigma_s: f64, a: f64, g_y: f64) -> Self {
        Self {
            r: konst(r),
            b: konst(b),
            sigma_s: konst(sigma_s),
            a: konst(a),
            g_y: konst(g_y),
            rho: 0.0,
            y0: 0.0,
            gamma: 0.5,
            w: 0.0,
            t_horizon: 1.0,
        }
    }

    /// Case used by the demo run and the verification tests.
    pub fn demo() -> Self {
        Self::constant(0.03, 0.05, 0.2, 0.3, 0.0).with_rho(0.4).with_impatience(0.02)
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_barrier(mut self, y0: f64) -> Self {
        self.y0 = y0;
        self
    }

    pub fn with_impatience(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    pub fn with_horizon(mut self, t_horizon: f64) -> Self {
        self.t_horizon = t_horizon;
        self
    }

    pub fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }

    /// Market price of risk `b / sigma_s`.
    pub fn lambda(&self, y: f64) -> f64 {
        (self.b)(y) / (self.sigma_s)(y)
    }

    pub fn constants(&self) -> Result<TransformConstants> {
        TransformConstants::new(self.gamma, self.rho)
    }

    /// `i(y) = g_y + gamma rho / (1 - gamma) a lambda`.
    pub fn i_coef(&self, y: f64) -> f64 {
        (self.g_y)(y) + self.gamma * self.rho / (1.0 - self.gamma) * (self.a)(y) * self.lambda(y)
    }

    /// `h(y) = gamma / (2 delta (1 - gamma)) lambda² + (gamma / delta) r - w / delta`.
    pub fn h_coef(&self, y: f64, delta: f64) -> f64 {
        let l = self.lambda(y);
        let g = self.gamma;
        g / (2.0 * delta * (1.0 - g)) * l * l + g / delta * (self.r)(y) - self.w / delta
    }

    /// Parameter ranges, plus `a, sigma_s >= eps > 0` and finite coefficients
    /// on `[y0, y0 + span]`.
    pub fn validate(&self, span: f64) -> Result<()> {
        self.constants()?;
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(invalid(format!("impatience rate must be >= 0, got {}", self.w)));
        }
        if !(self.t_horizon > 0.0 && self.t_horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {}", self.t_horizon)));
        }
        for k in 0..=200 {
            let y = self.y0 + span * k as f64 / 200.0;
            for (name, v) in [("a", (self.a)(y)), ("sigma_s", (self.sigma_s)(y))] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("{name}({y}) = {v} is not positive")));
                }
            }
            for v in [(self.r)(y), (self.b)(y), (self.g_y)(y)] {
                if !v.is_finite() {
                    return Err(Error::NonFinite { value: v, x: y, t: 0.0, control: None });
                }
            }
        }
        Ok(())
    }

    fn sample_range(&self, span: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
        (0..=400)
            .map(|k| f(self.y0 + span * k as f64 / 400.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformConstants {
    pub delta: f64,
    /// Exponent of the source term, `1 - delta / (1 - gamma)`; negative.
    pub e: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl TransformConstants {
    pub fn new(gamma: f64, rho: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if !(rho * rho < 1.0) {
            return Err(invalid(format!("need rho² < 1, got rho = {rho}")));
        }
        let delta = (1.0 - gamma) / (gamma * rho * rho + 1.0 - gamma);
        let e = 1.0 - delta / (1.0 - gamma);
        let alpha = e / (e - 1.0);
        let theta = (1.0 - gamma) / (delta * (1.0 - alpha));
        Ok(Self { delta, e, alpha, theta })
    }

    /// Unconstrained maximiser `G^{1/(alpha-1)}` of `-theta alpha c G + theta c^alpha`.
    pub fn c_interior(&self, g: f64) -> f64 {
        g.powf(1.0 / (self.alpha - 1.0))
    }

    /// `max_{m1 <= c <= m2} (-theta alpha c G + theta c^alpha)` and its maximiser.
    ///
    /// The maximand is concave in `c`, so clipping the stationary point is exact.
    /// For `G <= 0` it increases in `c` and the maximum sits at `m2`.
    pub fn inner_max(&self, g: f64, m1: f64, m2: f64) -> (f64, f64) {
        let c = if g > 0.0 { self.c_interior(g).clamp(m1, m2) } else { m2 };
        (self.theta * (c.powf(self.alpha) - self.alpha * c * g), c)
    }
}

/// `h(y) G + max_c (-theta alpha c G + theta c^alpha)` in the shifted state.
struct TruncatedHamiltonian {
    h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    constants: TransformConstants,
    set: ControlSet,
}

impl Hamiltonian for TruncatedHamiltonian {
    fn evaluate(&self, _p: f64, u: f64, z: f64, t: f64) -> Result<HamValue> {
        let (m1, m2) = self.set.bounds();
        let (max, c) = self.constants.inner_max(u, m1, m2);
        let value = (self.h)(z) * u + max;
        if !value.is_finite() {
            return Err(Error::NonFinite { value, x: z, t, control: Some(c) });
        }
        Ok(HamValue { value, control: Some(c) })
    }

    fn control_set(&self) -> Option<&ControlSet> {
        Some(&self.set)
    }
}

/// The truncated `G` problem in `z = y - y0` on `[0, span]`.
pub fn build_g_problem(model: &MarketModel, (m1, m2): (f64, f64), span: f64) -> Result<SemilinearProblem> {
    let constants = model.constants()?;
    if !(m1 > 0.0 && m2 >= m1 && m2.is_finite()) {
        return Err(invalid(format!("need 0 < m1 <= m2, got [{m1}, {m2}]")));
    }
    let (a_lo, a_hi) = model.sample_range(span, |y| (model.a)(y));
    let y0 = model.y0;
    let a = model.a.clone();
    let drift_model = model.clone();
    let spec =
        DiffusionSpec::homogeneous(move |z| a(y0 + z), a_lo, a_hi).with_drift(move |z, _| drift_model.i_coef(y0 + z));
    let h_model = model.clone();
    let delta = constants.delta;
    let ham = TruncatedHamiltonian {
        h: Arc::new(move |z| h_model.h_coef(y0 + z, delta)),
        constants,
        set: ControlSet::interval(m1, m2)?,
    };
    Ok(SemilinearProblem::new(spec, Arc::new(ham), |_, _| 1.0))
}

#[derive(Debug, Clone)]
pub struct GSolution {
    /// `G` on the shifted grid.
    pub g: GridFunction,
    pub bounds: (f64, f64),
    pub widenings: usize,
    pub report: SolveReport,
    pub constants: TransformConstants,
}

impl GSolution {
    /// Range of the unconstrained maximiser over the grid.
    pub fn c_range(&self) -> (f64, f64) {
        c_range(&self.g, &self.constants)
    }
}

fn c_range(g: &GridFunction, k: &TransformConstants) -> (f64, f64) {
    g.values()
        .iter()
        .map(|&v| k.c_interior(v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)))
}

const START_BOUNDS: (f64, f64) = (0.5, 2.0);
const WIDEN: f64 = 4.0;
const MAX_WIDENINGS: usize = 8;

/// Solves the truncated problem and widens `[m1, m2]` by a factor 4 on the
/// offending side until the unconstrained maximiser stays inside the bounds
/// everywhere on the grid. The grid's `x` axis is `z = y - y0`.
pub fn solve_g(model: &MarketModel, grid: &Grid2D, config: &SolveConfig) -> Result<GSolution> {
    model.validate(grid.x_max())?;
    let constants = model.constants()?;
    let (mut m1, mut m2) = START_BOUNDS;
    let mut cfg = config.clone();
    for widenings in 0..=MAX_WIDENINGS {
        let problem = build_g_problem(model, (m1, m2), grid.x_max())?;
        let (g, _, report) = picard_solve(&problem, grid, &cfg)?;
        if let Some(&bad) = g.values().iter().find(|&&v| !(v > 0.0)) {
            return Err(invalid(format!("G lost positivity (value {bad})")));
        }
        let (c_lo, c_hi) = c_range(&g, &constants);
        if c_lo >= m1 && c_hi <= m2 {
            return Ok(GSolution { g, bounds: (m1, m2), widenings, report, constants });
        }
        if widenings == MAX_WIDENINGS {
            return Err(Error::SelfConsistency { widenings, c_min: c_lo, c_max: c_hi, m1, m2 });
        }
        if c_lo < m1 {
            m1 /= WIDEN;
        }
        if c_hi > m2 {
            m2 *= WIDEN;
        }
        cfg.u_init = Some(g);
        // keep the decay rate fixed across re-solves so a resolved config reproduces the run
        cfg.kappa = KappaChoice::Fixed(report.kappa);
    }
    unreachable!("loop returns on its last pass")
}

/// Lower bound `e^{K T}` with `K = min(0, inf h - theta alpha m2)` and upper
/// bound `e^{max(0, sup h) T} (1 + theta m2^alpha T)`, probed on `[y0, y0 + span]`.
pub fn g_bounds(model: &MarketModel, (_, m2): (f64, f64), span: f64) -> Result<(f64, f64)> {
    let k = model.constants()?;
    let (h_lo, h_hi) = model.sample_range(span, |y| model.h_coef(y, k.delta));
    let t = model.t_horizon;
    let kk = (h_lo - k.theta * k.alpha * m2).min(0.0);
    Ok(((kk * t).exp(), (h_hi.max(0.0) * t).exp() * (1.0 + k.theta * m2.powf(k.alpha) * t)))
}

/// Candidate feedback controls on the shifted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionPolicy {
    /// Fraction of wealth in the stock.
    pub pi: GridFunction,
    /// Consumption rate per unit wealth.
    pub c: GridFunction,
}

impl ConsumptionPolicy {
    fn lookup(&self, z: f64, t: f64) -> (f64, f64) {
        let g = self.pi.grid();
        let (i, j) = (g.nearest_x(z), g.nearest_t(t));
        (self.pi.get(i, j), self.c.get(i, j))
    }
}

/// `pi* = rho a F_y / ((1-gamma) sigma_s F) + lambda / ((1-gamma) sigma_s)`,
/// `c* = F^{1/(gamma-1)}`, with `F = G^delta`.
pub fn extract_policy(model: &MarketModel, g: &GridFunction) -> Result<ConsumptionPolicy> {
    let k = model.constants()?;
    if let Some(&bad) = g.values().iter().find(|&&v| !(v > 0.0)) {
        return Err(invalid(format!("G must be positive, found {bad}")));
    }
    let f = g.map(|v| v.powf(k.delta));
    let fy = fd_derivative_x(&f);
    let grid = *g.grid();
    let gm = model.gamma;
    let mut pi = GridFunction::zeros(grid);
    let mut c = GridFunction::zeros(grid);
    for j in 0..=grid.n_t() {
        for i in 0..=grid.n_x() {
            let y = model.y0 + grid.x(i);
            let s = (model.sigma_s)(y);
            let fv = f.get(i, j);
            pi.set(
                i,
                j,
                model.rho * (model.a)(y) * fy.get(i, j) / ((1.0 - gm) * s * fv) + model.lambda(y) / ((1.0 - gm) * s),
            );
            c.set(i, j, fv.powf(1.0 / (gm - 1.0)));
        }
    }
    Ok(ConsumptionPolicy { pi, c })
}

/// `V(x, y, t) = (x^gamma / gamma) G(y, t)^delta`, with `G` interpolated bilinearly.
pub fn value_function(model: &MarketModel, g: &GridFunction, x: f64, y: f64, t: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("wealth must be positive, got {x}")));
    }
    if y < model.y0 {
        return Err(invalid(format!("factor level {y} lies below the barrier {}", model.y0)));
    }
    let k = model.constants()?;
    Ok(x.powf(model.gamma) / model.gamma * g.interp(y - model.y0, t).powf(k.delta))
}

/// Monte Carlo value of a feedback policy, discounted from `t`.
///
/// Wealth takes log-Euler steps; the factor is absorbed at `y0` with the
/// Brownian-bridge correction, dated at the step midpoint. The running
/// utility uses the left-point rule.
pub fn simulate_consumption(
    model: &MarketModel,
    policy: &ConsumptionPolicy,
    x: f64,
    y: f64,
    t: f64,
    mc: &McParams,
) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(invalid(format!("wealth must be positive, got {x}")));
    }
    let gm = model.gamma;
    let utility = |v: f64| v.powf(gm) / gm;
    if t >= model.t_horizon || y <= model.y0 {
        return Ok((utility(x), 0.0));
    }
    if !(mc.dt > 0.0 && mc.dt < model.t_horizon - t) || mc.n_paths == 0 {
        return Err(invalid("need 0 < dt < T - t and n_paths >= 1"));
    }
    let rho = model.rho;
    let rho_bar = model.rho_bar();
    let horizon = model.t_horizon;
    let n_steps = ((horizon - t) / mc.dt - 1e-9).ceil().max(1.0) as usize;
    let samples: Vec<Result<f64>> = (0..mc.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(mc.seed, path);
            let mut ln_x = x.ln();
            let mut yy = y;
            let mut acc = 0.0;
            for k in 0..n_steps {
                let s = t + k as f64 * mc.dt;
                let s_next = if k + 1 == n_steps { horizon } else { t + (k + 1) as f64 * mc.dt };
                let h = s_next - s;
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.random();
                let wealth = ln_x.exp();
                let (pi, c) = policy.lookup(yy - model.y0, s);
                let disc = (-model.w * (s - t)).exp();
                let a = (model.a)(yy);
                let y_next = yy + (model.g_y)(yy) * h + a * h.sqrt() * (rho * z1 + rho_bar * z2);
                let (za, zb) = (yy - model.y0, y_next - model.y0);
                let crossed = zb <= 0.0 || (mc.bridge && u < (-2.0 * za * zb / (a * a * h)).exp());
                if crossed {
                    let tau = s + 0.5 * h;
                    acc += disc * utility(c * wealth) * 0.5 * h;
                    return Ok(acc + (-model.w * (tau - t)).exp() * utility(wealth));
                }
                acc += disc * utility(c * wealth) * h;
                let sig = (model.sigma_s)(yy);
                ln_x +=
                    ((model.r)(yy) + pi * (model.b)(yy) - c - 0.5 * pi * pi * sig * sig) * h + pi * sig * h.sqrt() * z1;
                if !(ln_x.exp() > 0.0 && ln_x.is_finite()) {
                    return Err(Error::WealthUnderflow { path, t: s_next });
                }
                yy = y_next;
            }
            Ok(acc + (-model.w * (horizon - t)).exp() * utility(ln_x.exp()))
        })
        .collect();
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    Ok(mean_stderr(&samples))
}

impl ConsumptionPolicy {
    /// Same portfolio, consumption rate scaled by `factor`.
    pub fn scale_consumption(&self, factor: f64) -> Self {
        Self { pi: self.pi.clone(), c: self.c.map(|c| c * factor) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_max(k: &TransformConstants, g: f64, lo: f64, hi: f64) -> f64 {
        // log-spaced scan, then local refinement around the best point
        let n = 200_000;
        let (llo, lhi) = (lo.ln(), hi.ln());
        let f = |c: f64| k.theta * (c.powf(k.alpha) - k.alpha * c * g);
        let mut best = (f64::NEG_INFINITY, lo);
        for i in 0..=n {
            let c = (llo + (lhi - llo) * i as f64 / n as f64).exp();
            let v = f(c);
            if v > best.0 {
                best = (v, c);
            }
        }
        let step = (lhi - llo) / n as f64;
        let mut a = best.1 * (-step).exp();
        let mut b = best.1 * step.exp();
        for _ in 0..200 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if f(m1) < f(m2) {
                a = m1;
            } else {
                b = m2;
            }
        }
        f(0.5 * (a + b)).max(best.0)
    }

    #[test]
    fn constants_are_consistent() {
        for (gamma, rho) in [(0.5, 0.0), (0.3, 0.6), (0.8, -0.9)] {
            let k = TransformConstants::new(gamma, rho).unwrap();
            assert!(k.e < 0.0);
            assert!(k.alpha > 0.0 && k.alpha < 1.0);
            assert!(k.theta > 0.0);
            assert!((k.alpha / (k.alpha - 1.0) - k.e).abs() < 1e-12);
        }
        assert!(TransformConstants::new(1.0, 0.0).is_err());
        assert!(TransformConstants::new(0.5, 1.0).is_err());
        assert!(TransformConstants::new(0.0, 0.5).is_err());
    }

    #[test]
    fn inner_max_at_unit_g() {
        let k = TransformConstants::new(0.4, 0.3).unwrap();
        let (v, c) = k.inner_max(1.0, 0.5, 2.0);
        assert_eq!(c, 1.0);
        assert!((v - k.theta * (1.0 - k.alpha)).abs() < 1e-15);
    }

    #[test]
    fn calibrated_max_reproduces_source_term() {
        for (gamma, rho) in [(0.5, 0.0), (0.2, 0.7), (0.85, -0.4)] {
            let k = TransformConstants::new(gamma, rho).unwrap();
            for g in [0.5f64, 1.0, 2.0] {
                let want = (1.0 - gamma) / k.delta * g.powf(k.e);
                let (closed, _) = k.inner_max(g, 1e-6, 1e6);
                let scanned = dense_max(&k, g, 1e-6, 1e6);
                assert!((closed - want).abs() < 1e-10, "{closed} vs {want}");
                assert!((scanned - want).abs() < 1e-10, "{scanned} vs {want}");
            }
        }
    }

    #[test]
    fn boundary_is_one_and_policy_at_horizon_is_myopic() {
        let m = MarketModel::demo();
        let p = build_g_problem(&m, (0.5, 2.0), 3.0).unwrap();
        assert_eq!((p.boundary)(0.0, 0.3), 1.0);
        assert_eq!((p.boundary)(1.7, 1.0), 1.0);
        let g = Grid2D::new(3.0, 60, 1.0, 40).unwrap();
        let sol = solve_g(&m, &g, &SolveConfig::default()).unwrap();
        for j in 0..=40 {
            assert_eq!(sol.g.get(0, j), 1.0);
        }
        for i in 0..=60 {
            assert_eq!(sol.g.get(i, 40), 1.0);
        }
        let pol = extract_policy(&m, &sol.g).unwrap();
        let myopic = m.lambda(0.0) / ((1.0 - m.gamma) * 0.2);
        for i in 0..=60 {
            assert_eq!(pol.c.get(i, 40), 1.0);
            assert!((pol.pi.get(i, 40) - myopic).abs() < 1e-12);
        }
        let (c_lo, c_hi) = sol.c_range();
        assert!(sol.bounds.0 <= c_lo && c_hi <= sol.bounds.1);
    }

    #[test]
    fn zero_correlation_portfolio_is_myopic() {
        let m = MarketModel::constant(0.02, 0.06, 0.25, 0.3, 0.1).with_barrier(1.0);
        let g = Grid2D::new(3.0, 60, 1.0, 40).unwrap();
        let sol = solve_g(&m, &g, &SolveConfig::default()).unwrap();
        let pol = extract_policy(&m, &sol.g).unwrap();
        let myopic = 0.06 / 0.25 / (0.5 * 0.25);
        assert!(pol.pi.values().iter().all(|&p| (p - myopic).abs() < 1e-12));
    }

    // Merton reduction: phi' + nu phi + 1 = 0, phi(T) = 1, F = phi^{1-gamma}
    fn merton_f(m: &MarketModel, t: f64) -> f64 {
        let (r, b, s) = ((m.r)(0.0), (m.b)(0.0), (m.sigma_s)(0.0));
        let l = b / s;
        let g = m.gamma;
        let k = g * l * l / (2.0 * (1.0 - g)) + g * r - m.w;
        let nu = k / (1.0 - g);
        let tau = m.t_horizon - t;
        let phi = (nu * tau).exp() * (1.0 + 1.0 / nu) - 1.0 / nu;
        phi.powf(1.0 - g)
    }

    #[test]
    fn far_barrier_matches_merton() {
        let m = MarketModel::constant(0.03, 0.06, 0.2, 0.2, 0.0).with_impatience(0.01).with_gamma(0.4);
        let g = Grid2D::new(4.0, 80, 1.0, 100).unwrap();
        let sol = solve_g(&m, &g, &SolveConfig::default()).unwrap();
        let pol = extract_policy(&m, &sol.g).unwrap();
        for t in [0.0, 0.5] {
            let f = merton_f(&m, t);
            let j = g.nearest_t(t);
            assert!((sol.g.get(40, j) / f - 1.0).abs() < 5e-3);
            assert!((pol.c.get(40, j) / f.powf(1.0 / (m.gamma - 1.0)) - 1.0).abs() < 5e-3);
            let v = value_function(&m, &sol.g, 1.0, 2.0, t).unwrap();
            assert!((v * m.gamma / f - 1.0).abs() < 5e-3);
        }
    }

    #[test]
    fn value_function_boundaries_and_homogeneity() {
        let m = MarketModel::demo();
        let g = Grid2D::new(3.0, 60, 1.0, 40).unwrap();
        let sol = solve_g(&m, &g, &SolveConfig::default()).unwrap();
        let u = |x: f64| x.powf(m.gamma) / m.gamma;
        assert_eq!(value_function(&m, &sol.g, 2.0, 1.3, 1.0).unwrap(), u(2.0));
        assert_eq!(value_function(&m, &sol.g, 2.0, 0.0, 0.4).unwrap(), u(2.0));
        let v1 = value_function(&m, &sol.g, 1.5, 1.0, 0.2).unwrap();
        let v2 = value_function(&m, &sol.g, 3.0, 1.0, 0.2).unwrap();
        assert!((v2 - 2f64.powf(m.gamma) * v1).abs() < 1e-14 * v2);
        assert!(value_function(&m, &sol.g, 0.0, 1.0, 0.2).is_err());
        assert!(value_function(&m, &sol.g, 1.0, -0.1, 0.2).is_err());
    }

    #[test]
    fn bounds_hold() {
        let m = MarketModel::demo();
        let g = Grid2D::new(3.0, 60, 1.0, 40).unwrap();
        let sol = solve_g(&m, &g, &SolveConfig::default()).unwrap();
        let (lo, hi) = g_bounds(&m, sol.bounds, 3.0).unwrap();
        assert!(sol.g.min() >= lo - 1e-6);
        assert!(sol.g.max() <= hi);
    }

    #[test]
    fn self_consistency_widens_when_needed() {
        // strong impatience pushes c* far above the starting bound
        let m = MarketModel::constant(0.0, 0.0, 0.2, 0.3, 0.0).with_impatience(3.0).with_horizon(3.0);
        let g = Grid2D::new(3.0, 60, 3.0, 60).unwrap();
        let cfg = SolveConfig { kappa: KappaChoice::Fixed(40.0), max_iter: 400, ..SolveConfig::default() };
        let sol = solve_g(&m, &g, &cfg).unwrap();
        assert!(sol.widenings >= 1);
        let (c_lo, c_hi) = sol.c_range();
        assert!(sol.bounds.0 <= c_lo && c_hi <= sol.bounds.1);
    }

    #[test]
    fn trivial_simulations() {
        let m = MarketModel::demo();
        let g = Grid2D::new(3.0, 30, 1.0, 20).unwrap();
        let pol = ConsumptionPolicy { pi: GridFunction::zeros(g), c: GridFunction::zeros(g) };
        let mc = McParams::new(0.01, 100, 3);
        let u = 2f64.sqrt() / 0.5;
        assert_eq!(simulate_consumption(&m, &pol, 2.0, 1.0, 1.0, &mc).unwrap(), (u, 0.0));
        assert_eq!(simulate_consumption(&m, &pol, 2.0, 0.0, 0.2, &mc).unwrap(), (u, 0.0));
        assert!(simulate_consumption(&m, &pol, -1.0, 1.0, 0.2, &mc).is_err());
    }

    #[test]
    fn simulation_matches_value() {
        let m = MarketModel::demo();
        let g = Grid2D::new(3.0, 120, 1.0, 100).unwrap();
        let sol = solve_g(&m, &g, &SolveConfig::default()).unwrap();
        let pol = extract_policy(&m, &sol.g).unwrap();
        let mc = McParams::new(2e-3, 20_000, 21);
        let (mean, se) = simulate_consumption(&m, &pol, 1.0, 0.6, 0.0, &mc).unwrap();
        let v = value_function(&m, &sol.g, 1.0, 0.6, 0.0).unwrap();
        assert!((mean - v).abs() <= (3.0 * se).max(0.015 * v.abs()), "{mean} ± {se} vs {v}");
    }

    proptest! {
        #[test]
        fn exponent_sign_and_alpha_range(gamma in 0.01..0.99f64, rho in -0.99..0.99f64) {
            let k = TransformConstants::new(gamma, rho).unwrap();
            prop_assert!(k.e < 0.0);
            prop_assert!(k.alpha > 0.0 && k.alpha < 1.0);
            prop_assert!((k.c_interior(1.7).powf(k.alpha - 1.0) - 1.7).abs() < 1e-9);
        }
    }
}
