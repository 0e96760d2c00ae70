//! Batch runs driven by a JSON config: coefficient expressions in, CSV grids
//! and JSON summaries out.
//!
//! Exit codes: 0 on success, 2 when an iterative solve stopped without
//! converging, 1 on input errors.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::consumption::{extract_policy, g_bounds, simulate_consumption, solve_g, value_function, MarketModel, YCoef};
use crate::diffusion::{bm_stopped_time_analytic, hitting_lipschitz_probe, simulate_paths, DiffusionSpec, McParams};
use crate::dividend::{self, DividendModel};
use crate::error::{invalid, Error, Result};
use crate::expr::{parse_expr, Env, Expr, Var};
use crate::fixedpoint::{picard_solve, KappaChoice, SemilinearProblem, SolveConfig};
use crate::grid::Grid2D;
use crate::hamiltonian::{ControlSet, HJBCoefficients};
use crate::linear_pde::{default_x_max, solve_fd, truncation_bound, FdScheme, LinearProblem, LinearReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Values chosen during a run; informational, ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<Resolved>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    /// Truncation level; chosen from the volatility cap when absent.
    #[serde(default)]
    pub x_max: Option<f64>,
    pub n_x: usize,
    pub n_t: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { x_max: None, n_x: 200, n_t: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "yes")]
    pub bridge: bool,
}

fn yes() -> bool {
    true
}

impl Default for McConfig {
    fn default() -> Self {
        Self { dt: 1e-3, n_paths: 10_000, seed: 1, bridge: true }
    }
}

impl McConfig {
    fn params(&self) -> McParams {
        let p = McParams::new(self.dt, self.n_paths, self.seed);
        if self.bridge {
            p
        } else {
            p.without_bridge()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub kappa: KappaChoice,
    pub tol: f64,
    pub max_iter: usize,
    pub theta_scheme: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { kappa: KappaChoice::AUTO, tol: 1e-9, max_iter: 200, theta_scheme: 0.5 }
    }
}

impl SolverParams {
    fn config(&self, query_x: f64) -> Result<SolveConfig> {
        if !(self.tol > 0.0) {
            return Err(invalid("solver.tol must be positive"));
        }
        if !(0.0..=1.0).contains(&self.theta_scheme) {
            return Err(invalid("solver.theta_scheme must lie in [0, 1]"));
        }
        Ok(SolveConfig {
            kappa: self.kappa,
            tol: self.tol,
            max_iter: self.max_iter,
            u_init: None,
            scheme: FdScheme::theta(self.theta_scheme),
            query_x: Some(query_x),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub x_max: Option<f64>,
    pub kappa: Option<f64>,
    pub truncation_bound: Option<f64>,
    pub sigma_floor: Option<f64>,
    pub sigma_cap: Option<f64>,
}

/// Control set of a coefficient-form Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Controls {
    Interval { lo: f64, hi: f64 },
    Finite { values: Vec<f64> },
}

impl Controls {
    fn set(&self) -> Result<ControlSet> {
        match self {
            Controls::Interval { lo, hi } => ControlSet::interval(*lo, *hi),
            Controls::Finite { values } => ControlSet::finite(values.clone()),
        }
    }
}

fn one() -> String {
    "1".into()
}

fn zero() -> String {
    "0".into()
}

fn default_probe_points() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 4.0]
}

fn default_epsilon() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Problem {
    /// `E[tau ∧ T]` by simulation.
    HittingTime {
        #[serde(default = "one")]
        sigma: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<String>,
        x: f64,
        #[serde(default)]
        t: f64,
        horizon: f64,
    },
    /// `D_t u + ½ sigma² D_x² u + b D_x u + f = 0`, `u = beta` on the boundary.
    SolveLinear {
        #[serde(default = "one")]
        sigma: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<String>,
        #[serde(default = "zero")]
        source: String,
        #[serde(default = "zero")]
        boundary: String,
        horizon: f64,
        #[serde(default = "unit")]
        query_x: f64,
        #[serde(default)]
        probes: Vec<[f64; 2]>,
    },
    /// `H = max_delta (i p + h u + f)` with coefficients in `x, t, delta`.
    SolveHjb {
        #[serde(default = "one")]
        sigma: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<String>,
        #[serde(default = "zero")]
        i: String,
        #[serde(default = "zero")]
        h: String,
        #[serde(default = "zero")]
        f: String,
        controls: Controls,
        #[serde(default = "zero")]
        boundary: String,
        horizon: f64,
        #[serde(default = "unit")]
        query_x: f64,
        #[serde(default)]
        probes: Vec<[f64; 2]>,
    },
    Dividend {
        /// Surplus drift in `x, t`.
        g: String,
        #[serde(default = "one")]
        sigma: String,
        r: f64,
        /// Running reward in `c, x`.
        reward: String,
        /// Payoff at ruin and horizon in `x`.
        #[serde(default = "zero")]
        payoff: String,
        m1: f64,
        m2: f64,
        horizon: f64,
        probes: Vec<[f64; 2]>,
    },
    Consumption {
        /// Coefficients in `y`.
        r: String,
        b: String,
        sigma_s: String,
        a: String,
        #[serde(default = "zero")]
        g: String,
        rho: f64,
        #[serde(default)]
        y0: f64,
        gamma: f64,
        #[serde(default)]
        w: f64,
        horizon: f64,
        /// `(x, y, t)` points for value and simulation probes.
        probes: Vec<[f64; 3]>,
    },
    ValidateAssumptions {
        #[serde(default = "one")]
        sigma: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<String>,
        horizon: f64,
        /// Required volatility floor.
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_probe_points")]
        probe_points: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        i: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        controls: Option<Controls>,
    },
}

fn unit() -> f64 {
    1.0
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::HittingTime { .. } => "hitting-time",
            Problem::SolveLinear { .. } => "solve-linear",
            Problem::SolveHjb { .. } => "solve-hjb",
            Problem::Dividend { .. } => "dividend",
            Problem::Consumption { .. } => "consumption",
            Problem::ValidateAssumptions { .. } => "validate-assumptions",
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NotConverged,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 2,
            Status::Error => 1,
        }
    }
}

/// Files produced by a run, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub status: Status,
    pub files: Vec<(String, String)>,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, s)| s.as_str())
    }
}

/// Parses `text` and checks that it only mentions `allowed` variables.
pub fn parse_coef(field: &str, text: &str, allowed: &[Var]) -> Result<Arc<Expr>> {
    let e = parse_expr(text).map_err(|e| invalid(format!("{field}: {e}")))?;
    for v in [Var::X, Var::T, Var::Y, Var::C, Var::Delta] {
        if e.uses(v) && !allowed.contains(&v) {
            return Err(invalid(format!("{field}: variable '{}' is not available here", v.name())));
        }
    }
    Ok(Arc::new(e))
}

fn xt_fn(e: &Arc<Expr>) -> impl Fn(f64, f64) -> f64 + Send + Sync + 'static {
    let e = e.clone();
    move |x, t| e.eval(&Env::xt(x, t)).unwrap_or(f64::NAN)
}

fn y_fn(e: &Arc<Expr>) -> YCoef {
    let e = e.clone();
    Arc::new(move |y| e.eval(&Env { y: Some(y), ..Env::default() }).unwrap_or(f64::NAN))
}

/// Evaluates on a lattice and reports the first failure with its location.
fn check_xt(field: &str, e: &Expr, x_max: f64, horizon: f64) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in 0..=200 {
        let x = x_max * a as f64 / 200.0;
        for b in 0..=10 {
            let t = horizon * b as f64 / 10.0;
            let v = e.eval_xt(x, t).map_err(|err| invalid(format!("{field}: {err}")))?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo, hi))
}

struct Vol {
    expr: Arc<Expr>,
    drift: Option<Arc<Expr>>,
}

impl Vol {
    fn parse(sigma: &str, drift: &Option<String>) -> Result<Self> {
        Ok(Self {
            expr: parse_coef("sigma", sigma, &[Var::X, Var::T])?,
            drift: drift.as_deref().map(|d| parse_coef("drift", d, &[Var::X, Var::T])).transpose()?,
        })
    }

    /// Measured floor and cap on `[0, x_max] x [0, T]`.
    fn bounds(&self, x_max: f64, horizon: f64) -> Result<(f64, f64)> {
        check_xt("sigma", &self.expr, x_max, horizon)
    }

    fn spec(&self, x_max: f64, horizon: f64) -> Result<DiffusionSpec> {
        let (floor, cap) = self.bounds(x_max, horizon)?;
        if !(floor > 0.0) {
            return Err(invalid(format!("sigma must stay positive on [0, {x_max}], found {floor}")));
        }
        let mut spec = DiffusionSpec::new(xt_fn(&self.expr), floor, cap);
        if let Some(d) = &self.drift {
            check_xt("drift", d, x_max, horizon)?;
            spec = spec.with_drift(xt_fn(d));
        }
        Ok(spec)
    }

    /// `x_max` so that the truncation bound at `query` stays below `1e-6`.
    fn resolve_x_max(&self, given: Option<f64>, query: f64, horizon: f64) -> Result<f64> {
        if let Some(x) = given {
            if !(x > 0.0 && x.is_finite()) {
                return Err(invalid(format!("grid.x_max must be positive, got {x}")));
            }
            return Ok(x);
        }
        let mut x_max = 2.0 * query + 1.0;
        for _ in 0..20 {
            let (_, cap) = self.bounds(x_max, horizon)?;
            let next = default_x_max(query, cap, horizon);
            if next <= x_max {
                return Ok(next);
            }
            x_max = next;
        }
        Err(invalid("could not choose x_max: the volatility keeps growing with x"))
    }
}

struct Ctx {
    files: Vec<(String, String)>,
    resolved: Resolved,
    status: Status,
}

impl Ctx {
    fn csv(&mut self, name: &str, u: &crate::grid::GridFunction) {
        self.files.push((name.to_string(), u.to_csv_string()));
    }
}

fn grid_for(params: &GridParams, x_max: f64, horizon: f64) -> Result<Grid2D> {
    Grid2D::new(x_max, params.n_x, horizon, params.n_t)
}

fn probes_xt(u: &crate::grid::GridFunction, probes: &[[f64; 2]]) -> Vec<Value> {
    probes.iter().map(|&[x, t]| json!({"x": x, "t": t, "value": u.interp(x, t)})).collect()
}

/// Runs a config in memory.
pub fn execute(config: &RunConfig) -> RunOutput {
    let mut ctx = Ctx {
        files: Vec::new(),
        resolved: Resolved { x_max: None, kappa: None, truncation_bound: None, sigma_floor: None, sigma_cap: None },
        status: Status::Ok,
    };
    let kind = config.problem.kind();
    let summary = match dispatch(config, &mut ctx) {
        Ok(mut s) => {
            s["kind"] = json!(kind);
            s["status"] = json!(ctx.status);
            s
        }
        Err(e) => {
            ctx.files.clear();
            ctx.status = Status::Error;
            json!({"kind": kind, "status": Status::Error, "error": e.to_string()})
        }
    };
    ctx.files.push(("summary.json".into(), pretty(&summary)));
    if ctx.status != Status::Error {
        let mut resolved = config.clone();
        resolved.output_dir = None;
        resolved.grid.x_max = ctx.resolved.x_max.or(config.grid.x_max);
        if let Some(k) = ctx.resolved.kappa {
            resolved.solver.kappa = KappaChoice::Fixed(k);
        }
        resolved.resolved = Some(ctx.resolved.clone());
        ctx.files.push(("resolved_config.json".into(), pretty(&resolved)));
    }
    RunOutput { status: ctx.status, files: ctx.files }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}"));
    s.push('\n');
    s
}

/// Runs a config and writes its files into `out_dir`; returns the exit code.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<i32> {
    let out = execute(config);
    write_output(&out, out_dir)?;
    Ok(out.status.exit_code())
}

pub fn write_output(out: &RunOutput, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    for (name, body) in &out.files {
        fs::write(out_dir.join(name), body)?;
    }
    Ok(())
}

/// Summary for a run that failed before a config was available.
pub fn error_summary(kind: &str, err: &Error) -> String {
    pretty(&json!({"kind": kind, "status": Status::Error, "error": err.to_string()}))
}

fn dispatch(config: &RunConfig, ctx: &mut Ctx) -> Result<Value> {
    let mc = config.mc.params();
    match &config.problem {
        Problem::HittingTime { sigma, drift, x, t, horizon } => {
            let vol = Vol::parse(sigma, drift)?;
            let x_max = vol.resolve_x_max(config.grid.x_max, *x, *horizon)?;
            let spec = vol.spec(x_max, *horizon)?;
            ctx.resolved.sigma_floor = Some(spec.sigma_floor());
            ctx.resolved.sigma_cap = Some(spec.sigma_cap());
            let batch = simulate_paths(&spec, *x, *t, *horizon, &mc)?;
            let mut s = json!({"x": x, "t": t, "horizon": horizon, "paths": batch.summary()});
            if *vol.expr == Expr::Num(1.0) && vol.drift.is_none() {
                s["analytic"] = json!(bm_stopped_time_analytic(*x, *t, *horizon)?);
            }
            Ok(s)
        }
        Problem::SolveLinear { sigma, drift, source, boundary, horizon, query_x, probes } => {
            let vol = Vol::parse(sigma, drift)?;
            let x_max = vol.resolve_x_max(config.grid.x_max, *query_x, *horizon)?;
            let spec = vol.spec(x_max, *horizon)?;
            let f = parse_coef("source", source, &[Var::X, Var::T])?;
            let beta = parse_coef("boundary", boundary, &[Var::X, Var::T])?;
            check_xt("source", &f, x_max, *horizon)?;
            check_xt("boundary", &beta, x_max, *horizon)?;
            let grid = grid_for(&config.grid, x_max, *horizon)?;
            let scheme = FdScheme::theta(config.solver.theta_scheme);
            let problem = LinearProblem::new(spec.clone(), xt_fn(&f), xt_fn(&beta));
            let u = solve_fd(&problem, &grid, scheme)?;
            let report = LinearReport::new(&grid, scheme, *query_x, spec.sigma_cap());
            ctx.resolved.x_max = Some(x_max);
            ctx.resolved.truncation_bound = Some(report.truncation_bound);
            ctx.resolved.sigma_floor = Some(spec.sigma_floor());
            ctx.resolved.sigma_cap = Some(spec.sigma_cap());
            ctx.csv("value.csv", &u);
            Ok(json!({"report": report, "probes": probes_xt(&u, probes)}))
        }
        Problem::SolveHjb { sigma, drift, i, h, f, controls, boundary, horizon, query_x, probes } => {
            let vol = Vol::parse(sigma, drift)?;
            let x_max = vol.resolve_x_max(config.grid.x_max, *query_x, *horizon)?;
            let spec = vol.spec(x_max, *horizon)?;
            let set = controls.set()?;
            let vars = [Var::X, Var::T, Var::Delta];
            let coef = |name: &str, text: &str| -> Result<_> {
                let e = parse_coef(name, text, &vars)?;
                let (lo, hi) = set.bounds();
                for d in [lo, 0.5 * (lo + hi), hi] {
                    e.eval(&Env { x: Some(0.0), t: Some(0.0), delta: Some(d), ..Env::default() })
                        .map_err(|err| invalid(format!("{name}: {err}")))?;
                }
                Ok(move |x, t, d| {
                    e.eval(&Env { x: Some(x), t: Some(t), delta: Some(d), ..Env::default() }).unwrap_or(f64::NAN)
                })
            };
            let coeffs = HJBCoefficients::new(coef("i", i)?, coef("h", h)?, coef("f", f)?, set);
            let beta = parse_coef("boundary", boundary, &[Var::X, Var::T])?;
            check_xt("boundary", &beta, x_max, *horizon)?;
            let problem = SemilinearProblem::new(spec, Arc::new(coeffs), xt_fn(&beta));
            let grid = grid_for(&config.grid, x_max, *horizon)?;
            let (u, policy, report) = picard_solve(&problem, &grid, &config.solver.config(*query_x)?)?;
            record_solve(ctx, x_max, &report, &problem.spec);
            ctx.csv("value.csv", &u);
            if let Some(p) = &policy {
                ctx.csv("policy.csv", &p.controls);
            }
            Ok(json!({"report": report, "probes": probes_xt(&u, probes)}))
        }
        Problem::Dividend { g, sigma, r, reward, payoff, m1, m2, horizon, probes } => {
            let vol = Vol::parse(sigma, &None)?;
            let query = probes.iter().map(|p| p[0]).fold(1.0, f64::max);
            let x_max = vol.resolve_x_max(config.grid.x_max, query, *horizon)?;
            let spec = vol.spec(x_max, *horizon)?;
            let g = parse_coef("g", g, &[Var::X, Var::T])?;
            check_xt("g", &g, x_max, *horizon)?;
            let u = parse_coef("reward", reward, &[Var::C, Var::X])?;
            let beta = parse_coef("payoff", payoff, &[Var::X])?;
            let reward_fn = {
                let u = u.clone();
                move |c, x| u.eval(&Env { c: Some(c), x: Some(x), ..Env::default() }).unwrap_or(f64::NAN)
            };
            for c in [*m1, 0.5 * (m1 + m2), *m2] {
                u.eval(&Env { c: Some(c), x: Some(0.0), ..Env::default() })
                    .map_err(|e| invalid(format!("reward: {e}")))?;
            }
            check_xt("payoff", &beta, x_max, *horizon)?;
            let model = DividendModel::new(
                xt_fn(&g),
                spec.clone(),
                *r,
                reward_fn,
                move |x| beta.eval_xt(x, 0.0).unwrap_or(f64::NAN),
                (*m1, *m2),
                *horizon,
            );
            let grid = grid_for(&config.grid, x_max, *horizon)?;
            let (v, policy, report) = dividend::solve(&model, &grid, &config.solver.config(query)?)?;
            record_solve(ctx, x_max, &report, &spec);
            ctx.csv("value.csv", &v);
            ctx.csv("policy.csv", &policy.controls);
            let mut mc_value = Vec::new();
            let mut stderr = Vec::new();
            if config.mc.n_paths > 0 {
                for &[x, t] in probes {
                    let (m, se) = dividend::simulate_policy(&model, &policy, x, t, &mc)?;
                    mc_value.push(m);
                    stderr.push(se);
                }
            }
            Ok(
                json!({"value_at_probes": probes_xt(&v, probes), "mc_value": mc_value, "stderr": stderr, "report": report}),
            )
        }
        Problem::Consumption { r, b, sigma_s, a, g, rho, y0, gamma, w, horizon, probes } => {
            let ys = [Var::Y];
            let model = MarketModel {
                r: y_fn(&parse_coef("r", r, &ys)?),
                b: y_fn(&parse_coef("b", b, &ys)?),
                sigma_s: y_fn(&parse_coef("sigma_s", sigma_s, &ys)?),
                a: y_fn(&parse_coef("a", a, &ys)?),
                g_y: y_fn(&parse_coef("g", g, &ys)?),
                rho: *rho,
                y0: *y0,
                gamma: *gamma,
                w: *w,
                t_horizon: *horizon,
            };
            model.constants()?;
            let query = probes.iter().map(|p| p[1] - y0).fold(1.0, f64::max);
            let span = match config.grid.x_max {
                Some(s) => s,
                None => {
                    let a_cap = (0..=400).map(|k| (model.a)(y0 + 4.0 * query * k as f64 / 400.0)).fold(0.0, f64::max);
                    default_x_max(query, a_cap, *horizon)
                }
            };
            let grid = grid_for(&config.grid, span, *horizon)?;
            let sol = solve_g(&model, &grid, &config.solver.config(query)?)?;
            let a_spec = DiffusionSpec::homogeneous(
                {
                    let a = model.a.clone();
                    let y0 = *y0;
                    move |z| a(y0 + z)
                },
                0.0,
                (0..=400).map(|k| (model.a)(y0 + span * k as f64 / 400.0)).fold(0.0, f64::max),
            );
            record_solve(ctx, span, &sol.report, &a_spec);
            let policy = extract_policy(&model, &sol.g)?;
            ctx.csv("value.csv", &sol.g);
            ctx.csv("f.csv", &sol.g.map(|v| v.powf(sol.constants.delta)));
            ctx.csv("policy.csv", &policy.c);
            ctx.csv("portfolio.csv", &policy.pi);
            let mut value_probes = Vec::new();
            let mut mc_value = Vec::new();
            let mut stderr = Vec::new();
            for &[x, y, t] in probes {
                value_probes.push(json!({"x": x, "y": y, "t": t, "value": value_function(&model, &sol.g, x, y, t)?}));
                if config.mc.n_paths > 0 {
                    let (m, se) = simulate_consumption(&model, &policy, x, y, t, &mc)?;
                    mc_value.push(m);
                    stderr.push(se);
                }
            }
            let (lower, upper) = g_bounds(&model, sol.bounds, span)?;
            Ok(json!({
                "bounds_used": [sol.bounds.0, sol.bounds.1],
                "widenings": sol.widenings,
                "transform_constants": sol.constants,
                "g_range": [sol.g.min(), sol.g.max()],
                "g_bounds": [lower, upper],
                "value_probes": value_probes,
                "mc_value": mc_value,
                "stderr": stderr,
                "report": sol.report,
            }))
        }
        Problem::ValidateAssumptions { sigma, drift, horizon, epsilon, probe_points, i, h, f, controls } => {
            let vol = Vol::parse(sigma, drift)?;
            let query = probe_points.iter().copied().fold(1.0, f64::max);
            let x_max = config.grid.x_max.unwrap_or(query + 4.0);
            ctx.resolved.x_max = Some(x_max);
            Ok(validate_assumptions(&vol, x_max, *horizon, *epsilon, probe_points, [i, h, f], controls.as_ref(), &mc)?)
        }
    }
}

fn record_solve(ctx: &mut Ctx, x_max: f64, report: &crate::fixedpoint::SolveReport, spec: &DiffusionSpec) {
    ctx.resolved.x_max = Some(x_max);
    ctx.resolved.kappa = Some(report.kappa);
    ctx.resolved.truncation_bound = Some(report.truncation_bound);
    ctx.resolved.sigma_floor = Some(spec.sigma_floor());
    ctx.resolved.sigma_cap = Some(spec.sigma_cap());
    if !report.converged {
        ctx.status = Status::NotConverged;
    }
}

/// Largest adjacent difference quotient in `x` on a dense lattice.
fn lipschitz_x(f: &dyn Fn(f64, f64) -> Option<f64>, x_max: f64, horizon: f64) -> Option<f64> {
    const N: usize = 20_000;
    let h = x_max / N as f64;
    let mut q: f64 = 0.0;
    for b in 0..=10 {
        let t = horizon * b as f64 / 10.0;
        let mut prev = f(0.0, t)?;
        for a in 1..=N {
            let v = f(a as f64 * h, t)?;
            q = q.max((v - prev).abs() / h);
            prev = v;
        }
    }
    Some(q)
}

#[allow(clippy::too_many_arguments)]
fn validate_assumptions(
    vol: &Vol,
    x_max: f64,
    horizon: f64,
    epsilon: f64,
    probe_points: &[f64],
    [i, h, f]: [&Option<String>; 3],
    controls: Option<&Controls>,
    mc: &McParams,
) -> Result<Value> {
    let mut warnings: Vec<String> = Vec::new();
    let (floor, cap) = vol.bounds(x_max, horizon)?;
    let sig = vol.expr.clone();
    let lip = lipschitz_x(&|x, t| sig.eval_xt(x, t).ok(), x_max, horizon).unwrap_or(f64::NAN);
    let floor_ok = floor >= epsilon;
    if !floor_ok {
        warnings.push(format!("volatility floor violated: inf sigma = {floor} < epsilon = {epsilon}"));
    }
    let mut sigma_report =
        json!({"epsilon": epsilon, "inf": floor, "sup": cap, "lipschitz_x": lip, "floor_ok": floor_ok});
    let mut drift_report = Value::Null;
    if let Some(d) = &vol.drift {
        let (lo, hi) = check_xt("drift", d, x_max, horizon)?;
        let dd = d.clone();
        drift_report =
            json!({"inf": lo, "sup": hi, "lipschitz_x": lipschitz_x(&|x, t| dd.eval_xt(x, t).ok(), x_max, horizon)});
    }
    // the simulation needs a usable diffusion; a zero floor is clamped for the probe only
    let spec = {
        let e = vol.expr.clone();
        let mut s = DiffusionSpec::new(move |x, t| e.eval_xt(x, t).unwrap_or(f64::NAN), floor.max(0.0), cap);
        if let Some(d) = &vol.drift {
            s = s.with_drift(xt_fn(d));
        }
        s
    };
    let mut points: Vec<f64> = probe_points.to_vec();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let hitting = hitting_lipschitz_probe(&spec, &points, 0.0, horizon, mc)?;
    let brownian_bound = (2.0 * horizon / std::f64::consts::PI).sqrt();
    let mut coefficients = Value::Null;
    if i.is_some() || h.is_some() || f.is_some() {
        let set = controls.map(Controls::set).transpose()?.unwrap_or(ControlSet::Finite(vec![0.0]));
        let (lo, hi) = set.bounds();
        let deltas: Vec<f64> = match &set {
            ControlSet::Finite(v) => v.clone(),
            ControlSet::Interval { .. } => (0..=8).map(|k| lo + (hi - lo) * k as f64 / 8.0).collect(),
        };
        let mut out = serde_json::Map::new();
        for (name, text) in [("i", i), ("h", h), ("f", f)] {
            let Some(text) = text else { continue };
            let e = parse_coef(name, text, &[Var::X, Var::T, Var::Delta])?;
            let mut sup: f64 = 0.0;
            let mut lip: f64 = 0.0;
            for &d in &deltas {
                let ev =
                    |x: f64, t: f64| e.eval(&Env { x: Some(x), t: Some(t), delta: Some(d), ..Env::default() }).ok();
                match lipschitz_x(&ev, x_max, horizon) {
                    Some(q) => lip = lip.max(q),
                    None => {
                        warnings.push(format!("{name} is undefined somewhere on the probe lattice at delta = {d}"));
                        lip = f64::NAN;
                    }
                }
                for a in 0..=200 {
                    for b in 0..=10 {
                        if let Some(v) = ev(x_max * a as f64 / 200.0, horizon * b as f64 / 10.0) {
                            sup = sup.max(v.abs());
                        }
                    }
                }
            }
            out.insert(name.into(), json!({"sup_abs": sup, "lipschitz_x": lip}));
        }
        coefficients = Value::Object(out);
    }
    if !(lip.is_finite()) {
        warnings.push("volatility is undefined somewhere on the probe lattice".into());
    }
    sigma_report["lipschitz_finite"] = json!(lip.is_finite());
    Ok(json!({
        "pass": warnings.is_empty(),
        "warnings": warnings,
        "x_max": x_max,
        "sigma": sigma_report,
        "drift": drift_report,
        "hitting_lipschitz": {
            "quotient": hitting.quotient,
            "max_stderr": hitting.max_stderr(),
            "brownian_reference": brownian_bound,
            "x_values": hitting.x_values,
            "means": hitting.means,
            "stderrs": hitting.stderrs,
        },
        "coefficients": coefficients,
        "truncation_bound_at_probe_max": truncation_bound(points[points.len() - 1], x_max, cap.max(f64::MIN_POSITIVE), horizon),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::from_json(text).unwrap()
    }

    #[test]
    fn zero_linear_problem_gives_zero_grid() {
        let c = cfg(
            r#"{"problem": {"kind": "solve-linear", "horizon": 1.0}, "grid": {"x_max": 4.0, "n_x": 20, "n_t": 10}}"#,
        );
        let out = execute(&c);
        assert_eq!(out.status, Status::Ok);
        let csv = out.file("value.csv").unwrap();
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.00000000000e0")));
        assert_eq!(csv.lines().count(), 1 + 21 * 11);
    }

    #[test]
    fn hitting_time_from_the_barrier() {
        let c = cfg(
            r#"{"problem": {"kind": "hitting-time", "x": 0.0, "t": 0.25, "horizon": 1.0}, "mc": {"dt": 0.01, "n_paths": 100, "seed": 3}}"#,
        );
        let out = execute(&c);
        assert_eq!(out.status, Status::Ok);
        let s: Value = serde_json::from_str(out.file("summary.json").unwrap()).unwrap();
        assert_eq!(s["paths"]["mean_tau"], json!(0.25));
        assert_eq!(s["analytic"], json!(0.25));
    }

    #[test]
    fn input_errors_exit_with_one() {
        let c = cfg(r#"{"problem": {"kind": "solve-linear", "source": "1 +", "horizon": 1.0}}"#);
        let out = execute(&c);
        assert_eq!(out.status.exit_code(), 1);
        let s: Value = serde_json::from_str(out.file("summary.json").unwrap()).unwrap();
        assert!(s["error"].as_str().unwrap().contains("byte"));
        let c = cfg(r#"{"problem": {"kind": "solve-linear", "source": "y", "horizon": 1.0}}"#);
        assert_eq!(execute(&c).status, Status::Error);
        let c = cfg(r#"{"problem": {"kind": "solve-linear", "sigma": "x", "horizon": 1.0}}"#);
        assert_eq!(execute(&c).status, Status::Error);
        assert!(RunConfig::from_json(r#"{"problem": {"kind": "nope"}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"problem": {"kind": "solve-linear", "horizon": 1, "extra": 2}}"#).is_err());
    }

    #[test]
    fn non_convergence_exits_with_two() {
        let c = cfg(r#"{
            "problem": {"kind": "solve-hjb", "h": "-1", "f": "1 + delta", "controls": {"lo": 0, "hi": 1}, "horizon": 1.0},
            "grid": {"x_max": 4.0, "n_x": 20, "n_t": 20},
            "solver": {"kappa": 10, "tol": 1e-14, "max_iter": 1, "theta_scheme": 0.5}
        }"#);
        let out = execute(&c);
        assert_eq!(out.status.exit_code(), 2);
        assert!(out.file("value.csv").is_some());
        assert!(out.file("policy.csv").is_some());
    }

    #[test]
    fn resolved_config_reproduces_the_run() {
        let c = cfg(r#"{
            "problem": {"kind": "solve-hjb", "i": "delta", "h": "-0.1", "f": "1 - delta^2", "controls": {"lo": -1, "hi": 1}, "horizon": 1.0, "query_x": 1.0},
            "grid": {"n_x": 40, "n_t": 20}
        }"#);
        let first = execute(&c);
        assert_eq!(first.status, Status::Ok);
        let resolved = RunConfig::from_json(first.file("resolved_config.json").unwrap()).unwrap();
        assert!(matches!(resolved.solver.kappa, KappaChoice::Fixed(_)));
        assert!(resolved.grid.x_max.is_some());
        let second = execute(&resolved);
        assert_eq!(first, second);
    }

    #[test]
    fn validate_constant_sigma() {
        let c = cfg(
            r#"{"problem": {"kind": "validate-assumptions", "horizon": 1.0}, "mc": {"dt": 0.01, "n_paths": 2000, "seed": 1}}"#,
        );
        let out = execute(&c);
        assert_eq!(out.status, Status::Ok);
        let s: Value = serde_json::from_str(out.file("summary.json").unwrap()).unwrap();
        assert_eq!(s["pass"], json!(true));
        assert_eq!(s["sigma"]["inf"], json!(1.0));
        assert_eq!(s["sigma"]["sup"], json!(1.0));
        assert_eq!(s["sigma"]["lipschitz_x"], json!(0.0));
    }

    #[test]
    fn validate_reports_floor_violation_and_tanh_slope() {
        let c = cfg(
            r#"{"problem": {"kind": "validate-assumptions", "sigma": "x", "horizon": 1.0}, "mc": {"dt": 0.01, "n_paths": 500, "seed": 1}}"#,
        );
        let out = execute(&c);
        assert_eq!(out.status.exit_code(), 0);
        let s: Value = serde_json::from_str(out.file("summary.json").unwrap()).unwrap();
        assert_eq!(s["pass"], json!(false));
        assert_eq!(s["sigma"]["floor_ok"], json!(false));
        let c = cfg(
            r#"{"problem": {"kind": "validate-assumptions", "sigma": "1 + 0.5*tanh(x)", "horizon": 1.0}, "mc": {"dt": 0.01, "n_paths": 500, "seed": 1}}"#,
        );
        let s: Value = serde_json::from_str(execute(&c).file("summary.json").unwrap()).unwrap();
        let lip = s["sigma"]["lipschitz_x"].as_f64().unwrap();
        assert!(lip <= 0.5 + 1e-6 && lip > 0.499);
    }
}
