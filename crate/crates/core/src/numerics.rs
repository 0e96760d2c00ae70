//! Small numerical kernels shared by the solvers.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature with an absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const GL5_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL5_WEIGHTS: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

/// Five-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss5(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    GL5_NODES.iter().zip(GL5_WEIGHTS).map(|(z, w)| w * f(c + h * z)).sum::<f64>() * h
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[0]` and `upper[n-1]` are ignored. `rhs` receives the solution.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() < 1e-300 || !pivot.is_finite() {
        return Err(Error::SolverBreakdown { row: 0, pivot });
    }
    c[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot.abs() < 1e-300 || !pivot.is_finite() {
            return Err(Error::SolverBreakdown { row: i, pivot });
        }
        if i + 1 < n {
            c[i] = upper[i] / pivot;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Cubic Hermite interpolant through increasing knots with Fritsch-Carlson
/// limited slopes, so monotone data stay monotone.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    /// `slopes` are the exact (or estimated) derivatives at the knots.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n && slopes.len() == n);
        for k in 0..n - 1 {
            let secant = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
            if secant == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = slopes[k] / secant;
            let b = slopes[k + 1] / secant;
            if a < 0.0 {
                slopes[k] = 0.0;
            }
            if b < 0.0 {
                slopes[k + 1] = 0.0;
            }
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                slopes[k] = tau * a * secant;
                slopes[k + 1] = tau * b * secant;
            }
        }
        Self { xs, ys, ds: slopes }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let k = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => return self.ys[k],
            Err(0) => 0,
            Err(k) if k >= n => n - 2,
            Err(k) => k - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.ys[k] + h10 * h * self.ds[k] + h01 * self.ys[k + 1] + h11 * h * self.ds[k + 1]
    }
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Mean and standard error of a sample, summed in index order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn gauss5_is_exact_for_degree_nine() {
        let v = gauss5(&|x: f64| x.powi(9) + x.powi(4), 0.0, 2.0);
        let exact = 2f64.powi(10) / 10.0 + 2f64.powi(5) / 5.0;
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn thomas_matches_dense_solution() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, 2.0, 3.0, 4.0];
        let mut rhs = [0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x[i];
            if i > 0 {
                rhs[i] += lower[i] * x[i - 1];
            }
            if i < 3 {
                rhs[i] += upper[i] * x[i + 1];
            }
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs).unwrap();
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn thomas_reports_zero_pivot() {
        let mut rhs = [1.0, 1.0];
        let err = solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &mut rhs);
        assert!(matches!(err, Err(Error::SolverBreakdown { row: 0, .. })));
    }

    #[test]
    fn monotone_cubic_stays_monotone_on_steps() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.0, 1.0, 1.0, 1.0];
        let ds = vec![0.0, 5.0, 5.0, 0.0, 0.0];
        let m = MonotoneCubic::new(xs, ys, ds);
        let mut prev = m.eval(0.0);
        for k in 1..400 {
            let v = m.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn norm_cdf_reference_points() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 5e-12);
    }
}
