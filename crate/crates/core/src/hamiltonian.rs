//! Control-form Hamiltonians
//! `H(p, u, x, t) = max_{δ ∈ D} (i(x,t,δ) p + h(x,t,δ) u + f(x,t,δ))`
//! over a scalar compact control set, and generic closures `H(p, u, x, t)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Coefficient function of `(x, t, δ)`.
pub type ControlCoef = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub enum ControlSet {
    Interval { lo: f64, hi: f64 },
    Finite(Vec<f64>),
}

impl ControlSet {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid(format!("control interval [{lo}, {hi}] is not a compact interval")));
        }
        Ok(Self::Interval { lo, hi })
    }

    pub fn finite(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("finite control set must be nonempty and finite"));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(Self::Finite(values))
    }

    pub fn contains(&self, d: f64) -> bool {
        match self {
            Self::Interval { lo, hi } => *lo <= d && d <= *hi,
            Self::Finite(v) => v.contains(&d),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Interval { lo, hi } => (*lo, *hi),
            Self::Finite(v) => (v[0], v[v.len() - 1]),
        }
    }
}

/// Value of a Hamiltonian together with the maximising control, when there is one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamValue {
    pub value: f64,
    pub control: Option<f64>,
}

pub trait Hamiltonian: Send + Sync {
    fn evaluate(&self, p: f64, u: f64, x: f64, t: f64) -> Result<HamValue>;

    /// Control set of a control-form Hamiltonian.
    fn control_set(&self) -> Option<&ControlSet> {
        None
    }
}

/// A Hamiltonian given directly as a closure.
pub struct FnHamiltonian<F>(pub F);

impl<F> Hamiltonian for FnHamiltonian<F>
where
    F: Fn(f64, f64, f64, f64) -> f64 + Send + Sync,
{
    fn evaluate(&self, p: f64, u: f64, x: f64, t: f64) -> Result<HamValue> {
        let value = (self.0)(p, u, x, t);
        if !value.is_finite() {
            return Err(Error::NonFinite { value, x, t, control: None });
        }
        Ok(HamValue { value, control: None })
    }
}

#[derive(Clone)]
pub struct HJBCoefficients {
    pub i: ControlCoef,
    pub h: ControlCoef,
    pub f: ControlCoef,
    pub control_set: ControlSet,
}

impl std::fmt::Debug for HJBCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HJBCoefficients").field("control_set", &self.control_set).finish()
    }
}

impl HJBCoefficients {
    pub fn new(
        i: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        h: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        control_set: ControlSet,
    ) -> Self {
        Self { i: Arc::new(i), h: Arc::new(h), f: Arc::new(f), control_set }
    }

    /// `i p + h u + f` at control `d`.
    fn objective(&self, p: f64, u: f64, x: f64, t: f64, d: f64) -> Result<f64> {
        let (ci, ch, cf) = ((self.i)(x, t, d), (self.h)(x, t, d), (self.f)(x, t, d));
        for value in [ci, ch, cf] {
            if !value.is_finite() {
                return Err(Error::NonFinite { value, x, t, control: Some(d) });
            }
        }
        Ok(ci * p + ch * u + cf)
    }
}

impl Hamiltonian for HJBCoefficients {
    fn evaluate(&self, p: f64, u: f64, x: f64, t: f64) -> Result<HamValue> {
        let (value, d) = ham_value(self, p, u, x, t)?;
        Ok(HamValue { value, control: Some(d) })
    }

    fn control_set(&self) -> Option<&ControlSet> {
        Some(&self.control_set)
    }
}

const SCAN_POINTS: usize = 65;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximises `δ -> i p + h u + f` over the control set.
///
/// Finite sets are scanned. Intervals get a 65-point scan, then golden-section
/// refinement around the best scan node to `1e-10 (hi - lo)`. Ties go to the
/// smallest control.
pub fn ham_value(coeffs: &HJBCoefficients, p: f64, u: f64, x: f64, t: f64) -> Result<(f64, f64)> {
    let obj = |d: f64| coeffs.objective(p, u, x, t, d);
    match &coeffs.control_set {
        ControlSet::Finite(values) => {
            let mut best = (obj(values[0])?, values[0]);
            for &d in &values[1..] {
                let v = obj(d)?;
                if v > best.0 {
                    best = (v, d);
                }
            }
            Ok(best)
        }
        ControlSet::Interval { lo, hi } => {
            let (lo, hi) = (*lo, *hi);
            if lo == hi {
                return Ok((obj(lo)?, lo));
            }
            let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
            let node = |k: usize| if k == SCAN_POINTS - 1 { hi } else { lo + k as f64 * step };
            let mut best = (obj(lo)?, lo);
            let mut best_k = 0;
            for k in 1..SCAN_POINTS {
                let d = node(k);
                let v = obj(d)?;
                if v > best.0 {
                    best = (v, d);
                    best_k = k;
                }
            }
            let mut a = node(best_k.saturating_sub(1));
            let mut b = node((best_k + 1).min(SCAN_POINTS - 1));
            let tol = 1e-10 * (hi - lo);
            let mut c = b - INV_PHI * (b - a);
            let mut d = a + INV_PHI * (b - a);
            let mut fc = obj(c)?;
            let mut fd = obj(d)?;
            while b - a > tol {
                if fc >= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - INV_PHI * (b - a);
                    fc = obj(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + INV_PHI * (b - a);
                    fd = obj(d)?;
                }
            }
            let (v, dd) = if fc >= fd { (fc, c) } else { (fd, d) };
            if v > best.0 {
                best = (v, dd);
            }
            Ok(best)
        }
    }
}

/// Sampling window for [`probe_growth`].
#[derive(Debug, Clone, Copy)]
pub struct GrowthProbe {
    pub samples: usize,
    pub seed: u64,
    pub p_range: f64,
    pub u_range: f64,
    pub x_max: f64,
    pub t_horizon: f64,
}

impl GrowthProbe {
    pub fn new(x_max: f64, t_horizon: f64) -> Self {
        Self { samples: 2000, seed: 17, p_range: 10.0, u_range: 10.0, x_max, t_horizon }
    }
}

/// Empirical constant `K` of the growth and Lipschitz bounds
/// `|H| <= K (1 + |u| + |p|)`, `|H(p,u) - H(p',u')| <= K (|p - p'| + |u - u'|)`.
pub fn probe_growth(ham: &dyn Hamiltonian, probe: &GrowthProbe) -> Result<f64> {
    if !(probe.p_range > 0.0 && probe.u_range > 0.0) {
        return Err(invalid("probe ranges must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let mut k: f64 = 0.0;
    for _ in 0..probe.samples {
        let p = rng.random_range(-probe.p_range..=probe.p_range);
        let u = rng.random_range(-probe.u_range..=probe.u_range);
        let x = rng.random_range(0.0..=probe.x_max);
        let t = rng.random_range(0.0..=probe.t_horizon);
        let h0 = ham.evaluate(p, u, x, t)?.value;
        k = k.max(h0.abs() / (1.0 + u.abs() + p.abs()));
        let p2 = rng.random_range(-probe.p_range..=probe.p_range);
        if p2 != p {
            let h1 = ham.evaluate(p2, u, x, t)?.value;
            k = k.max((h1 - h0).abs() / (p2 - p).abs());
        }
        let u2 = rng.random_range(-probe.u_range..=probe.u_range);
        if u2 != u {
            let h2 = ham.evaluate(p, u2, x, t)?.value;
            k = k.max((h2 - h0).abs() / (u2 - u).abs());
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interval(lo: f64, hi: f64) -> ControlSet {
        ControlSet::interval(lo, hi).unwrap()
    }

    #[test]
    fn affine_control_goes_to_the_endpoint() {
        let c = HJBCoefficients::new(|_, _, d| d, |_, _, _| 0.0, |_, _, _| 0.0, interval(-1.0, 1.0));
        assert_eq!(ham_value(&c, 3.0, 17.0, 0.5, 0.1).unwrap(), (3.0, 1.0));
    }

    #[test]
    fn quadratic_peak_is_found() {
        let c =
            HJBCoefficients::new(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, d| -(d - 0.3) * (d - 0.3), interval(0.0, 1.0));
        let (v, d) = ham_value(&c, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert!(v.abs() < 1e-18);
        assert!((d - 0.3).abs() < 1e-9);
    }

    #[test]
    fn square_root_reward_matches_dense_scan() {
        let c = HJBCoefficients::new(|_, _, d| -d, |_, _, _| 0.0, |_, _, d| d.sqrt(), interval(0.0, 2.0));
        let (v, d) = ham_value(&c, 1.0, 0.0, 0.0, 0.0).unwrap();
        // independent brute force over 10^6 + 1 points
        let n = 1_000_000;
        let (bv, bd) = (0..=n)
            .map(|k| {
                let d = 2.0 * k as f64 / n as f64;
                (-d + d.sqrt(), d)
            })
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        assert!((bv - 0.25).abs() < 1e-11 && (bd - 0.25).abs() < 1e-5);
        assert!((v - bv).abs() < 1e-11 && v >= bv - 1e-15);
        assert!((d - 0.25).abs() < 1e-6);
    }

    #[test]
    fn constant_objective_ties_to_smallest_control() {
        let c = HJBCoefficients::new(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 1.0, interval(0.5, 2.0));
        assert_eq!(ham_value(&c, 1.0, 1.0, 0.0, 0.0).unwrap(), (1.0, 0.5));
        let f = HJBCoefficients::new(
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 1.0,
            ControlSet::finite(vec![3.0, 1.0, 2.0]).unwrap(),
        );
        assert_eq!(ham_value(&f, 1.0, 1.0, 0.0, 0.0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn non_finite_coefficients_are_located() {
        let c = HJBCoefficients::new(|_, _, d| 1.0 / d, |_, _, _| 0.0, |_, _, _| 0.0, interval(0.0, 1.0));
        match ham_value(&c, 1.0, 0.0, 0.25, 0.5) {
            Err(Error::NonFinite { x, t, control, .. }) => {
                assert_eq!((x, t, control), (0.25, 0.5, Some(0.0)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_control_sets() {
        assert!(ControlSet::interval(1.0, 0.0).is_err());
        assert!(ControlSet::interval(0.0, f64::INFINITY).is_err());
        assert!(ControlSet::finite(vec![]).is_err());
    }

    #[test]
    fn growth_constants_for_simple_hamiltonians() {
        let probe = GrowthProbe::new(5.0, 1.0);
        let zero = HJBCoefficients::new(|_, _, _| 0.0, |_, _, _| 0.0, |_, _, _| 0.0, interval(0.0, 1.0));
        assert_eq!(probe_growth(&zero, &probe).unwrap(), 0.0);
        let p_only = HJBCoefficients::new(|_, _, _| 1.0, |_, _, _| 0.0, |_, _, _| 0.0, interval(1.0, 1.0));
        assert!((probe_growth(&p_only, &probe).unwrap() - 1.0).abs() < 1e-12);
    }

    fn dividend_like() -> HJBCoefficients {
        HJBCoefficients::new(|x: f64, _, c| x.tanh() - c, |_, _, _| -0.05, |_, _, c: f64| c.sqrt(), interval(0.0, 2.0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn convex_in_p(p1 in -5.0..5.0f64, p2 in -5.0..5.0f64, u in -3.0..3.0f64, x in 0.0..4.0f64) {
            let c = dividend_like();
            let h = |p| ham_value(&c, p, u, x, 0.3).unwrap().0;
            prop_assert!(h(0.5 * (p1 + p2)) <= 0.5 * (h(p1) + h(p2)) + 1e-9);
        }

        #[test]
        fn lipschitz_in_p_and_u(p1 in -5.0..5.0f64, p2 in -5.0..5.0f64, u1 in -3.0..3.0f64, u2 in -3.0..3.0f64, x in 0.0..4.0f64) {
            let c = dividend_like();
            let h = |p, u| ham_value(&c, p, u, x, 0.3).unwrap().0;
            // sup |i| = 2 on [0, 4] x [0, 2], sup |h| = 0.05
            prop_assert!((h(p1, u1) - h(p2, u1)).abs() <= 2.0 * (p1 - p2).abs() + 1e-9);
            prop_assert!((h(p1, u1) - h(p1, u2)).abs() <= 0.05 * (u1 - u2).abs() + 1e-9);
        }

        #[test]
        fn positive_scaling(p in -5.0..5.0f64, u in -3.0..3.0f64, x in 0.0..4.0f64, e in -2i32..4) {
            let s = 2f64.powi(e);
            let c = dividend_like();
            let scaled = HJBCoefficients::new(
                move |x: f64, _, c| s * (x.tanh() - c),
                move |_, _, _| -0.05 * s,
                move |_, _, c: f64| s * c.sqrt(),
                interval(0.0, 2.0),
            );
            let (v, d) = ham_value(&c, p, u, x, 0.0).unwrap();
            let (vs, ds) = ham_value(&scaled, p, u, x, 0.0).unwrap();
            prop_assert_eq!(d, ds);
            prop_assert!((vs - s * v).abs() <= 1e-12 * (1.0 + vs.abs()));
        }
    }
}
