//! Periodic solutions of the spatially homogeneous problems: the logistic
//! orbit, the periodic solution of a forced linear equation, and the
//! homogeneous coexistence orbit.

use serde::{Deserialize, Serialize};

use crate::coefficients::{compute_envelopes, CoefficientSet, PeriodicScalar, Profile, DEFAULT_SAMPLES_PER_PERIOD};
use crate::error::{Error, Result};
use crate::ode::{integrate, integrate_samples, OdeOptions};

/// Samples per period stored in an orbit.
pub const ORBIT_SAMPLES: usize = 512;

const DAMPING: f64 = 0.5;
const FIXED_POINT_BUDGET: usize = 10_000;
const FIXED_POINT_TOL: f64 = 1e-11;

/// A `T`-periodic scalar trajectory sampled uniformly on `[0, T]`
/// (both endpoints included), with slopes for Hermite interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    period: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// Fixed-point residual of the period map at convergence.
    pub tolerance: f64,
}

impl PeriodicOrbit {
    /// Orbit from samples at `k T / (len - 1)` and matching slopes.
    pub fn from_samples(period: f64, values: Vec<f64>, slopes: Vec<f64>, tolerance: f64) -> Result<Self> {
        if values.len() < 3 || values.len() != slopes.len() {
            return Err(Error::input("orbit needs at least 3 samples with matching slopes"));
        }
        Ok(PeriodicOrbit { period, values, slopes, tolerance })
    }

    pub fn constant(period: f64, value: f64) -> Self {
        PeriodicOrbit { period, values: vec![value; ORBIT_SAMPLES + 1], slopes: vec![0.0; ORBIT_SAMPLES + 1], tolerance: 0.0 }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.values.len() - 1;
        (0..=n).map(|k| k as f64 * self.period / n as f64).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Cubic Hermite interpolation, periodic in `t`.
    pub fn value(&self, t: f64) -> f64 {
        let n = self.values.len() - 1;
        let dt = self.period / n as f64;
        let s = t.rem_euclid(self.period) / dt;
        let k = (s.floor() as usize).min(n - 1);
        let th = s - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * dt, self.slopes[k + 1] * dt);
        let th2 = th * th;
        let th3 = th2 * th;
        (2.0 * th3 - 3.0 * th2 + 1.0) * y0
            + (th3 - 2.0 * th2 + th) * m0
            + (-2.0 * th3 + 3.0 * th2) * y1
            + (th3 - th2) * m1
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Period average by the periodic trapezoid rule.
    pub fn mean(&self) -> f64 {
        let n = self.values.len() - 1;
        self.values[..n].iter().sum::<f64>() / n as f64
    }

    /// `|w(T) - w(0)|`.
    pub fn wrap_residual(&self) -> f64 {
        (self.values[self.values.len() - 1] - self.values[0]).abs()
    }

    /// Piecewise-linear periodic scalar through the samples.
    pub fn to_scalar(&self) -> Result<PeriodicScalar> {
        let mut nodes: Vec<(f64, f64)> = self.times().into_iter().zip(self.values.iter().copied()).collect();
        let first = nodes[0].1;
        if let Some(last) = nodes.last_mut() {
            last.1 = first;
        }
        PeriodicScalar::new(self.period, Profile::Table(nodes))
    }

    pub(crate) fn sample<F>(period: f64, w0: &[f64], rhs: &F, component: usize, tolerance: f64) -> Result<Self>
    where
        F: Fn(f64, &[f64], &mut [f64]),
    {
        let times: Vec<f64> = (0..=ORBIT_SAMPLES).map(|k| k as f64 * period / ORBIT_SAMPLES as f64).collect();
        let states = integrate_samples(rhs, 0.0, w0, &times, &OdeOptions::default())?;
        let mut d = vec![0.0; w0.len()];
        let mut values = Vec::with_capacity(times.len());
        let mut slopes = Vec::with_capacity(times.len());
        for (t, y) in times.iter().zip(&states) {
            rhs(*t, y, &mut d);
            values.push(y[component]);
            slopes.push(d[component]);
        }
        Ok(PeriodicOrbit { period, values, slopes, tolerance })
    }
}

/// Damped fixed-point iteration `w <- (1-θ) w + θ P(w)` of a period map.
fn period_map_fixed_point<P>(what: &str, seed: Vec<f64>, map: P) -> Result<(Vec<f64>, f64)>
where
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut w = seed;
    let mut history = Vec::new();
    for it in 0..FIXED_POINT_BUDGET {
        let pw = map(&w)?;
        let res = pw.iter().zip(&w).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max);
        if history.len() >= 16 {
            history.remove(0);
        }
        history.push(res);
        if pw.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NoConvergence {
                what: format!("{what} (iterate left the positive cone)"),
                iterations: it,
                residual: res,
                history,
            });
        }
        if res < FIXED_POINT_TOL {
            return Ok((pw, res));
        }
        for (wi, pi) in w.iter_mut().zip(&pw) {
            *wi = (1.0 - DAMPING) * *wi + DAMPING * pi;
        }
    }
    Err(Error::NoConvergence {
        what: what.to_string(),
        iterations: FIXED_POINT_BUDGET,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Unique positive periodic solution of `w' = w (a0(t) - b0(t) w)`.
pub fn logistic_periodic(a0: &PeriodicScalar, b0: &PeriodicScalar) -> Result<PeriodicOrbit> {
    let period = a0.period();
    if (b0.period() - period).abs() > 1e-12 * period {
        return Err(Error::input("growth and crowding profiles have different periods"));
    }
    let abar = a0.mean();
    if !(abar > 0.0) {
        return Err(Error::precondition(format!(
            "mean growth rate {abar} is not positive: no positive periodic orbit"
        )));
    }
    if !(b0.extrema(DEFAULT_SAMPLES_PER_PERIOD).0 > 0.0) {
        return Err(Error::input("crowding coefficient must be positive"));
    }
    if a0.is_constant() && b0.is_constant() {
        return Ok(PeriodicOrbit::constant(period, a0.value(0.0) / b0.value(0.0)));
    }
    let rhs = |t: f64, w: &[f64], d: &mut [f64]| d[0] = w[0] * (a0.value(t) - b0.value(t) * w[0]);
    let opts = OdeOptions::default();
    let seed = vec![abar / b0.mean()];
    let (w, res) = period_map_fixed_point("logistic period map", seed, |w| integrate(&rhs, 0.0, w, period, &opts))?;

    // closed form: w(0) = (e^{A(T)} - 1) / ∫_0^T b0 e^{A}
    let q = integrate(&|s: f64, _y: &[f64], d: &mut [f64]| d[0] = b0.value(s) * a0.integral(0.0, s).exp(), 0.0, &[0.0], period, &opts)?;
    let closed = (a0.integral(0.0, period).exp() - 1.0) / q[0];
    if (closed - w[0]).abs() > 1e-8 * closed {
        return Err(Error::NoConvergence {
            what: "logistic orbit disagrees with its closed form".into(),
            iterations: 0,
            residual: (closed - w[0]).abs(),
            history: vec![w[0], closed],
        });
    }
    PeriodicOrbit::sample(period, &w, &rhs, 0, res)
}

/// Unique periodic solution of `u' = α(t) u + h(t)` for `mean(α) < 0`.
pub fn nonhomogeneous_periodic(alpha: &PeriodicScalar, h: &PeriodicScalar) -> Result<PeriodicOrbit> {
    nonhomogeneous_periodic_fn(alpha.period(), |t| alpha.value(t), |t| h.value(t))
}

/// As [`nonhomogeneous_periodic`] for arbitrary periodic callables.
pub fn nonhomogeneous_periodic_fn<A, H>(period: f64, alpha: A, h: H) -> Result<PeriodicOrbit>
where
    A: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let opts = OdeOptions::default();
    // I = ∫α, J = ∫ h e^{-I}
    let ij = |t: f64, y: &[f64], d: &mut [f64]| {
        d[0] = alpha(t);
        d[1] = h(t) * (-y[0]).exp();
    };
    let end = integrate(&ij, 0.0, &[0.0, 0.0], period, &opts)?;
    let (big_i, big_j) = (end[0], end[1]);
    if !(big_i < 0.0) {
        return Err(Error::precondition(format!(
            "mean of the linear coefficient is {} (must be negative)",
            big_i / period
        )));
    }
    let e = big_i.exp();
    let u0 = big_j * e / (1.0 - e);
    let rhs = |t: f64, u: &[f64], d: &mut [f64]| d[0] = alpha(t) * u[0] + h(t);
    let orbit = PeriodicOrbit::sample(period, &[u0], &rhs, 0, 0.0)?;
    let wrap = orbit.wrap_residual();
    Ok(PeriodicOrbit { tolerance: wrap, ..orbit })
}

/// Positive periodic coexistence orbit `(u0**, v0**)` of the homogeneous
/// two-species system built from the baselines of `set`.
pub fn coexistence_homogeneous(set: &CoefficientSet) -> Result<(PeriodicOrbit, PeriodicOrbit)> {
    let env = compute_envelopes(set, DEFAULT_SAMPLES_PER_PERIOD)?;
    let m1 = env.a1l - env.c1m * env.a2m / env.c2l;
    let m2 = env.a2l - env.b2m * env.a1m / env.b1l;
    if !(m1 > 0.0 && m2 > 0.0 && env.c2l > 0.0 && env.b1l > 0.0) {
        return Err(Error::precondition(format!(
            "coexistence condition fails: a1L - c1M a2M/c2L = {m1}, a2L - b2M a1M/b1L = {m2}"
        )));
    }
    let period = set.period();
    let [a1, b1, c1, a2, b2, c2] = [&set.a1, &set.b1, &set.c1, &set.a2, &set.b2, &set.c2].map(|f| &f.baseline);
    let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
        d[0] = y[0] * (a1.value(t) - b1.value(t) * y[0] - c1.value(t) * y[1]);
        d[1] = y[1] * (a2.value(t) - b2.value(t) * y[0] - c2.value(t) * y[1]);
    };
    let u_star = logistic_periodic(a1, b1)?.value(0.0);
    let v_star = logistic_periodic(a2, c2)?.value(0.0);
    let opts = OdeOptions::default();
    let (w, res) = period_map_fixed_point("coexistence period map", vec![0.5 * u_star, 0.5 * v_star], |w| {
        integrate(&rhs, 0.0, w, period, &opts)
    })?;
    Ok((PeriodicOrbit::sample(period, &w, &rhs, 0, res)?, PeriodicOrbit::sample(period, &w, &rhs, 1, res)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn logistic_constant_examples() {
        let c = |v| PeriodicScalar::constant(1.0, v).unwrap();
        assert_eq!(logistic_periodic(&c(1.0), &c(1.0)).unwrap().value(0.3), 1.0);
        let o = logistic_periodic(&c(0.4), &c(1.0)).unwrap();
        assert!((o.value(0.77) - 0.4).abs() < 1e-15);
        assert!(logistic_periodic(&c(-0.1), &c(1.0)).is_err());
        assert!(logistic_periodic(&c(0.0), &c(1.0)).is_err());
    }

    #[test]
    fn logistic_periodic_forcing() {
        let a = PeriodicScalar::harmonic(1.0, 1.0, 0.5, 0.0).unwrap();
        let b = PeriodicScalar::constant(1.0, 1.0).unwrap();
        let o = logistic_periodic(&a, &b).unwrap();
        assert!(o.wrap_residual() < 1e-9 * o.value(0.0));
        // ∫ (a - b w) = 0 over a period
        let n = 512;
        let s: f64 = (0..n).map(|k| {
            let t = k as f64 / n as f64;
            a.value(t) - o.value(t)
        }).sum::<f64>() / n as f64;
        assert!(s.abs() < 1e-8, "mean identity {s}");
        // closed-form trajectory
        let w0 = o.value(0.0);
        for k in 0..20 {
            let t = k as f64 / 20.0;
            let big_a = t - 0.5 / (2.0 * PI) * ((2.0 * PI * t).cos() - 1.0);
            let n = 4000;
            let q: f64 = (0..n).map(|j| {
                let s = (j as f64 + 0.5) * t / n as f64;
                let sa = s - 0.5 / (2.0 * PI) * ((2.0 * PI * s).cos() - 1.0);
                sa.exp() * t / n as f64
            }).sum();
            let closed = big_a.exp() * w0 / (1.0 + w0 * q);
            assert!((o.value(t) - closed).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn logistic_is_globally_attracting() {
        let a = PeriodicScalar::harmonic(2.0, 0.7, 0.4, 1.0).unwrap();
        let b = PeriodicScalar::harmonic(2.0, 1.2, 0.3, 0.0).unwrap();
        let o = logistic_periodic(&a, &b).unwrap();
        let rhs = |t: f64, w: &[f64], d: &mut [f64]| d[0] = w[0] * (a.value(t) - b.value(t) * w[0]);
        for seed in [0.1 * o.value(0.0), 10.0 * o.value(0.0)] {
            let mut w = vec![seed];
            for _ in 0..60 {
                w = integrate(&rhs, 0.0, &w, 2.0, &OdeOptions::default()).unwrap();
            }
            assert!((w[0] - o.value(0.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn forced_linear_examples() {
        let c = |v| PeriodicScalar::constant(1.0, v).unwrap();
        let o = nonhomogeneous_periodic(&c(-1.0), &c(1.0)).unwrap();
        assert!((o.value(0.4) - 1.0).abs() < 1e-10);
        let o = nonhomogeneous_periodic(&c(-1.0), &c(0.0)).unwrap();
        assert_eq!(o.max(), 0.0);
        assert!(nonhomogeneous_periodic(&c(0.0), &c(1.0)).is_err());

        let h = PeriodicScalar::new(1.0, Profile::Trig {
            mean: 1.0,
            terms: vec![crate::coefficients::Harmonic { amplitude: 1.0, phase: PI / 2.0, order: 1 }],
        }).unwrap();
        let o = nonhomogeneous_periodic(&c(-1.0), &h).unwrap();
        for k in 0..50 {
            let t = k as f64 / 50.0;
            let w = 2.0 * PI * t;
            let exact = 1.0 + (w.cos() + 2.0 * PI * w.sin()) / (1.0 + 4.0 * PI * PI);
            assert!((o.value(t) - exact).abs() < 1e-9, "t = {t}: {} vs {exact}", o.value(t));
        }
        assert!(o.min() > 0.0);
    }

    #[test]
    fn coexistence_examples() {
        let set = CoefficientSet::constants(1.0, [1.0, 1.0, 0.5, 1.0, 0.5, 1.0]).unwrap();
        let (u, v) = coexistence_homogeneous(&set).unwrap();
        assert!((u.value(0.2) - 2.0 / 3.0).abs() < 1e-9 && (v.value(0.9) - 2.0 / 3.0).abs() < 1e-9);
        let set = CoefficientSet::constants(1.0, [1.0, 1.0, 0.25, 1.0, 0.25, 1.0]).unwrap();
        let (u, v) = coexistence_homogeneous(&set).unwrap();
        assert!((u.mean() - 0.8).abs() < 1e-9 && (v.mean() - 0.8).abs() < 1e-9);
        let set = CoefficientSet::constants(1.0, [2.0, 1.0, 0.5, 1.0, 0.5, 1.0]).unwrap();
        assert!(matches!(coexistence_homogeneous(&set), Err(Error::Precondition(_))));
    }

    #[test]
    fn coexistence_periodic_residual() {
        let mut set = CoefficientSet::constants(1.0, [1.0, 1.0, 0.5, 1.0, 0.5, 1.0]).unwrap();
        set.a1.baseline = PeriodicScalar::harmonic(1.0, 1.0, 0.1, 0.0).unwrap();
        let (u, v) = coexistence_homogeneous(&set).unwrap();
        assert!(u.min() > 0.0 && v.min() > 0.0);
        assert!(u.wrap_residual() < 1e-9 && v.wrap_residual() < 1e-9);
        // one-step defects between consecutive samples
        let rhs = |t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[0] * (set.a1.baseline.value(t) - y[0] - 0.5 * y[1]);
            d[1] = y[1] * (1.0 - 0.5 * y[0] - y[1]);
        };
        let times = u.times();
        for k in 0..times.len() - 1 {
            let y = integrate(&rhs, times[k], &[u.values()[k], v.values()[k]], times[k + 1], &OdeOptions::default()).unwrap();
            assert!((y[0] - u.values()[k + 1]).abs() < 1e-9 && (y[1] - v.values()[k + 1]).abs() < 1e-9);
        }
    }
}
