//! Principal spectrum points of `u_t = A(μ) u + a(t, x) u` as
//! `ln(spectral radius of the period map) / T`, by power iteration.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, PeriodicScalar};
use crate::dispersal::{Dispersal, Grid};
use crate::error::{Error, Result};
use crate::semitrivial::PeriodicField;
use crate::simulator::SchemeConfig;
use crate::stepping::{Diffuser, Scratch};

/// Default relative tolerance on consecutive growth ratios.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default period budget of the power iteration.
pub const DEFAULT_MAX_PERIODS: usize = 2000;

const STABLE_RUN: usize = 3;

/// Zero-order coefficient of the linear problem.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearCoefficient {
    Field(CoefficientField),
    /// `a(t, x) - b(t, x) w(t, x)` with `w` a periodic field on the scheme's time grid.
    Reduced { a: CoefficientField, b: CoefficientField, w: PeriodicField },
}

impl LinearCoefficient {
    pub fn period(&self) -> f64 {
        match self {
            LinearCoefficient::Field(f) => f.period(),
            LinearCoefficient::Reduced { a, .. } => a.period(),
        }
    }

    fn is_x_dependent(&self) -> bool {
        match self {
            LinearCoefficient::Field(f) => f.is_x_dependent(),
            LinearCoefficient::Reduced { a, b, w } => a.is_x_dependent() || b.is_x_dependent() || w.is_x_dependent(),
        }
    }

    /// Values at the start of step `k` on the grid.
    fn sample(&self, grid: &Grid, dt: f64, k: usize) -> Vec<f64> {
        let t = k as f64 * dt;
        match self {
            LinearCoefficient::Field(f) => grid.points().iter().map(|&x| f.value(t, x)).collect(),
            LinearCoefficient::Reduced { a, b, w } => {
                let wk = w.at_step(k);
                grid.points().iter().zip(wk).map(|(&x, wv)| a.value(t, x) - b.value(t, x) * wv).collect()
            }
        }
    }
}

/// `u_t = A(μ) u + a(t, x) u` on a grid with a fixed scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    pub mu: f64,
    pub coefficient: LinearCoefficient,
    pub dispersal: Dispersal,
    pub grid: Grid,
    pub scheme: SchemeConfig,
}

impl LinearProblem {
    pub fn new(mu: f64, coefficient: LinearCoefficient, dispersal: Dispersal, grid: Grid, scheme: SchemeConfig) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::input(format!("tilt must be finite and nonnegative, got {mu}")));
        }
        if mu > 0.0 && coefficient.is_x_dependent() {
            return Err(Error::input(
                "tilted operators are only defined here for spatially homogeneous coefficients",
            ));
        }
        dispersal.check_grid(&grid)?;
        scheme.check(&grid, &dispersal)?;
        let steps = scheme.steps_per_period(coefficient.period())?;
        if let LinearCoefficient::Reduced { w, .. } = &coefficient {
            if w.steps_per_period() != steps || w.grid_len() != grid.len() {
                return Err(Error::input("reduced coefficient was sampled on a different grid or time step"));
            }
        }
        Ok(LinearProblem { mu, coefficient, dispersal, grid, scheme })
    }

    /// Homogeneous or bump coefficient with the scheme fitted to the grid.
    pub fn with_field(mu: f64, a: CoefficientField, dispersal: Dispersal, grid: Grid, scheme: SchemeConfig) -> Result<Self> {
        Self::new(mu, LinearCoefficient::Field(a), dispersal, grid, scheme)
    }

    pub fn period(&self) -> f64 {
        self.coefficient.period()
    }
}

/// Precomputed one-period propagator.
struct Evolver {
    diffuser: Diffuser,
    dt: f64,
    steps: usize,
    tilt: f64,
    kind: Growth,
}

enum Growth {
    /// exp(∫ baseline) per step times a fixed per-point factor.
    Field { baseline: PeriodicScalar, bump_factor: Vec<f64> },
    /// Per-step per-point factors.
    Sampled(Vec<Vec<f64>>),
}

impl Evolver {
    fn new(p: &LinearProblem) -> Result<Self> {
        let dt = p.scheme.dt;
        let steps = p.scheme.steps_per_period(p.period())?;
        let diffuser = Diffuser::new(&p.grid, &p.dispersal, p.scheme.mode, dt, p.mu)?;
        let tilt = match p.dispersal {
            Dispersal::Random => p.mu * p.mu,
            Dispersal::Nonlocal(_) => 0.0,
        };
        let kind = match &p.coefficient {
            LinearCoefficient::Field(f) => Growth::Field {
                baseline: f.baseline.clone(),
                bump_factor: p.grid.points().iter().map(|&x| (f.bump_value(x) * dt).exp()).collect(),
            },
            c @ LinearCoefficient::Reduced { .. } => {
                let samples: Vec<Vec<f64>> = (0..=steps).map(|k| c.sample(&p.grid, dt, k)).collect();
                let factors = (0..steps)
                    .map(|k| {
                        samples[k].iter().zip(&samples[k + 1]).map(|(a, b)| (0.5 * dt * (a + b) + tilt * dt).exp()).collect()
                    })
                    .collect();
                Growth::Sampled(factors)
            }
        };
        Ok(Evolver { diffuser, dt, steps, tilt, kind })
    }

    fn step(&self, u: &mut [f64], k: usize, t: f64, s: &mut Scratch) {
        self.diffuser.apply(u, s);
        match &self.kind {
            Growth::Field { baseline, bump_factor } => {
                let g = (baseline.integral(t, t + self.dt) + self.tilt * self.dt).exp();
                for (v, f) in u.iter_mut().zip(bump_factor) {
                    *v *= g * f;
                }
            }
            Growth::Sampled(factors) => {
                for (v, f) in u.iter_mut().zip(&factors[k % self.steps]) {
                    *v *= f;
                }
            }
        }
    }

    fn period_map(&self, u: &mut [f64], s: &mut Scratch) {
        for k in 0..self.steps {
            self.step(u, k, k as f64 * self.dt, s);
        }
    }
}

/// Solution of the linear problem at `t1` from `u0` at `t0`; both times must
/// lie on the scheme's step grid.
pub fn evolve_linear(u0: &[f64], p: &LinearProblem, t0: f64, t1: f64) -> Result<Vec<f64>> {
    if u0.len() != p.grid.len() {
        return Err(Error::input("initial field does not match the grid"));
    }
    if t1 < t0 {
        return Err(Error::input("evolution must run forward in time"));
    }
    let dt = p.scheme.dt;
    let on_grid = |t: f64| ((t / dt).round() * dt - t).abs() <= 1e-9 * dt.max(t.abs());
    if !on_grid(t0) || !on_grid(t1) {
        return Err(Error::input("evolution endpoints must be multiples of the time step"));
    }
    let ev = Evolver::new(p)?;
    let k0 = (t0 / dt).round() as usize;
    let n = ((t1 - t0) / dt).round() as usize;
    let mut u = u0.to_vec();
    let mut s = Scratch::default();
    for i in 0..n {
        let k = k0 + i;
        ev.step(&mut u, k, k as f64 * dt, &mut s);
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub tol: f64,
    pub max_periods: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { tol: DEFAULT_TOL, max_periods: DEFAULT_MAX_PERIODS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub lambda: f64,
    /// Dominant profile, nonnegative with sup 1.
    pub profile: Vec<f64>,
    /// Per-period sup-norm growth ratios.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    /// `|r_k - r_{k-1}|` at exit.
    pub residual: f64,
    /// Collatz–Wielandt bracket `[min Pu/u, max Pu/u]` of the last iterate.
    pub bracket: (f64, f64),
    pub period: f64,
}

impl SpectrumResult {
    /// Spectral radius of the period map.
    pub fn radius(&self) -> f64 {
        (self.lambda * self.period).exp()
    }
}

/// Why the power iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Exit {
    Converged,
    /// The bracket excludes 1: the sign of λ is settled.
    SignSettled,
}

pub(crate) fn power_iterate(p: &LinearProblem, opts: &SpectrumOptions, stop_on_sign: bool) -> Result<(SpectrumResult, Exit)> {
    if !(opts.tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    let ev = Evolver::new(p)?;
    let period = p.period();
    let mut u = vec![1.0; p.grid.len()];
    let mut s = Scratch::default();
    let mut ratios = Vec::new();
    let mut stable = 0;
    let mut prev = f64::NAN;
    let mut old = u.clone();
    for it in 1..=opts.max_periods {
        old.copy_from_slice(&u);
        ev.period_map(&mut u, &mut s);
        let r = u.iter().copied().fold(0.0, f64::max);
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::BlowUp { t: it as f64 * period, index: 0 });
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (a, b) in u.iter().zip(&old) {
            if *b > 1e-12 {
                let q = a / b;
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        for v in &mut u {
            *v /= r;
        }
        ratios.push(r);
        let change = (r - prev).abs();
        stable = if change / r < opts.tol { stable + 1 } else { 0 };
        prev = r;
        let result = |exit| {
            (
                SpectrumResult {
                    lambda: r.ln() / period,
                    profile: u.clone(),
                    ratios: ratios.clone(),
                    iterations: it,
                    residual: if change.is_nan() { 0.0 } else { change },
                    bracket: (lo, hi),
                    period,
                },
                exit,
            )
        };
        // an exact eigenvector gives a zero-width bracket after one period
        if stable >= STABLE_RUN || hi - lo <= opts.tol * r * 1e-3 {
            return Ok(result(Exit::Converged));
        }
        if stop_on_sign && (lo > 1.0 || hi < 1.0) {
            return Ok(result(Exit::SignSettled));
        }
    }
    let tail = ratios.len().saturating_sub(50);
    Err(Error::NoConvergence {
        what: "principal spectrum power iteration".into(),
        iterations: opts.max_periods,
        residual: ratios.windows(2).last().map_or(f64::NAN, |w| (w[1] - w[0]).abs()),
        history: ratios[tail..].to_vec(),
    })
}

/// Principal spectrum point by power iteration on the period map.
pub fn principal_spectrum_point(p: &LinearProblem, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    power_iterate(p, opts, false).map(|(r, _)| r)
}

/// Closed-form principal spectrum point of an x-independent coefficient:
/// the dispersal symbol plus the time average.
pub fn homogeneous_exponent(dispersal: &Dispersal, mu: f64, a0: &PeriodicScalar) -> f64 {
    dispersal.symbol(mu) + a0.mean()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityVerdict {
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub holds: bool,
}

/// Check `λ(a1) <= λ(a2) + tol` for pointwise ordered coefficients.
pub fn spectrum_monotonicity_check(p1: &LinearProblem, p2: &LinearProblem, tol: f64, opts: &SpectrumOptions) -> Result<MonotonicityVerdict> {
    if p1.mu != p2.mu || p1.grid != p2.grid || p1.dispersal != p2.dispersal || p1.scheme != p2.scheme {
        return Err(Error::input("monotonicity check needs problems sharing tilt, grid, dispersal and scheme"));
    }
    let dt = p1.scheme.dt;
    let steps = p1.scheme.steps_per_period(p1.period())?;
    for k in 0..steps {
        let lo = p1.coefficient.sample(&p1.grid, dt, k);
        let hi = p2.coefficient.sample(&p2.grid, dt, k);
        if let Some(j) = lo.iter().zip(&hi).position(|(a, b)| a > &(b + 1e-14)) {
            return Err(Error::precondition(format!(
                "coefficients are not ordered at t = {}, x = {}",
                k as f64 * dt,
                p1.grid.x(j)
            )));
        }
    }
    let l1 = principal_spectrum_point(p1, opts)?.lambda;
    let l2 = principal_spectrum_point(p2, opts)?.lambda;
    Ok(MonotonicityVerdict { lambda_lower: l1, lambda_upper: l2, holds: l1 <= l2 + tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCheck {
    pub lambda: f64,
    pub lambda_wide: f64,
    pub shift: f64,
    pub adequate: bool,
}

/// Re-run on a domain 1.5 times wider (same spacing and centre) and compare.
pub fn domain_robustness(p: &LinearProblem, opts: &SpectrumOptions, max_shift: f64) -> Result<DomainCheck> {
    let g = &p.grid;
    if matches!(p.coefficient, LinearCoefficient::Reduced { .. }) {
        return Err(Error::input("domain robustness needs a closed-form coefficient"));
    }
    let n = (1.5 * (g.len() - 1) as f64).round() as usize + 1;
    let centre = 0.5 * (g.x_min() + g.x_max());
    let half = 0.5 * g.h() * (n - 1) as f64;
    let wide = Grid::new(centre - half, centre + half, n)?;
    let dispersal = match &p.dispersal {
        Dispersal::Random => Dispersal::Random,
        Dispersal::Nonlocal(k) => Dispersal::Nonlocal(crate::dispersal::Kernel::new(k.shape(), k.radius(), wide.h())?),
    };
    let pw = LinearProblem { grid: wide, dispersal, ..p.clone() };
    let lambda = principal_spectrum_point(p, opts)?.lambda;
    let lambda_wide = principal_spectrum_point(&pw, opts)?.lambda;
    let shift = (lambda_wide - lambda).abs();
    Ok(DomainCheck { lambda, lambda_wide, shift, adequate: shift < max_shift })
}
