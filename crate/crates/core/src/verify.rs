//! Checkable forms of the comparison constructions: the exponential
//! super-solution ahead of an invading front, the monotone iteration to
//! coexistence, and an empirical persistence probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::{compute_envelopes, Coef, CoefficientSet, DEFAULT_SAMPLES_PER_PERIOD};
use crate::dispersal::{Dispersal, Grid};
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::periodic_orbits::{logistic_periodic, nonhomogeneous_periodic_fn, PeriodicOrbit};
use crate::semitrivial::{compute_semitrivial, linearized_radius, PeriodicField, SemitrivialOptions, Species, StabilityVerdict, Target};
use crate::simulator::{make_front_data, FrontObserver, FrontSpec, Observer, SchemeConfig, Simulator, SystemState};
use crate::spectrum::SpectrumOptions;
use crate::spreading::{continuum_symbol, minimize_speed, DispersionOptions};

/// Baselines shifted to the strict form used by the super-solution:
/// `a1+ε, b1-ε, c1-ε, a2+ε+2ε sup v0*, b2+ε, c2+ε`.
pub fn epsilon_shift(set: &CoefficientSet, eps: f64) -> Result<CoefficientSet> {
    if !(eps >= 0.0) {
        return Err(Error::input("ε must be nonnegative"));
    }
    let base = set.baselines();
    let v0 = logistic_periodic(&base.a2.baseline, &base.c2.baseline)?;
    let shifted = base
        .with_shift(Coef::A1, eps)?
        .with_shift(Coef::B1, -eps)?
        .with_shift(Coef::C1, -eps)?
        .with_shift(Coef::A2, eps + 2.0 * eps * v0.max())?
        .with_shift(Coef::B2, eps)?
        .with_shift(Coef::C2, eps)?;
    let env0 = compute_envelopes(&base, DEFAULT_SAMPLES_PER_PERIOD)?;
    let env = compute_envelopes(&shifted, DEFAULT_SAMPLES_PER_PERIOD)?;
    let margin = env.a1l - env.c1m * env0.a2m / env0.c2l;
    if !(margin > 0.0) {
        return Err(Error::precondition(format!("a1εL - c1εM a2M/c2L = {margin} is not positive")));
    }
    Ok(shifted)
}

/// Positive periodic orbits `φ`, `ψ` of the x-independent ansatz equations
/// `φ' = (s(μ) - λ + a1ε - c1ε v0*) φ` and
/// `ψ' = (s(μ) - λ + a2ε - 2 c2ε v0*) ψ + b2ε v0* φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzPair {
    pub eps: f64,
    pub mu: f64,
    /// `λε(μ)`, the time average making `φ` periodic.
    pub lambda: f64,
    /// Dispersal symbol `s(μ)`.
    pub symbol: f64,
    pub phi: PeriodicOrbit,
    pub psi: PeriodicOrbit,
    /// Logistic orbit of the unshifted `v` equation.
    pub v0: PeriodicOrbit,
    pub shifted: CoefficientSet,
}

impl AnsatzPair {
    fn alpha_phi(&self, t: f64) -> f64 {
        let s = &self.shifted;
        self.symbol - self.lambda + s.a1.baseline.value(t) - s.c1.baseline.value(t) * self.v0.value(t)
    }

    fn alpha_psi(&self, t: f64) -> f64 {
        let s = &self.shifted;
        self.symbol - self.lambda + s.a2.baseline.value(t) - 2.0 * s.c2.baseline.value(t) * self.v0.value(t)
    }

    fn forcing(&self, t: f64) -> f64 {
        self.shifted.b2.baseline.value(t) * self.v0.value(t) * self.phi.value(t)
    }

    pub fn phi_slope(&self, t: f64) -> f64 {
        self.alpha_phi(t) * self.phi.value(t)
    }

    pub fn psi_slope(&self, t: f64) -> f64 {
        self.alpha_psi(t) * self.psi.value(t) + self.forcing(t)
    }
}

pub fn build_ansatz_pair(set: &CoefficientSet, dispersal: &Dispersal, eps: f64, mu: f64) -> Result<AnsatzPair> {
    let shifted = epsilon_shift(set, eps)?;
    let v0 = logistic_periodic(&set.a2.baseline, &set.c2.baseline)?;
    let period = set.period();
    let symbol = if mu == 0.0 { 0.0 } else { continuum_symbol(dispersal, mu) };
    let (a1, c1) = (&shifted.a1.baseline, &shifted.c1.baseline);
    let growth = |t: f64| symbol + a1.value(t) - c1.value(t) * v0.value(t);
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..OdeOptions::default() };
    let total = integrate(&|t, _y: &[f64], d: &mut [f64]| d[0] = growth(t), 0.0, &[0.0], period, &opts)?[0];
    let lambda = total / period;
    let rhs = |t: f64, y: &[f64], d: &mut [f64]| d[0] = (growth(t) - lambda) * y[0];
    let mut phi = PeriodicOrbit::sample(period, &[1.0], &rhs, 0, 0.0)?;
    phi.tolerance = phi.wrap_residual();
    let (a2, b2, c2) = (&shifted.a2.baseline, &shifted.b2.baseline, &shifted.c2.baseline);
    let psi = nonhomogeneous_periodic_fn(
        period,
        |t| symbol - lambda + a2.value(t) - 2.0 * c2.value(t) * v0.value(t),
        |t| b2.value(t) * v0.value(t) * phi.value(t),
    )?;
    Ok(AnsatzPair { eps, mu, lambda, symbol, phi, psi, v0, shifted })
}

/// Largest defect of the sampled orbits against their equations: one
/// classical RK4 sweep (8 substeps) between consecutive samples, plus the
/// wrap-around residuals.
pub fn ansatz_residual(pair: &AnsatzPair) -> f64 {
    let times = pair.phi.times();
    let sub = 8;
    let f = |t: f64, y: [f64; 2]| -> [f64; 2] {
        [pair.alpha_phi(t) * y[0], pair.alpha_psi(t) * y[1] + pair.forcing(t)]
    };
    let mut worst = pair.phi.wrap_residual().max(pair.psi.wrap_residual());
    for k in 0..times.len() - 1 {
        let h = (times[k + 1] - times[k]) / sub as f64;
        let mut y = [pair.phi.values()[k], pair.psi.values()[k]];
        let mut t = times[k];
        for _ in 0..sub {
            let k1 = f(t, y);
            let k2 = f(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        worst = worst.max((y[0] - pair.phi.values()[k + 1]).abs()).max((y[1] - pair.psi.values()[k + 1]).abs());
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzVerdict {
    pub holds: bool,
    /// Minima over time of `b1ε φ - c1ε ψ`, `b2ε φ - c2ε ψ`,
    /// `(b1εL/c1εM) φ - ψ` and `(b2εL/c2εM) φ - ψ`.
    pub margins: [f64; 4],
    /// First sample time at which some inequality fails.
    pub violated_at: Option<f64>,
}

pub fn check_ansatz_inequalities(pair: &AnsatzPair) -> Result<AnsatzVerdict> {
    let s = &pair.shifted;
    let env = compute_envelopes(s, DEFAULT_SAMPLES_PER_PERIOD)?;
    let (r1, r2) = (env.b1l / env.c1m, env.b2l / env.c2m);
    let mut margins = [f64::INFINITY; 4];
    let mut violated_at = None;
    for (k, t) in pair.phi.times().into_iter().enumerate() {
        let (phi, psi) = (pair.phi.values()[k], pair.psi.values()[k]);
        let m = [
            s.b1.baseline.value(t) * phi - s.c1.baseline.value(t) * psi,
            s.b2.baseline.value(t) * phi - s.c2.baseline.value(t) * psi,
            r1 * phi - psi,
            r2 * phi - psi,
        ];
        for i in 0..4 {
            margins[i] = margins[i].min(m[i]);
        }
        if violated_at.is_none() && m.iter().any(|&v| v < 0.0) {
            violated_at = Some(t);
        }
    }
    Ok(AnsatzVerdict { holds: violated_at.is_none(), margins, violated_at })
}

/// The exponential super-solution `(u⁺, v⁺) = K e^{-μ(x - ct)} (φ, ψ)` with
/// the constants of its comparison region `x >= ξ*(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionSpec {
    pub pair: AnsatzPair,
    /// `c = λε(μ)/μ`.
    pub speed: f64,
    /// `K`.
    pub amplitude: f64,
    /// `M*`: sup of the semitrivial states and logistic orbits.
    pub m_sup: f64,
    /// `m* = inf ψ/φ`.
    pub m_ratio: f64,
    /// Smallest integer with `k m* >= 1`.
    pub k: u64,
    /// `K* = k M* sup b2ε`.
    pub k_star: f64,
}

impl SupersolutionSpec {
    fn decay(&self, t: f64, x: f64) -> f64 {
        self.amplitude * (-self.pair.mu * (x - self.speed * t)).exp()
    }

    pub fn u_plus(&self, t: f64, x: f64) -> f64 {
        self.decay(t, x) * self.pair.phi.value(t)
    }

    pub fn v_plus(&self, t: f64, x: f64) -> f64 {
        self.decay(t, x) * self.pair.psi.value(t)
    }

    /// `ξ*(t) = c t - ln(k M* / (K φ(t))) / μ`, where `u⁺ = k M*`.
    pub fn xi(&self, t: f64) -> f64 {
        let cap = self.k as f64 * self.m_sup;
        self.speed * t - (cap / (self.amplitude * self.pair.phi.value(t))).ln() / self.pair.mu
    }

    /// Clamp at `M*` (identity below).
    pub fn g1(&self, v: f64) -> f64 {
        v.min(self.m_sup)
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        SupersolutionSpec { amplitude, ..self.clone() }
    }

    /// `F_ε(t, u, v)`.
    pub fn f_eps(&self, t: f64, u: f64, v: f64) -> f64 {
        let s = &self.pair.shifted;
        let d = self.pair.v0.value(t) - self.g1(v);
        u * (s.a1.baseline.value(t) - s.b1.baseline.value(t) * u - s.c1.baseline.value(t) * d)
    }

    /// `G_ε(t, u, v)` including the penalty `b2ε (|d| - d)/2 u - K* |d|`, `d = v0* - g1(v)`.
    pub fn g_eps(&self, t: f64, u: f64, v: f64) -> f64 {
        let s = &self.pair.shifted;
        let (b2, a2, c2) = (s.b2.baseline.value(t), s.a2.baseline.value(t), s.c2.baseline.value(t));
        let v0 = self.pair.v0.value(t);
        let g = self.g1(v);
        let d = v0 - g;
        b2 * d * u + v * (a2 - 2.0 * c2 * v0 + c2 * g) + b2 * 0.5 * (d.abs() - d) * u - self.k_star * d.abs()
    }
}

/// Super-solution for `set` at the minimizing `μ` of `λε(μ)/μ`.
/// `stars_sup` bounds the perturbed semitrivial states.
pub fn build_supersolution(
    set: &CoefficientSet,
    dispersal: &Dispersal,
    eps: f64,
    stars_sup: f64,
    amplitude: f64,
) -> Result<SupersolutionSpec> {
    let probe = build_ansatz_pair(set, dispersal, eps, 0.0)?;
    let (mu, _, warning) = minimize_speed(dispersal, probe.lambda, &DispersionOptions::default())?;
    if warning {
        return Err(Error::precondition("λε(μ)/μ has no interior unimodal minimum"));
    }
    let pair = build_ansatz_pair(set, dispersal, eps, mu)?;
    let u0 = logistic_periodic(&set.a1.baseline, &set.b1.baseline)?;
    let m_sup = u0.max().max(pair.v0.max()).max(stars_sup);
    let m_ratio = pair
        .psi
        .values()
        .iter()
        .zip(pair.phi.values())
        .map(|(p, f)| p / f)
        .fold(f64::INFINITY, f64::min);
    if !(m_ratio > 0.0) {
        return Err(Error::precondition("ψ/φ is not bounded away from zero"));
    }
    let k = (1.0 / m_ratio).ceil() as u64;
    let k_star = k as f64 * m_sup * pair.shifted.b2.baseline.extrema(DEFAULT_SAMPLES_PER_PERIOD).1;
    let speed = pair.lambda / mu;
    Ok(SupersolutionSpec { pair, speed, amplitude, m_sup, m_ratio, k, k_star })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Minimum of `u⁺_t - A u⁺ - F_ε` on the region.
    pub min_u: f64,
    /// Minimum of `v⁺_t - A v⁺ - G_ε` on the region.
    pub min_v: f64,
    /// Minimum of residual plus slack; the verdict passes iff it is nonnegative.
    pub min_with_slack: f64,
    pub points: usize,
    pub pass: bool,
    /// Minima on the checked points left of `ξ*` (outside the region).
    pub outside_min_u: Option<f64>,
    pub outside_min_v: Option<f64>,
}

/// Grid points inside `x >= ξ*(t)` and at least `margin` from both ends.
pub fn region_mask(sup: &SupersolutionSpec, grid: &Grid, t: f64, margin: f64) -> Vec<bool> {
    let xi = sup.xi(t);
    grid.points().iter().map(|&x| x >= xi && x >= grid.x_min() + margin && x <= grid.x_max() - margin).collect()
}

/// Pointwise residuals of both super-solution inequalities at the given
/// times; time derivatives are analytic, dispersal is the discrete operator.
pub fn supersolution_residual(
    sup: &SupersolutionSpec,
    grid: &Grid,
    dispersal: &Dispersal,
    times: &[f64],
    dt: f64,
) -> Result<ResidualReport> {
    let margin = dispersal.reach() + 10.0 * grid.h();
    let slack_rate = 10.0 * (grid.h() * grid.h() + dt);
    let xs = grid.points();
    let mut rep = ResidualReport {
        min_u: f64::INFINITY,
        min_v: f64::INFINITY,
        min_with_slack: f64::INFINITY,
        points: 0,
        pass: false,
        outside_min_u: None,
        outside_min_v: None,
    };
    let mu = sup.pair.mu;
    let c = sup.speed;
    for &t in times {
        let u: Vec<f64> = xs.iter().map(|&x| sup.u_plus(t, x)).collect();
        let v: Vec<f64> = xs.iter().map(|&x| sup.v_plus(t, x)).collect();
        let au = dispersal.apply(&u, grid)?;
        let av = dispersal.apply(&v, grid)?;
        let (dphi, dpsi) = (sup.pair.phi_slope(t), sup.pair.psi_slope(t));
        let (phi, psi) = (sup.pair.phi.value(t), sup.pair.psi.value(t));
        let xi = sup.xi(t);
        for (j, &x) in xs.iter().enumerate() {
            if x < grid.x_min() + margin || x > grid.x_max() - margin {
                continue;
            }
            let e = sup.decay(t, x);
            let ut = e * (dphi + mu * c * phi);
            let vt = e * (dpsi + mu * c * psi);
            let ru = ut - au[j] - sup.f_eps(t, u[j], v[j]);
            let rv = vt - av[j] - sup.g_eps(t, u[j], v[j]);
            if x >= xi {
                let slack = slack_rate * (u[j] + v[j]);
                rep.min_u = rep.min_u.min(ru);
                rep.min_v = rep.min_v.min(rv);
                rep.min_with_slack = rep.min_with_slack.min(ru.min(rv) + slack);
                rep.points += 1;
            } else {
                rep.outside_min_u = Some(rep.outside_min_u.map_or(ru, |m: f64| m.min(ru)));
                rep.outside_min_v = Some(rep.outside_min_v.map_or(rv, |m: f64| m.min(rv)));
            }
        }
    }
    if rep.points == 0 {
        return Err(Error::input("the comparison region contains no grid points"));
    }
    rep.pass = rep.min_with_slack >= 0.0;
    Ok(rep)
}

/// Doubles `K` from `sup.amplitude` until the transformed initial data lie
/// below `(u⁺, v⁺)` on `x >= ξ*(0)` and `ξ*` stays right of `clear_of`
/// during the first period.
pub fn choose_amplitude(sup: &SupersolutionSpec, grid: &Grid, u0: &[f64], v0: &[f64], clear_of: f64) -> Result<SupersolutionSpec> {
    let period = sup.pair.phi.period();
    let mut s = sup.clone();
    for _ in 0..64 {
        let clear = (0..=64).all(|k| s.xi(k as f64 * period / 64.0) >= clear_of);
        let xi = s.xi(0.0);
        let below = grid.points().iter().enumerate().filter(|(_, &x)| x >= xi).all(|(j, &x)| {
            u0[j] <= s.u_plus(0.0, x) && v0[j] <= s.v_plus(0.0, x)
        });
        if clear && below {
            return Ok(s);
        }
        s.amplitude *= 2.0;
    }
    Err(Error::NoConvergence { what: "super-solution amplitude".into(), iterations: 64, residual: s.amplitude, history: vec![] })
}

/// Largest excess of a trajectory over `(u⁺, v⁺)` on the region.
#[derive(Debug, Clone)]
pub struct ComparisonObserver {
    pub sup: SupersolutionSpec,
    pub margin: f64,
    pub worst_u: f64,
    pub worst_v: f64,
    pub checks: usize,
    pub points: usize,
}

impl ComparisonObserver {
    pub fn new(sup: SupersolutionSpec, margin: f64) -> Self {
        ComparisonObserver { sup, margin, worst_u: f64::NEG_INFINITY, worst_v: f64::NEG_INFINITY, checks: 0, points: 0 }
    }
}

impl Observer for ComparisonObserver {
    fn observe(&mut self, t: f64, u: &[f64], v: &[f64], grid: &Grid) -> Result<()> {
        let xi = self.sup.xi(t);
        let hi = grid.x_max() - self.margin;
        for (j, x) in grid.points().into_iter().enumerate() {
            if x >= xi && x <= hi {
                self.worst_u = self.worst_u.max(u[j] - self.sup.u_plus(t, x));
                self.worst_v = self.worst_v.max(v[j] - self.sup.v_plus(t, x));
                self.points += 1;
            }
        }
        self.checks += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub sup: SupersolutionSpec,
    pub ansatz_residual: f64,
    pub inequalities: AnsatzVerdict,
    pub residual: ResidualReport,
    /// `max (u - u⁺)` and `max (ṽ - v⁺)` over the region along a simulated front.
    pub front_excess: (f64, f64),
    pub front_checks: usize,
    pub front_below: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionOptions {
    pub eps: f64,
    /// Periods of the simulated front.
    pub periods: usize,
    /// Time samples per period for the residual scan.
    pub residual_samples: usize,
    /// Steps between trajectory comparisons.
    pub cadence: usize,
    /// Right end of the initial plateau.
    pub x0: f64,
}

impl Default for SupersolutionOptions {
    fn default() -> Self {
        SupersolutionOptions { eps: 0.05, periods: 20, residual_samples: 32, cadence: 10, x0: -20.0 }
    }
}

/// Builds the super-solution for `set`, evaluates every check, and runs a
/// transformed front to confirm it stays below `(u⁺, v⁺)` on the region.
pub fn verify_supersolution(
    set: &CoefficientSet,
    dispersal: &Dispersal,
    grid: &Grid,
    scheme: &SchemeConfig,
    opts: &SupersolutionOptions,
) -> Result<SupersolutionReport> {
    let st = SemitrivialOptions::default();
    let u_star = compute_semitrivial(Species::U, set, grid, dispersal, scheme, &st)?;
    let v_star = compute_semitrivial(Species::V, set, grid, dispersal, scheme, &st)?;
    let sup = build_supersolution(set, dispersal, opts.eps, u_star.max().max(v_star.max()), 10.0)?;
    let margin = FrontObserver::default_margin(grid, dispersal);
    let u0 = logistic_periodic(&set.a1.baseline, &set.b1.baseline)?.value(0.0);
    let v_star0 = v_star.at_step(0);
    let v_level = v_star0.iter().copied().fold(f64::INFINITY, f64::min);
    let front = FrontSpec { x0: opts.x0, ramp: 4.0, u_level: u0, v_level };
    let (u, v) = make_front_data(grid, &front, v_star0, margin)?;
    let vt: Vec<f64> = v_star0.iter().zip(&v).map(|(s, v)| s - v).collect();
    let sup = choose_amplitude(&sup, grid, &u, &vt, set.support() + dispersal.reach())?;
    let period = set.period();
    let n = opts.residual_samples.max(1);
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * period / n as f64).collect();
    let residual = supersolution_residual(&sup, grid, dispersal, &times, scheme.dt)?;
    let mut sim = Simulator::new(set, grid, dispersal, &SchemeConfig { observer_cadence: opts.cadence, ..*scheme })?;
    let mut state = SystemState::new(0.0, u, v)?;
    let mut cmp = ComparisonObserver::new(sup.clone(), margin);
    sim.run_transformed(&mut state, opts.periods, &v_star, &mut [&mut cmp])?;
    let tol = 1e-9;
    Ok(SupersolutionReport {
        ansatz_residual: ansatz_residual(&sup.pair),
        inequalities: check_ansatz_inequalities(&sup.pair)?,
        residual,
        front_excess: (cmp.worst_u, cmp.worst_v),
        front_checks: cmp.checks,
        front_below: cmp.worst_u <= tol && cmp.worst_v <= tol,
        sup,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceOptions {
    /// Size of the seeds `δ φ` in the unstable directions.
    pub seed: f64,
    pub tol: f64,
    pub max_periods: usize,
    /// Allowed violation of the monotone relations.
    pub slack: f64,
}

impl Default for CoexistenceOptions {
    fn default() -> Self {
        CoexistenceOptions { seed: 1e-3, tol: 1e-6, max_periods: 3000, slack: 1e-10 }
    }
}

/// One limit of the monotone iteration: a periodic coexistence state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceState {
    pub u: PeriodicField,
    pub v: PeriodicField,
    pub periods: usize,
    /// Period-to-period sup change, one entry per period.
    pub history: Vec<f64>,
    /// Largest violation of the monotone relations seen.
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceResult {
    /// Limit from `(u*, δ φ_v)`: `u` decreasing, `v` increasing.
    pub upper: CoexistenceState,
    /// Limit from `(δ φ_u, v*)`: `u` increasing, `v` decreasing.
    pub lower: CoexistenceState,
    pub u_star: PeriodicField,
    pub v_star: PeriodicField,
}

fn monotone_run(
    sim: &mut Simulator,
    mut state: SystemState,
    u_decreasing: bool,
    opts: &CoexistenceOptions,
) -> Result<CoexistenceState> {
    let mut history = Vec::new();
    let mut worst = 0.0f64;
    let sign = if u_decreasing { 1.0 } else { -1.0 };
    for period in 1..=opts.max_periods {
        let (pu, pv) = (state.u.clone(), state.v.clone());
        sim.run_periods(&mut state, 1, &mut [])?;
        let mut delta = 0.0f64;
        let mut violation = 0.0f64;
        for j in 0..pu.len() {
            // u_{n+1} <= u_n and v_{n+1} >= v_n for the upper pair, reversed for the lower
            violation = violation.max(sign * (state.u[j] - pu[j])).max(sign * (pv[j] - state.v[j]));
            delta = delta.max((state.u[j] - pu[j]).abs()).max((state.v[j] - pv[j]).abs());
        }
        worst = worst.max(violation);
        if violation > opts.slack {
            return Err(Error::MonotonicityViolated { period, amount: violation });
        }
        history.push(delta);
        if delta < opts.tol {
            state.t = 0.0;
            let steps = sim.steps_per_period();
            let (mut us, mut vs) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
            for _ in 0..steps {
                us.push(state.u.clone());
                vs.push(state.v.clone());
                sim.step(&mut state)?;
            }
            let wrap = |end: &[f64], start: &[f64]| end.iter().zip(start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let (ru, rv) = (wrap(&state.u, &us[0]), wrap(&state.v, &vs[0]));
            let grid = *sim.grid();
            let p = sim.period();
            return Ok(CoexistenceState {
                u: PeriodicField::new(p, grid, us, ru)?,
                v: PeriodicField::new(p, grid, vs, rv)?,
                periods: period,
                history,
                worst_violation: worst,
            });
        }
    }
    let tail = history.len().saturating_sub(20);
    Err(Error::NoConvergence {
        what: "monotone coexistence iteration".into(),
        iterations: opts.max_periods,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history: history[tail..].to_vec(),
    })
}

/// Monotone iteration from the ordered super and sub pairs built on the
/// semitrivial states and the dominant invasion profiles.
pub fn monotone_coexistence(
    set: &CoefficientSet,
    grid: &Grid,
    dispersal: &Dispersal,
    scheme: &SchemeConfig,
    opts: &CoexistenceOptions,
) -> Result<CoexistenceResult> {
    let st = SemitrivialOptions { tol: 1e-13, ..SemitrivialOptions::default() };
    let u_star = compute_semitrivial(Species::U, set, grid, dispersal, scheme, &st)?;
    let v_star = compute_semitrivial(Species::V, set, grid, dispersal, scheme, &st)?;
    let so = SpectrumOptions::default();
    let rv = linearized_radius(Target::UStar, set, &u_star, dispersal, scheme, &so)?;
    let ru = linearized_radius(Target::VStar, set, &v_star, dispersal, scheme, &so)?;
    for (name, r) in [("(u*, 0)", &rv), ("(0, v*)", &ru)] {
        if r.verdict != StabilityVerdict::Unstable {
            return Err(Error::precondition(format!("{name} is not unstable: spectral radius {}", r.radius)));
        }
    }
    let seed = |profile: &[f64]| -> Vec<f64> {
        let m = profile.iter().copied().fold(0.0, f64::max);
        profile.iter().map(|p| opts.seed * p / m).collect()
    };
    let upper0 = SystemState::new(0.0, u_star.at_step(0).to_vec(), seed(&rv.spectrum.profile))?;
    let lower0 = SystemState::new(0.0, seed(&ru.spectrum.profile), v_star.at_step(0).to_vec())?;
    let sim = Simulator::new(set, grid, dispersal, scheme)?;
    let (mut s1, mut s2) = (sim, Simulator::new(set, grid, dispersal, scheme)?);
    let (upper, lower) = rayon::join(|| monotone_run(&mut s1, upper0, true, opts), || monotone_run(&mut s2, lower0, false, opts));
    Ok(CoexistenceResult { upper: upper?, lower: lower?, u_star, v_star })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PersistenceMode {
    /// Both components stay uniformly positive.
    Coexistence,
    /// `u` stays positive and `v` stays uniformly below `v*`.
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceOptions {
    pub max_periods: usize,
    /// Period-to-period sup change that counts as settled.
    pub settle_tol: f64,
    /// Periods observed after settling.
    pub observe_periods: usize,
    /// Infima below this count as decay.
    pub floor: f64,
}

impl Default for PersistenceOptions {
    fn default() -> Self {
        PersistenceOptions { max_periods: 1000, settle_tol: 1e-4, observe_periods: 10, floor: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    /// Period at which the trajectory settled.
    pub settled_at: Option<usize>,
    /// Smallest `inf u` after settling.
    pub eta_u: f64,
    /// Smallest `inf v` (coexistence) or `inf (v* - v)` (one-sided) after settling.
    pub eta_v: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub mode: PersistenceMode,
    /// `min(eta_u, eta_v)` over all successful trials.
    pub eta: f64,
    pub trials: Vec<TrialReport>,
    pub failures: Vec<usize>,
}

/// Strictly positive random initial data: piecewise constant on blocks of
/// ten cells with values in `[0.05, 1] × bound` for each component.
pub fn random_ensemble(set: &CoefficientSet, grid: &Grid, trials: usize, seed: u64) -> Vec<SystemState> {
    let (bu, bv) = crate::simulator::invariant_bounds(set);
    (0..trials)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let mut field = |bound: f64| -> Vec<f64> {
                let mut out = Vec::with_capacity(grid.len());
                while out.len() < grid.len() {
                    let v = bound * rng.gen_range(0.05..=1.0);
                    out.extend(std::iter::repeat_n(v, 10.min(grid.len() - out.len())));
                }
                out
            };
            let u = field(bu);
            let v = field(bv);
            SystemState { t: 0.0, u, v }
        })
        .collect()
}

/// Runs every initial state until it settles and reports the uniform lower
/// bound `η` observed afterwards.
pub fn persistence_probe(
    set: &CoefficientSet,
    grid: &Grid,
    dispersal: &Dispersal,
    scheme: &SchemeConfig,
    initials: &[SystemState],
    mode: PersistenceMode,
    opts: &PersistenceOptions,
) -> Result<PersistenceReport> {
    use rayon::prelude::*;
    let v_star = match mode {
        PersistenceMode::OneSided => Some(compute_semitrivial(Species::V, set, grid, dispersal, scheme, &SemitrivialOptions::default())?),
        PersistenceMode::Coexistence => None,
    };
    let trials = initials
        .par_iter()
        .enumerate()
        .map(|(i, init)| -> Result<TrialReport> {
            let mut sim = Simulator::new(set, grid, dispersal, scheme)?;
            let mut state = SystemState::new(0.0, init.u.clone(), init.v.clone())?;
            let measure = |s: &SystemState| -> (f64, f64) {
                let iu = s.u.iter().copied().fold(f64::INFINITY, f64::min);
                let iv = match &v_star {
                    Some(vs) => vs.at_step(0).iter().zip(&s.v).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min),
                    None => s.v.iter().copied().fold(f64::INFINITY, f64::min),
                };
                (iu, iv)
            };
            let mut settled_at = None;
            for period in 1..=opts.max_periods {
                let (pu, pv) = (state.u.clone(), state.v.clone());
                sim.run_periods(&mut state, 1, &mut [])?;
                let delta = state.u.iter().zip(&pu).chain(state.v.iter().zip(&pv)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if delta < opts.settle_tol {
                    settled_at = Some(period);
                    break;
                }
            }
            let Some(_) = settled_at else {
                return Ok(TrialReport { trial: i, settled_at, eta_u: f64::NAN, eta_v: f64::NAN, failed: true });
            };
            let (mut eu, mut ev) = measure(&state);
            for _ in 0..opts.observe_periods {
                sim.run_periods(&mut state, 1, &mut [])?;
                let (a, b) = measure(&state);
                eu = eu.min(a);
                ev = ev.min(b);
            }
            let failed = !(eu > opts.floor && ev > opts.floor);
            Ok(TrialReport { trial: i, settled_at, eta_u: eu, eta_v: ev, failed })
        })
        .collect::<Result<Vec<_>>>()?;
    let failures: Vec<usize> = trials.iter().filter(|t| t.failed).map(|t| t.trial).collect();
    let eta = trials.iter().filter(|t| !t.failed).map(|t| t.eta_u.min(t.eta_v)).fold(f64::INFINITY, f64::min);
    Ok(PersistenceReport { mode, eta, trials, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::PeriodicScalar;
    use crate::simulator::StepMode;

    const CANON: [f64; 6] = [1.0, 1.0, 0.5, 0.4, 0.5, 1.0];

    #[test]
    fn canonical_ansatz_pair() {
        let set = CoefficientSet::constants(1.0, CANON).unwrap();
        let p = build_ansatz_pair(&set, &Dispersal::Random, 0.0, 0.8f64.sqrt()).unwrap();
        assert!((p.lambda - 1.6).abs() < 1e-12);
        assert!(p.phi.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(p.psi.values().iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-10));
        assert!(ansatz_residual(&p) < 1e-8);
        let p0 = build_ansatz_pair(&set, &Dispersal::Random, 0.05, 0.0).unwrap();
        assert!((p0.lambda - (1.05 - 0.45 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn periodic_growth_keeps_lambda() {
        let mut set = CoefficientSet::constants(1.0, CANON).unwrap();
        set.a1.baseline = PeriodicScalar::harmonic(1.0, 1.0, 0.1, 0.3).unwrap();
        let p = build_ansatz_pair(&set, &Dispersal::Random, 0.0, 0.8f64.sqrt()).unwrap();
        assert!((p.lambda - 1.6).abs() < 1e-10);
        assert!(p.phi.max() - p.phi.min() > 1e-3);
        let mean_log = p.phi.values()[..512].iter().map(|v| v.ln()).sum::<f64>() / 512.0;
        assert!(mean_log.abs() < 0.05);
        assert!(ansatz_residual(&p) < 1e-8);
    }

    #[test]
    fn inequalities_and_constants() {
        let set = CoefficientSet::constants(1.0, CANON).unwrap();
        let s = build_supersolution(&set, &Dispersal::Random, 0.01, 1.0, 10.0).unwrap();
        let v = check_ansatz_inequalities(&s.pair).unwrap();
        assert!(v.holds && v.margins.iter().all(|m| *m > 0.3));
        assert!((v.margins[1] - (0.51 - 1.01 * 0.204 / 1.204)).abs() < 1e-9);
        assert!(s.k as f64 * s.m_ratio >= 1.0);
        for t in [0.0, 0.3, 2.7] {
            let xi = s.xi(t);
            assert!((s.u_plus(t, xi) - s.k as f64 * s.m_sup).abs() < 1e-8);
        }
        let d = s.with_amplitude(20.0);
        assert!((d.xi(0.4) - s.xi(0.4) - 2f64.ln() / s.pair.mu).abs() < 1e-12);
    }

    #[test]
    fn residuals_nonnegative_on_region() {
        let set = CoefficientSet::constants(1.0, CANON).unwrap();
        let g = Grid::new(-40.0, 60.0, 1001).unwrap();
        let s = build_supersolution(&set, &Dispersal::Random, 0.05, 1.0, 10.0).unwrap();
        let times: Vec<f64> = (0..16).map(|k| k as f64 / 16.0).collect();
        let r = supersolution_residual(&s, &g, &Dispersal::Random, &times, 0.01).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.min_u > -1e-3 && r.min_v > -1e-3);
        let d = supersolution_residual(&s.with_amplitude(20.0), &g, &Dispersal::Random, &times, 0.01).unwrap();
        assert!(d.pass);
    }

    #[test]
    fn symmetric_coexistence() {
        let set = CoefficientSet::constants(1.0, [1.0, 1.0, 0.5, 1.0, 0.5, 1.0]).unwrap();
        let g = Grid::new(-10.0, 10.0, 101).unwrap();
        let r = monotone_coexistence(&set, &g, &Dispersal::Random, &SchemeConfig::new(0.04, StepMode::Implicit), &CoexistenceOptions::default()).unwrap();
        for f in [&r.upper.u, &r.upper.v, &r.lower.u, &r.lower.v] {
            assert!((f.min() - 2.0 / 3.0).abs() < 1e-4 && (f.max() - 2.0 / 3.0).abs() < 1e-4);
        }
        assert!(r.upper.worst_violation <= 1e-10 && r.lower.worst_violation <= 1e-10);
    }

    #[test]
    fn exclusion_is_not_coexistence() {
        let set = CoefficientSet::constants(1.0, CANON).unwrap();
        let g = Grid::new(-10.0, 10.0, 101).unwrap();
        let e = monotone_coexistence(&set, &g, &Dispersal::Random, &SchemeConfig::new(0.04, StepMode::Implicit), &CoexistenceOptions::default());
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn persistence_modes() {
        let g = Grid::new(-10.0, 10.0, 101).unwrap();
        let scheme = SchemeConfig::new(0.04, StepMode::Implicit);
        let weak = CoefficientSet::constants(1.0, [1.0, 1.0, 0.5, 1.0, 0.5, 1.0]).unwrap();
        let init = random_ensemble(&weak, &g, 3, 7);
        assert_eq!(init, random_ensemble(&weak, &g, 3, 7));
        let r = persistence_probe(&weak, &g, &Dispersal::Random, &scheme, &init, PersistenceMode::Coexistence, &PersistenceOptions::default()).unwrap();
        assert!(r.failures.is_empty() && (r.eta - 2.0 / 3.0).abs() < 1e-3);

        let canon = CoefficientSet::constants(1.0, CANON).unwrap();
        let only_u = vec![SystemState { t: 0.0, u: vec![0.3; g.len()], v: vec![0.0; g.len()] }];
        let r = persistence_probe(&canon, &g, &Dispersal::Random, &scheme, &only_u, PersistenceMode::OneSided, &PersistenceOptions::default()).unwrap();
        assert!((r.trials[0].eta_u - 1.0).abs() < 1e-3);
        assert!((r.trials[0].eta_v - 0.4).abs() < 1e-12);
    }
}
