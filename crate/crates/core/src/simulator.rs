//! Time stepping of the nonlinear competition system and of its cooperative
//! transform `(u, v* - v)`.
//!
//! One step is a dispersal substep followed by a pointwise reaction substep.
//! The reaction is split symmetrically (u over half a step, v over a full
//! step, u over the second half), and each piece is the exact solution of a
//! logistic equation with the competitor frozen, so it is increasing in the
//! species itself and decreasing in its competitor. Together with the
//! order-preserving dispersal substeps this makes the discrete period map
//! monotone in the competitive order.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, CoefficientSet, DEFAULT_SAMPLES_PER_PERIOD};
use crate::dispersal::{Dispersal, Grid};
use crate::error::{Error, Result};
use crate::semitrivial::PeriodicField;
use crate::stepping::{stability_bound, Diffuser, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    /// Forward Euler diffusion (random) / Taylor convolution (nonlocal).
    Explicit,
    /// Crank–Nicolson diffusion (random) / Taylor convolution (nonlocal).
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub mode: StepMode,
    /// Steps between observer calls; 0 means once per period.
    #[serde(default)]
    pub observer_cadence: usize,
}

impl SchemeConfig {
    pub fn new(dt: f64, mode: StepMode) -> Self {
        SchemeConfig { dt, mode, observer_cadence: 0 }
    }

    /// Largest step below the stability bound that divides the period.
    pub fn fitted(grid: &Grid, dispersal: &Dispersal, mode: StepMode, period: f64) -> Self {
        let (bound, _) = stability_bound(grid, dispersal, mode);
        let n = (period / bound).ceil().max(1.0);
        SchemeConfig::new(period / n, mode)
    }

    pub fn steps_per_period(&self, period: f64) -> Result<usize> {
        if !(self.dt > 0.0) {
            return Err(Error::input(format!("time step must be positive, got {}", self.dt)));
        }
        let n = (period / self.dt).round();
        if n < 1.0 || (n * self.dt - period).abs() > 1e-9 * period {
            return Err(Error::input(format!("time step {} does not divide the period {period}", self.dt)));
        }
        Ok(n as usize)
    }

    pub fn check(&self, grid: &Grid, dispersal: &Dispersal) -> Result<()> {
        let (bound, reason) = stability_bound(grid, dispersal, self.mode);
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::Stability { dt: self.dt, bound, reason });
        }
        Ok(())
    }
}

/// Paired population fields at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SystemState {
    pub fn new(t: f64, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::input("u and v have different lengths"));
        }
        if u.iter().chain(&v).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::input("population fields must be finite and nonnegative"));
        }
        Ok(SystemState { t, u, v })
    }

    pub fn constant(grid: &Grid, u: f64, v: f64) -> Self {
        SystemState { t: 0.0, u: vec![u; grid.len()], v: vec![v; grid.len()] }
    }
}

/// Something recorded during a run. `v` is the transformed component
/// `v* - v` in transformed runs.
pub trait Observer {
    fn observe(&mut self, t: f64, u: &[f64], v: &[f64], grid: &Grid) -> Result<()>;
}

/// Rightmost `x` with `w(x) >= θ`, linearly interpolated to the crossing.
pub fn front_position(grid: &Grid, w: &[f64], theta: f64) -> Option<f64> {
    let j = w.iter().rposition(|&v| v >= theta)?;
    if j + 1 >= w.len() {
        return Some(grid.x(j));
    }
    let (a, b) = (w[j], w[j + 1]);
    let frac = if a > b { (a - theta) / (a - b) } else { 0.0 };
    Some(grid.x(j) + frac * grid.h())
}

/// Which level set a [`FrontObserver`] follows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrontLevel {
    /// Level `theta` of one component (0 = u, 1 = v).
    Component { index: usize, theta: f64 },
    /// Where both components still exceed their levels: the smaller of the two fronts.
    Both { theta_u: f64, theta_v: f64 },
    /// Leading edge of `u² + v² >= θ²`.
    Norm { theta: f64 },
}

/// Records `(t, x_θ(t))` and fails once the front comes within `margin` of
/// the right end of the grid.
#[derive(Debug, Clone)]
pub struct FrontObserver {
    pub level: FrontLevel,
    pub margin: f64,
    pub records: Vec<(f64, f64)>,
    buf: Vec<f64>,
}

impl FrontObserver {
    pub fn new(level: FrontLevel, margin: f64) -> Self {
        FrontObserver { level, margin, records: Vec::new(), buf: Vec::new() }
    }

    /// Margin from the dispersal reach plus ten grid spacings.
    pub fn default_margin(grid: &Grid, dispersal: &Dispersal) -> f64 {
        dispersal.reach() + 10.0 * grid.h()
    }
}

impl Observer for FrontObserver {
    fn observe(&mut self, t: f64, u: &[f64], v: &[f64], grid: &Grid) -> Result<()> {
        let pos = match self.level {
            FrontLevel::Component { index, theta } => front_position(grid, if index == 0 { u } else { v }, theta),
            FrontLevel::Both { theta_u, theta_v } => {
                match (front_position(grid, u, theta_u), front_position(grid, v, theta_v)) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    _ => None,
                }
            }
            FrontLevel::Norm { theta } => {
                self.buf.clear();
                self.buf.extend(u.iter().zip(v).map(|(a, b)| (a * a + b * b).sqrt()));
                front_position(grid, &self.buf, theta)
            }
        };
        let x = pos.unwrap_or(grid.x_min());
        let limit = grid.x_max() - self.margin;
        if x > limit {
            return Err(Error::FrontLeftDomain { t, position: x, limit });
        }
        self.records.push((t, x));
        Ok(())
    }
}

/// Records `(t, sup|Δu|, sup|Δv|)` between consecutive observations.
#[derive(Debug, Clone, Default)]
pub struct DeltaObserver {
    pub records: Vec<(f64, f64, f64)>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Observer for DeltaObserver {
    fn observe(&mut self, t: f64, u: &[f64], v: &[f64], _grid: &Grid) -> Result<()> {
        if let Some((pu, pv)) = &self.last {
            let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            self.records.push((t, d(u, pu), d(v, pv)));
        }
        self.last = Some((u.to_vec(), v.to_vec()));
        Ok(())
    }
}

/// Records `(t, inf u, sup u, inf v, sup v)`.
#[derive(Debug, Clone, Default)]
pub struct NormObserver {
    pub records: Vec<[f64; 5]>,
}

impl Observer for NormObserver {
    fn observe(&mut self, t: f64, u: &[f64], v: &[f64], _grid: &Grid) -> Result<()> {
        let lo = |a: &[f64]| a.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = |a: &[f64]| a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.records.push([t, lo(u), hi(u), lo(v), hi(v)]);
        Ok(())
    }
}

/// Precomputed per-point data for one species' reaction.
#[derive(Debug, Clone)]
struct ReactionFields {
    growth: CoefficientField,
    crowding: CoefficientField,
    cross: CoefficientField,
    growth_bump: Vec<f64>,
    crowding_bump: Vec<f64>,
    cross_bump: Vec<f64>,
    constant_in_time: bool,
}

impl ReactionFields {
    fn new(grid: &Grid, growth: &CoefficientField, crowding: &CoefficientField, cross: &CoefficientField) -> Self {
        let bump = |f: &CoefficientField| grid.points().iter().map(|&x| f.bump_value(x)).collect();
        ReactionFields {
            growth_bump: bump(growth),
            crowding_bump: bump(crowding),
            cross_bump: bump(cross),
            constant_in_time: growth.baseline.is_constant()
                && crowding.baseline.is_constant()
                && cross.baseline.is_constant(),
            growth: growth.clone(),
            crowding: crowding.clone(),
            cross: cross.clone(),
        }
    }

    /// Exact logistic update of `w` over `[t0, t0 + tau]` with `other` frozen.
    fn react(&self, w: &mut [f64], other: &[f64], t0: f64, tau: f64) {
        let (ga, gc) = (&self.growth.baseline, &self.cross.baseline);
        let a_f = ga.integral(t0, t0 + tau);
        let c_f = gc.integral(t0, t0 + tau);
        if self.constant_in_time {
            let b = self.crowding.baseline.value(t0);
            for j in 0..w.len() {
                let r = a_f + self.growth_bump[j] * tau - (c_f + self.cross_bump[j] * tau) * other[j];
                let q = (b + self.crowding_bump[j]) * tau * expm1_ratio(r);
                w[j] = w[j] * r.exp() / (1.0 + w[j] * q);
            }
        } else {
            let half = 0.5 * tau;
            let a_h = ga.integral(t0, t0 + half);
            let c_h = gc.integral(t0, t0 + half);
            let cb = &self.crowding.baseline;
            let (b0, bm, b1) = (cb.value(t0), cb.value(t0 + half), cb.value(t0 + tau));
            for j in 0..w.len() {
                let (gb, kb, xb) = (self.growth_bump[j], self.crowding_bump[j], self.cross_bump[j]);
                let r_h = a_h + gb * half - (c_h + xb * half) * other[j];
                let r_f = a_f + gb * tau - (c_f + xb * tau) * other[j];
                let e_f = r_f.exp();
                // Simpson rule for ∫ b(s) e^{R(s)} ds
                let q = tau / 6.0 * ((b0 + kb) + 4.0 * (bm + kb) * r_h.exp() + (b1 + kb) * e_f);
                w[j] = w[j] * e_f / (1.0 + w[j] * q);
            }
        }
    }
}

/// `(e^r - 1) / r`, continuous at 0.
fn expm1_ratio(r: f64) -> f64 {
    if r.abs() < 1e-8 {
        1.0 + 0.5 * r
    } else {
        r.exp_m1() / r
    }
}

/// Stepper for one coefficient set on one grid.
#[derive(Debug)]
pub struct Simulator {
    set: CoefficientSet,
    grid: Grid,
    dispersal: Dispersal,
    scheme: SchemeConfig,
    steps_per_period: usize,
    diffuser: Diffuser,
    u_rx: ReactionFields,
    v_rx: ReactionFields,
    scratch: Scratch,
}

impl Simulator {
    pub fn new(set: &CoefficientSet, grid: &Grid, dispersal: &Dispersal, scheme: &SchemeConfig) -> Result<Self> {
        let steps_per_period = scheme.steps_per_period(set.period())?;
        let diffuser = Diffuser::new(grid, dispersal, scheme.mode, scheme.dt, 0.0)?;
        Ok(Simulator {
            u_rx: ReactionFields::new(grid, &set.a1, &set.b1, &set.c1),
            v_rx: ReactionFields::new(grid, &set.a2, &set.c2, &set.b2),
            set: set.clone(),
            grid: *grid,
            dispersal: dispersal.clone(),
            scheme: *scheme,
            steps_per_period,
            diffuser,
            scratch: Scratch::default(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn set(&self) -> &CoefficientSet {
        &self.set
    }

    pub fn dispersal(&self) -> &Dispersal {
        &self.dispersal
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn steps_per_period(&self) -> usize {
        self.steps_per_period
    }

    pub fn period(&self) -> f64 {
        self.set.period()
    }

    fn check_state(&self, state: &SystemState) -> Result<()> {
        if state.u.len() != self.grid.len() || state.v.len() != self.grid.len() {
            return Err(Error::input("state does not match the grid"));
        }
        Ok(())
    }

    /// One dispersal + reaction step.
    pub fn step(&mut self, state: &mut SystemState) -> Result<()> {
        self.check_state(state)?;
        let dt = self.scheme.dt;
        let t = state.t;
        self.diffuser.apply(&mut state.u, &mut self.scratch);
        self.diffuser.apply(&mut state.v, &mut self.scratch);
        self.u_rx.react(&mut state.u, &state.v, t, 0.5 * dt);
        self.v_rx.react(&mut state.v, &state.u, t, dt);
        self.u_rx.react(&mut state.u, &state.v, t + 0.5 * dt, 0.5 * dt);
        // keep period marks exact
        let k = ((t + dt) / dt).round();
        state.t = if ((t + dt) - k * dt).abs() < 1e-9 * dt { k * dt } else { t + dt };
        if let Some(j) = state.u.iter().chain(&state.v).position(|x| !x.is_finite()) {
            return Err(Error::BlowUp { t: state.t, index: j % self.grid.len() });
        }
        Ok(())
    }

    /// Advance by `n` periods, calling observers at the configured cadence
    /// (and once before the first step).
    pub fn run_periods(&mut self, state: &mut SystemState, n: usize, observers: &mut [&mut dyn Observer]) -> Result<()> {
        self.run_steps(state, n * self.steps_per_period, observers, None)
    }

    fn run_steps(
        &mut self,
        state: &mut SystemState,
        steps: usize,
        observers: &mut [&mut dyn Observer],
        v_star: Option<&PeriodicField>,
    ) -> Result<()> {
        self.check_state(state)?;
        if steps == 0 {
            return Ok(());
        }
        let cadence = if self.scheme.observer_cadence == 0 { self.steps_per_period } else { self.scheme.observer_cadence };
        let mut vt = Vec::new();
        let mut notify = |sim: &Simulator, state: &SystemState, observers: &mut [&mut dyn Observer]| -> Result<()> {
            if observers.is_empty() {
                return Ok(());
            }
            let v: &[f64] = match v_star {
                Some(vs) => {
                    let star = vs.at_time(state.t);
                    vt.clear();
                    vt.extend(star.iter().zip(&state.v).map(|(s, v)| s - v));
                    &vt
                }
                None => &state.v,
            };
            for o in observers.iter_mut() {
                o.observe(state.t, &state.u, v, &sim.grid)?;
            }
            Ok(())
        };
        notify(self, state, observers)?;
        for k in 1..=steps {
            self.step(state)?;
            if k % cadence == 0 {
                notify(self, state, observers)?;
            }
        }
        Ok(())
    }

    /// Advance `n` periods of the transformed system `(u, v* - v)`; observers
    /// receive the transformed pair. `state` stays in original variables.
    pub fn run_transformed(
        &mut self,
        state: &mut SystemState,
        n: usize,
        v_star: &PeriodicField,
        observers: &mut [&mut dyn Observer],
    ) -> Result<()> {
        self.check_periodic_field(v_star)?;
        self.run_steps(state, n * self.steps_per_period, observers, Some(v_star))
    }

    pub(crate) fn check_periodic_field(&self, w: &PeriodicField) -> Result<()> {
        if w.steps_per_period() != self.steps_per_period || w.grid_len() != self.grid.len() {
            return Err(Error::input("periodic field was computed with a different grid or time step"));
        }
        Ok(())
    }

    /// Componentwise bounds `sup a1 / inf b1`, `sup a2 / inf c2` of the invariant box.
    pub fn invariant_bounds(&self) -> (f64, f64) {
        invariant_bounds(&self.set)
    }
}

/// Upper corners of the box `[0, sup a1/inf b1] × [0, sup a2/inf c2]`.
pub fn invariant_bounds(set: &CoefficientSet) -> (f64, f64) {
    let n = DEFAULT_SAMPLES_PER_PERIOD;
    let sup = |f: &CoefficientField| f.baseline.extrema(n).1 + f.bump.map_or(0.0, |b| b.amplitude().max(0.0));
    let inf = |f: &CoefficientField| f.baseline.extrema(n).0 + f.bump.map_or(0.0, |b| b.amplitude().min(0.0));
    (sup(&set.a1) / inf(&set.b1), sup(&set.a2) / inf(&set.c2))
}

/// Shape of initial front data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontSpec {
    /// Right end of the plateau.
    pub x0: f64,
    /// Width of the linear ramp down to zero.
    pub ramp: f64,
    /// Left plateau of `u`.
    pub u_level: f64,
    /// Left plateau of the transformed component `v* - v`.
    pub v_level: f64,
}

fn plateau(grid: &Grid, x0: f64, ramp: f64, level: f64) -> Vec<f64> {
    grid.points()
        .iter()
        .map(|&x| {
            if x <= x0 {
                level
            } else if ramp > 0.0 && x < x0 + ramp {
                level * (1.0 - (x - x0) / ramp)
            } else {
                0.0
            }
        })
        .collect()
}

/// Front-shaped initial data in transformed variables: both components sit
/// on a positive plateau left of `x0`, ramp down, and vanish right of
/// `x0 + ramp`. Returned in original variables `(u, v* - ṽ)`.
pub fn make_front_data(grid: &Grid, front: &FrontSpec, v_star0: &[f64], margin: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (u, vt) = make_transformed_front(grid, front, margin)?;
    if v_star0.len() != grid.len() {
        return Err(Error::input("v* profile does not match the grid"));
    }
    let min_star = v_star0.iter().copied().fold(f64::INFINITY, f64::min);
    if front.v_level > min_star {
        return Err(Error::input(format!(
            "transformed plateau {} exceeds inf v* = {min_star}",
            front.v_level
        )));
    }
    let v = v_star0.iter().zip(&vt).map(|(s, t)| s - t).collect();
    Ok((u, v))
}

/// The transformed pair `(u, ṽ)` itself.
pub fn make_transformed_front(grid: &Grid, front: &FrontSpec, margin: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(front.ramp >= 0.0 && front.u_level >= 0.0 && front.v_level >= 0.0) {
        return Err(Error::input("front levels and ramp must be nonnegative"));
    }
    if front.x0 < grid.x_min() + margin || front.x0 + front.ramp > grid.x_max() - margin {
        return Err(Error::input(format!(
            "front [{}, {}] violates the boundary margin {margin}",
            front.x0,
            front.x0 + front.ramp
        )));
    }
    Ok((plateau(grid, front.x0, front.ramp, front.u_level), plateau(grid, front.x0, front.ramp, front.v_level)))
}
