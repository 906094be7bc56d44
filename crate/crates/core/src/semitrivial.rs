//! Semitrivial periodic states `(u*, 0)` and `(0, v*)` of the spatially
//! perturbed system, their decoupled linear stability, and the search for a
//! localized growth bump that destabilizes `(u*, 0)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{Coef, CoefficientField, CoefficientSet, PeriodicScalar, SpatialBump};
use crate::dispersal::{Dispersal, Grid};
use crate::error::{Error, Result};
use crate::periodic_orbits::{logistic_periodic, PeriodicOrbit};
use crate::simulator::{SchemeConfig, Simulator, SystemState};
use crate::spectrum::{power_iterate, Exit, LinearCoefficient, LinearProblem, SpectrumOptions, SpectrumResult};

/// A field sampled at every step start `k dt`, `k = 0..steps`, of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicField {
    period: f64,
    dt: f64,
    grid: Grid,
    samples: Vec<Vec<f64>>,
    /// `sup |w(T, ·) - w(0, ·)|`.
    pub residual: f64,
}

impl PeriodicField {
    pub fn new(period: f64, grid: Grid, samples: Vec<Vec<f64>>, residual: f64) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|s| s.len() != grid.len()) {
            return Err(Error::input("periodic field samples do not match the grid"));
        }
        let dt = period / samples.len() as f64;
        Ok(PeriodicField { period, dt, grid, samples, residual })
    }

    /// x-constant field following a scalar orbit.
    pub fn from_orbit(orbit: &PeriodicOrbit, grid: &Grid, steps_per_period: usize) -> Self {
        let dt = orbit.period() / steps_per_period as f64;
        let samples = (0..steps_per_period).map(|k| vec![orbit.value(k as f64 * dt); grid.len()]).collect();
        PeriodicField { period: orbit.period(), dt, grid: *grid, samples, residual: 0.0 }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn steps_per_period(&self) -> usize {
        self.samples.len()
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn at_step(&self, k: usize) -> &[f64] {
        &self.samples[k % self.samples.len()]
    }

    /// Sample at the step start nearest to `t` (periodic).
    pub fn at_time(&self, t: f64) -> &[f64] {
        let k = (t / self.dt).round().rem_euclid(self.samples.len() as f64) as usize;
        self.at_step(k)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn is_x_dependent(&self) -> bool {
        self.samples.iter().any(|s| {
            let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            hi - lo > 1e-12 * hi.abs().max(1.0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemitrivialOptions {
    /// Period-to-period sup-norm change declaring convergence.
    pub tol: f64,
    pub max_periods: usize,
    /// Allowed `|w(t, x) - w0(t)|` at the ends of the grid.
    pub tail_tol: f64,
    /// Initial level as a multiple of the logistic orbit value `w0(0)`.
    pub seed_scale: f64,
}

impl Default for SemitrivialOptions {
    fn default() -> Self {
        SemitrivialOptions { tol: 1e-8, max_periods: 5000, tail_tol: 1e-4, seed_scale: 1.0 }
    }
}

/// Attracting positive periodic solution of the single-species equation
/// (the other species absent), computed with the full system's stepper so
/// that it is an exact periodic orbit of the discrete scheme.
pub fn compute_semitrivial(
    species: Species,
    set: &CoefficientSet,
    grid: &Grid,
    dispersal: &Dispersal,
    scheme: &SchemeConfig,
    opts: &SemitrivialOptions,
) -> Result<PeriodicField> {
    let (a, b) = match species {
        Species::U => (&set.a1, &set.b1),
        Species::V => (&set.a2, &set.c2),
    };
    let orbit = logistic_periodic(&a.baseline, &b.baseline)?;
    let support = set.support();
    if support > 0.0 && (grid.x_min() > -support || grid.x_max() < support) {
        return Err(Error::input("grid does not contain the perturbation support"));
    }
    let mut sim = Simulator::new(set, grid, dispersal, scheme)?;
    let n = grid.len();
    let w0 = opts.seed_scale * orbit.value(0.0);
    if !(w0 > 0.0) {
        return Err(Error::input("semitrivial seed must be positive"));
    }
    let mut state = match species {
        Species::U => SystemState::constant(grid, w0, 0.0),
        Species::V => SystemState::constant(grid, 0.0, w0),
    };
    let pick = |s: &SystemState| -> Vec<f64> {
        match species {
            Species::U => s.u.clone(),
            Species::V => s.v.clone(),
        }
    };
    let mut prev = pick(&state);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_periods {
        sim.run_periods(&mut state, 1, &mut [])?;
        let cur = pick(&state);
        let delta = cur.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        history.push(delta);
        prev = cur;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let tail = history.len().saturating_sub(20);
        return Err(Error::NoConvergence {
            what: format!("semitrivial state of {species:?}"),
            iterations: opts.max_periods,
            residual: history.last().copied().unwrap_or(f64::NAN),
            history: history[tail..].to_vec(),
        });
    }
    state.t = 0.0;
    let steps = sim.steps_per_period();
    let mut samples = Vec::with_capacity(steps);
    for _ in 0..steps {
        samples.push(pick(&state));
        sim.step(&mut state)?;
    }
    let end = pick(&state);
    let residual = end.iter().zip(&samples[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    for (k, s) in samples.iter().enumerate() {
        let base = orbit.value(k as f64 * scheme.dt);
        for j in [0, n - 1] {
            if (s[j] - base).abs() > opts.tail_tol {
                return Err(Error::input(format!(
                    "semitrivial tail {} differs from the homogeneous orbit {base} by more than {}: domain too small",
                    s[j], opts.tail_tol
                )));
            }
        }
    }
    PeriodicField::new(set.period(), *grid, samples, residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityVerdict {
    Unstable,
    NotUnstable,
    /// Radius within 1e-3 of 1.
    Inconclusive,
}

/// Semitrivial state whose invasion exponent is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// `(u*, 0)`: growth of `v` at rate `a2 - b2 u*`.
    UStar,
    /// `(0, v*)`: growth of `u` at rate `a1 - c1 v*`.
    VStar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub lambda: f64,
    pub radius: f64,
    pub verdict: StabilityVerdict,
    pub spectrum: SpectrumResult,
}

fn verdict_of(radius: f64) -> StabilityVerdict {
    if (radius - 1.0).abs() < 1e-3 {
        StabilityVerdict::Inconclusive
    } else if radius > 1.0 {
        StabilityVerdict::Unstable
    } else {
        StabilityVerdict::NotUnstable
    }
}

/// Invasion coefficient of the absent species at a semitrivial state.
pub fn invasion_coefficient(target: Target, set: &CoefficientSet, field: &PeriodicField) -> LinearCoefficient {
    match target {
        Target::UStar => LinearCoefficient::Reduced { a: set.a2.clone(), b: set.b2.clone(), w: field.clone() },
        Target::VStar => LinearCoefficient::Reduced { a: set.a1.clone(), b: set.c1.clone(), w: field.clone() },
    }
}

/// Spectral radius of the decoupled invasion problem at a semitrivial state.
pub fn linearized_radius(
    target: Target,
    set: &CoefficientSet,
    field: &PeriodicField,
    dispersal: &Dispersal,
    scheme: &SchemeConfig,
    opts: &SpectrumOptions,
) -> Result<RadiusReport> {
    let p = LinearProblem::new(0.0, invasion_coefficient(target, set, field), dispersal.clone(), *field.grid(), *scheme)?;
    let (spectrum, _) = power_iterate(&p, opts, false)?;
    let radius = spectrum.radius();
    Ok(RadiusReport { lambda: spectrum.lambda, radius, verdict: verdict_of(radius), spectrum })
}

/// Amplitudes × widths of square bumps tried by [`destabilizing_bump`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFamily {
    pub amplitudes: Vec<f64>,
    pub widths: Vec<f64>,
}

impl Default for BumpFamily {
    fn default() -> Self {
        BumpFamily {
            amplitudes: (1..=20).map(|k| k as f64 * 0.05).collect(),
            widths: vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTrial {
    pub amplitude: f64,
    pub width: f64,
    /// Exponent estimate when the iteration stopped.
    pub lambda: f64,
    pub destabilizes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Destabilization {
    pub bump: SpatialBump,
    /// `λ(a2⁰ - b2⁰ u0*)`, the time average.
    pub baseline_lambda: f64,
    /// Verified `λ(a2 - b2 u*)` with the bump in place.
    pub lambda: f64,
    pub trials: Vec<BumpTrial>,
}

/// Smallest-amplitude square bump on `a2` (narrowest width among ties) that
/// turns the stable semitrivial `(u0*, 0)` unstable.
pub fn destabilizing_bump(
    set: &CoefficientSet,
    grid: &Grid,
    dispersal: &Dispersal,
    scheme: &SchemeConfig,
    family: &BumpFamily,
    opts: &SpectrumOptions,
) -> Result<Destabilization> {
    if set.has_bumps() {
        return Err(Error::precondition("destabilization search starts from an unperturbed set"));
    }
    let u0 = logistic_periodic(&set.a1.baseline, &set.b1.baseline)?;
    let steps = scheme.steps_per_period(set.period())?;
    let alpha = |t: f64| set.a2.baseline.value(t) - set.b2.baseline.value(t) * u0.value(t);
    let n = 4096;
    let baseline_lambda = (0..n).map(|k| alpha(k as f64 * set.period() / n as f64)).sum::<f64>() / n as f64;
    if !(baseline_lambda < 0.0) {
        return Err(Error::precondition(format!(
            "(u0*, 0) is already unstable: time average of a2 - b2 u0* is {baseline_lambda}"
        )));
    }
    let u_field = PeriodicField::from_orbit(&u0, grid, steps);
    let problem = |bump: SpatialBump| -> Result<LinearProblem> {
        let a = CoefficientField::with_bump(set.a2.baseline.clone(), bump);
        let coefficient = LinearCoefficient::Reduced { a, b: set.b2.clone(), w: u_field.clone() };
        LinearProblem::new(0.0, coefficient, dispersal.clone(), *grid, *scheme)
    };
    let mut amplitudes = family.amplitudes.clone();
    amplitudes.sort_by(f64::total_cmp);
    let mut widths = family.widths.clone();
    widths.sort_by(f64::total_cmp);
    let mut trials = Vec::new();
    for amp in amplitudes {
        let row: Vec<Result<BumpTrial>> = widths
            .par_iter()
            .map(|&width| {
                let (res, exit) = power_iterate(&problem(SpatialBump::square(amp, width)?)?, opts, true)?;
                let destabilizes = match exit {
                    Exit::SignSettled => res.bracket.0 > 1.0,
                    Exit::Converged => res.lambda > 0.0,
                };
                Ok(BumpTrial { amplitude: amp, width, lambda: res.lambda, destabilizes })
            })
            .collect();
        let row = row.into_iter().collect::<Result<Vec<_>>>()?;
        let hit = row.iter().find(|t| t.destabilizes).cloned();
        trials.extend(row);
        if let Some(hit) = hit {
            let bump = SpatialBump::square(hit.amplitude, hit.width)?;
            let verified = power_iterate(&problem(bump)?, opts, false)?.0;
            if verified.lambda <= 0.0 {
                return Err(Error::NoConvergence {
                    what: "destabilizing bump failed verification".into(),
                    iterations: verified.iterations,
                    residual: verified.residual,
                    history: vec![hit.lambda, verified.lambda],
                });
            }
            return Ok(Destabilization { bump, baseline_lambda, lambda: verified.lambda, trials });
        }
    }
    Err(Error::precondition("no bump in the family destabilizes (u0*, 0)"))
}

/// Homogeneous invasion exponent `mean(a2⁰ - b2⁰ u0*)` or `mean(a1⁰ - c1⁰ v0*)`.
pub fn homogeneous_invasion_exponent(target: Target, set: &CoefficientSet) -> Result<f64> {
    let (grow, cross, resident) = match target {
        Target::UStar => (&set.a2.baseline, &set.b2.baseline, logistic_periodic(&set.a1.baseline, &set.b1.baseline)?),
        Target::VStar => (&set.a1.baseline, &set.c1.baseline, logistic_periodic(&set.a2.baseline, &set.c2.baseline)?),
    };
    Ok(reduced_mean(grow, cross, &resident))
}

pub(crate) fn reduced_mean(a: &PeriodicScalar, b: &PeriodicScalar, w: &PeriodicOrbit) -> f64 {
    let n = 4096;
    let p = a.period();
    (0..n)
        .map(|k| {
            let t = k as f64 * p / n as f64;
            a.value(t) - b.value(t) * w.value(t)
        })
        .sum::<f64>()
        / n as f64
}

/// Convenience: the set with a square bump on one field.
pub fn with_square_bump(set: &CoefficientSet, coef: Coef, amplitude: f64, width: f64) -> Result<CoefficientSet> {
    set.with_bump(coef, Some(SpatialBump::square(amplitude, width)?))
}
