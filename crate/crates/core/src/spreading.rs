//! Spreading speeds: the linearized dispersion-relation speed of the
//! invading species and empirical front speeds fitted from simulations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{check_h1, compute_envelopes, Coef, CoefficientSet, DEFAULT_SAMPLES_PER_PERIOD};
use crate::dispersal::{Dispersal, Grid};
use crate::error::{Error, Result};
use crate::periodic_orbits::logistic_periodic;
use crate::semitrivial::{compute_semitrivial, reduced_mean, SemitrivialOptions, Species};
use crate::simulator::{make_front_data, FrontLevel, FrontObserver, FrontSpec, SchemeConfig, Simulator, SystemState};

pub use crate::simulator::front_position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedKind {
    Theoretical,
    EmpiricalLower,
    EmpiricalUpper,
}

/// Least-squares fit of front positions against time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub std_error: f64,
    /// First and last time of the fitted window.
    pub window: (f64, f64),
    pub periods: f64,
    pub r_squared: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub value: f64,
    pub kind: SpeedKind,
    /// Minimizing decay rate (theoretical estimates only).
    pub mu_star: Option<f64>,
    pub fit: Option<FitDiagnostics>,
    /// The coarse scan of `λ(μ)/μ` was not unimodal; the value is the grid minimum.
    pub unimodality_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionOptions {
    pub mu_min: f64,
    pub mu_max: f64,
    /// Spacing of the coarse scan.
    pub grid_step: f64,
    /// Width of the final golden-section bracket.
    pub tol: f64,
    /// Skip the golden-section refinement.
    pub grid_only: bool,
}

impl Default for DispersionOptions {
    fn default() -> Self {
        DispersionOptions { mu_min: 1e-3, mu_max: 10.0, grid_step: 1e-3, tol: 1e-10, grid_only: false }
    }
}

/// Principal exponent of the x-independent tilted problem with the
/// continuum dispersal operator.
pub fn continuum_symbol(dispersal: &Dispersal, mu: f64) -> f64 {
    match dispersal {
        Dispersal::Random => mu * mu,
        Dispersal::Nonlocal(k) => k.shape().exact_moment(mu, k.radius()) - 1.0,
    }
}

/// Time average of `a1⁰ - c1⁰ v0*`, the invasion rate of `u` into `(0, v0*)`.
pub fn invasion_rate(set: &CoefficientSet) -> Result<f64> {
    let v0 = logistic_periodic(&set.a2.baseline, &set.c2.baseline)?;
    Ok(reduced_mean(&set.a1.baseline, &set.c1.baseline, &v0))
}

/// `(μ, λ(μ)/μ)` on the given decay rates.
pub fn dispersion_table(set: &CoefficientSet, dispersal: &Dispersal, mus: &[f64]) -> Result<Vec<(f64, f64)>> {
    let alpha = invasion_rate(set)?;
    Ok(mus.iter().map(|&mu| (mu, (continuum_symbol(dispersal, mu) + alpha) / mu)).collect())
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `c0* = inf_μ λ(μ)/μ` with `λ(μ) = symbol(μ) + mean(a1⁰ - c1⁰ v0*)`.
pub fn dispersion_speed(set: &CoefficientSet, dispersal: &Dispersal, opts: &DispersionOptions) -> Result<SpeedEstimate> {
    let base = set.baselines();
    let env = compute_envelopes(&base, DEFAULT_SAMPLES_PER_PERIOD)?;
    check_h1(&env)?.require()?;
    let alpha = invasion_rate(&base)?;
    if !(alpha > 0.0) {
        return Err(Error::precondition(format!("time average of a1 - c1 v0* is {alpha}, not positive")));
    }
    let (mu, value, warning) = minimize_speed(dispersal, alpha, opts)?;
    Ok(SpeedEstimate { value, kind: SpeedKind::Theoretical, mu_star: Some(mu), fit: None, unimodality_warning: warning })
}

/// Minimizer of `(symbol(μ) + alpha)/μ`: `(μ*, c*, unimodality warning)`.
pub fn minimize_speed(dispersal: &Dispersal, alpha: f64, opts: &DispersionOptions) -> Result<(f64, f64, bool)> {
    if !(opts.mu_min > 0.0 && opts.mu_max > opts.mu_min && opts.grid_step > 0.0) {
        return Err(Error::input("invalid decay-rate bracket"));
    }
    let f = |mu: f64| (continuum_symbol(dispersal, mu) + alpha) / mu;
    let n = ((opts.mu_max - opts.mu_min) / opts.grid_step).floor() as usize + 1;
    let values: Vec<f64> = (0..n).map(|k| f(opts.mu_min + k as f64 * opts.grid_step)).collect();
    let k = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
    let slack = 1e-12;
    let unimodal = values[..=k].windows(2).all(|w| w[1] <= w[0] + slack)
        && values[k..].windows(2).all(|w| w[1] >= w[0] - slack);
    let interior = k > 0 && k < n - 1;
    let mu_k = opts.mu_min + k as f64 * opts.grid_step;
    if opts.grid_only || !unimodal || !interior {
        return Ok((mu_k, values[k], !unimodal || !interior));
    }
    let mu = golden_section(f, mu_k - opts.grid_step, mu_k + opts.grid_step, opts.tol);
    Ok((mu, f(mu), false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Periods always discarded as transient.
    pub discard_periods: usize,
    /// Fraction of the recorded periods (counted from the end) that is fitted.
    pub window_fraction: f64,
    /// Only positions beyond this point enter the fit.
    pub min_position: Option<f64>,
    pub min_window_periods: f64,
    pub min_r_squared: f64,
    /// Largest tolerated backward step of the front.
    pub monotone_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            discard_periods: 20,
            window_fraction: 0.4,
            min_position: None,
            min_window_periods: 10.0,
            min_r_squared: 0.999,
            monotone_tol: 0.5,
        }
    }
}

/// Slope of `x_θ(t)` over the fit window of period-mark records.
pub fn empirical_front_speed(records: &[(f64, f64)], period: f64, kind: SpeedKind, opts: &FitOptions) -> Result<SpeedEstimate> {
    let Some(&(t_end, _)) = records.last() else {
        return Err(Error::FitFailed("no front records".into()));
    };
    let t_start = (t_end - opts.window_fraction * t_end).max(opts.discard_periods as f64 * period);
    let window: Vec<(f64, f64)> = records
        .iter()
        .copied()
        .filter(|&(t, x)| t >= t_start - 1e-9 && opts.min_position.is_none_or(|m| x >= m))
        .collect();
    let n = window.len();
    if n < 3 {
        return Err(Error::FitFailed(format!("only {n} records in the fit window")));
    }
    let periods = (window[n - 1].0 - window[0].0) / period;
    if periods < opts.min_window_periods - 1e-9 {
        return Err(Error::FitFailed(format!("fit window covers {periods:.1} periods")));
    }
    if let Some(w) = window.windows(2).find(|w| w[1].1 < w[0].1 - opts.monotone_tol) {
        return Err(Error::FitFailed(format!("front moved back from {} to {} at t = {}", w[0].1, w[1].1, w[1].0)));
    }
    let nf = n as f64;
    let tm = window.iter().map(|p| p.0).sum::<f64>() / nf;
    let xm = window.iter().map(|p| p.1).sum::<f64>() / nf;
    let stt = window.iter().map(|p| (p.0 - tm).powi(2)).sum::<f64>();
    let stx = window.iter().map(|p| (p.0 - tm) * (p.1 - xm)).sum::<f64>();
    let sxx = window.iter().map(|p| (p.1 - xm).powi(2)).sum::<f64>();
    let slope = stx / stt;
    let sse = window.iter().map(|p| (p.1 - xm - slope * (p.0 - tm)).powi(2)).sum::<f64>();
    let r_squared = if sxx > 0.0 { 1.0 - sse / sxx } else { 0.0 };
    let std_error = (sse / (nf - 2.0) / stt).sqrt();
    if r_squared < opts.min_r_squared {
        return Err(Error::FitFailed(format!("R² = {r_squared:.6} below {}", opts.min_r_squared)));
    }
    Ok(SpeedEstimate {
        value: slope,
        kind,
        mu_star: None,
        fit: Some(FitDiagnostics { std_error, window: (window[0].0, window[n - 1].0), periods, r_squared, samples: n }),
        unimodality_warning: false,
    })
}

/// Simulation setup for [`speed_interval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontRunConfig {
    pub periods: usize,
    /// Right end of the initial plateau; defaults to 20 units left of the perturbation.
    pub x0: Option<f64>,
    pub ramp: f64,
    /// Lower level as a fraction of the plateau values `(u0*(0), v0*(0))`.
    pub lower_fraction: f64,
    /// Upper level as a fraction of the plateau norm.
    pub upper_fraction: f64,
    /// Fit only after the front is this far beyond the perturbation.
    pub clearance: f64,
    pub fit: FitOptions,
}

impl Default for FrontRunConfig {
    fn default() -> Self {
        FrontRunConfig {
            periods: 200,
            x0: None,
            ramp: 4.0,
            lower_fraction: 0.5,
            upper_fraction: 0.1,
            clearance: 50.0,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedInterval {
    pub lower: SpeedEstimate,
    pub upper: SpeedEstimate,
    pub lower_trace: Vec<(f64, f64)>,
    pub upper_trace: Vec<(f64, f64)>,
}

/// Empirical `[c_inf, c_sup]` from a front of the transformed system started
/// left of the perturbation.
pub fn speed_interval(
    set: &CoefficientSet,
    dispersal: &Dispersal,
    grid: &Grid,
    scheme: &SchemeConfig,
    run: &FrontRunConfig,
) -> Result<SpeedInterval> {
    let env = compute_envelopes(&set.baselines(), DEFAULT_SAMPLES_PER_PERIOD)?;
    check_h1(&env)?.require()?;
    let v_star = compute_semitrivial(Species::V, set, grid, dispersal, scheme, &SemitrivialOptions::default())?;
    let u0 = logistic_periodic(&set.a1.baseline, &set.b1.baseline)?.value(0.0);
    let v_star0 = v_star.at_step(0);
    let v0 = v_star0.iter().copied().fold(f64::INFINITY, f64::min);
    let m0 = set.support();
    let margin = FrontObserver::default_margin(grid, dispersal);
    let front = FrontSpec { x0: run.x0.unwrap_or(-m0 - 20.0), ramp: run.ramp, u_level: u0, v_level: v0 };
    let (u, v) = make_front_data(grid, &front, v_star0, margin)?;
    let mut state = SystemState::new(0.0, u, v)?;
    let mut sim = Simulator::new(set, grid, dispersal, scheme)?;
    let both = FrontLevel::Both { theta_u: run.lower_fraction * u0, theta_v: run.lower_fraction * v0 };
    let mut lower = FrontObserver::new(both, margin);
    let mut upper = FrontObserver::new(FrontLevel::Norm { theta: run.upper_fraction * u0.hypot(v0) }, margin);
    sim.run_transformed(&mut state, run.periods, &v_star, &mut [&mut lower, &mut upper])?;
    let fit = FitOptions { min_position: Some(m0 + run.clearance), ..run.fit };
    let period = set.period();
    Ok(SpeedInterval {
        lower: empirical_front_speed(&lower.records, period, SpeedKind::EmpiricalLower, &fit)?,
        upper: empirical_front_speed(&upper.records, period, SpeedKind::EmpiricalUpper, &fit)?,
        lower_trace: lower.records,
        upper_trace: upper.records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub speed: f64,
    pub mu_star: f64,
    /// `c0*(ε) - c0*(0)`.
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuitySweep {
    pub coefficient: Coef,
    pub base_speed: f64,
    pub rows: Vec<SweepRow>,
    /// `|c0*(ε) - c0*(0)|` is nondecreasing in ε over the rows.
    pub monotone: bool,
}

/// `c0*` of the baselines with `coef` shifted by each ε.
pub fn continuity_sweep(
    set: &CoefficientSet,
    coef: Coef,
    eps: &[f64],
    dispersal: &Dispersal,
    opts: &DispersionOptions,
) -> Result<ContinuitySweep> {
    let base = dispersion_speed(set, dispersal, opts)?.value;
    let rows = eps
        .par_iter()
        .map(|&e| {
            let s = dispersion_speed(&set.with_shift(coef, e)?, dispersal, opts)?;
            Ok(SweepRow { eps: e, speed: s.value, mu_star: s.mu_star.unwrap_or(f64::NAN), change: s.value - base })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.eps.abs().total_cmp(&b.eps.abs()));
    let monotone = sorted.windows(2).all(|w| w[0].change.abs() <= w[1].change.abs() + 1e-12);
    Ok(ContinuitySweep { coefficient: coef, base_speed: base, rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::PeriodicScalar;
    use crate::dispersal::{Kernel, KernelShape};

    const CANON: [f64; 6] = [1.0, 1.0, 0.5, 0.4, 0.5, 1.0];

    #[test]
    fn random_dispersion_speed() {
        let set = CoefficientSet::constants(1.0, CANON).unwrap();
        let s = dispersion_speed(&set, &Dispersal::Random, &DispersionOptions::default()).unwrap();
        assert!((s.value - 2.0 * 0.8f64.sqrt()).abs() < 1e-10);
        assert!((s.mu_star.unwrap() - 0.8f64.sqrt()).abs() < 1e-5);
        assert!(!s.unimodality_warning);
        let grid_only = DispersionOptions { grid_only: true, ..Default::default() };
        let g = dispersion_speed(&set, &Dispersal::Random, &grid_only).unwrap();
        assert!((g.value - s.value).abs() < 1e-6);
    }

    #[test]
    fn only_the_mean_enters() {
        let mut set = CoefficientSet::constants(1.0, CANON).unwrap();
        set.a1.baseline = PeriodicScalar::harmonic(1.0, 1.0, 0.15, 0.0).unwrap();
        let s = dispersion_speed(&set, &Dispersal::Random, &DispersionOptions::default()).unwrap();
        assert!((s.value - 2.0 * 0.8f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn nonlocal_speed_matches_brute_force() {
        let set = CoefficientSet::constants(1.0, CANON).unwrap();
        let k = Kernel::new(KernelShape::Uniform, 1.0, 0.01).unwrap();
        let s = dispersion_speed(&set, &Dispersal::Nonlocal(k), &DispersionOptions::default()).unwrap();
        let oracle = (1..=5_000_000)
            .map(|j| {
                let mu = j as f64 * 1e-6;
                (mu.sinh() / mu - 1.0 + 0.8) / mu
            })
            .fold(f64::INFINITY, f64::min);
        assert!((s.value - oracle).abs() < 1e-5);
    }

    #[test]
    fn h1_violation_rejected() {
        let set = CoefficientSet::constants(1.0, [1.0, 1.0, 2.0, 1.0, 0.5, 1.0]).unwrap();
        let e = dispersion_speed(&set, &Dispersal::Random, &DispersionOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn sweep_closed_forms() {
        let set = CoefficientSet::constants(1.0, CANON).unwrap();
        let opts = DispersionOptions::default();
        let s = continuity_sweep(&set, Coef::A1, &[0.2, 0.1, 0.05], &Dispersal::Random, &opts).unwrap();
        for r in &s.rows {
            assert!((r.speed - 2.0 * (0.8 + r.eps).sqrt()).abs() < 1e-8);
        }
        assert!(s.monotone);
        let s = continuity_sweep(&set, Coef::C1, &[0.3, 0.1], &Dispersal::Random, &opts).unwrap();
        assert!(s.rows.iter().all(|r| (r.speed - 2.0 * (0.8 - 0.4 * r.eps).sqrt()).abs() < 1e-8 && r.change < 0.0));
        let s = continuity_sweep(&set, Coef::A1, &[0.0], &Dispersal::Random, &opts).unwrap();
        assert_eq!(s.rows[0].change, 0.0);
    }

    #[test]
    fn fit_recovers_linear_motion() {
        let recs: Vec<(f64, f64)> = (0..=100).map(|k| (k as f64, 3.0 + 1.5 * k as f64 + 0.01 * (k as f64).sin())).collect();
        let s = empirical_front_speed(&recs, 1.0, SpeedKind::EmpiricalLower, &FitOptions::default()).unwrap();
        assert!((s.value - 1.5).abs() < 1e-3);
        let f = s.fit.unwrap();
        assert_eq!(f.window, (60.0, 100.0));
        assert!(f.r_squared > 0.999 && f.std_error < 1e-3);
        let short: Vec<(f64, f64)> = recs[..25].to_vec();
        assert!(matches!(empirical_front_speed(&short, 1.0, SpeedKind::EmpiricalLower, &FitOptions::default()), Err(Error::FitFailed(_))));
        let mut back = recs.clone();
        back[80].1 -= 5.0;
        assert!(empirical_front_speed(&back, 1.0, SpeedKind::EmpiricalLower, &FitOptions::default()).is_err());
    }
}
