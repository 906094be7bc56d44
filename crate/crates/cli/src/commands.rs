//! One function per subcommand. Each buffers its outputs in the emitter and
//! returns a one-line summary.

use rayon::prelude::*;
use serde::Serialize;

use spreadlab_core::export::{csv_table, profile_csv, svg_plot};
use spreadlab_core::semitrivial::{
    compute_semitrivial, destabilizing_bump, linearized_radius, BumpFamily, SemitrivialOptions, Species, Target,
};
use spreadlab_core::periodic_orbits::logistic_periodic;
use spreadlab_core::simulator::{FrontLevel, FrontObserver, Simulator};
use spreadlab_core::spectrum::{principal_spectrum_point, LinearProblem, SpectrumOptions};
use spreadlab_core::spreading::{
    continuity_sweep, dispersion_speed, dispersion_table, empirical_front_speed, invasion_rate, minimize_speed,
    speed_interval, DispersionOptions, FitOptions, FrontRunConfig, SpeedEstimate, SpeedKind,
};
use spreadlab_core::verify::{
    monotone_coexistence, persistence_probe, random_ensemble, verify_supersolution, CoexistenceOptions,
    PersistenceOptions, SupersolutionOptions,
};
use spreadlab_core::{Coef, CoefficientSet, Dispersal, Grid, PeriodicField, SchemeConfig, SystemState};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::Emitter;

/// Summary line plus an optional negative verdict reported after the
/// outputs are written.
pub struct Outcome {
    pub summary: String,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Outcome { summary, failure: None }
    }
}

struct Setup {
    grid: Grid,
    dispersal: Dispersal,
    set: CoefficientSet,
}

fn setup(cfg: &RunConfig) -> CliResult<Setup> {
    let grid = cfg.grid()?;
    let dispersal = cfg.dispersal(&grid)?;
    let set = cfg.coefficient_set()?;
    Ok(Setup { grid, dispersal, set })
}

fn dispersion_options(cfg: &RunConfig) -> DispersionOptions {
    DispersionOptions { grid_only: cfg.scenario.mu_grid_only, ..DispersionOptions::default() }
}

pub fn speed(cfg: &RunConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let est = dispersion_speed(&s.set, &s.dispersal, &dispersion_options(cfg))?;
    let (lo, hi, n) = cfg.scenario.mu_table;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(CliError::Config(format!("mu_table needs 0 < start < stop and count >= 2, got {:?}", cfg.scenario.mu_table)));
    }
    let mus: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let table = dispersion_table(&s.set.baselines(), &s.dispersal, &mus)?;
    let rows: Vec<Vec<f64>> = table.iter().map(|&(mu, r)| vec![mu, r * mu, r]).collect();
    em.csv("dispersion", csv_table(&["mu", "lambda", "lambda_over_mu"], &rows));
    #[derive(Serialize)]
    struct Summary<'a> {
        invasion_rate: f64,
        estimate: &'a SpeedEstimate,
    }
    em.json("speed", &Summary { invasion_rate: invasion_rate(&s.set.baselines())?, estimate: &est })?;
    em.svg("dispersion", svg_plot("dispersion relation", "mu", "lambda(mu)/mu", &[("lambda/mu", &table)]));
    let mu = est.mu_star.unwrap_or(f64::NAN);
    let mut summary = format!("c0* = {:.5}, mu* = {:.5}", est.value, mu);
    if est.unimodality_warning {
        summary.push_str(" (scan not unimodal; grid minimum reported)");
    }
    Ok(Outcome::ok(summary))
}

/// Scalar logistic front of `u` with `v = 0`, started from a unit step.
fn simulate_scalar(cfg: &RunConfig, s: &Setup, scheme: &SchemeConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let periods = cfg.scenario.periods.unwrap_or(100);
    let x0 = s.grid.x_min() + 10.0;
    let u0 = logistic_periodic(&s.set.a1.baseline, &s.set.b1.baseline)?.value(0.0);
    let u: Vec<f64> = s.grid.points().iter().map(|&x| if x <= x0 { u0 } else { 0.0 }).collect();
    let mut state = SystemState::new(0.0, u, vec![0.0; s.grid.len()])?;
    let mut sim = Simulator::new(&s.set, &s.grid, &s.dispersal, scheme)?;
    let level = FrontLevel::Component { index: 0, theta: 0.5 * u0 };
    let mut obs = FrontObserver::new(level, FrontObserver::default_margin(&s.grid, &s.dispersal));
    sim.run_periods(&mut state, periods, &mut [&mut obs])?;
    let period = s.set.period();
    let est = empirical_front_speed(&obs.records, period, SpeedKind::EmpiricalLower, &FitOptions::default())?;
    let (mu, c, _) = minimize_speed(&s.dispersal, s.set.a1.baseline.mean(), &dispersion_options(cfg))?;
    em.csv("fronts", csv_table(&["t", "front"], &obs.records.iter().map(|&(t, x)| vec![t, x]).collect::<Vec<_>>()));
    #[derive(Serialize)]
    struct Summary<'a> {
        theoretical: f64,
        mu_star: f64,
        empirical: &'a SpeedEstimate,
    }
    em.json("simulate", &Summary { theoretical: c, mu_star: mu, empirical: &est })?;
    em.svg("fronts", svg_plot("front position", "t", "x", &[("front", &obs.records)]));
    Ok(Outcome::ok(format!("c = {:.5}, theoretical = {c:.5}", est.value)))
}

pub fn simulate(cfg: &RunConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let scheme = cfg.scheme(&s.grid, &s.dispersal)?;
    if cfg.scenario.scalar {
        return simulate_scalar(cfg, &s, &scheme, em);
    }
    let run = FrontRunConfig { periods: cfg.scenario.periods.unwrap_or(200), ..FrontRunConfig::default() };
    let c0 = dispersion_speed(&s.set, &s.dispersal, &dispersion_options(cfg))?;
    let iv = speed_interval(&s.set, &s.dispersal, &s.grid, &scheme, &run)?;
    let rows: Vec<Vec<f64>> =
        iv.lower_trace.iter().zip(&iv.upper_trace).map(|(l, u)| vec![l.0, l.1, u.1]).collect();
    em.csv("fronts", csv_table(&["t", "lower_front", "upper_front"], &rows));
    #[derive(Serialize)]
    struct Summary<'a> {
        theoretical: &'a SpeedEstimate,
        lower: &'a SpeedEstimate,
        upper: &'a SpeedEstimate,
    }
    em.json("simulate", &Summary { theoretical: &c0, lower: &iv.lower, upper: &iv.upper })?;
    em.svg(
        "fronts",
        svg_plot("front positions", "t", "x", &[("lower", &iv.lower_trace), ("upper", &iv.upper_trace)]),
    );
    Ok(Outcome::ok(format!(
        "c_lower = {:.5}, c_upper = {:.5}, c0* = {:.5}",
        iv.lower.value, iv.upper.value, c0.value
    )))
}

pub fn spectrum(cfg: &RunConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let scheme = cfg.scheme(&s.grid, &s.dispersal)?;
    let opts = SpectrumOptions::default();
    let target = cfg.scenario.target.as_str();
    let invasion = match target {
        "u-star" => Some((Target::UStar, Species::U)),
        "v-star" => Some((Target::VStar, Species::V)),
        _ => None,
    };
    let (result, verdict) = match invasion {
        Some((t, species)) => {
            if cfg.scenario.mu != 0.0 {
                return Err(CliError::Config("invasion targets are computed at mu = 0".into()));
            }
            let st = SemitrivialOptions::default();
            let field = compute_semitrivial(species, &s.set, &s.grid, &s.dispersal, &scheme, &st)?;
            let r = linearized_radius(t, &s.set, &field, &s.dispersal, &scheme, &opts)?;
            (r.spectrum, Some(r.verdict))
        }
        None => {
            let coef = Coef::ALL
                .into_iter()
                .find(|c| c.name() == target)
                .ok_or_else(|| CliError::Config(format!("unknown spectrum target {target:?}")))?;
            let p = LinearProblem::with_field(cfg.scenario.mu, s.set.get(coef).clone(), s.dispersal.clone(), s.grid, scheme)?;
            (principal_spectrum_point(&p, &opts)?, None)
        }
    };
    em.csv("profile", profile_csv(&s.grid, &result.profile));
    #[derive(Serialize)]
    struct Summary<'a> {
        target: &'a str,
        mu: f64,
        lambda: f64,
        radius: f64,
        iterations: usize,
        residual: f64,
        bracket: (f64, f64),
        verdict: Option<spreadlab_core::semitrivial::StabilityVerdict>,
    }
    em.json(
        "spectrum",
        &Summary {
            target,
            mu: cfg.scenario.mu,
            lambda: result.lambda,
            radius: result.radius(),
            iterations: result.iterations,
            residual: result.residual,
            bracket: result.bracket,
            verdict,
        },
    )?;
    let pts: Vec<(f64, f64)> = s.grid.points().into_iter().zip(result.profile.iter().copied()).collect();
    em.svg("profile", svg_plot("dominant profile", "x", "phi", &[("phi", &pts)]));
    Ok(Outcome::ok(format!("lambda = {:.8}, radius = {:.8}", result.lambda, result.radius())))
}

pub fn persistence(cfg: &RunConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let scheme = cfg.scheme(&s.grid, &s.dispersal)?;
    let initials = random_ensemble(&s.set, &s.grid, cfg.scenario.trials, cfg.seed);
    let defaults = PersistenceOptions::default();
    let opts = PersistenceOptions { max_periods: cfg.scenario.periods.unwrap_or(defaults.max_periods), ..defaults };
    let report = persistence_probe(&s.set, &s.grid, &s.dispersal, &scheme, &initials, cfg.scenario.persistence, &opts)?;
    let rows: Vec<Vec<f64>> = report
        .trials
        .iter()
        .map(|t| {
            let settled = t.settled_at.map_or(f64::NAN, |p| p as f64);
            vec![t.trial as f64, settled, t.eta_u, t.eta_v, if t.failed { 1.0 } else { 0.0 }]
        })
        .collect();
    em.csv("trials", csv_table(&["trial", "settled_at", "eta_u", "eta_v", "failed"], &rows));
    em.json("persistence", &report)?;
    Ok(Outcome::ok(format!(
        "eta = {:.5} over {} trials ({} failed)",
        report.eta,
        report.trials.len(),
        report.failures.len()
    )))
}

fn sup_gap(a: &PeriodicField, b: &PeriodicField) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

pub fn coexist(cfg: &RunConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let scheme = cfg.scheme(&s.grid, &s.dispersal)?;
    let defaults = CoexistenceOptions::default();
    let opts = CoexistenceOptions { max_periods: cfg.scenario.periods.unwrap_or(defaults.max_periods), ..defaults };
    let r = monotone_coexistence(&s.set, &s.grid, &s.dispersal, &scheme, &opts)?;
    let xs = s.grid.points();
    let rows: Vec<Vec<f64>> = (0..xs.len())
        .map(|j| {
            let at = |f: &PeriodicField| f.at_step(0)[j];
            vec![xs[j], at(&r.upper.u), at(&r.upper.v), at(&r.lower.u), at(&r.lower.v), at(&r.u_star), at(&r.v_star)]
        })
        .collect();
    em.csv("profiles", csv_table(&["x", "u_upper", "v_upper", "u_lower", "v_lower", "u_star", "v_star"], &rows));
    let n = r.upper.history.len().max(r.lower.history.len());
    let hist: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let get = |h: &[f64]| h.get(k).copied().unwrap_or(f64::NAN);
            vec![(k + 1) as f64, get(&r.upper.history), get(&r.lower.history)]
        })
        .collect();
    em.csv("history", csv_table(&["period", "upper_delta", "lower_delta"], &hist));
    #[derive(Serialize)]
    struct Limit {
        periods: usize,
        wrap_residual_u: f64,
        wrap_residual_v: f64,
        worst_violation: f64,
        u_range: (f64, f64),
        v_range: (f64, f64),
    }
    let limit = |st: &spreadlab_core::verify::CoexistenceState| Limit {
        periods: st.periods,
        wrap_residual_u: st.u.residual,
        wrap_residual_v: st.v.residual,
        worst_violation: st.worst_violation,
        u_range: (st.u.min(), st.u.max()),
        v_range: (st.v.min(), st.v.max()),
    };
    #[derive(Serialize)]
    struct Summary {
        upper: Limit,
        lower: Limit,
        /// Sup distance between the two limits over one period.
        gap: f64,
    }
    let gap = sup_gap(&r.upper.u, &r.lower.u).max(sup_gap(&r.upper.v, &r.lower.v));
    em.json("coexist", &Summary { upper: limit(&r.upper), lower: limit(&r.lower), gap })?;
    let col = |k: usize| -> Vec<(f64, f64)> { rows.iter().map(|r| (r[0], r[k])).collect() };
    em.svg(
        "profiles",
        svg_plot(
            "coexistence limits at t = 0",
            "x",
            "density",
            &[("u upper", &col(1)), ("v upper", &col(2)), ("u lower", &col(3)), ("v lower", &col(4))],
        ),
    );
    Ok(Outcome::ok(format!(
        "gap = {gap:.3e}, periods = {}/{}, worst violation = {:.1e}",
        r.upper.periods,
        r.lower.periods,
        r.upper.worst_violation.max(r.lower.worst_violation)
    )))
}

pub fn destabilize(cfg: &RunConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let scheme = cfg.scheme(&s.grid, &s.dispersal)?;
    let family = BumpFamily { amplitudes: cfg.scenario.amplitudes.clone(), widths: cfg.scenario.widths.clone() };
    let d = destabilizing_bump(&s.set, &s.grid, &s.dispersal, &scheme, &family, &SpectrumOptions::default())?;
    let rows: Vec<Vec<f64>> = d
        .trials
        .iter()
        .map(|t| vec![t.amplitude, t.width, t.lambda, if t.destabilizes { 1.0 } else { 0.0 }])
        .collect();
    em.csv("trials", csv_table(&["amplitude", "width", "lambda", "destabilizes"], &rows));
    em.json("destabilize", &d)?;
    Ok(Outcome::ok(format!(
        "baseline lambda = {:.6}, bump amplitude {} width {} gives lambda = {:.6}",
        d.baseline_lambda,
        d.bump.amplitude(),
        2.0 * d.bump.plateau(),
        d.lambda
    )))
}

pub fn verify_super(cfg: &RunConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let scheme = cfg.scheme(&s.grid, &s.dispersal)?;
    let defaults = SupersolutionOptions::default();
    let opts = SupersolutionOptions {
        eps: cfg.scenario.supersolution_eps,
        periods: cfg.scenario.periods.unwrap_or(defaults.periods),
        ..defaults
    };
    let r = verify_supersolution(&s.set, &s.dispersal, &s.grid, &scheme, &opts)?;
    em.json("verify-super", &r)?;
    let summary = format!(
        "ansatz residual = {:.2e}, inequalities {}, residual min = {:.3e} (with slack {:.3e}), front below = {}",
        r.ansatz_residual,
        if r.inequalities.holds { "hold" } else { "fail" },
        r.residual.min_u.min(r.residual.min_v),
        r.residual.min_with_slack,
        r.front_below
    );
    let failure = (!(r.inequalities.holds && r.residual.pass && r.front_below))
        .then(|| "super-solution checks did not all pass".to_string());
    Ok(Outcome { summary, failure })
}

pub fn sweep(cfg: &RunConfig, em: &mut Emitter) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let coef = cfg.scenario.coefficient;
    let eps = &cfg.scenario.eps;
    let sw = continuity_sweep(&s.set, coef, eps, &s.dispersal, &dispersion_options(cfg))?;
    let rows: Vec<Vec<f64>> = sw.rows.iter().map(|r| vec![r.eps, r.speed, r.mu_star, r.change]).collect();
    em.csv("sweep", csv_table(&["eps", "speed", "mu_star", "change"], &rows));
    em.json("sweep", &sw)?;
    if cfg.scenario.intervals {
        let scheme: SchemeConfig = cfg.scheme(&s.grid, &s.dispersal)?;
        let run = FrontRunConfig { periods: cfg.scenario.periods.unwrap_or(200), ..FrontRunConfig::default() };
        let intervals = eps
            .par_iter()
            .map(|&e| -> CliResult<Vec<f64>> {
                let iv = speed_interval(&s.set.with_shift(coef, e)?, &s.dispersal, &s.grid, &scheme, &run)?;
                Ok(vec![e, iv.lower.value, iv.upper.value])
            })
            .collect::<CliResult<Vec<_>>>()?;
        em.csv("intervals", csv_table(&["eps", "lower", "upper"], &intervals));
    }
    let pts: Vec<(f64, f64)> = sw.rows.iter().map(|r| (r.eps, r.speed)).collect();
    em.svg("sweep", svg_plot("speed under shifts", "eps", "c0*", &[("c0*", &pts)]));
    Ok(Outcome::ok(format!(
        "c0*(0) = {:.6}; {} shifts of {}, monotone = {}",
        sw.base_speed,
        sw.rows.len(),
        coef.name(),
        sw.monotone
    )))
}
