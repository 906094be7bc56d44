//! Time-periodic, spatially localized coefficients of the competition system,
//! their envelope constants, and the structural hypotheses built from them.
//!
//! A coefficient field is `baseline(t) + bump(x)`: a `T`-periodic scalar plus
//! an optional compactly supported spatial perturbation. The baselines carry
//! the unperturbed (spatially homogeneous) problem; the bumps make the
//! localized variation.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default number of samples per period for envelope and hypothesis scans.
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 256;

/// One term `amplitude * sin(2π k t / T + phase)` of a trigonometric polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
    /// Harmonic number `k >= 1`.
    #[serde(default = "first_harmonic")]
    pub order: u32,
}

fn first_harmonic() -> u32 {
    1
}

/// Closed-form description of a periodic scalar over one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Constant(f64),
    /// `mean + Σ amplitude_k sin(2π order_k t / T + phase_k)`.
    Trig { mean: f64, terms: Vec<Harmonic> },
    /// Piecewise-linear interpolant through `(t, value)` nodes spanning `[0, T]`.
    Table(Vec<(f64, f64)>),
}

/// A continuous `T`-periodic scalar function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicScalar {
    period: f64,
    profile: Profile,
}

impl PeriodicScalar {
    pub fn new(period: f64, profile: Profile) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::input(format!("period must be positive, got {period}")));
        }
        match &profile {
            Profile::Constant(c) if !c.is_finite() => {
                return Err(Error::input("constant coefficient is not finite"));
            }
            Profile::Trig { mean, terms } => {
                if !mean.is_finite() {
                    return Err(Error::input("harmonic mean is not finite"));
                }
                for h in terms {
                    if h.order == 0 || !h.amplitude.is_finite() || !h.phase.is_finite() {
                        return Err(Error::input("harmonic terms need order >= 1 and finite values"));
                    }
                }
            }
            Profile::Table(nodes) => validate_table(period, nodes)?,
            _ => {}
        }
        Ok(PeriodicScalar { period, profile })
    }

    pub fn constant(period: f64, value: f64) -> Result<Self> {
        Self::new(period, Profile::Constant(value))
    }

    /// `mean + amplitude * sin(2π t / T + phase)`.
    pub fn harmonic(period: f64, mean: f64, amplitude: f64, phase: f64) -> Result<Self> {
        Self::new(
            period,
            Profile::Trig { mean, terms: vec![Harmonic { amplitude, phase, order: 1 }] },
        )
    }

    pub fn table(period: f64, nodes: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(period, Profile::Table(nodes))
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn is_constant(&self) -> bool {
        match &self.profile {
            Profile::Constant(_) => true,
            Profile::Trig { terms, .. } => terms.iter().all(|h| h.amplitude == 0.0),
            Profile::Table(nodes) => nodes.iter().all(|&(_, v)| v == nodes[0].1),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.profile {
            Profile::Constant(c) => *c,
            Profile::Trig { mean, terms } => {
                let w = 2.0 * PI * t / self.period;
                mean + terms
                    .iter()
                    .map(|h| h.amplitude * (h.order as f64 * w + h.phase).sin())
                    .sum::<f64>()
            }
            Profile::Table(nodes) => {
                let s = t.rem_euclid(self.period);
                // first node with time > s
                let k = nodes.partition_point(|&(tn, _)| tn <= s);
                if k == 0 {
                    return nodes[0].1;
                }
                if k >= nodes.len() {
                    return nodes[nodes.len() - 1].1;
                }
                let (t0, v0) = nodes[k - 1];
                let (t1, v1) = nodes[k];
                v0 + (v1 - v0) * (s - t0) / (t1 - t0)
            }
        }
    }

    /// Time average over one period, exact for every supported profile.
    pub fn mean(&self) -> f64 {
        match &self.profile {
            Profile::Constant(c) => *c,
            Profile::Trig { mean, .. } => *mean,
            Profile::Table(nodes) => {
                nodes.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum::<f64>()
                    / self.period
            }
        }
    }

    /// Exact `∫_{t0}^{t1} value(s) ds`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        self.primitive(t1) - self.primitive(t0)
    }

    fn primitive(&self, t: f64) -> f64 {
        match &self.profile {
            Profile::Constant(c) => c * t,
            Profile::Trig { mean, terms } => {
                let w = 2.0 * PI / self.period;
                mean * t
                    - terms
                        .iter()
                        .map(|h| {
                            let k = h.order as f64;
                            h.amplitude * (k * w * t + h.phase).cos() / (k * w)
                        })
                        .sum::<f64>()
            }
            Profile::Table(nodes) => {
                let cycles = (t / self.period).floor();
                let s = t - cycles * self.period;
                let mut acc = 0.0;
                for w in nodes.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    if s >= t1 {
                        acc += 0.5 * (v0 + v1) * (t1 - t0);
                    } else {
                        if s > t0 {
                            let vs = v0 + (v1 - v0) * (s - t0) / (t1 - t0);
                            acc += 0.5 * (v0 + vs) * (s - t0);
                        }
                        break;
                    }
                }
                cycles * self.mean() * self.period + acc
            }
        }
    }

    /// Infimum and supremum over one period.
    ///
    /// Constants, single harmonics and tables are handled in closed form;
    /// multi-term trigonometric polynomials are sampled.
    pub fn extrema(&self, samples_per_period: usize) -> (f64, f64) {
        match &self.profile {
            Profile::Constant(c) => (*c, *c),
            Profile::Trig { mean, terms } if terms.len() <= 1 => {
                let a = terms.first().map_or(0.0, |h| h.amplitude.abs());
                (mean - a, mean + a)
            }
            Profile::Table(nodes) => nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                (lo.min(v), hi.max(v))
            }),
            Profile::Trig { .. } => {
                let n = samples_per_period.max(1);
                (0..n)
                    .map(|k| self.value(k as f64 * self.period / n as f64))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            }
        }
    }

    /// Times at which a piecewise-linear profile has kinks (empty otherwise).
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match &self.profile {
            Profile::Table(nodes) => nodes.iter().map(|&(t, _)| t).collect(),
            _ => Vec::new(),
        }
    }

    /// Same profile shifted by a constant.
    pub fn shifted(&self, delta: f64) -> PeriodicScalar {
        let profile = match &self.profile {
            Profile::Constant(c) => Profile::Constant(c + delta),
            Profile::Trig { mean, terms } => Profile::Trig { mean: mean + delta, terms: terms.clone() },
            Profile::Table(nodes) => Profile::Table(nodes.iter().map(|&(t, v)| (t, v + delta)).collect()),
        };
        PeriodicScalar { period: self.period, profile }
    }
}

fn validate_table(period: f64, nodes: &[(f64, f64)]) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::input("table profile needs at least two nodes"));
    }
    if nodes.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite()) {
        return Err(Error::input("table profile contains non-finite entries"));
    }
    let tol = 1e-12 * period;
    if nodes[0].0.abs() > tol || (nodes[nodes.len() - 1].0 - period).abs() > tol {
        return Err(Error::input(format!("table profile must span [0, {period}]")));
    }
    if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::input("table times must be strictly increasing"));
    }
    let (first, last) = (nodes[0].1, nodes[nodes.len() - 1].1);
    if (first - last).abs() > 1e-12 * (1.0 + first.abs()) {
        return Err(Error::input(format!(
            "table profile is not periodic: value {first} at t = 0 but {last} at t = T"
        )));
    }
    Ok(())
}

/// Trapezoidal plateau: `amplitude` on `|x| < plateau`, linear ramp to zero
/// over `ramp`, identically zero for `|x| >= support`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialBump {
    amplitude: f64,
    plateau: f64,
    ramp: f64,
    support: f64,
}

impl SpatialBump {
    pub fn new(amplitude: f64, plateau: f64, ramp: f64, support: Option<f64>) -> Result<Self> {
        if !(amplitude.is_finite() && plateau.is_finite() && ramp.is_finite()) {
            return Err(Error::input("bump parameters must be finite"));
        }
        if plateau < 0.0 || ramp < 0.0 || plateau + ramp <= 0.0 {
            return Err(Error::input("bump needs plateau >= 0, ramp >= 0 and positive extent"));
        }
        let support = support.unwrap_or(plateau + ramp);
        if support < plateau + ramp {
            return Err(Error::input(format!(
                "bump support radius {support} is smaller than plateau + ramp = {}",
                plateau + ramp
            )));
        }
        Ok(SpatialBump { amplitude, plateau, ramp, support })
    }

    /// Square profile of full width `width` (no ramp).
    pub fn square(amplitude: f64, width: f64) -> Result<Self> {
        Self::new(amplitude, 0.5 * width, 0.0, None)
    }

    /// Plateau of full width `width` with a unit-length linear ramp on each side.
    pub fn smoothed(amplitude: f64, width: f64) -> Result<Self> {
        Self::new(amplitude, 0.5 * width, 1.0, None)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    pub fn ramp(&self) -> f64 {
        self.ramp
    }

    /// Support radius `M0`.
    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn value(&self, x: f64) -> f64 {
        let r = x.abs();
        if r >= self.support || r >= self.plateau + self.ramp {
            0.0
        } else if r < self.plateau {
            self.amplitude
        } else {
            self.amplitude * (1.0 - (r - self.plateau) / self.ramp)
        }
    }
}

/// `baseline(t) + bump(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub baseline: PeriodicScalar,
    pub bump: Option<SpatialBump>,
}

impl CoefficientField {
    pub fn homogeneous(baseline: PeriodicScalar) -> Self {
        CoefficientField { baseline, bump: None }
    }

    pub fn with_bump(baseline: PeriodicScalar, bump: SpatialBump) -> Self {
        CoefficientField { baseline, bump: Some(bump) }
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.baseline.value(t) + self.bump.map_or(0.0, |b| b.value(x))
    }

    pub fn bump_value(&self, x: f64) -> f64 {
        self.bump.map_or(0.0, |b| b.value(x))
    }

    pub fn period(&self) -> f64 {
        self.baseline.period()
    }

    pub fn is_x_dependent(&self) -> bool {
        self.bump.is_some_and(|b| b.amplitude() != 0.0)
    }

    /// Radius beyond which the field equals its baseline.
    pub fn support(&self) -> f64 {
        self.bump.map_or(0.0, |b| b.support())
    }

    fn lower_bound(&self, samples: usize) -> f64 {
        self.baseline.extrema(samples).0 + self.bump.map_or(0.0, |b| b.amplitude().min(0.0))
    }
}

/// Identifies one of the six coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coef {
    A1,
    B1,
    C1,
    A2,
    B2,
    C2,
}

impl Coef {
    pub const ALL: [Coef; 6] = [Coef::A1, Coef::B1, Coef::C1, Coef::A2, Coef::B2, Coef::C2];

    pub fn name(self) -> &'static str {
        match self {
            Coef::A1 => "a1",
            Coef::B1 => "b1",
            Coef::C1 => "c1",
            Coef::A2 => "a2",
            Coef::B2 => "b2",
            Coef::C2 => "c2",
        }
    }
}

/// The six coefficient fields of the system
/// `u_t = A u + u (a1 - b1 u - c1 v)`, `v_t = A v + v (a2 - b2 u - c2 v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a1: CoefficientField,
    pub b1: CoefficientField,
    pub c1: CoefficientField,
    pub a2: CoefficientField,
    pub b2: CoefficientField,
    pub c2: CoefficientField,
}

impl CoefficientSet {
    pub fn new(
        a1: CoefficientField,
        b1: CoefficientField,
        c1: CoefficientField,
        a2: CoefficientField,
        b2: CoefficientField,
        c2: CoefficientField,
    ) -> Result<Self> {
        let set = CoefficientSet { a1, b1, c1, a2, b2, c2 };
        let period = set.a1.period();
        for c in Coef::ALL {
            let p = set.get(c).period();
            if (p - period).abs() > 1e-12 * period {
                return Err(Error::input(format!(
                    "coefficient {} has period {p}, expected {period}",
                    c.name()
                )));
            }
        }
        for c in [Coef::B1, Coef::C1, Coef::B2, Coef::C2] {
            let f = set.get(c);
            let base = f.baseline.extrema(DEFAULT_SAMPLES_PER_PERIOD).0;
            if base <= 0.0 || f.lower_bound(DEFAULT_SAMPLES_PER_PERIOD) <= 0.0 {
                return Err(Error::input(format!(
                    "coefficient {} must be strictly positive everywhere",
                    c.name()
                )));
            }
        }
        Ok(set)
    }

    /// All six fields constant in time and space, in the order `(a1, b1, c1, a2, b2, c2)`.
    pub fn constants(period: f64, values: [f64; 6]) -> Result<Self> {
        let f = |v: f64| PeriodicScalar::constant(period, v).map(CoefficientField::homogeneous);
        Self::new(f(values[0])?, f(values[1])?, f(values[2])?, f(values[3])?, f(values[4])?, f(values[5])?)
    }

    /// Homogeneous set built from six baselines.
    pub fn from_baselines(baselines: [PeriodicScalar; 6]) -> Result<Self> {
        let [a1, b1, c1, a2, b2, c2] = baselines.map(CoefficientField::homogeneous);
        Self::new(a1, b1, c1, a2, b2, c2)
    }

    pub fn period(&self) -> f64 {
        self.a1.period()
    }

    pub fn get(&self, c: Coef) -> &CoefficientField {
        match c {
            Coef::A1 => &self.a1,
            Coef::B1 => &self.b1,
            Coef::C1 => &self.c1,
            Coef::A2 => &self.a2,
            Coef::B2 => &self.b2,
            Coef::C2 => &self.c2,
        }
    }

    pub fn get_mut(&mut self, c: Coef) -> &mut CoefficientField {
        match c {
            Coef::A1 => &mut self.a1,
            Coef::B1 => &mut self.b1,
            Coef::C1 => &mut self.c1,
            Coef::A2 => &mut self.a2,
            Coef::B2 => &mut self.b2,
            Coef::C2 => &mut self.c2,
        }
    }

    /// Copy with one field's bump replaced; positivity is re-checked.
    pub fn with_bump(&self, c: Coef, bump: Option<SpatialBump>) -> Result<Self> {
        let mut set = self.clone();
        set.get_mut(c).bump = bump;
        let CoefficientSet { a1, b1, c1, a2, b2, c2 } = set;
        Self::new(a1, b1, c1, a2, b2, c2)
    }

    /// Copy with one baseline shifted by a constant.
    pub fn with_shift(&self, c: Coef, delta: f64) -> Result<Self> {
        let mut set = self.clone();
        let f = set.get_mut(c);
        f.baseline = f.baseline.shifted(delta);
        let CoefficientSet { a1, b1, c1, a2, b2, c2 } = set;
        Self::new(a1, b1, c1, a2, b2, c2)
    }

    /// The unperturbed set: same baselines, no bumps.
    pub fn baselines(&self) -> CoefficientSet {
        let strip = |f: &CoefficientField| CoefficientField::homogeneous(f.baseline.clone());
        CoefficientSet {
            a1: strip(&self.a1),
            b1: strip(&self.b1),
            c1: strip(&self.c1),
            a2: strip(&self.a2),
            b2: strip(&self.b2),
            c2: strip(&self.c2),
        }
    }

    pub fn has_bumps(&self) -> bool {
        Coef::ALL.iter().any(|&c| self.get(c).is_x_dependent())
    }

    /// Largest bump support radius `M0` over the six fields.
    pub fn support(&self) -> f64 {
        Coef::ALL.iter().map(|&c| self.get(c).support()).fold(0.0, f64::max)
    }

    /// Union of table breakpoints of all baselines.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Coef::ALL.iter().flat_map(|&c| self.get(c).baseline.breakpoints()).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Infimum / supremum of each baseline over one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTable {
    pub a1l: f64,
    pub a1m: f64,
    pub b1l: f64,
    pub b1m: f64,
    pub c1l: f64,
    pub c1m: f64,
    pub a2l: f64,
    pub a2m: f64,
    pub b2l: f64,
    pub b2m: f64,
    pub c2l: f64,
    pub c2m: f64,
}

impl EnvelopeTable {
    pub fn get(&self, c: Coef) -> (f64, f64) {
        match c {
            Coef::A1 => (self.a1l, self.a1m),
            Coef::B1 => (self.b1l, self.b1m),
            Coef::C1 => (self.c1l, self.c1m),
            Coef::A2 => (self.a2l, self.a2m),
            Coef::B2 => (self.b2l, self.b2m),
            Coef::C2 => (self.c2l, self.c2m),
        }
    }
}

pub fn compute_envelopes(set: &CoefficientSet, samples_per_period: usize) -> Result<EnvelopeTable> {
    if samples_per_period < 16 {
        return Err(Error::input(format!(
            "envelopes need at least 16 samples per period, got {samples_per_period}"
        )));
    }
    let e = |c: Coef| set.get(c).baseline.extrema(samples_per_period);
    let (a1l, a1m) = e(Coef::A1);
    let (b1l, b1m) = e(Coef::B1);
    let (c1l, c1m) = e(Coef::C1);
    let (a2l, a2m) = e(Coef::A2);
    let (b2l, b2m) = e(Coef::B2);
    let (c2l, c2m) = e(Coef::C2);
    Ok(EnvelopeTable { a1l, a1m, b1l, b1m, c1l, c1m, a2l, a2m, b2l, b2m, c2l, c2m })
}

/// Outcome of a hypothesis check. Margins are the slacks of each strict
/// inequality; the hypothesis holds iff all are positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    pub name: String,
    pub holds: bool,
    pub margins: Vec<f64>,
    /// Human-readable names of the inequalities that failed.
    pub violated: Vec<String>,
}

impl HypothesisVerdict {
    fn from_margins(name: &str, labelled: Vec<(String, f64)>) -> Self {
        let violated: Vec<String> =
            labelled.iter().filter(|(_, m)| !(*m > 0.0)).map(|(l, _)| l.clone()).collect();
        HypothesisVerdict {
            name: name.to_string(),
            holds: violated.is_empty(),
            margins: labelled.into_iter().map(|(_, m)| m).collect(),
            violated,
        }
    }

    /// Turn a failed verdict into a precondition error.
    pub fn require(&self) -> Result<()> {
        if self.holds {
            Ok(())
        } else {
            Err(Error::precondition(format!(
                "{} fails: {}",
                self.name,
                self.violated.join("; ")
            )))
        }
    }
}

/// Positivity of the infima of all six baselines.
pub fn check_h0(env: &EnvelopeTable) -> HypothesisVerdict {
    let labelled = Coef::ALL
        .iter()
        .map(|&c| (format!("inf {} > 0", c.name()), env.get(c).0))
        .collect();
    HypothesisVerdict::from_margins("H0", labelled)
}

/// `a1L > c1M a2M / c2L` and `a2M < a1L b2L / b1M`.
pub fn check_h1(env: &EnvelopeTable) -> Result<HypothesisVerdict> {
    check_h0(env).require()?;
    let m1 = env.a1l - env.c1m * env.a2m / env.c2l;
    let m2 = env.a1l * env.b2l / env.b1m - env.a2m;
    Ok(HypothesisVerdict::from_margins(
        "H1",
        vec![
            ("a1L > c1M*a2M/c2L".to_string(), m1),
            ("a2M < a1L*b2L/b1M".to_string(), m2),
        ],
    ))
}

/// The two pointwise-in-time expressions of the linear determinacy condition.
#[allow(clippy::too_many_arguments)]
pub(crate) fn h2_expressions(
    a1: f64,
    c1: f64,
    a2: f64,
    b2: f64,
    c2: f64,
    env0: &EnvelopeTable,
    c1m: f64,
    b1l: f64,
    c2m: f64,
    b2l: f64,
) -> [f64; 2] {
    let ratio = env0.a2m / env0.c2l;
    let common = a1 - c1 * ratio - a2 + 2.0 * c2 * env0.a2l / env0.c2m;
    [common - b2 * ratio * c1m / b1l, common - b2 * ratio * c2m / b2l]
}

/// Sample times covering one period plus every table breakpoint.
pub(crate) fn scan_times(set: &CoefficientSet, samples_per_period: usize) -> Vec<f64> {
    let period = set.period();
    let mut times: Vec<f64> =
        (0..samples_per_period).map(|k| k as f64 * period / samples_per_period as f64).collect();
    times.extend(set.breakpoints());
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Linear determinacy condition, checked at every sampled time of one period.
pub fn check_h2(set: &CoefficientSet, env: &EnvelopeTable, samples_per_period: usize) -> Result<HypothesisVerdict> {
    check_h0(env).require()?;
    if samples_per_period == 0 {
        return Err(Error::input("samples_per_period must be positive"));
    }
    let mut mins = [f64::INFINITY; 2];
    for t in scan_times(set, samples_per_period) {
        let e = h2_expressions(
            set.a1.baseline.value(t),
            set.c1.baseline.value(t),
            set.a2.baseline.value(t),
            set.b2.baseline.value(t),
            set.c2.baseline.value(t),
            env,
            env.c1m,
            env.b1l,
            env.c2m,
            env.b2l,
        );
        mins[0] = mins[0].min(e[0]);
        mins[1] = mins[1].min(e[1]);
    }
    Ok(HypothesisVerdict::from_margins(
        "H2",
        vec![
            ("first linear-determinacy expression > 0".to_string(), mins[0]),
            ("second linear-determinacy expression > 0".to_string(), mins[1]),
        ],
    ))
}

/// Time-independent form of the linear determinacy condition:
/// `a1 + a2 - a2 c1/c2 - a2 b2 c1/(b1 c2)` and `a1 - a2 c1/c2`.
pub fn h2_constant_reduction(values: [f64; 6]) -> [f64; 2] {
    let [a1, b1, c1, a2, b2, c2] = values;
    [a1 + a2 - a2 * c1 / c2 - a2 * b2 * c1 / (b1 * c2), a1 - a2 * c1 / c2]
}

/// Result of the Lotka–Volterra determinacy check together with its
/// cross-check against the sampled linear determinacy condition.
#[derive(Debug, Clone, PartialEq)]
pub struct LvDeterminacy {
    pub verdict: HypothesisVerdict,
    pub set: CoefficientSet,
    pub h2: HypothesisVerdict,
    /// Both forms agree (or the LV inequality is tight, where only the
    /// non-strict form holds).
    pub agrees: bool,
}

/// `(ã1 ã2 - 1)/(1 - ã1) <= r1/r2` for the substitution
/// `a1 = b1 = r1, c1 = ã1 r1, a2 = c2 = r2, b2 = r2 ã2`.
pub fn check_lv_determinacy(r1: f64, r2: f64, at1: f64, at2: f64) -> Result<LvDeterminacy> {
    if !(r1 > 0.0 && r2 > 0.0 && at1 > 0.0) {
        return Err(Error::precondition("r1, r2 and ã1 must be positive"));
    }
    if !(at1 < 1.0 && 1.0 <= at2) {
        return Err(Error::precondition(format!("need ã1 < 1 <= ã2, got ã1 = {at1}, ã2 = {at2}")));
    }
    let lhs = (at1 * at2 - 1.0) / (1.0 - at1);
    let slack = r1 / r2 - lhs;
    let verdict = HypothesisVerdict {
        name: "LV determinacy".to_string(),
        holds: slack >= 0.0,
        margins: vec![slack],
        violated: if slack >= 0.0 { vec![] } else { vec!["(ã1ã2-1)/(1-ã1) <= r1/r2".to_string()] },
    };
    let set = CoefficientSet::constants(1.0, [r1, r1, at1 * r1, r2, r2 * at2, r2])?;
    let env = compute_envelopes(&set, DEFAULT_SAMPLES_PER_PERIOD)?;
    let h2 = check_h2(&set, &env, DEFAULT_SAMPLES_PER_PERIOD)?;
    let tight = slack.abs() <= 1e-12 * (1.0 + lhs.abs());
    let agrees = verdict.holds == h2.holds || tight;
    Ok(LvDeterminacy { verdict, set, h2, agrees })
}
