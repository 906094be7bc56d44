//! Run configuration: strict TOML (or JSON) parsing and conversion into core types.

use std::path::Path;

use serde::{Deserialize, Serialize};

use spreadlab_core::coefficients::Harmonic;
use spreadlab_core::verify::PersistenceMode;
use spreadlab_core::{
    Coef, CoefficientField, CoefficientSet, Dispersal, Grid, Kernel, KernelShape, PeriodicScalar, Profile,
    SchemeConfig, SpatialBump, StepMode,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for random ensembles.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    /// Present for nonlocal dispersal; absent means random dispersal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
    pub coefficients: CoefficientsSection,
    pub scheme: SchemeSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub shape: KernelShape,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    pub period: f64,
    pub a1: FieldSpec,
    pub b1: FieldSpec,
    pub c1: FieldSpec,
    pub a2: FieldSpec,
    pub b2: FieldSpec,
    pub c2: FieldSpec,
}

/// One coefficient: exactly one of `constant`, `harmonic`, `table`, plus an
/// optional spatial bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonic: Option<TrigSpec>,
    /// `(t, value)` nodes spanning one period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<BumpSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigSpec {
    pub mean: f64,
    #[serde(default)]
    pub terms: Vec<Harmonic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpShape {
    /// Flat top with unit linear ramps.
    #[default]
    Smoothed,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub amplitude: f64,
    /// Full width of the plateau.
    pub width: f64,
    #[serde(default)]
    pub shape: BumpShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub dt: f64,
    #[serde(default = "implicit")]
    pub mode: StepMode,
}

fn implicit() -> StepMode {
    StepMode::Implicit
}

/// Scenario name plus every scenario parameter, each with a default so the
/// resolved config is complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub name: String,
    /// Simulated periods (fronts, super-solution check) or period budget
    /// (persistence, coexistence).
    pub periods: Option<usize>,
    /// Decay rates `[start, stop]` and count for the dispersion table.
    pub mu_table: (f64, f64, usize),
    pub mu_grid_only: bool,
    /// `simulate` runs `u` alone (`v = 0`) from a step instead of the
    /// transformed competition front.
    pub scalar: bool,
    /// Decay rate for `spectrum`.
    pub mu: f64,
    /// `spectrum` target: a coefficient name, `u-star` or `v-star`.
    pub target: String,
    /// Shifted coefficient for `sweep`.
    pub coefficient: Coef,
    pub eps: Vec<f64>,
    /// `sweep` also runs empirical speed intervals for every shift.
    pub intervals: bool,
    pub trials: usize,
    pub persistence: PersistenceMode,
    pub amplitudes: Vec<f64>,
    pub widths: Vec<f64>,
    /// Shift used by the super-solution construction.
    pub supersolution_eps: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            name: "run".into(),
            periods: None,
            mu_table: (0.05, 5.0, 100),
            mu_grid_only: false,
            scalar: false,
            mu: 0.0,
            target: "a1".into(),
            coefficient: Coef::A1,
            eps: vec![0.2, 0.1, 0.05],
            intervals: false,
            trials: 16,
            persistence: PersistenceMode::Coexistence,
            amplitudes: (1..=20).map(|k| k as f64 / 20.0).collect(),
            widths: vec![1.0, 2.0, 4.0, 8.0],
            supersolution_eps: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: "out".into(), formats: vec![Format::Csv, Format::Json] }
    }
}

/// Manifest written next to the outputs; only the embedded config is read back.
#[derive(Deserialize)]
struct ManifestConfig {
    config: RunConfig,
}

impl RunConfig {
    /// TOML by default; `.json` files are either a bare config or a manifest.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            if value.get("config").is_some() {
                serde_json::from_value::<ManifestConfig>(value)?.config
            } else {
                serde_json::from_value(value)?
            }
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        for (name, f) in self.coefficients.fields() {
            let n = [f.constant.is_some(), f.harmonic.is_some(), f.table.is_some()].iter().filter(|b| **b).count();
            if n != 1 {
                return Err(CliError::Config(format!(
                    "coefficient {name} needs exactly one of constant, harmonic, table (found {n})"
                )));
            }
        }
        if self.scenario.name.is_empty() || self.scenario.name.contains(['/', '\\']) {
            return Err(CliError::Config(format!("invalid scenario name {:?}", self.scenario.name)));
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<Grid> {
        Ok(Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n)?)
    }

    pub fn dispersal(&self, grid: &Grid) -> CliResult<Dispersal> {
        let d = match &self.kernel {
            None => Dispersal::Random,
            Some(k) => Dispersal::Nonlocal(Kernel::new(k.shape, k.radius, grid.h())?),
        };
        d.check_grid(grid)?;
        Ok(d)
    }

    pub fn scheme(&self, grid: &Grid, dispersal: &Dispersal) -> CliResult<SchemeConfig> {
        let s = SchemeConfig::new(self.scheme.dt, self.scheme.mode);
        s.steps_per_period(self.coefficients.period)?;
        s.check(grid, dispersal)?;
        Ok(s)
    }

    pub fn coefficient_set(&self) -> CliResult<CoefficientSet> {
        let c = &self.coefficients;
        let f = |field: &FieldSpec| field.field(c.period);
        Ok(CoefficientSet::new(f(&c.a1)?, f(&c.b1)?, f(&c.c1)?, f(&c.a2)?, f(&c.b2)?, f(&c.c2)?)?)
    }
}

impl CoefficientsSection {
    fn fields(&self) -> [(&'static str, &FieldSpec); 6] {
        [("a1", &self.a1), ("b1", &self.b1), ("c1", &self.c1), ("a2", &self.a2), ("b2", &self.b2), ("c2", &self.c2)]
    }
}

impl FieldSpec {
    fn field(&self, period: f64) -> CliResult<CoefficientField> {
        let profile = match (&self.constant, &self.harmonic, &self.table) {
            (Some(v), None, None) => Profile::Constant(*v),
            (None, Some(h), None) => Profile::Trig { mean: h.mean, terms: h.terms.clone() },
            (None, None, Some(t)) => Profile::Table(t.clone()),
            _ => return Err(CliError::Config("coefficient needs exactly one baseline".into())),
        };
        let baseline = PeriodicScalar::new(period, profile)?;
        Ok(match self.bump {
            None => CoefficientField::homogeneous(baseline),
            Some(b) => {
                let bump = match b.shape {
                    BumpShape::Smoothed => SpatialBump::smoothed(b.amplitude, b.width)?,
                    BumpShape::Square => SpatialBump::square(b.amplitude, b.width)?,
                };
                CoefficientField::with_bump(baseline, bump)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[grid]
x_min = -10.0
x_max = 10.0
n = 101

[coefficients]
period = 1.0
a1 = { constant = 1.0, bump = { amplitude = 0.3, width = 4.0 } }
b1 = { constant = 1.0 }
c1 = { constant = 0.5 }
a2 = { harmonic = { mean = 0.4, terms = [{ amplitude = 0.1 }] } }
b2 = { table = [[0.0, 0.5], [0.5, 0.6], [1.0, 0.5]] }
c2 = { constant = 1.0 }

[scheme]
dt = 0.01

[scenario]
name = "demo"
"#;

    #[test]
    fn parses_all_baseline_kinds() {
        let cfg: RunConfig = toml::from_str(BASE).unwrap();
        cfg.validate().unwrap();
        let set = cfg.coefficient_set().unwrap();
        assert_eq!(set.a1.value(0.0, 0.0), 1.3);
        assert!((set.a2.value(0.25, 0.0) - 0.5).abs() < 1e-12);
        assert_eq!(set.b2.value(0.5, 0.0), 0.6);
        assert_eq!(cfg.scheme.mode, StepMode::Implicit);
        assert_eq!(cfg.scenario.eps, vec![0.2, 0.1, 0.05]);
    }

    #[test]
    fn rejects_unknown_keys_and_double_baselines() {
        let extra = BASE.replace("[scheme]\n", "[scheme]\nsubsteps = 2\n");
        assert!(toml::from_str::<RunConfig>(&extra).is_err());
        let both = BASE.replace("c2 = { constant = 1.0 }", "c2 = { constant = 1.0, table = [[0.0, 1.0], [1.0, 1.0]] }");
        let cfg: RunConfig = toml::from_str(&both).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let cfg: RunConfig = toml::from_str(BASE).unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
