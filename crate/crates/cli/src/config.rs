//! Scenario configuration.
//!
//! A run is described by one JSON document. Values come from three layers,
//! later ones winning: built-in defaults, the `--config` file, command-line
//! flags. [`ScenarioConfig::resolve`] fills every default so that the
//! resolved document, echoed into the manifest, re-runs the scenario exactly.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cqg_core::dynamics::{xi_conformal, Scheme, SolverParams};
use cqg_core::exchange::{BoundaryRule, DEFAULT_ENUMERATION_BOUND};
use cqg_core::io::ChartSpec;
use cqg_core::presets::Preset;
use cqg_core::qstate::Units;
use cqg_core::spin::{parse_rational, validate_spin, SpinValue};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Evolve,
    Curvature,
    SpinRate,
    SpinValidate,
    ExchangePaths,
    Symmetrize,
    Equivalence,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Evolve => "evolve",
            Scenario::Curvature => "curvature",
            Scenario::SpinRate => "spin-rate",
            Scenario::SpinValidate => "spin-validate",
            Scenario::ExchangePaths => "exchange-paths",
            Scenario::Symmetrize => "symmetrize",
            Scenario::Equivalence => "equivalence",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub units: Option<Units<f64>>,
    #[serde(default)]
    pub chart: Option<ChartSpec<f64>>,
    #[serde(default)]
    pub initial: Option<Preset<f64>>,
    #[serde(default)]
    pub fields: FieldsSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub curvature: CurvatureSpec,
    #[serde(default)]
    pub spin: SpinSpec,
    #[serde(default)]
    pub quantization: QuantizationSpec,
    #[serde(default)]
    pub exchange: ExchangeSpec,
    #[serde(default)]
    pub symmetrize: SymmetrizeSpec,
    #[serde(default)]
    pub equivalence: EquivalenceSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Rows in a time series (at least the first and last step).
    pub samples: usize,
    /// Density snapshots written as field CSV; 0 disables them.
    pub snapshots: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("cqg-out"),
            samples: 100,
            snapshots: 0,
        }
    }
}

/// External fields of an `evolve` or `equivalence` run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldsSpec {
    /// The fields the initial-state preset is an exact solution for.
    #[default]
    Preset,
    None,
    /// `V = ½ m ω² (x − centre)²` along the first axis.
    Harmonic { omega: f64, centre: f64 },
}

/// Every entry is optional; missing ones are derived from the chart and
/// the initial state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    /// Defaults to `0.4 h² m / ℏ` for the finest spacing `h`.
    pub dt: Option<f64>,
    /// Defaults to the preset's doubling time or period.
    pub t_end: Option<f64>,
    pub xi: Option<f64>,
    pub scheme: Option<Scheme>,
    pub curvature_refresh: Option<usize>,
    pub cfl: Option<f64>,
    pub rho_floor: Option<f64>,
    pub dissipation: Option<f64>,
    pub masked_mass_limit: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvatureSpec {
    /// Random smooth densities for the coupling check.
    pub samples: usize,
    /// Points on the periodic test line.
    pub count: usize,
    pub length: f64,
    /// Fourier modes in `ln ρ`.
    pub modes: usize,
    pub amplitude: f64,
    pub tolerance: f64,
}

impl Default for CurvatureSpec {
    fn default() -> Self {
        CurvatureSpec {
            samples: 20,
            count: 256,
            length: 2.0 * PI,
            modes: 3,
            amplitude: 0.5,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinSpec {
    /// Spin values as exact rationals, e.g. `"3/2"`.
    pub values: Vec<String>,
    /// Points per axis of the exhaustive `(s_z, β)` check.
    pub grid: usize,
    /// Uniform random samples on top of the grid.
    pub random: usize,
    /// Points per axis of the emitted CSV.
    pub csv_grid: usize,
    pub mass: f64,
    pub lambda: f64,
    pub hbar: f64,
}

impl Default for SpinSpec {
    fn default() -> Self {
        SpinSpec {
            values: vec!["1/2".into(), "1".into(), "3/2".into()],
            grid: 1000,
            random: 1_000_000,
            csv_grid: 101,
            mass: 1.0,
            lambda: 1.0,
            hbar: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizationSpec {
    /// Explicit values; when empty, every `p/q` with `q ≤ max_denominator`
    /// and `|p| ≤ max_numerator` is checked.
    pub values: Vec<String>,
    pub max_denominator: i64,
    pub max_numerator: i64,
}

impl Default for QuantizationSpec {
    fn default() -> Self {
        QuantizationSpec {
            values: Vec::new(),
            max_denominator: 10,
            max_numerator: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExchangeSpec {
    #[serde(rename = "K")]
    pub k: u64,
    pub start: (i64, i64),
    pub bound: u64,
    pub rule: BoundaryRule,
    /// Also enumerate every other start on the lattice.
    pub all_starts: bool,
}

impl Default for ExchangeSpec {
    fn default() -> Self {
        ExchangeSpec {
            k: 8,
            start: (1, 3),
            bound: DEFAULT_ENUMERATION_BOUND,
            rule: BoundaryRule::Strict,
            all_starts: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FactorChoice {
    /// Distinct orthonormal basis spinors.
    #[default]
    Distinct,
    /// Every particle in the same basis spinor.
    Duplicate,
    /// Seeded random spinors.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymmetrizeSpec {
    pub n: usize,
    pub s: String,
    /// Spatial basis dimension; 0 picks the smallest that fits `n`
    /// distinct factors.
    pub basis: usize,
    pub factors: FactorChoice,
    /// JSON file `{"factors": [...]}` overriding `factors`.
    pub states: Option<PathBuf>,
    /// Random orientations for the relabeling check.
    pub equivalence_samples: usize,
    /// Largest tensor, in entries, written to `state.json`.
    pub state_limit: usize,
}

impl Default for SymmetrizeSpec {
    fn default() -> Self {
        SymmetrizeSpec {
            n: 2,
            s: "1/2".into(),
            basis: 0,
            factors: FactorChoice::Distinct,
            states: None,
            equivalence_samples: 200,
            state_limit: 1 << 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceSpec {
    /// Largest relative L2 density discrepancy.
    pub tolerance: f64,
    /// Repeat at half the step and require the discrepancy to fall.
    pub order_check: bool,
    pub min_order: f64,
}

impl Default for EquivalenceSpec {
    fn default() -> Self {
        EquivalenceSpec {
            tolerance: 1e-3,
            order_check: true,
            min_order: 1.7,
        }
    }
}

pub fn spin_value(text: &str) -> cqg_core::Result<SpinValue> {
    validate_spin(parse_rational(text)?)
}

/// Presets by name with their default parameters.
pub fn named_preset(name: &str) -> Option<Preset<f64>> {
    Some(match name {
        "gaussian" | "free-gaussian" => Preset::FreeGaussian {
            sigma: 1.0,
            x0: 0.0,
            p0: 0.0,
        },
        "oscillator-ground" => Preset::OscillatorGround { omega: 1.0 },
        "coherent" => Preset::Coherent {
            omega: 1.0,
            x0: 2.0,
            p0: 0.0,
        },
        "plane-wave" => Preset::PlaneWave { k: PI },
        _ => return None,
    })
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses a JSON document, naming the offending field on error.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.inner()))
        })
    }

    /// Fills every default for `scenario` and checks field ranges.
    pub fn resolve(mut self, scenario: Scenario) -> Result<Self, CliError> {
        if let Some(s) = self.scenario {
            if s != scenario {
                return Err(CliError::Config(format!(
                    "at `scenario`: config names {:?}, command is {:?}",
                    s.name(),
                    scenario.name()
                )));
            }
        }
        self.scenario = Some(scenario);
        let units = *self.units.get_or_insert_with(Units::default);
        if !(units.hbar > 0.0 && units.mass > 0.0) {
            return Err(CliError::Config("at `units`: ℏ and m must be positive".into()));
        }
        if self.output.samples == 0 {
            return Err(CliError::Config("at `output.samples`: must be at least 1".into()));
        }
        match scenario {
            Scenario::Evolve | Scenario::Equivalence => {
                let default = if scenario == Scenario::Evolve { "free-gaussian" } else { "coherent" };
                let preset = self.initial.get_or_insert_with(|| named_preset(default).unwrap()).clone();
                let chart = self.chart.get_or_insert_with(|| default_chart(&preset, units)).clone();
                self.solver = self.solver.resolve(&preset, &chart, units)?;
                if scenario == Scenario::Equivalence && self.solver.scheme != Some(Scheme::CqgCoupled) {
                    return Err(CliError::Config("at `solver.scheme`: equivalence runs both solvers; leave it cqg-coupled".into()));
                }
            }
            Scenario::Curvature => {
                let c = &self.curvature;
                if c.samples == 0 || c.count < 8 || !(c.length > 0.0) || c.modes == 0 || !(c.tolerance > 0.0) {
                    return Err(CliError::Config("at `curvature`: need samples ≥ 1, count ≥ 8, modes ≥ 1, positive length and tolerance".into()));
                }
            }
            Scenario::SpinRate => {
                let s = &self.spin;
                if s.values.is_empty() || s.grid < 2 || s.csv_grid < 2 {
                    return Err(CliError::Config("at `spin`: need at least one value and grids of 2 or more points".into()));
                }
                if !(s.mass > 0.0 && s.lambda > 0.0 && s.hbar > 0.0) {
                    return Err(CliError::Config("at `spin`: mass, lambda and hbar must be positive".into()));
                }
                for (k, v) in s.values.iter().enumerate() {
                    spin_value(v).map_err(|e| CliError::Config(format!("at `spin.values[{k}]`: {e}")))?;
                }
            }
            Scenario::SpinValidate => {
                let q = &self.quantization;
                if q.values.is_empty() && (q.max_denominator < 1 || q.max_numerator < 0) {
                    return Err(CliError::Config("at `quantization`: max_denominator must be ≥ 1".into()));
                }
            }
            Scenario::ExchangePaths => {
                if self.exchange.k == 0 {
                    return Err(CliError::Config("at `exchange.K`: must be positive".into()));
                }
            }
            Scenario::Symmetrize => {
                let sym = &mut self.symmetrize;
                if sym.n == 0 {
                    return Err(CliError::Config("at `symmetrize.n`: must be positive".into()));
                }
                let s = spin_value(&sym.s).map_err(|e| CliError::Config(format!("at `symmetrize.s`: {e}")))?;
                if sym.basis == 0 {
                    sym.basis = sym.n.div_ceil(s.multiplicity());
                }
            }
        }
        Ok(self)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario.expect("resolved config")
    }

    pub fn units(&self) -> Units<f64> {
        self.units.unwrap_or_default()
    }
}

/// Open line wide enough for the packet over its natural time.
pub fn default_chart(preset: &Preset<f64>, units: Units<f64>) -> ChartSpec<f64> {
    match *preset {
        Preset::PlaneWave { .. } => ChartSpec::line(64, 0.0, 2.0, true),
        Preset::FreeGaussian { sigma, x0, p0 } => {
            let drift = p0 / units.mass * preset.natural_time(units);
            let half = 16.0 * sigma;
            ChartSpec::line(512, x0 + drift.min(0.0) - half, x0 + drift.max(0.0) + half, false)
        }
        Preset::OscillatorGround { .. } | Preset::Coherent { .. } => {
            let sigma = preset.sigma(units).unwrap_or(1.0);
            let (x0, p0, omega) = match *preset {
                Preset::Coherent { x0, p0, omega } => (x0, p0, omega),
                Preset::OscillatorGround { omega } => (0.0, 0.0, omega),
                _ => unreachable!(),
            };
            let amplitude = x0.hypot(p0 / (units.mass * omega));
            let half = 14.0 * sigma + amplitude;
            ChartSpec::line(256, -half, half, false)
        }
    }
}

impl SolverSpec {
    fn resolve(&self, preset: &Preset<f64>, chart: &ChartSpec<f64>, units: Units<f64>) -> Result<Self, CliError> {
        let built = chart.build().map_err(|e| CliError::Config(format!("at `chart`: {e}")))?;
        let h = built.grid().min_spacing();
        let base = SolverParams::<f64>::default();
        let t_end = self.t_end.unwrap_or_else(|| preset.natural_time(units));
        let dt = match self.dt {
            Some(dt) => dt,
            None if h.is_finite() => {
                // Shrunk so that whole steps end exactly at t_end.
                let nominal = 0.4 * h * h * units.mass / units.hbar;
                let steps = (t_end / nominal).ceil();
                if steps >= 1.0 {
                    t_end / steps
                } else {
                    nominal
                }
            }
            None => return Err(CliError::Config("at `solver.dt`: required on a chart without resolved axes".into())),
        };
        let resolved = SolverSpec {
            dt: Some(dt),
            t_end: Some(t_end),
            xi: Some(self.xi.unwrap_or_else(|| xi_conformal(built.dim()))),
            scheme: Some(self.scheme.unwrap_or(base.scheme)),
            curvature_refresh: Some(self.curvature_refresh.unwrap_or(base.curvature_refresh)),
            cfl: Some(self.cfl.unwrap_or(base.cfl)),
            rho_floor: Some(self.rho_floor.unwrap_or(base.rho_floor)),
            dissipation: Some(self.dissipation.unwrap_or(base.dissipation)),
            masked_mass_limit: Some(self.masked_mass_limit.unwrap_or(base.masked_mass_limit)),
        };
        resolved
            .params()
            .check(&built, &units)
            .map_err(|e| CliError::Config(format!("at `solver`: {e}")))?;
        Ok(resolved)
    }

    /// Solver parameters of a resolved spec.
    pub fn params(&self) -> SolverParams<f64> {
        let base = SolverParams::<f64>::default();
        SolverParams {
            dt: self.dt.unwrap_or(base.dt),
            t_end: self.t_end.unwrap_or(base.t_end),
            xi: self.xi,
            scheme: self.scheme.unwrap_or(base.scheme),
            curvature_refresh: self.curvature_refresh.unwrap_or(base.curvature_refresh),
            cfl: self.cfl.unwrap_or(base.cfl),
            rho_floor: self.rho_floor.unwrap_or(base.rho_floor),
            dissipation: self.dissipation.unwrap_or(base.dissipation),
            masked_mass_limit: self.masked_mass_limit.unwrap_or(base.masked_mass_limit),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_named() {
        let err = ScenarioConfig::parse(r#"{"solver": {"dtt": 0.1}}"#).unwrap_err();
        assert!(err.to_string().contains("solver"), "{err}");
        let err = ScenarioConfig::parse(r#"{"exchange": {"K": "eight"}}"#).unwrap_err();
        assert!(err.to_string().contains("exchange.K"), "{err}");
    }

    #[test]
    fn resolution_is_idempotent() {
        for scenario in [Scenario::Evolve, Scenario::Equivalence, Scenario::ExchangePaths] {
            let once = ScenarioConfig::default().resolve(scenario).unwrap();
            let text = serde_json::to_string(&once).unwrap();
            let twice = ScenarioConfig::parse(&text).unwrap().resolve(scenario).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn scenario_mismatch_is_a_config_error() {
        let cfg = ScenarioConfig::parse(r#"{"scenario": "symmetrize"}"#).unwrap();
        assert!(matches!(cfg.resolve(Scenario::Evolve), Err(CliError::Config(_))));
    }

    #[test]
    fn unstable_step_is_rejected() {
        let cfg = ScenarioConfig::parse(r#"{"solver": {"dt": 1.0}}"#).unwrap();
        assert!(matches!(cfg.resolve(Scenario::Evolve), Err(CliError::Config(_))));
    }
}
