//! One module per scenario family; each fills a [`Report`].

use std::fmt::Write as _;

use cqg_core::dynamics::ExternalFields;
use cqg_core::presets::Preset;
use cqg_core::qstate::Units;

use crate::config::{FieldsSpec, Scenario, ScenarioConfig};
use crate::{Report, Result};

mod dynamics;
mod exchange;
mod spin;
mod statistics;

pub fn execute(config: &ScenarioConfig, report: &mut Report) -> Result<()> {
    match config.scenario() {
        Scenario::Evolve => dynamics::evolve(config, report),
        Scenario::Equivalence => dynamics::equivalence(config, report),
        Scenario::Curvature => dynamics::curvature(config, report),
        Scenario::SpinRate => spin::spin_rate(config, report),
        Scenario::SpinValidate => spin::spin_validate(config, report),
        Scenario::ExchangePaths => exchange::exchange_paths(config, report),
        Scenario::Symmetrize => statistics::symmetrize(config, report),
    }
}

fn fields_for(spec: &FieldsSpec, preset: &Preset<f64>, units: Units<f64>, dim: usize) -> ExternalFields<f64> {
    match *spec {
        FieldsSpec::Preset => preset.fields(units),
        FieldsSpec::None => ExternalFields::none(),
        FieldsSpec::Harmonic { omega, centre } => {
            let mut c = vec![0.0; dim];
            c[0] = centre;
            ExternalFields::harmonic(units.mass, omega, c)
        }
    }
}

fn num(x: f64) -> String {
    cqg_core::io::format_number(x)
}

/// Comma-separated rows with a header; numbers in shortest round-trip form.
struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[String]) -> Self {
        Csv {
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let cells: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}
