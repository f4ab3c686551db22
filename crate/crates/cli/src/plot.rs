//! Columnar text files for plotting, derived from a run's artifacts.
//!
//! Each file starts with one `#` line naming its whitespace-separated
//! columns.
//!
//! | scenario       | file                      | columns              |
//! |----------------|---------------------------|----------------------|
//! | evolve         | `plot/width.dat`          | `t sigma`            |
//! | evolve         | `plot/norm.dat`           | `t norm`             |
//! | equivalence    | `plot/discrepancy.dat`    | `t density_l2`       |
//! | exchange-paths | `plot/exchange_path.dat`  | `gamma_a gamma_b`    |
//!
//! Density snapshots are already field CSV files under `snapshots/`.

use std::fmt::Write as _;
use std::fs;

use serde_json::Value;

use crate::config::Scenario;
use crate::{CliError, Report, Result};

fn read(report: &Report, name: &str) -> Result<String> {
    fs::read_to_string(report.dir().join(name)).map_err(|e| CliError::Artifact(format!("{name}: {e}")))
}

/// Selects named columns of a CSV artifact into a plot file.
fn columns(report: &mut Report, source: &str, target: &str, names: &[&str], labels: &[&str]) -> Result<()> {
    let text = read(report, source)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| CliError::Artifact(format!("{source}: no column {n}")))
        })
        .collect::<Result<_>>()?;
    let mut out = format!("# {}\n", labels.join(" "));
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let row: Vec<&str> = idx.iter().map(|&i| cells.get(i).copied().unwrap_or("nan")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    report.write(target, out)
}

pub fn emit_plot_data(scenario: Scenario, report: &mut Report) -> Result<()> {
    match scenario {
        Scenario::Evolve => {
            columns(report, "timeseries.csv", "plot/width.dat", &["t", "width_0"], &["t", "sigma"])?;
            columns(report, "timeseries.csv", "plot/norm.dat", &["t", "norm"], &["t", "norm"])
        }
        Scenario::Equivalence => columns(report, "equivalence.csv", "plot/discrepancy.dat", &["t", "density_l2"], &["t", "density_l2"]),
        Scenario::ExchangePaths => {
            let doc: Value = serde_json::from_str(&read(report, "exchange_paths.json")?)
                .map_err(|e| CliError::Artifact(format!("exchange_paths.json: {e}")))?;
            let Some(k) = doc["K"].as_u64() else {
                return Err(CliError::Artifact("exchange_paths.json: no K".into()));
            };
            let Some(path) = doc["example_path"].as_array() else {
                return Ok(());
            };
            let scale = std::f64::consts::TAU / k as f64;
            let mut out = String::from("# gamma_a gamma_b\n");
            for v in path {
                let (Some(i), Some(j)) = (v[0].as_i64(), v[1].as_i64()) else {
                    return Err(CliError::Artifact("exchange_paths.json: malformed vertex".into()));
                };
                let _ = writeln!(out, "{} {}", i as f64 * scale, j as f64 * scale);
            }
            report.write("plot/exchange_path.dat", out)
        }
        _ => Ok(()),
    }
}
