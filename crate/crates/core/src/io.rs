//! Text formats: field CSV, chart descriptions and the state envelope.
//!
//! A field CSV has the header `axis0,…,axis{n-1},value` followed by one row
//! per grid point in row-major order (last axis fastest), each row holding
//! the point's coordinates and the value. Numbers use the shortest
//! representation that parses back to the same scalar.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MetricChart;
use crate::grid::{Axis, Grid, ScalarField};
use crate::qstate::{CqgState, Units};
use crate::scalar::{lit, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec<T> {
    #[serde(default)]
    pub name: Option<String>,
    pub min: T,
    /// Inclusive end on open axes, period end on periodic ones.
    pub max: T,
    pub count: usize,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricSpec<T> {
    #[default]
    Euclidean,
    /// Row-major `g_ij` over all axes, padding included.
    Constant { g: Vec<T> },
    /// Round 2-sphere on axes `theta`, `phi`; flat elsewhere.
    Sphere { radius: T, theta: usize, phi: usize },
    /// Polar plane on axes `radial`, `angle`; flat elsewhere.
    Polar { radial: usize, angle: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec<T> {
    pub axes: Vec<AxisSpec<T>>,
    #[serde(default)]
    pub metric: MetricSpec<T>,
    /// Pads with homogeneous axes up to this dimension.
    #[serde(default)]
    pub embed: Option<usize>,
}

impl<T: Real> ChartSpec<T> {
    /// Open or periodic line `[min, max]` embedded in three dimensions.
    pub fn line(count: usize, min: T, max: T, periodic: bool) -> Self {
        ChartSpec {
            axes: vec![AxisSpec {
                name: Some("x".into()),
                min,
                max,
                count,
                periodic,
            }],
            metric: MetricSpec::Euclidean,
            embed: Some(crate::presets::EMBEDDING_DIM),
        }
    }

    pub fn build(&self) -> Result<Arc<MetricChart<T>>> {
        let mut axes: Vec<Axis<T>> = self
            .axes
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let name = a.name.clone().unwrap_or_else(|| format!("axis{k}"));
                Axis::uniform(name, a.min, a.max, a.count, a.periodic)
            })
            .collect();
        if let Some(n) = self.embed {
            if n < axes.len() {
                return Err(Error::Dimension {
                    found: axes.len(),
                    reason: format!("cannot embed in dimension {n}"),
                });
            }
            let mut k = 0;
            while axes.len() < n {
                axes.push(Axis::homogeneous(format!("pad{k}")));
                k += 1;
            }
        }
        let chart = match &self.metric {
            MetricSpec::Euclidean => MetricChart::euclidean(axes),
            MetricSpec::Constant { g } => MetricChart::constant(axes, g.clone()),
            MetricSpec::Sphere { radius, theta, phi } => MetricChart::with_sphere(axes, *radius, *theta, *phi),
            MetricSpec::Polar { radial, angle } => {
                let n = axes.len();
                if *radial >= n || *angle >= n || radial == angle {
                    return Err(Error::Dimension {
                        found: n,
                        reason: "polar axes out of range".into(),
                    });
                }
                MetricChart::with_polar(axes, *radial, *angle)
            }
        }?;
        Ok(Arc::new(chart))
    }
}

/// Shortest text that parses back to `x`; exponent form outside
/// `[1e-4, 1e15)`.
pub fn format_number<T: Real>(x: T) -> String {
    let a = x.abs();
    if a == T::zero() || !a.is_finite() || (a >= lit(1e-4) && a < lit(1e15)) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn write_field_csv<T: Real, W: Write>(out: &mut W, grid: &Grid<T>, values: &[T]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::Shape {
            expected: grid.shape().to_vec(),
            found: vec![values.len()],
        });
    }
    let header: Vec<String> = (0..grid.dim()).map(|k| format!("axis{k}")).collect();
    writeln!(out, "{},value", header.join(","))?;
    let mut line = String::new();
    for (p, v) in values.iter().enumerate() {
        line.clear();
        for k in 0..grid.dim() {
            line.push_str(&format_number(grid.coord(p, k)));
            line.push(',');
        }
        line.push_str(&format_number(*v));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a field CSV written for `grid`, checking the header, the row count
/// and every coordinate.
pub fn read_field_csv<T: Real, R: Read>(input: R, grid: &Grid<T>) -> Result<ScalarField<T>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
    let expected: Vec<String> = (0..grid.dim()).map(|k| format!("axis{k}")).chain(["value".into()]).collect();
    if header.trim().split(',').map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!("field header {header:?}, expected {:?}", expected.join(","))));
    }
    let parse = |s: &str, row: usize| -> Result<T> {
        s.trim()
            .parse::<T>()
            .map_err(|_| Error::Parse(format!("row {row}: {s:?} is not a number")))
    };
    let tolerance = lit::<T>(1e-9);
    let mut data = Vec::with_capacity(grid.len());
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != grid.dim() + 1 {
            return Err(Error::Parse(format!("row {row}: {} columns", cells.len())));
        }
        let p = data.len();
        if p >= grid.len() {
            return Err(Error::Parse(format!("more than {} rows", grid.len())));
        }
        for k in 0..grid.dim() {
            let x = parse(cells[k], row)?;
            let want = grid.coord(p, k);
            if (x - want).abs() > tolerance * (T::one() + want.abs()) {
                return Err(Error::Parse(format!("row {row}: axis{k} = {x}, grid has {want}")));
            }
        }
        data.push(parse(cells[grid.dim()], row)?);
    }
    if data.len() != grid.len() {
        return Err(Error::Parse(format!("{} rows for a grid of {}", data.len(), grid.len())));
    }
    ScalarField::new(grid.shape().to_vec(), data)
}

/// JSON envelope of a saved state; the field files are relative to the
/// envelope's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEnvelope<T> {
    pub chart: ChartSpec<T>,
    pub time: T,
    pub units: Units<T>,
    #[serde(default)]
    pub windings: Option<Vec<T>>,
    pub rho_file: PathBuf,
    pub action_file: PathBuf,
}

/// Writes `<stem>.json`, `<stem>_rho.csv` and `<stem>_action.csv` into `dir`.
pub fn save_state<T: Real + Serialize>(dir: &Path, stem: &str, state: &CqgState<T>, chart: &ChartSpec<T>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let rho_file = PathBuf::from(format!("{stem}_rho.csv"));
    let action_file = PathBuf::from(format!("{stem}_action.csv"));
    let grid = state.chart.grid();
    write_field_csv(&mut fs::File::create(dir.join(&rho_file))?, grid, state.rho.data())?;
    write_field_csv(&mut fs::File::create(dir.join(&action_file))?, grid, state.action.data())?;
    let envelope = StateEnvelope {
        chart: chart.clone(),
        time: state.time,
        units: state.units,
        windings: Some(state.windings.clone()),
        rho_file,
        action_file,
    };
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&envelope)? + "\n")?;
    Ok(path)
}

pub fn load_state<T: Real + Serialize + for<'de> Deserialize<'de>>(path: &Path) -> Result<CqgState<T>> {
    let envelope: StateEnvelope<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let chart = envelope.chart.build()?;
    let rho = read_field_csv(fs::File::open(base.join(&envelope.rho_file))?, chart.grid())?;
    let action = read_field_csv(fs::File::open(base.join(&envelope.action_file))?, chart.grid())?;
    let mut state = CqgState::new(chart, rho, action, envelope.units)?.with_time(envelope.time);
    if let Some(w) = envelope.windings {
        state = state.with_windings(w)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;

    #[test]
    fn field_csv_round_trips_exactly() {
        let spec = ChartSpec {
            axes: vec![
                AxisSpec {
                    name: None,
                    min: -1.0,
                    max: 1.0,
                    count: 5,
                    periodic: false,
                },
                AxisSpec {
                    name: None,
                    min: 0.0,
                    max: 6.0,
                    count: 3,
                    periodic: true,
                },
            ],
            metric: MetricSpec::Euclidean,
            embed: None,
        };
        let chart = spec.build().unwrap();
        let values: Vec<f64> = (0..15).map(|k| (k as f64 * 0.37).sin() / 3.0).collect();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, chart.grid(), &values).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("axis0,axis1,value\n-1,0,0\n-1,2,"));
        let back = read_field_csv(buf.as_slice(), chart.grid()).unwrap();
        assert_eq!(back.data(), values.as_slice());
        assert!(read_field_csv("axis0,value\n".as_bytes(), chart.grid()).is_err());
        let short: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(read_field_csv(short.as_bytes(), chart.grid()).is_err());
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -2.5, 1.1817532925628588e-16, 3e20, 1e-4, 123456.789, f64::MIN_POSITIVE] {
            let t = format_number(x);
            assert_eq!(t.parse::<f64>().unwrap(), x, "{t}");
        }
        assert_eq!(format_number(1.5e-16), "1.5e-16");
        assert_eq!(format_number(0.25), "0.25");
    }

    #[test]
    fn state_envelope_round_trips() {
        let dir = std::env::temp_dir().join(format!("cqg-io-{}", std::process::id()));
        let spec = ChartSpec::line(33, -4.0, 4.0, false);
        let chart = spec.build().unwrap();
        let state = Preset::Coherent {
            omega: 1.0,
            x0: 0.5,
            p0: 0.25,
        }
        .state(chart, Units::default())
        .unwrap()
        .with_time(0.75);
        let path = save_state(&dir, "initial", &state, &spec).unwrap();
        let back: CqgState<f64> = load_state(&path).unwrap();
        assert_eq!(back.rho.data(), state.rho.data());
        assert_eq!(back.action.data(), state.action.data());
        assert_eq!(back.time, 0.75);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn chart_specs_parse() {
        let spec: ChartSpec<f64> = serde_json::from_str(
            r#"{"axes": [{"min": 0.2, "max": 3.0, "count": 16}, {"min": 0, "max": 6.283185307179586, "count": 16, "periodic": true}],
                "metric": {"kind": "sphere", "radius": 2.0, "theta": 0, "phi": 1}}"#,
        )
        .unwrap();
        assert_eq!(spec.build().unwrap().dim(), 2);
        let bad: ChartSpec<f64> = serde_json::from_str(r#"{"axes": [{"min": 0, "max": 1, "count": 4}], "metric": {"kind": "polar", "radial": 0, "angle": 3}}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
