//! Configuration-driven scenario runner for `cqg-core`.
//!
//! Each scenario writes its artifacts into the output directory together
//! with `manifest.json`, which holds the resolved configuration, crate
//! versions, wall time, headline metrics and the outcome of every
//! self-check. Everything except the manifest's `wall_time_s` is a pure
//! function of the configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

pub mod config;
pub mod plot;
pub mod scenarios;

pub use config::{Scenario, ScenarioConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(cqg_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// Missing or malformed artifacts when post-processing a run.
    #[error("artifact error: {0}")]
    Artifact(String),
}

impl From<cqg_core::Error> for CliError {
    fn from(e: cqg_core::Error) -> Self {
        use cqg_core::Error as E;
        match e {
            E::Cfl { .. }
            | E::Precondition(_)
            | E::Quantization(_)
            | E::Parse(_)
            | E::Json(_)
            | E::EnumerationBound { .. }
            | E::TooManyParticles { .. }
            | E::Dimension { .. }
            | E::Shape { .. } => CliError::Config(e.to_string()),
            other => CliError::Run(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: Value,
    /// Human-readable acceptance condition.
    pub expect: String,
    pub pass: bool,
}

/// Metrics, self-checks and files produced by one scenario.
#[derive(Debug)]
pub struct Report {
    dir: PathBuf,
    pub metrics: BTreeMap<String, Value>,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(dir: &Path) -> Self {
        Report {
            dir: dir.to_path_buf(),
            metrics: BTreeMap::new(),
            assertions: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn metric(&mut self, name: &str, value: impl Serialize) {
        self.metrics.insert(name.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn check(&mut self, name: &str, value: impl Serialize, expect: impl Into<String>, pass: bool) {
        self.assertions.push(Assertion {
            name: name.into(),
            value: serde_json::to_value(value).unwrap_or(Value::Null),
            expect: expect.into(),
            pass,
        });
    }

    /// `value < limit`, failing on NaN.
    pub fn check_below(&mut self, name: &str, value: f64, limit: f64) {
        self.check(name, value, format!("< {limit:e}"), value < limit);
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// Writes `contents` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.record(name);
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.into()))?;
        self.write(name, text + "\n")
    }

    /// Lists a file written by other means.
    pub fn record(&mut self, name: &str) {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.into());
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub scenario: &'static str,
    pub passed: bool,
    pub config: &'a ScenarioConfig,
    pub versions: BTreeMap<&'static str, &'static str>,
    /// Not reproducible; ignored when comparing runs.
    pub wall_time_s: f64,
    pub metrics: &'a BTreeMap<String, Value>,
    pub assertions: &'a [Assertion],
    pub artifacts: &'a [String],
}

/// Result of [`run`]: the report and the manifest path.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub manifest: PathBuf,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

/// Executes a resolved configuration, then writes plot data and the
/// manifest. Assertion failures are reported in the outcome, not as errors.
pub fn run(config: &ScenarioConfig) -> Result<Outcome> {
    let started = Instant::now();
    let dir = config.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut report = Report::new(&dir);
    scenarios::execute(config, &mut report)?;
    plot::emit_plot_data(config.scenario(), &mut report)?;
    let versions = BTreeMap::from([("cqg-cli", env!("CARGO_PKG_VERSION")), ("cqg-core", cqg_core::VERSION)]);
    let mut artifacts = report.artifacts.clone();
    artifacts.push(MANIFEST.into());
    let manifest = Manifest {
        scenario: config.scenario().name(),
        passed: report.passed(),
        config,
        versions,
        wall_time_s: started.elapsed().as_secs_f64(),
        metrics: &report.metrics,
        assertions: &report.assertions,
        artifacts: &artifacts,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Run(e.into()))? + "\n";
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(Outcome { report, manifest: path })
}
