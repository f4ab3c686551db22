use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqg_cli::config::{named_preset, FactorChoice, Scenario, ScenarioConfig};
use cqg_cli::{run, CliError};
use cqg_core::dynamics::Scheme;
use cqg_core::exchange::BoundaryRule;

/// Runs a scenario and writes its artifacts and manifest.
///
/// Settings are taken from built-in defaults, then the --config file, then
/// command-line flags; later sources win. Exit status: 0 when every
/// self-check passes, 1 when one fails, 2 for configuration errors.
#[derive(Parser, Debug)]
#[command(name = "cqg", version)]
struct Cli {
    /// JSON scenario configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Only errors on stderr, nothing on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve a preset state and compare with its closed form.
    Evolve(DynamicsArgs),
    /// Compare the curvature coupling with the quantum potential.
    Curvature {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Sweep the γ rate over (s_z, β).
    SpinRate {
        /// Spin values, comma separated, e.g. 1/2,1,3/2.
        #[arg(long = "s", value_delimiter = ',')]
        s: Vec<String>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        random: Option<usize>,
    },
    /// Check which values are admissible spins.
    SpinValidate {
        /// Values such as 1/2, 0.7 or 3; a rational sweep when omitted.
        values: Vec<String>,
    },
    /// Enumerate exchange paths on the angle lattice.
    ExchangePaths {
        #[arg(long = "K")]
        k: Option<u64>,
        /// Lattice start `a,b`.
        #[arg(long, value_parser = parse_pair)]
        start: Option<(i64, i64)>,
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
        #[arg(long)]
        bound: Option<u64>,
        /// Also check every other start.
        #[arg(long)]
        all_starts: bool,
    },
    /// (Anti)symmetrize single-particle spinors.
    Symmetrize {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        s: Option<String>,
        /// JSON file `{"factors": [...]}`.
        #[arg(long)]
        states: Option<PathBuf>,
        #[arg(long)]
        basis: Option<usize>,
        #[arg(long, value_enum)]
        factors: Option<FactorChoice>,
    },
    /// Run the coupled and the linear solver side by side.
    Equivalence(DynamicsArgs),
}

#[derive(Args, Debug)]
struct DynamicsArgs {
    /// gaussian, oscillator-ground, coherent or plane-wave.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum RuleArg {
    Strict,
    Permissive,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum SchemeArg {
    CqgCoupled,
    ReferenceLinear,
}

fn parse_pair(text: &str) -> Result<(i64, i64), String> {
    let (a, b) = text.split_once(',').ok_or("expected a,b")?;
    let parse = |s: &str| s.trim().parse::<i64>().map_err(|e| format!("{s:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

impl DynamicsArgs {
    fn apply(self, cfg: &mut ScenarioConfig) -> Result<(), CliError> {
        if let Some(name) = self.preset {
            cfg.initial = Some(named_preset(&name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?);
        }
        cfg.solver.t_end = self.t_end.or(cfg.solver.t_end);
        cfg.solver.dt = self.dt.or(cfg.solver.dt);
        if let Some(s) = self.scheme {
            cfg.solver.scheme = Some(match s {
                SchemeArg::CqgCoupled => Scheme::CqgCoupled,
                SchemeArg::ReferenceLinear => Scheme::ReferenceLinear,
            });
        }
        Ok(())
    }
}

/// Applies flags over the file configuration.
fn configure(cli: Cli) -> Result<(ScenarioConfig, bool), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output.dir = out;
    }
    let scenario = match cli.command {
        Command::Evolve(args) => {
            args.apply(&mut cfg)?;
            Scenario::Evolve
        }
        Command::Equivalence(args) => {
            args.apply(&mut cfg)?;
            Scenario::Equivalence
        }
        Command::Curvature { samples, count } => {
            cfg.curvature.samples = samples.unwrap_or(cfg.curvature.samples);
            cfg.curvature.count = count.unwrap_or(cfg.curvature.count);
            Scenario::Curvature
        }
        Command::SpinRate { s, grid, random } => {
            if !s.is_empty() {
                cfg.spin.values = s;
            }
            cfg.spin.grid = grid.unwrap_or(cfg.spin.grid);
            cfg.spin.random = random.unwrap_or(cfg.spin.random);
            Scenario::SpinRate
        }
        Command::SpinValidate { values } => {
            if !values.is_empty() {
                cfg.quantization.values = values;
            }
            Scenario::SpinValidate
        }
        Command::ExchangePaths {
            k,
            start,
            rule,
            bound,
            all_starts,
        } => {
            let e = &mut cfg.exchange;
            e.k = k.unwrap_or(e.k);
            e.start = start.unwrap_or(e.start);
            e.bound = bound.unwrap_or(e.bound);
            e.all_starts |= all_starts;
            if let Some(r) = rule {
                e.rule = match r {
                    RuleArg::Strict => BoundaryRule::Strict,
                    RuleArg::Permissive => BoundaryRule::Permissive,
                };
            }
            Scenario::ExchangePaths
        }
        Command::Symmetrize {
            n,
            s,
            states,
            basis,
            factors,
        } => {
            let sym = &mut cfg.symmetrize;
            sym.n = n.unwrap_or(sym.n);
            sym.s = s.unwrap_or(sym.s.clone());
            sym.basis = basis.unwrap_or(sym.basis);
            sym.factors = factors.unwrap_or(sym.factors);
            sym.states = states.or(sym.states.take());
            Scenario::Symmetrize
        }
    };
    Ok((cfg.resolve(scenario)?, cli.quiet))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let (config, quiet) = match configure(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cqg: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cqg: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let report = &outcome.report;
    if !quiet {
        for a in &report.assertions {
            println!("{} {} = {} ({})", if a.pass { "PASS" } else { "FAIL" }, a.name, a.value, a.expect);
        }
        println!("manifest: {}", outcome.manifest.display());
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        let dump = serde_json::to_string_pretty(&report.metrics).unwrap_or_default();
        eprintln!("cqg: self-check failed; metrics:\n{dump}");
        ExitCode::from(1)
    }
}
