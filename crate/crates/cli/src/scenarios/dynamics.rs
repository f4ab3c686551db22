use cqg_core::dynamics::{
    equivalence_report_sampled, xi_conformal, CqgSolver, EquivalenceReport, ExternalFields, Observables, ReferenceSolver,
    Scheme, SolverParams,
};
use cqg_core::geometry::{riemann_scalar, weyl_curvature, MetricChart};
use cqg_core::io::{save_state, write_field_csv, ChartSpec};
use cqg_core::presets::Preset;
use cqg_core::qstate::{from_wavefunction_in, to_wavefunction, CqgState};
use cqg_core::{Axis, Field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fields_for, num, Csv};
use crate::config::{FieldsSpec, ScenarioConfig};
use crate::{Report, Result};

const NORM_DRIFT: f64 = 1e-6;
/// Width and centre agreement with the closed-form packet.
const PACKET_TOLERANCE: f64 = 1e-3;
const PLANE_WAVE_TOLERANCE: f64 = 1e-10;

enum Runner {
    Cqg(Box<CqgSolver<f64>>),
    Reference(Box<ReferenceSolver<f64>>),
}

impl Runner {
    fn step(&mut self) -> cqg_core::Result<()> {
        match self {
            Runner::Cqg(s) => s.step(),
            Runner::Reference(s) => s.step(),
        }
    }

    fn observables(&self) -> cqg_core::Result<Observables<f64>> {
        match self {
            Runner::Cqg(s) => s.observables(),
            Runner::Reference(s) => s.observables(),
        }
    }

    fn density(&self) -> Vec<f64> {
        match self {
            Runner::Cqg(s) => s.density(),
            Runner::Reference(s) => s.density(),
        }
    }

    /// The phase is unwrapped only where the density exceeds `floor` times
    /// its maximum, as in the coupled solver's active set.
    fn state(&self, floor: f64) -> cqg_core::Result<CqgState<f64>> {
        match self {
            Runner::Cqg(s) => s.state(),
            Runner::Reference(s) => {
                let rho = s.density();
                let cut = floor * rho.iter().fold(0.0f64, |m, &v| m.max(v));
                let region: Vec<bool> = rho.iter().map(|&r| r > cut).collect();
                from_wavefunction_in(&s.wave()?, Some(&region), floor)
            }
        }
    }
}

struct Setup {
    preset: Preset<f64>,
    spec: ChartSpec<f64>,
    state: CqgState<f64>,
    fields: ExternalFields<f64>,
    params: SolverParams<f64>,
    /// Closed-form evolution applies.
    exact: bool,
}

fn setup(config: &ScenarioConfig) -> Result<Setup> {
    let units = config.units();
    let preset = config.initial.clone().expect("resolved config");
    let spec = config.chart.clone().expect("resolved config");
    let chart = spec.build()?;
    let state = preset.state(chart.clone(), units)?;
    let fields = fields_for(&config.fields, &preset, units, chart.dim());
    let exact = config.fields == FieldsSpec::Preset && chart.is_constant() && resolved_axes(&chart) == [0];
    Ok(Setup {
        preset,
        spec,
        state,
        fields,
        params: config.solver.params(),
        exact,
    })
}

fn resolved_axes(chart: &MetricChart<f64>) -> Vec<usize> {
    (0..chart.dim()).filter(|&k| chart.grid().axis(k).count > 1).collect()
}

/// `max |ρ − ρ_exact| / max ρ_exact`.
fn discrepancy(rho: &[f64], exact: &[f64]) -> f64 {
    let peak = exact.iter().fold(0.0f64, |m, &v| m.max(v));
    rho.iter().zip(exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / peak
}

pub fn evolve(config: &ScenarioConfig, report: &mut Report) -> Result<()> {
    let units = config.units();
    let Setup {
        preset,
        spec,
        state,
        fields,
        params,
        exact,
    } = setup(config)?;
    let chart = state.chart.clone();
    let axes = resolved_axes(&chart);
    let dir = report.dir().to_path_buf();
    save_state(&dir, "state_initial", &state, &spec)?;
    for f in ["state_initial.json", "state_initial_rho.csv", "state_initial_action.csv"] {
        report.record(f);
    }

    let mut runner = match params.scheme {
        Scheme::CqgCoupled => Runner::Cqg(Box::new(CqgSolver::new(&state, fields, params.clone())?)),
        Scheme::ReferenceLinear => {
            Runner::Reference(Box::new(ReferenceSolver::new(&to_wavefunction(&state)?, fields, params.clone())?))
        }
    };
    let steps = params.steps_to(params.t_end - state.time);
    let every = (steps / config.output.samples).max(1);
    let snap_every = match config.output.snapshots {
        0 => 0,
        n => (steps / n).max(1),
    };

    let mut header = vec!["t".to_string(), "norm".into()];
    header.extend(axes.iter().map(|k| format!("mean_{k}")));
    header.extend(axes.iter().map(|k| format!("width_{k}")));
    header.extend(["energy".into(), "max_discrepancy".into()]);
    let mut csv = Csv::new(&header);

    let initial = runner.observables()?;
    let mut norm_drift = 0.0f64;
    let mut width_error = 0.0f64;
    let mut centre_error = 0.0f64;
    let mut worst_discrepancy = 0.0f64;
    let mut snapshot = 0usize;
    let mut last = initial.clone();
    for k in 0..=steps {
        if k > 0 {
            runner.step()?;
        }
        let sample = k % every == 0 || k == steps;
        let snap = snap_every > 0 && (k % snap_every == 0 || k == steps);
        if !sample && !snap {
            continue;
        }
        let o = runner.observables()?;
        let rho = runner.density();
        let d = if exact {
            discrepancy(&rho, &preset.density_on(&chart, o.time, units))
        } else {
            f64::NAN
        };
        if sample {
            norm_drift = norm_drift.max((o.norm - initial.norm).abs() / initial.norm);
            if exact {
                worst_discrepancy = worst_discrepancy.max(d);
                if let Some(w) = preset.width(o.time, units) {
                    width_error = width_error.max((o.width[0] - w).abs() / w);
                    centre_error = centre_error.max((o.mean[0] - preset.mean(o.time, units)).abs());
                }
            }
            let mut row = vec![num(o.time), num(o.norm)];
            row.extend(axes.iter().map(|&a| num(o.mean[a])));
            row.extend(axes.iter().map(|&a| num(o.width[a])));
            row.extend([num(o.energy), num(d)]);
            csv.row(row);
        }
        if snap {
            let mut out = Vec::new();
            write_field_csv(&mut out, chart.grid(), &rho)?;
            report.write(&format!("snapshots/rho_{snapshot:04}.csv"), out)?;
            snapshot += 1;
        }
        last = o;
    }
    report.write("timeseries.csv", csv.text)?;
    match runner.state(params.rho_floor) {
        Ok(final_state) => {
            save_state(&dir, "state_final", &final_state, &spec)?;
            for f in ["state_final.json", "state_final_rho.csv", "state_final_action.csv"] {
                report.record(f);
            }
        }
        Err(e) => log::warn!("final state not saved: {e}"),
    }

    report.metric("preset", &preset);
    report.metric("steps", steps);
    report.metric("dt", params.dt);
    report.metric("final_time", last.time);
    report.metric("energy_initial", initial.energy);
    report.metric("energy_final", last.energy);
    report.metric("norm_drift", norm_drift);
    report.check_below("norm_drift", norm_drift, NORM_DRIFT);
    if let Runner::Cqg(s) = &runner {
        report.metric("masked_mass", s.masked_mass());
    }
    if exact {
        report.metric("max_discrepancy", worst_discrepancy);
        match preset {
            Preset::PlaneWave { .. } => report.check_below("max_discrepancy", worst_discrepancy, PLANE_WAVE_TOLERANCE),
            _ => {
                report.metric("width_relative_error", width_error);
                report.metric("centre_error", centre_error);
                report.check_below("width_relative_error", width_error, PACKET_TOLERANCE);
                report.check_below("centre_error", centre_error, PACKET_TOLERANCE);
            }
        }
    } else {
        log::info!("fields differ from the preset's; no closed-form comparison");
    }
    Ok(())
}

fn write_equivalence_csv(report: &mut Report, name: &str, r: &EquivalenceReport<f64>) -> Result<()> {
    let header: Vec<String> = ["t", "density_l2", "density_max", "phase_max", "norm_cqg", "norm_reference"]
        .map(String::from)
        .to_vec();
    let mut csv = Csv::new(&header);
    for s in &r.samples {
        csv.row([
            num(s.time),
            num(s.density_l2),
            num(s.density_max),
            s.phase_max.map_or_else(|| "nan".into(), |p| num(p)),
            num(s.norm_cqg),
            num(s.norm_reference),
        ]);
    }
    report.write(name, csv.text)
}

fn norm_drift(r: &EquivalenceReport<f64>) -> f64 {
    let first = &r.samples[0];
    r.samples.iter().fold(0.0f64, |m, s| {
        m.max((s.norm_cqg - first.norm_cqg).abs() / first.norm_cqg)
            .max((s.norm_reference - first.norm_reference).abs() / first.norm_reference)
    })
}

pub fn equivalence(config: &ScenarioConfig, report: &mut Report) -> Result<()> {
    let Setup {
        state, fields, params, ..
    } = setup(config)?;
    let spec = &config.equivalence;
    let steps = params.steps_to(params.t_end - state.time);
    let every = (steps / config.output.samples).max(1);
    let coarse = equivalence_report_sampled(&state, &fields, &params, params.t_end, every)?;
    write_equivalence_csv(report, "equivalence.csv", &coarse)?;
    report.metric("steps", coarse.steps);
    report.metric("dt", params.dt);
    report.metric("max_density_l2", coarse.max_density_l2);
    report.metric("max_density_abs", coarse.max_density_abs);
    report.metric("max_phase", coarse.max_phase);
    if let Some(e) = &coarse.phase_error {
        report.metric("phase_error", e);
    }
    let drift = norm_drift(&coarse);
    report.metric("norm_drift", drift);
    report.check_below("max_density_l2", coarse.max_density_l2, spec.tolerance);
    report.check_below("norm_drift", drift, NORM_DRIFT);
    if spec.order_check {
        let half = SolverParams {
            dt: params.dt / 2.0,
            ..params.clone()
        };
        let fine = equivalence_report_sampled(&state, &fields, &half, params.t_end, 2 * every)?;
        write_equivalence_csv(report, "equivalence_half_step.csv", &fine)?;
        let order = (coarse.max_density_l2 / fine.max_density_l2).log2();
        report.metric("max_density_l2_half_step", fine.max_density_l2);
        report.metric("observed_order", order);
        report.check("observed_order", order, format!(">= {}", spec.min_order), order >= spec.min_order);
    }
    Ok(())
}

/// Smooth periodic `ln ρ` with its first two derivatives.
struct LogDensity {
    k0: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl LogDensity {
    fn random(rng: &mut ChaCha8Rng, modes: usize, amplitude: f64, length: f64) -> Self {
        let mut draw = |m: usize| rng.gen_range(-amplitude..amplitude) / m as f64;
        let (cos, sin) = (1..=modes).map(|m| (draw(m), draw(m))).unzip();
        LogDensity {
            k0: std::f64::consts::TAU / length,
            cos,
            sin,
        }
    }

    /// `(u, u', u'')` at `x`.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for (m, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = self.k0 * (m + 1) as f64;
            let (s, c) = (k * x).sin_cos();
            out.0 += a * c + b * s;
            out.1 += k * (b * c - a * s);
            out.2 -= k * k * (a * c + b * s);
        }
        out
    }
}

/// Compares the curvature coupling with the quantum potential on random
/// periodic densities, and samples `R` of the configured chart if any.
pub fn curvature(config: &ScenarioConfig, report: &mut Report) -> Result<()> {
    let units = config.units();
    let spec = &config.curvature;
    if let Some(chart_spec) = &config.chart {
        let chart = chart_spec.build()?;
        let r = riemann_scalar(&chart)?;
        let mut out = Vec::new();
        write_field_csv(&mut out, chart.grid(), r.data())?;
        report.write("scalar_curvature.csv", out)?;
        report.metric("scalar_curvature_max_abs", r.data().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let chart = MetricChart::euclidean_embedded(vec![Axis::uniform("x", 0.0, spec.length, spec.count, true)], 3)?;
    let xi = config.solver.xi.unwrap_or_else(|| xi_conformal(chart.dim()));
    let coupling = xi * units.hbar * units.hbar / units.mass;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut csv = Csv::new(&["sample".into(), "max_relative_error".into()]);
    let mut worst = 0.0f64;
    for sample in 0..spec.samples {
        let u = LogDensity::random(&mut rng, spec.modes, spec.amplitude, spec.length);
        let rho = Field::from_fn(chart.grid(), |q: &[f64]| u.eval(q[0]).0.exp());
        let rw = weyl_curvature(&rho, &chart)?;
        // Δ√ρ/√ρ = u''/2 + u'²/4 for ρ = e^u.
        let bohm: Vec<f64> = (0..chart.grid().len())
            .map(|p| {
                let (_, d1, d2) = u.eval(chart.grid().coord(p, 0));
                -units.hbar * units.hbar / (2.0 * units.mass) * (d2 / 2.0 + d1 * d1 / 4.0)
            })
            .collect();
        let scale = bohm.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = rw
            .data()
            .iter()
            .zip(&bohm)
            .fold(0.0f64, |m, (r, q)| m.max((coupling * r - q).abs()))
            / scale;
        worst = worst.max(err);
        csv.row([sample.to_string(), num(err)]);
        if sample == 0 {
            let mut first = Csv::new(&["x".into(), "curvature_term".into(), "quantum_potential".into()]);
            for (p, q) in bohm.iter().enumerate() {
                first.row([num(chart.grid().coord(p, 0)), num(coupling * rw.data()[p]), num(*q)]);
            }
            report.write("pinning_sample0.csv", first.text)?;
        }
    }
    report.write("pinning.csv", csv.text)?;
    report.metric("xi", xi);
    report.metric("max_relative_error", worst);
    report.check_below("max_relative_error", worst, spec.tolerance);
    Ok(())
}
