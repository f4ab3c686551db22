//! Side-by-side runs of the coupled stepper and the linear reference solver.

use serde::{Deserialize, Serialize};

use super::{CqgSolver, ExternalFields, ReferenceSolver, SolverParams};
use crate::error::Result;
use crate::geometry::MetricChart;
use crate::qstate::{from_wavefunction_in, to_wavefunction, CqgState};
use crate::scalar::{lit, wrap_angle, Real};

/// Reference density below which phases are not compared, relative to its
/// maximum.
const PHASE_REGION: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSample<T> {
    pub time: T,
    /// `‖ρ − |Ψ|²‖₂ / ‖|Ψ|²‖₂` with the chart's volume weights.
    pub density_l2: T,
    /// `max |ρ − |Ψ|²| / max |Ψ|²`.
    pub density_max: T,
    /// Largest phase difference `(S/ℏ − arg Ψ)` over the compared region,
    /// radians, after removing the global offset at the density peak.
    pub phase_max: Option<T>,
    pub norm_cqg: T,
    pub norm_reference: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport<T> {
    pub samples: Vec<EquivalenceSample<T>>,
    pub max_density_l2: T,
    pub max_density_abs: T,
    /// `None` once any phase comparison failed.
    pub max_phase: Option<T>,
    /// Why phases could not be compared, if they could not.
    pub phase_error: Option<String>,
    pub steps: usize,
}

/// Runs both solvers to `t_end`, sampling about a hundred times.
pub fn equivalence_report<T: Real>(
    initial: &CqgState<T>,
    fields: &ExternalFields<T>,
    params: &SolverParams<T>,
    t_end: T,
) -> Result<EquivalenceReport<T>> {
    let steps = params.steps_to(t_end - initial.time);
    equivalence_report_sampled(initial, fields, params, t_end, (steps / 100).max(1))
}

/// As [`equivalence_report`], comparing every `every` steps and at the end.
pub fn equivalence_report_sampled<T: Real>(
    initial: &CqgState<T>,
    fields: &ExternalFields<T>,
    params: &SolverParams<T>,
    t_end: T,
    every: usize,
) -> Result<EquivalenceReport<T>> {
    let every = every.max(1);
    let mut cqg = CqgSolver::new(initial, fields.clone(), params.clone())?;
    let mut reference = ReferenceSolver::new(&to_wavefunction(initial)?, fields.clone(), params.clone())?;
    let steps = params.steps_to(t_end - initial.time);
    let mut samples = Vec::new();
    let mut phase_error = None;
    samples.push(compare(&cqg, &reference, &mut phase_error)?);
    for k in 1..=steps {
        cqg.step()?;
        reference.step()?;
        if k % every == 0 || k == steps {
            samples.push(compare(&cqg, &reference, &mut phase_error)?);
        }
    }
    let max_density_l2 = samples.iter().map(|s| s.density_l2).fold(T::zero(), T::max);
    let max_density_abs = samples.iter().map(|s| s.density_max).fold(T::zero(), T::max);
    let max_phase = if phase_error.is_some() {
        None
    } else {
        Some(samples.iter().filter_map(|s| s.phase_max).fold(T::zero(), T::max))
    };
    Ok(EquivalenceReport {
        samples,
        max_density_l2,
        max_density_abs,
        max_phase,
        phase_error,
        steps,
    })
}

fn compare<T: Real>(
    cqg: &CqgSolver<T>,
    reference: &ReferenceSolver<T>,
    phase_error: &mut Option<String>,
) -> Result<EquivalenceSample<T>> {
    let state = cqg.state()?;
    let chart: &MetricChart<T> = &state.chart;
    let w = chart.volume_weights();
    let a = state.rho.data();
    let b = reference.density();
    let (mut diff2, mut ref2, mut diff_max, mut ref_max) = (T::zero(), T::zero(), T::zero(), T::zero());
    let (mut norm_a, mut norm_b) = (T::zero(), T::zero());
    for p in 0..b.len() {
        let d = a[p] - b[p];
        diff2 = diff2 + w[p] * d * d;
        ref2 = ref2 + w[p] * b[p] * b[p];
        diff_max = diff_max.max(d.abs());
        ref_max = ref_max.max(b[p]);
        norm_a = norm_a + w[p] * a[p];
        norm_b = norm_b + w[p] * b[p];
    }
    let phase_max = if phase_error.is_some() {
        None
    } else {
        match phase_difference(&state, reference, &b, ref_max) {
            Ok(v) => Some(v),
            Err(e) => {
                *phase_error = Some(format!("t = {}: {e}", reference.time()));
                None
            }
        }
    };
    Ok(EquivalenceSample {
        time: reference.time(),
        density_l2: (diff2 / ref2).sqrt(),
        density_max: diff_max / ref_max,
        phase_max,
        norm_cqg: norm_a,
        norm_reference: norm_b,
    })
}

fn phase_difference<T: Real>(state: &CqgState<T>, reference: &ReferenceSolver<T>, b: &[T], ref_max: T) -> Result<T> {
    let cut = ref_max * lit(PHASE_REGION);
    let region: Vec<bool> = b.iter().map(|&r| r >= cut).collect();
    let unwrapped = from_wavefunction_in(&reference.wave()?, Some(&region), T::zero())?;
    let hbar = state.units.hbar;
    let peak = (0..b.len()).fold(0, |best, p| if b[p] > b[best] { p } else { best });
    let s = state.action.data();
    let r = unwrapped.action.data();
    let offset = (s[peak] - r[peak]) / hbar;
    Ok((0..b.len())
        .filter(|&p| region[p])
        .map(|p| wrap_angle((s[p] - r[p]) / hbar - offset).abs())
        .fold(T::zero(), T::max))
}
