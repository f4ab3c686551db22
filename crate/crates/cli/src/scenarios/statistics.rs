use cqg_core::error::Error;
use cqg_core::exchange::Permutation;
use cqg_core::statistics::{exchange_test, permutation_equivalence_check, symmetrize as symmetrize_factors, Spinor};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{spin_value, FactorChoice, ScenarioConfig};
use crate::{CliError, Report, Result};

/// Norm below which a symmetrized state counts as vanishing.
pub const PAULI_ZERO: f64 = 1e-12;
const PHASE_TOLERANCE: f64 = 1e-10;
const EQUIVALENCE_TOLERANCE: f64 = 1e-12;
const UNIT_NORM_TOLERANCE: f64 = 1e-12;

fn load_factors(path: &std::path::Path, s: cqg_core::spin::SpinValue) -> Result<Vec<Spinor<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let factors = doc["factors"]
        .as_array()
        .ok_or_else(|| CliError::Config(format!("{}: expected {{\"factors\": [...]}}", path.display())))?;
    factors
        .iter()
        .enumerate()
        .map(|(k, f)| Spinor::from_json(s, f).map_err(|e| CliError::Config(format!("{}: factors[{k}]: {e}", path.display()))))
        .collect()
}

pub fn symmetrize(config: &ScenarioConfig, report: &mut Report) -> Result<()> {
    let spec = &config.symmetrize;
    let s = spin_value(&spec.s)?;
    let m = s.multiplicity();
    let d = spec.basis;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let factors: Vec<Spinor<f64>> = match &spec.states {
        Some(path) => {
            let f = load_factors(path, s)?;
            if f.len() != spec.n {
                return Err(CliError::Config(format!(
                    "at `symmetrize.n`: {} but the states file holds {} factors",
                    spec.n,
                    f.len()
                )));
            }
            f
        }
        None => match spec.factors {
            FactorChoice::Distinct => {
                if spec.n > m * d {
                    return Err(CliError::Config(format!(
                        "at `symmetrize.basis`: {} distinct factors need at least {} basis states",
                        spec.n,
                        spec.n.div_ceil(m)
                    )));
                }
                (0..spec.n).map(|k| Spinor::basis_state(s, d, k % m, k / m)).collect()
            }
            FactorChoice::Duplicate => vec![Spinor::basis_state(s, d, 0, 0); spec.n],
            FactorChoice::Random => (0..spec.n)
                .map(|_| {
                    let mut data: Vec<Complex<f64>> =
                        (0..m * d).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                    let norm = data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    data.iter_mut().for_each(|z| *z /= norm);
                    Spinor::new(s, d, data)
                })
                .collect::<cqg_core::Result<_>>()?,
        },
    };
    let psi = symmetrize_factors(&factors)?;
    let norm = psi.norm();
    let pauli_zero = norm < PAULI_ZERO;
    let duplicates = (0..factors.len()).any(|a| (a + 1..factors.len()).any(|b| factors[a] == factors[b]));
    let expected = if s.is_fermionic() { -1.0 } else { 1.0 };

    let mut phases = Vec::new();
    let mut phase_failures = Vec::new();
    let mut deviation = None;
    if !pauli_zero {
        for a in 0..spec.n {
            for b in a + 1..spec.n {
                let p = Permutation::transposition(spec.n, a + 1, b + 1)?;
                match exchange_test(&psi, &p) {
                    Ok(l) => {
                        if (Complex::new(l.re, l.im) - expected).norm() > PHASE_TOLERANCE {
                            phase_failures.push(format!("({} {}): {} + {}i", a + 1, b + 1, l.re, l.im));
                        }
                        phases.push(json!({
                            "transposition": [a + 1, b + 1],
                            "re": l.re,
                            "im": l.im,
                            "residual": l.residual,
                            "expected": expected,
                        }));
                    }
                    Err(Error::NotEigenstate { residual }) => {
                        phase_failures.push(format!("({} {}): not an eigenstate, residual {residual:e}", a + 1, b + 1));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        deviation = Some(permutation_equivalence_check(&psi, spec.equivalence_samples, &mut rng)?.max_deviation);
    }

    let summary = json!({
        "n": spec.n,
        "s": s.to_string(),
        "basis": d,
        "norm": norm,
        "pauli_zero": pauli_zero,
        "exchange_phases": phases,
        "equivalence_deviation": deviation,
    });
    report.write_json("symmetrize.json", &summary)?;
    let entries = psi.data.len();
    if entries <= spec.state_limit {
        report.write_json(
            "state.json",
            &json!({ "s": s.to_string(), "n": spec.n, "basis": d, "tensor": psi.to_json() }),
        )?;
    } else {
        log::info!("state.json skipped: {entries} entries exceed symmetrize.state_limit = {}", spec.state_limit);
    }
    report.metric("state_entries", entries);
    report.metric("state_written", entries <= spec.state_limit);
    report.metric("norm", norm);
    report.metric("pauli_zero", pauli_zero);
    report.metric("duplicate_factors", duplicates);
    if duplicates {
        let want = s.is_fermionic();
        report.check(
            "pauli_zero",
            pauli_zero,
            format!("{want} for duplicate factors with 2s = {}", s.two_s),
            pauli_zero == want,
        );
    }
    if spec.states.is_none() && spec.factors == FactorChoice::Distinct {
        report.check_below("unit_norm_error", (norm - 1.0).abs(), UNIT_NORM_TOLERANCE);
    }
    if !pauli_zero {
        report.check("exchange_phases", &phase_failures, format!("all transpositions give {expected}"), phase_failures.is_empty());
        if let Some(dev) = deviation {
            report.metric("equivalence_deviation", dev);
            report.check_below("equivalence_deviation", dev, EQUIVALENCE_TOLERANCE);
        }
    }
    Ok(())
}
