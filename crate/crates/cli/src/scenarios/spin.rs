use std::collections::BTreeSet;
use std::f64::consts::PI;

use cqg_core::error::{Error, PoleLimit};
use cqg_core::spin::{gamma_rate, parse_rational, ratchet_check, validate_spin, SpinConfig, SpinValue};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{num, Csv};
use crate::config::{spin_value, ScenarioConfig};
use crate::{Report, Result};

/// `n` evenly spaced points from `lo` to `hi`, both included exactly.
fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
}

fn grid(bound: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    linspace(-bound, bound, n).flat_map(move |sz| linspace(0.0, PI, n).map(move |beta| (sz, beta)))
}

pub fn spin_rate(config: &ScenarioConfig, report: &mut Report) -> Result<()> {
    let spec = &config.spin;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut summary = Vec::new();
    for text in &spec.values {
        let s = spin_value(text)?;
        let bound = s.helicity(spec.hbar);
        let random: Vec<(f64, f64)> = (0..spec.random)
            .map(|_| {
                let sz = if bound > 0.0 { rng.gen_range(-bound..=bound) } else { 0.0 };
                (sz, rng.gen_range(0.0..=PI))
            })
            .collect();
        let samples = grid(bound, spec.grid).chain(random.iter().copied());
        let name = format!("ratchet_2s{}", s.two_s);
        match ratchet_check(samples, s, spec.mass, spec.lambda, spec.hbar) {
            Ok(r) => {
                summary.push(json!({
                    "s": s.to_string(),
                    "samples": r.samples,
                    "poles": r.poles,
                    "violations": r.violations,
                    "min_rate": r.min_rate,
                    "argmin": [r.argmin.0, r.argmin.1],
                }));
                report.check(&name, r.violations, "0 negative rates", r.violations == 0);
            }
            Err(Error::InvariantViolation(msg)) => {
                summary.push(json!({ "s": s.to_string(), "error": msg }));
                report.check(&name, msg, "0 negative rates", false);
            }
            Err(e) => return Err(e.into()),
        }
        write_rate_csv(report, s, spec)?;
    }
    report.metric("ratchet", summary);
    Ok(())
}

fn write_rate_csv(report: &mut Report, s: SpinValue, spec: &crate::config::SpinSpec) -> Result<()> {
    let mut csv = Csv::new(&["s_z".into(), "beta".into(), "rate".into()]);
    for (sz, beta) in grid(s.helicity(spec.hbar), spec.csv_grid) {
        let cfg = SpinConfig {
            mass: spec.mass,
            lambda: spec.lambda,
            hbar: spec.hbar,
            ..SpinConfig::natural(beta, sz)
        };
        let rate = match gamma_rate(&cfg, s) {
            Ok(r) => num(r),
            Err(Error::Pole {
                limit: PoleLimit::Finite(v),
                ..
            }) => num(v),
            Err(Error::Pole {
                limit: PoleLimit::Divergent,
                ..
            }) => "inf".into(),
            Err(e) => return Err(e.into()),
        };
        csv.row([num(sz), num(beta), rate]);
    }
    report.write(&format!("spin_rate_2s{}.csv", s.two_s), csv.text)
}

/// `2s` is a nonnegative integer, decided on the reduced fraction.
fn admissible(r: Ratio<i64>) -> bool {
    *r.numer() >= 0 && (2 * r.numer()) % r.denom() == 0
}

pub fn spin_validate(config: &ScenarioConfig, report: &mut Report) -> Result<()> {
    let spec = &config.quantization;
    let values: Vec<(String, Option<Ratio<i64>>)> = if spec.values.is_empty() {
        let mut set = BTreeSet::new();
        for q in 1..=spec.max_denominator {
            for p in -spec.max_numerator..=spec.max_numerator {
                set.insert(Ratio::new(p, q));
            }
        }
        set.into_iter().map(|r| (r.to_string(), Some(r))).collect()
    } else {
        spec.values.iter().map(|v| (v.clone(), parse_rational(v).ok())).collect()
    };
    let mut csv = Csv::new(&["value".into(), "accepted".into(), "two_s".into()]);
    let (mut accepted, mut mismatches, mut unparsed) = (0usize, Vec::new(), 0usize);
    for (text, r) in &values {
        let Some(r) = *r else {
            unparsed += 1;
            csv.row([text.clone(), "unparseable".into(), String::new()]);
            log::warn!("{text:?} is not a rational number");
            continue;
        };
        let verdict = validate_spin(r);
        if verdict.is_ok() != admissible(r) {
            mismatches.push(text.clone());
        }
        match verdict {
            Ok(s) => {
                accepted += 1;
                csv.row([text.clone(), "true".into(), s.two_s.to_string()]);
            }
            Err(_) => csv.row([text.clone(), "false".into(), String::new()]),
        }
    }
    report.write("spin_validate.csv", csv.text)?;
    report.metric("checked", values.len());
    report.metric("accepted", accepted);
    report.metric("unparseable", unparsed);
    report.check("gate_agrees_with_rule", &mismatches, "no disagreements", mismatches.is_empty());
    Ok(())
}
