use cqg_core::exchange::{
    classify, enumerate_exchange_paths, winding_sum, BoundaryRule, Classification, ExchangePath, Rejection, Vertex,
};
use num_rational::Ratio;
use serde_json::{json, Value};

use super::Csv;
use crate::config::ScenarioConfig;
use crate::{Report, Result};

/// Diagonal steps first, then the remaining single-axis steps. The
/// difference `i − j` then moves monotonically between its start and end
/// values, so this path is valid whenever any path is.
pub fn staircase(k: u64, start: Vertex) -> ExchangePath {
    let kk = k as i64;
    let (a, b) = (start.0.rem_euclid(kk), start.1.rem_euclid(kk));
    let di = (b - a).rem_euclid(kk);
    let dj = (a - b).rem_euclid(kk);
    let mut v = vec![(a, b)];
    let mut at = (a, b);
    for _ in 0..di.min(dj) {
        at = (at.0 + 1, at.1 + 1);
        v.push(at);
    }
    for _ in 0..di - di.min(dj) {
        at.0 += 1;
        v.push(at);
    }
    for _ in 0..dj - di.min(dj) {
        at.1 += 1;
        v.push(at);
    }
    ExchangePath::new(k, v).expect("nonempty")
}

/// Straight segment from `A = (a, b)` to `B = (b, a)`: slope −1.
fn direct_segment(k: u64, start: Vertex) -> ExchangePath {
    let (a, b) = start;
    let dir = if b > a { 1 } else { -1 };
    let v = (0..=(b - a).abs()).map(|t| (a + dir * t, b - dir * t)).collect();
    ExchangePath::new(k, v).expect("nonempty")
}

struct StartResult {
    json: Value,
    failures: Vec<String>,
}

fn check_start(k: u64, start: Vertex, bound: u64, rule: BoundaryRule) -> Result<StartResult> {
    let kk = k as i64;
    let start = (start.0.rem_euclid(kk), start.1.rem_euclid(kk));
    let end = (start.1, start.0);
    let report = enumerate_exchange_paths(k, start, bound, rule)?;
    let mut json = serde_json::to_value(&report).map_err(cqg_core::Error::from)?;
    json["rule"] = serde_json::to_value(rule).map_err(cqg_core::Error::from)?;
    json["winding_unit"] = "2π".into();
    let mut failures = Vec::new();
    if start.0 == start.1 {
        if report.n_valid.bits() != 0 {
            failures.push(format!("{start:?}: diagonal start admits paths"));
        }
        json["example_path"] = Value::Null;
        return Ok(StartResult { json, failures });
    }
    if report.winding_sums != [Ratio::from_integer(1)] {
        failures.push(format!("{start:?}: winding sums {:?}", report.winding_sums));
    }
    let path = staircase(k, start);
    match classify(&path, start, end, rule)? {
        Classification::Valid => {
            let w = winding_sum(&path, start, end)?;
            if w != Ratio::from_integer(1) {
                failures.push(format!("{start:?}: example path winds {w}"));
            }
        }
        c => failures.push(format!("{start:?}: example path {c}")),
    }
    let direct = direct_segment(k, start);
    let c = classify(&direct, start, end, rule)?;
    if c != Classification::Rejected(Rejection::Monotonicity) {
        failures.push(format!("{start:?}: direct segment {c}"));
    }
    json["direct_segment"] = c.to_string().into();
    json["example_path"] = json!(path.vertices);
    Ok(StartResult { json, failures })
}

pub fn exchange_paths(config: &ScenarioConfig, report: &mut Report) -> Result<()> {
    let spec = &config.exchange;
    let main = check_start(spec.k, spec.start, spec.bound, spec.rule)?;
    report.metric("n_valid", &main.json["n_valid"]);
    report.metric("winding_sums", &main.json["winding_sums"]);
    report.write_json("exchange_paths.json", &main.json)?;
    report.check("winding_theorem", &main.failures, "valid paths exist and all wind once", main.failures.is_empty());
    if spec.all_starts {
        let header = ["a", "b", "n_total", "n_valid", "winding_sums"].map(String::from).to_vec();
        let mut csv = Csv::new(&header);
        let mut failures = Vec::new();
        let kk = spec.k as i64;
        for a in 0..kk {
            for b in 0..kk {
                let r = check_start(spec.k, (a, b), spec.bound, spec.rule)?;
                let sums: Vec<String> = r.json["winding_sums"]
                    .as_array()
                    .map(|v| v.iter().filter_map(|s| s.as_str().map(String::from)).collect())
                    .unwrap_or_default();
                csv.row([
                    a.to_string(),
                    b.to_string(),
                    r.json["n_total"].as_str().unwrap_or("").into(),
                    r.json["n_valid"].as_str().unwrap_or("").into(),
                    sums.join(" "),
                ]);
                failures.extend(r.failures);
            }
        }
        report.write("exchange_all_starts.csv", csv.text)?;
        report.metric("starts_checked", kk * kk);
        report.check("winding_theorem_all_starts", &failures, "no failures", failures.is_empty());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cqg_core::exchange::is_valid_exchange_path;

    #[test]
    fn staircase_is_valid_off_the_diagonal() {
        for k in [3u64, 4, 7, 8] {
            for a in 0..k as i64 {
                for b in 0..k as i64 {
                    if a != b {
                        let c = is_valid_exchange_path(&staircase(k, (a, b)), (a, b), (b, a)).unwrap();
                        assert!(c.is_valid(), "K={k} ({a},{b}): {c}");
                    }
                }
            }
        }
    }
}
