//! One line per acceptance criterion, each at its stated tolerance and
//! runtime budget. Exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use cqg_cli::config::{Scenario, ScenarioConfig};
use cqg_cli::run;
use cqg_core::dynamics::xi_conformal;
use cqg_core::exchange::{
    classify, enumerate_exchange_paths, BoundaryRule, Classification, ExchangePath, Permutation, Rejection, Vertex,
};
use cqg_core::geometry::{weyl_curvature, MetricChart};
use cqg_core::presets::Preset;
use cqg_core::spin::{ratchet_check, validate_spin, SpinValue};
use cqg_core::statistics::{exchange_test, permutation_equivalence_check, symmetrize, MultiSpinor, Spinor};
use cqg_core::{Axis, Field};
use num_bigint::BigUint;
use num_complex::Complex;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde_json::Value;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

type Check = fn(&Path) -> Verdict;

fn main() {
    let criteria: [(&str, f64, Check); 8] = [
        ("A1 curvature coupling equals the quantum potential", 5.0, pinning),
        ("A2 free packet spreading", 60.0, free_packet),
        ("A3 coupled vs linear solver", 120.0, cross_solver),
        ("A4 ratchet invariant", 10.0, ratchet),
        ("A5 winding theorem", 60.0, winding),
        ("A6 exchange symmetry of many-particle spinors", 30.0, statistics),
        ("A7 quantization gate", f64::INFINITY, quantization),
        ("A8 determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let scratch = tempfile::tempdir().expect("scratch directory");
        let started = Instant::now();
        let v = std::panic::catch_unwind(|| check(scratch.path()))
            .unwrap_or_else(|e| verdict(false, format!("panicked: {}", panic_text(&e))));
        let took = started.elapsed();
        let in_time = took <= Duration::from_secs_f64(budget.min(1e9));
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let limit = if budget.is_finite() { format!(" of {budget} s") } else { String::new() };
        println!(
            "{} {name}: {} [{:.2} s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

/// `ρ = exp(u)` with `u` a random sum of three harmonics, amplitudes up to
/// `0.5 / m` on harmonic `m`.
fn random_density(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let modes: Vec<(f64, f64)> = (1..=3)
        .map(|m| (rng.gen_range(-0.5..0.5) / m as f64, rng.gen_range(-0.5..0.5) / m as f64))
        .collect();
    move |x| {
        modes
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = (k + 1) as f64 * x;
                a * w.cos() + b * w.sin()
            })
            .sum::<f64>()
            .exp()
    }
}

/// `∂²f` of periodic samples on `[0, length)` by FFT.
fn spectral_second_derivative(f: &[f64], length: f64) -> Vec<f64> {
    let n = f.len();
    let mut planner = FftPlanner::new();
    let mut data: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut data);
    for (j, z) in data.iter_mut().enumerate() {
        let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let k = TAU * m / length;
        *z *= if 2 * j == n { 0.0 } else { -k * k };
    }
    planner.plan_fft_inverse(n).process(&mut data);
    data.iter().map(|z| z.re / n as f64).collect()
}

fn pinning(_: &Path) -> Verdict {
    let (hbar, mass, n, samples) = (1.0, 1.0, 256, 20);
    let chart = MetricChart::euclidean_embedded(vec![Axis::uniform("x", 0.0, TAU, n, true)], 3).unwrap();
    let xi = (3.0 - 2.0) / (8.0 * (3.0 - 1.0));
    if xi_conformal::<f64>(chart.dim()) != xi {
        return verdict(false, format!("ξ = {} for n = {}", xi_conformal::<f64>(chart.dim()), chart.dim()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let density = random_density(&mut rng);
        let rho = Field::from_fn(chart.grid(), |q: &[f64]| density(q[0]));
        let rw = weyl_curvature(&rho, &chart).unwrap();
        let root: Vec<f64> = rho.data().iter().map(|r| r.sqrt()).collect();
        let lap = spectral_second_derivative(&root, TAU);
        let bohm: Vec<f64> = lap.iter().zip(&root).map(|(l, r)| -hbar * hbar / (2.0 * mass) * l / r).collect();
        let scale = bohm.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = rw
            .data()
            .iter()
            .zip(&bohm)
            .fold(0.0f64, |m, (r, q)| m.max((xi * hbar * hbar / mass * r - q).abs()));
        worst = worst.max(err / scale);
    }
    verdict(
        worst < 1e-6,
        format!("ξ = 1/16, max relative error {worst:.2e} over {samples} densities on {n} points (< 1e-6)"),
    )
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn free_packet(dir: &Path) -> Verdict {
    let (sigma, hbar, mass) = (1.0, 1.0, 1.0);
    let doubling = 2.0 * 3f64.sqrt() * mass * sigma * sigma / hbar;
    let mut cfg = ScenarioConfig::default();
    cfg.initial = Some(Preset::FreeGaussian {
        sigma,
        x0: 0.0,
        p0: 0.3,
    });
    cfg.solver.t_end = Some(doubling);
    cfg.output.dir = dir.to_path_buf();
    let cfg = cfg.resolve(Scenario::Evolve).unwrap();
    let points = cfg.chart.as_ref().unwrap().axes[0].count;
    let outcome = run(&cfg).unwrap();
    let (header, rows) = read_csv(&dir.join("timeseries.csv"));
    let (t, w, norm) = (column(&header, "t"), column(&header, "width_0"), column(&header, "norm"));
    let mut worst = 0.0f64;
    for row in &rows {
        let exact = sigma * (1.0 + (hbar * row[t] / (2.0 * mass * sigma * sigma)).powi(2)).sqrt();
        worst = worst.max((row[w] - exact).abs() / exact);
    }
    let last = rows.last().unwrap();
    let drift = (last[norm] - rows[0][norm]).abs() / rows[0][norm];
    let reached = (last[t] - doubling).abs() < 1e-9;
    verdict(
        worst < 1e-3 && reached && points == 512 && drift < 1e-6 && outcome.passed(),
        format!(
            "max relative width error {worst:.2e} (< 1e-3) to t = {:.4} on {points} points, norm drift {drift:.1e}",
            last[t]
        ),
    )
}

fn cross_solver(dir: &Path) -> Verdict {
    let mut cfg = ScenarioConfig::default();
    cfg.initial = Some(Preset::Coherent {
        omega: 1.0,
        x0: 2.0,
        p0: 0.5,
    });
    cfg.output.dir = dir.to_path_buf();
    let cfg = cfg.resolve(Scenario::Equivalence).unwrap();
    let period = TAU / 1.0;
    let outcome = run(&cfg).unwrap();
    let worst = |name: &str| {
        let (header, rows) = read_csv(&dir.join(name));
        let (t, l2) = (column(&header, "t"), column(&header, "density_l2"));
        let end = rows.last().unwrap()[t];
        (rows.iter().fold(0.0f64, |m, r| m.max(r[l2])), end)
    };
    let (coarse, end) = worst("equivalence.csv");
    let (fine, _) = worst("equivalence_half_step.csv");
    let order = (coarse / fine).log2();
    let manifest_order = outcome.report.metrics["observed_order"].as_f64().unwrap();
    verdict(
        coarse < 1e-3 && order >= 1.7 && (end - period).abs() < 1e-9 && (order - manifest_order).abs() < 1e-12,
        format!(
            "max L2 density discrepancy {coarse:.2e} (< 1e-3) over one period; halving dt gives {fine:.2e}, order {order:.3} (>= 1.7, split-step order 2)"
        ),
    )
}

fn ratchet(_: &Path) -> Verdict {
    let (mass, lambda, hbar) = (1.3, 0.7, 1.0);
    let n = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut notes = Vec::new();
    let mut pass = true;
    for two_s in 1..=3 {
        let s = SpinValue::from_two_s(two_s);
        let bound = s.helicity(hbar);
        let axis = |lo: f64, hi: f64| (0..n).map(move |k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 });
        let grid = axis(-bound, bound).flat_map(|sz| axis(0.0, PI).map(move |beta| (sz, beta)));
        let random: Vec<(f64, f64)> =
            (0..1_000_000).map(|_| (rng.gen_range(-bound..=bound), rng.gen_range(0.0..=PI))).collect();
        match ratchet_check(grid.chain(random), s, mass, lambda, hbar) {
            Ok(r) => {
                // ℏs − s_z cos β ≥ ℏs(1 − |cos β|), so the rate is at least
                // ℏs / ((1 + |cos β|) mλ²), reached at the poles.
                let floor = bound / (2.0 * mass * lambda * lambda);
                let ok = r.violations == 0 && r.samples == 2_000_000 && (r.min_rate - floor).abs() <= 1e-12 * floor;
                pass &= ok;
                notes.push(format!("s = {s}: {} violations, min {:.6} (bound {floor:.6})", r.violations, r.min_rate));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("s = {s}: {e}"));
            }
        }
    }
    verdict(pass, format!("10^3 x 10^3 grid + 10^6 random each; {}", notes.join("; ")))
}

/// All monotone paths with steps (1,0), (0,1), (1,1) and displacement
/// `(di, dj)`, as lifted vertex lists.
fn all_paths(start: Vertex, di: i64, dj: i64, visit: &mut impl FnMut(&[Vertex])) {
    fn go(path: &mut Vec<Vertex>, end: Vertex, visit: &mut impl FnMut(&[Vertex])) {
        let at = *path.last().unwrap();
        if at == end {
            visit(path);
            return;
        }
        for (x, y) in [(1, 0), (0, 1), (1, 1)] {
            let next = (at.0 + x, at.1 + y);
            if next.0 <= end.0 && next.1 <= end.1 {
                path.push(next);
                go(path, end, visit);
                path.pop();
            }
        }
    }
    go(&mut vec![start], (start.0 + di, start.1 + dj), visit);
}

fn winding(_: &Path) -> Verdict {
    let mut problems = Vec::new();
    let mut listed = 0u64;
    let mut starts = 0u64;
    for k in [4u64, 8, 16, 32, 64] {
        let kk = k as i64;
        for a in 0..kk {
            for b in 0..kk {
                starts += 1;
                let start = (a, b);
                let end = (b, a);
                let rep = enumerate_exchange_paths(k, start, 128, BoundaryRule::Strict).unwrap();
                if a == b {
                    if rep.n_valid != BigUint::from(0u8) {
                        problems.push(format!("K = {k} {start:?}: diagonal start has valid paths"));
                    }
                    continue;
                }
                if rep.n_valid == BigUint::from(0u8) {
                    problems.push(format!("K = {k} {start:?}: no valid path"));
                }
                if rep.winding_sums != [Ratio::from_integer(1)] {
                    problems.push(format!("K = {k} {start:?}: winding sums {:?}", rep.winding_sums));
                }
                let dir = if b > a { 1 } else { -1 };
                let direct = ExchangePath::new(k, (0..=(b - a).abs()).map(|t| (a + dir * t, b - dir * t)).collect()).unwrap();
                if classify(&direct, start, end, BoundaryRule::Strict).unwrap() != Classification::Rejected(Rejection::Monotonicity) {
                    problems.push(format!("K = {k} {start:?}: direct segment accepted"));
                }
                if k > 16 {
                    continue;
                }
                // Every path on the smaller lattices, including lifts one
                // full turn further along each axis for K = 4.
                let (di, dj) = ((b - a).rem_euclid(kk), (a - b).rem_euclid(kk));
                let lifts: &[(i64, i64)] = if k == 4 { &[(0, 0), (1, 0), (0, 1), (1, 1)] } else { &[(0, 0)] };
                let mut valid = 0u64;
                for &(li, lj) in lifts {
                    all_paths(start, di + li * kk, dj + lj * kk, &mut |v| {
                        listed += 1;
                        let path = ExchangePath::new(k, v.to_vec()).unwrap();
                        if classify(&path, start, end, BoundaryRule::Strict).unwrap().is_valid() {
                            valid += 1;
                            let turns: i64 = v.windows(2).map(|w| (w[1].0 - w[0].0) + (w[1].1 - w[0].1)).sum();
                            if turns != kk {
                                problems.push(format!("K = {k} {start:?}: a valid path winds {turns}/{k}"));
                            }
                        }
                    });
                }
                if BigUint::from(valid) != rep.n_valid {
                    problems.push(format!("K = {k} {start:?}: listed {valid} valid, counted {}", rep.n_valid));
                }
            }
        }
    }
    let detail = if problems.is_empty() {
        format!("Δγ_a + Δγ_b = 2π on every valid path; {starts} starts, {listed} paths listed for K ≤ 16 and matched to exact counts")
    } else {
        format!("{} problems, first: {}", problems.len(), problems[0])
    };
    verdict(problems.is_empty(), detail)
}

fn random_spinor(rng: &mut ChaCha8Rng, s: SpinValue, basis: usize) -> Spinor<f64> {
    let mut data: Vec<Complex<f64>> = (0..s.multiplicity() * basis)
        .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    data.iter_mut().for_each(|z| *z /= norm);
    Spinor::new(s, basis, data).unwrap()
}

/// Sum over all `n!` permutations listed by Heap's algorithm.
fn brute_symmetrize(factors: &[Spinor<f64>], fermion: bool) -> MultiSpinor<f64> {
    let n = factors.len();
    let mut out = MultiSpinor::zeros(factors[0].s, n, factors[0].basis).unwrap();
    let mut perms = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    perms.push(p.clone());
    let mut i = 0;
    while i < n {
        if c[i] < i {
            p.swap(if i % 2 == 0 { 0 } else { c[i] }, i);
            perms.push(p.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    let mut slots = vec![(0, 0); n];
    let total: usize = out.shape().iter().product();
    for k in 0..total {
        out.decode(k, &mut slots);
        let mut sum = Complex::new(0.0, 0.0);
        for p in &perms {
            let odd = (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).filter(|&(x, y)| p[x] > p[y]).count() % 2 == 1;
            let term: Complex<f64> = (0..n).map(|a| factors[a].at(slots[p[a]].0, slots[p[a]].1)).product();
            sum += if fermion && odd { -term } else { term };
        }
        let slot = out.encode(&slots);
        out.data[slot] = sum / factorial.sqrt();
    }
    out
}

fn statistics(_: &Path) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut problems = Vec::new();
    let (mut transpositions, mut worst_phase, mut worst_equiv, mut worst_brute) = (0, 0.0f64, 0.0f64, 0.0f64);
    for two_s in 0..=3 {
        let s = SpinValue::from_two_s(two_s);
        let expected = if two_s % 2 == 1 { -1.0 } else { 1.0 };
        for n in 2..=6usize {
            let basis = n.div_ceil(s.multiplicity());
            let distinct: Vec<Spinor<f64>> = (0..n).map(|k| Spinor::basis_state(s, basis, k % s.multiplicity(), k / s.multiplicity())).collect();
            let random: Vec<Spinor<f64>> = (0..n).map(|_| random_spinor(&mut rng, s, basis)).collect();
            for factors in [&distinct, &random] {
                let psi = symmetrize(factors).unwrap();
                if n <= 4 {
                    let brute = brute_symmetrize(factors, s.is_fermionic());
                    let d = psi.data.iter().zip(&brute.data).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
                    worst_brute = worst_brute.max(d);
                }
                for a in 1..=n {
                    for b in a + 1..=n {
                        transpositions += 1;
                        match exchange_test(&psi, &Permutation::transposition(n, a, b).unwrap()) {
                            Ok(l) => worst_phase = worst_phase.max((Complex::new(l.re, l.im) - expected).norm()),
                            Err(e) => problems.push(format!("s = {s}, N = {n}, ({a} {b}): {e}")),
                        }
                    }
                }
                let dev = permutation_equivalence_check(&psi, 50, &mut rng).unwrap().max_deviation;
                worst_equiv = worst_equiv.max(dev);
            }
            let one = random_spinor(&mut rng, s, basis);
            let norm = symmetrize(&vec![one; n]).unwrap().norm();
            if (norm < 1e-12) != s.is_fermionic() {
                problems.push(format!("s = {s}, N = {n}: duplicate-state norm {norm:e}"));
            }
        }
    }
    let pass = problems.is_empty() && worst_phase < 1e-12 && worst_equiv < 1e-12 && worst_brute < 1e-12;
    let detail = if problems.is_empty() {
        format!(
            "{transpositions} transpositions within {worst_phase:.1e} of (-1)^(2s); duplicate norm < 1e-12 iff 2s odd; equivalence deviation {worst_equiv:.1e} (< 1e-12); brute-force sum agrees to {worst_brute:.1e}"
        )
    } else {
        format!("{} problems, first: {}", problems.len(), problems[0])
    };
    verdict(pass, detail)
}

fn quantization(_: &Path) -> Verdict {
    let (mut checked, mut accepted, mut wrong) = (0, 0, Vec::new());
    for q in 1..=10i64 {
        for p in -60..=60i64 {
            checked += 1;
            // 2p/q is a nonnegative integer, decided without reducing.
            let admissible = p >= 0 && (2 * p) % q == 0;
            match validate_spin(Ratio::new(p, q)) {
                Ok(s) => {
                    accepted += 1;
                    if !admissible || s.two_s as i64 != 2 * p / q {
                        wrong.push(format!("{p}/{q}"));
                    }
                }
                Err(_) if admissible => wrong.push(format!("{p}/{q}")),
                Err(_) => {}
            }
        }
    }
    verdict(
        wrong.is_empty(),
        format!("{checked} fractions p/q with q ≤ 10, |p| ≤ 60: {accepted} accepted, {} disagreements", wrong.len()),
    )
}

fn artifacts(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(dir).unwrap().to_path_buf();
            let mut bytes = std::fs::read(e.path()).unwrap();
            if rel == Path::new("manifest.json") {
                let mut m: Value = serde_json::from_slice(&bytes).unwrap();
                m.as_object_mut().unwrap().remove("wall_time_s");
                bytes = serde_json::to_vec(&m).unwrap();
            }
            (rel, bytes)
        })
        .collect()
}

fn first_difference(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Option<String> {
    if a.keys().ne(b.keys()) {
        return Some(format!("file sets differ: {:?} vs {:?}", a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>()));
    }
    a.iter().find(|(k, v)| b[*k] != **v).map(|(k, _)| format!("{} differs", k.display()))
}

fn determinism(scratch: &Path) -> Verdict {
    let scenarios: [(Scenario, &str); 7] = [
        (Scenario::Evolve, r#"{"initial": {"kind": "coherent", "omega": 1.0, "x0": 1.0, "p0": 0.5}, "solver": {"t_end": 0.5}, "output": {"snapshots": 3}}"#),
        (Scenario::Equivalence, r#"{"solver": {"t_end": 0.3}}"#),
        (Scenario::Curvature, r#"{"curvature": {"samples": 3}, "chart": {"axes": [{"min": 0.5, "max": 2.5, "count": 16}, {"min": 0.0, "max": 6.283185307179586, "count": 16, "periodic": true}], "metric": {"kind": "sphere", "radius": 1.0, "theta": 0, "phi": 1}}}"#),
        (Scenario::SpinRate, r#"{"spin": {"grid": 50, "random": 2000, "csv_grid": 11}}"#),
        (Scenario::SpinValidate, r#"{"quantization": {"max_denominator": 4, "max_numerator": 9}}"#),
        (Scenario::ExchangePaths, r#"{"exchange": {"K": 16, "start": [2, 9], "all_starts": true}}"#),
        (Scenario::Symmetrize, r#"{"symmetrize": {"n": 3, "s": "1", "factors": "random"}}"#),
    ];
    let dir = scratch.join("out");
    let mut problems = Vec::new();
    for (scenario, text) in scenarios {
        let mut cfg = match ScenarioConfig::parse(text) {
            Ok(c) => c,
            Err(e) => return verdict(false, format!("{}: {e}", scenario.name())),
        };
        cfg.seed = 1234;
        cfg.output.dir = dir.clone();
        let cfg = cfg.resolve(scenario).unwrap();
        let mut runs = Vec::new();
        for echo in [false, false, true] {
            let cfg = if echo {
                let manifest: Value = serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
                ScenarioConfig::parse(&manifest["config"].to_string()).unwrap().resolve(scenario).unwrap()
            } else {
                cfg.clone()
            };
            if dir.exists() {
                std::fs::remove_dir_all(&dir).unwrap();
            }
            if !run(&cfg).unwrap().passed() {
                problems.push(format!("{}: self-check failed", scenario.name()));
            }
            runs.push(artifacts(&dir));
        }
        for (label, other) in [("re-run", &runs[1]), ("echoed config", &runs[2])] {
            if let Some(d) = first_difference(&runs[0], other) {
                problems.push(format!("{} {label}: {d}", scenario.name()));
            }
        }
    }
    let detail = if problems.is_empty() {
        "7 scenarios, each re-run and re-run from its echoed config: byte-identical artifacts (manifest wall time excluded)".to_string()
    } else {
        problems.join("; ")
    };
    verdict(problems.is_empty(), detail)
}
