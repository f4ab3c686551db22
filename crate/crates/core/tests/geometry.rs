use std::f64::consts::{PI, TAU};

use cqg_core::geometry::*;
use cqg_core::{Axis, Field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere_chart(radius: f64, count: usize) -> MetricChart<f64> {
    MetricChart::with_sphere(
        vec![
            Axis::uniform("theta", 0.3, PI - 0.3, count, false),
            Axis::uniform("phi", 0.0, TAU, 16, true),
            Axis::uniform("z", -1.0, 1.0, 9, false),
        ],
        radius,
        0,
        1,
    )
    .unwrap()
}

#[test]
fn constant_metrics_are_exactly_flat() {
    let axes = || {
        vec![
            Axis::uniform("x", -1.0, 1.0, 9, false),
            Axis::uniform("y", 0.0, 3.0, 8, true),
            Axis::uniform("z", -2.0, 2.0, 7, false),
        ]
    };
    for chart in [
        MetricChart::euclidean(axes()).unwrap(),
        MetricChart::constant(axes(), vec![2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]).unwrap(),
    ] {
        for p in [[0, 0, 0], [4, 3, 2], [8, 7, 6]] {
            assert!(christoffel(&chart, &p).unwrap().data().iter().all(|&g| g == 0.0));
        }
        assert!(riemann_scalar(&chart).unwrap().data().iter().all(|&r| r == 0.0));
    }
}

#[test]
fn sphere_christoffel_symbols() {
    let r = 1.7;
    let chart = sphere_chart(r, 33);
    for i in [0, 5, 16, 32] {
        let theta = chart.grid().axis(0).coord(i);
        let g = christoffel(&chart, &[i, 3, 4]).unwrap();
        // The analytic metric is differentiated numerically, good to ~1e-9.
        assert!((g.get(0, 1, 1) + theta.sin() * theta.cos()).abs() < 1e-8);
        assert!((g.get(1, 0, 1) - theta.cos() / theta.sin()).abs() < 1e-8 * (1.0 / theta.tan()).abs().max(1.0));
        assert!((g.get(1, 1, 0) - g.get(1, 0, 1)).abs() < 1e-15);
        assert!(g.get(2, 2, 2).abs() < 1e-12 && g.get(0, 0, 0).abs() < 1e-12);
    }
}

#[test]
fn polar_christoffel_symbols() {
    let chart = MetricChart::with_polar(
        vec![
            Axis::uniform("r", 0.5, 3.0, 26, false),
            Axis::uniform("phi", 0.0, TAU, 12, true),
            Axis::uniform("z", 0.0, 1.0, 5, false),
        ],
        0,
        1,
    )
    .unwrap();
    for i in [0, 10, 25] {
        let r = chart.grid().axis(0).coord(i);
        let g = christoffel(&chart, &[i, 2, 2]).unwrap();
        assert!((g.get(0, 1, 1) + r).abs() < 1e-9);
        assert!((g.get(1, 0, 1) - 1.0 / r).abs() < 1e-9);
    }
    // The polar plane is flat.
    assert!(riemann_scalar(&chart).unwrap().data().iter().all(|r| r.abs() < 1e-7));
}

#[test]
fn sphere_curvature_is_two_over_r_squared() {
    for r in [0.8, 2.5] {
        let chart = sphere_chart(r, 17);
        let rg = riemann_scalar(&chart).unwrap();
        for &v in rg.data() {
            assert!((v - 2.0 / (r * r)).abs() < 1e-7 / (r * r), "{v}");
        }
    }
}

#[test]
fn product_with_flat_factor_keeps_sphere_curvature() {
    // flat³ × S²(r)
    let r = 1.3;
    let chart = MetricChart::with_sphere(
        vec![
            Axis::uniform("x", 0.0, 1.0, 5, false),
            Axis::uniform("y", 0.0, 1.0, 5, false),
            Axis::uniform("z", 0.0, 1.0, 5, false),
            Axis::uniform("theta", 0.4, 2.7, 7, false),
            Axis::uniform("phi", 0.0, TAU, 6, true),
        ],
        r,
        3,
        4,
    )
    .unwrap();
    for &v in riemann_scalar(&chart).unwrap().data() {
        assert!((v - 2.0 / (r * r)).abs() < 1e-7);
    }
}

#[test]
fn weyl_vector_of_gaussians() {
    let axes = || {
        vec![
            Axis::uniform("x", -2.0, 2.0, 41, false),
            Axis::uniform("y", -2.0, 2.0, 41, false),
            Axis::uniform("z", -2.0, 2.0, 5, false),
        ]
    };
    let chart = MetricChart::euclidean(axes()).unwrap();
    let rho = Field::from_fn(chart.grid(), |q: &[f64]| (-(q[0] * q[0] + q[1] * q[1])).exp());
    let phi = weyl_vector(&rho, &chart).unwrap();
    for p in 0..chart.grid().len() {
        let q = chart.grid().coords(p);
        assert!((phi.components[0].data()[p] - 2.0 * q[0]).abs() < 1e-10);
        assert!((phi.components[1].data()[p] - 2.0 * q[1]).abs() < 1e-10);
        assert!(phi.components[2].data()[p].abs() < 1e-12);
    }
}

#[test]
fn weyl_curvature_of_uniform_density_is_the_metric_curvature() {
    let chart = MetricChart::euclidean(vec![
        Axis::uniform("x", 0.0, 1.0, 8, false),
        Axis::uniform("y", 0.0, 1.0, 8, false),
        Axis::uniform("z", 0.0, 1.0, 8, false),
    ])
    .unwrap();
    let rw = weyl_curvature(&Field::filled(chart.grid(), 0.3), &chart).unwrap();
    assert!(rw.data().iter().all(|&v| v == 0.0));

    let r = 1.9;
    let chart = sphere_chart(r, 17);
    let rw = weyl_curvature(&Field::filled(chart.grid(), 2.0), &chart).unwrap();
    for &v in rw.data() {
        assert!((v - 2.0 / (r * r)).abs() < 1e-7);
    }
}

#[test]
fn laplace_beltrami_examples() {
    let chart = MetricChart::euclidean(vec![
        Axis::uniform("x", -1.0, 1.0, 21, false),
        Axis::uniform("y", -1.0, 1.0, 21, false),
        Axis::uniform("z", -1.0, 1.0, 21, false),
    ])
    .unwrap();
    let linear = Field::from_fn(chart.grid(), |q: &[f64]| 1.0 + 2.0 * q[0] - 3.0 * q[1] + 0.5 * q[2]);
    assert!(laplace_beltrami(&linear, &chart).unwrap().data().iter().all(|v| v.abs() < 1e-11));
    let square = Field::from_fn(chart.grid(), |q: &[f64]| q[0] * q[0]);
    assert!(laplace_beltrami(&square, &chart).unwrap().data().iter().all(|v| (v - 2.0).abs() < 1e-10));

    let r = 1.4;
    let chart = sphere_chart(r, 201);
    let f = Field::from_fn(chart.grid(), |q: &[f64]| q[0].cos());
    let lap = laplace_beltrami(&f, &chart).unwrap();
    for p in 0..chart.grid().len() {
        let expect = -2.0 / (r * r) * chart.grid().coord(p, 0).cos();
        assert!((lap.data()[p] - expect).abs() < 1e-6, "{} vs {expect}", lap.data()[p]);
    }
}

#[test]
fn weyl_curvature_ignores_density_scale() {
    let chart = MetricChart::euclidean_embedded(vec![Axis::uniform("x", -4.0, 4.0, 81, false)], 3).unwrap();
    let rho = Field::from_fn(chart.grid(), |q: &[f64]| (-(q[0] * q[0]) / 2.0).exp() * (1.2 + q[0].sin()));
    let base = weyl_curvature(&rho, &chart).unwrap();
    let scaled = weyl_curvature(&rho.map(|r| 4.0 * r), &chart).unwrap();
    assert_eq!(base.data(), scaled.data());
    let scaled = weyl_curvature(&rho.map(|r| 3.7 * r), &chart).unwrap();
    let top = base.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in base.data().iter().zip(scaled.data()) {
        assert!((a - b).abs() <= 1e-12 * top);
    }
}

/// Sixth-order central differences written out directly.
fn d1(f: &[f64], i: usize, h: f64) -> f64 {
    (-f[i - 3] + 9.0 * f[i - 2] - 45.0 * f[i - 1] + 45.0 * f[i + 1] - 9.0 * f[i + 2] + f[i + 3]) / (60.0 * h)
}

fn d2(f: &[f64], i: usize, h: f64) -> f64 {
    (2.0 * f[i - 3] - 27.0 * f[i - 2] + 270.0 * f[i - 1] - 490.0 * f[i] + 270.0 * f[i + 1] - 27.0 * f[i + 2]
        + 2.0 * f[i + 3])
        / (180.0 * h * h)
}

#[test]
fn weyl_fields_match_a_separate_stencil_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 161;
    let chart = MetricChart::euclidean(vec![
        Axis::uniform("x", -3.0, 3.0, n, false),
        Axis::uniform("y", -3.0, 3.0, n, false),
        Axis::homogeneous("z"),
    ])
    .unwrap();
    let h = chart.grid().axis(0).spacing;
    for _ in 0..20 {
        let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let w = rng.gen_range(0.5..1.5);
        let rho = Field::from_fn(chart.grid(), |q: &[f64]| {
            let (x, y) = (q[0], q[1]);
            (-(x * x + y * y) / (2.0 * w) + c[0] * x + c[1] * y + c[2] * (c[3] * x + y).sin() + c[4] * (x * y * c[5])).exp()
        });
        let rw = weyl_curvature(&rho, &chart).unwrap();
        let phi = weyl_vector(&rho, &chart).unwrap();
        let r = rho.data();
        let at = |i: usize, j: usize| i * n + j;
        let mut worst_rw = 0.0f64;
        let mut worst_phi = 0.0f64;
        let mut scale_rw = 0.0f64;
        let mut scale_phi = 0.0f64;
        for i in 3..n - 3 {
            for j in 3..n - 3 {
                let row: Vec<f64> = (0..n).map(|k| r[at(i, k)]).collect();
                let col: Vec<f64> = (0..n).map(|k| r[at(k, j)]).collect();
                let (rx, ry) = (d1(&col, i, h), d1(&row, j, h));
                let lap = d2(&col, i, h) + d2(&row, j, h);
                let rho0 = r[at(i, j)];
                // n = 3: R_W = 2 (|∇ρ|²/ρ² − 2Δρ/ρ), φ = −∇ρ/ρ.
                let oracle = 2.0 * ((rx * rx + ry * ry) / (rho0 * rho0) - 2.0 * lap / rho0);
                worst_rw = worst_rw.max((rw.data()[at(i, j)] - oracle).abs());
                scale_rw = scale_rw.max(oracle.abs());
                let (px, py) = (-rx / rho0, -ry / rho0);
                worst_phi = worst_phi
                    .max((phi.components[0].data()[at(i, j)] - px).abs())
                    .max((phi.components[1].data()[at(i, j)] - py).abs());
                scale_phi = scale_phi.max(px.abs()).max(py.abs());
            }
        }
        assert!(worst_rw / scale_rw < 1e-6, "R_W relative error {}", worst_rw / scale_rw);
        assert!(worst_phi / scale_phi < 1e-6, "φ relative error {}", worst_phi / scale_phi);
    }
}

#[test]
fn weyl_curvature_converges_at_fourth_order() {
    // ρ = e^{−x²/2}: u'' = −1, u' = −x, so R_W = −2(x² − 2) in n = 3.
    let error = |count: usize| {
        let chart = MetricChart::euclidean_embedded(vec![Axis::uniform("x", -3.0, 3.0, count, false)], 3).unwrap();
        let rho = Field::from_fn(chart.grid(), |q: &[f64]| (-(q[0] * q[0]) / 2.0).exp() * (1.0 + 0.3 * q[0].sin()));
        let rw = weyl_curvature(&rho, &chart).unwrap();
        (0..chart.grid().len())
            .map(|p| {
                let x = chart.grid().coord(p, 0);
                let s = 1.0 + 0.3 * x.sin();
                let du = -x + 0.3 * x.cos() / s;
                let ddu = -1.0 - 0.3 * x.sin() / s - (0.3 * x.cos() / s).powi(2);
                (rw.data()[p] + 2.0 * (du * du + 2.0 * ddu)).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let (coarse, fine) = (error(61), error(121));
    let order = (coarse / fine).log2();
    assert!(order > 3.5, "observed order {order} ({coarse:e} → {fine:e})");
}
