//! Metric charts and the differential-geometric kernel.
//!
//! The Weyl connection here is integrable with potential `ρ`, so its vector
//! is `φ_i = -∂_i ln ρ / (n-2)` and the Weyl scalar curvature reduces to
//!
//! ```text
//! R_W = R_g + (n-1)/(n-2) · [ g^{ij} ∂_iρ ∂_jρ / ρ² − (2/ρ) Δ_g ρ ]
//! ```
//!
//! where `Δ_g f = (1/√g) ∂_i(√g g^{ij} ∂_j f)` is the Laplace–Beltrami
//! operator. With `u = ln ρ` the bracket equals `−|∇u|²_g − 2 Δ_g u`, which is
//! the form evaluated: it never divides by `ρ`, is exact for Gaussian
//! densities (quadratic `u`) and is unchanged by `ρ → cρ`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::grid::{derivative, derivative_at, mixed_at, Axis, Edge, Field, FieldValue, Grid, Order, ScalarField};
use crate::linalg::{is_symmetric, spd_inverse};
use crate::scalar::{count, lit, Real};

/// Callback filling the row-major `n×n` metric at the given coordinates.
pub type MetricFn<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

#[derive(Clone)]
pub enum Metric<T> {
    /// Same `g_ij` everywhere.
    Constant(Vec<T>),
    Analytic(MetricFn<T>),
    /// `n×n` block per grid point, row-major over the grid.
    Sampled(Vec<T>),
}

#[derive(Clone, Debug)]
struct Pointwise<T> {
    sqrt_g: Vec<T>,
    inverse: Vec<T>,
}

/// A coordinate chart: grid plus metric tensor.
#[derive(Clone)]
pub struct MetricChart<T> {
    grid: Grid<T>,
    metric: Metric<T>,
    pointwise: OnceLock<Pointwise<T>>,
    scalar_curvature: OnceLock<Vec<T>>,
}

impl<T: Real> fmt::Debug for MetricChart<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.metric {
            Metric::Constant(_) => "constant",
            Metric::Analytic(_) => "analytic",
            Metric::Sampled(_) => "sampled",
        };
        f.debug_struct("MetricChart")
            .field("axes", &self.grid.axes())
            .field("metric", &kind)
            .finish()
    }
}

impl<T: Real> MetricChart<T> {
    pub fn euclidean(axes: Vec<Axis<T>>) -> Result<Self> {
        let n = axes.len();
        let mut g = vec![T::zero(); n * n];
        for i in 0..n {
            g[i * n + i] = T::one();
        }
        Self::new(axes, Metric::Constant(g))
    }

    /// Euclidean chart on `axes` padded with homogeneous axes up to
    /// dimension `n`, so a lower-dimensional problem sees `n`-dimensional
    /// Weyl couplings.
    pub fn euclidean_embedded(mut axes: Vec<Axis<T>>, n: usize) -> Result<Self> {
        let names = ["pad_u", "pad_v", "pad_w", "pad_x", "pad_y"];
        let mut k = 0;
        while axes.len() < n {
            axes.push(Axis::homogeneous(names.get(k).copied().unwrap_or("pad")));
            k += 1;
        }
        Self::euclidean(axes)
    }

    pub fn constant(axes: Vec<Axis<T>>, g: Vec<T>) -> Result<Self> {
        Self::new(axes, Metric::Constant(g))
    }

    pub fn analytic(axes: Vec<Axis<T>>, f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Result<Self> {
        Self::new(axes, Metric::Analytic(Arc::new(f)))
    }

    pub fn sampled(axes: Vec<Axis<T>>, data: Vec<T>) -> Result<Self> {
        Self::new(axes, Metric::Sampled(data))
    }

    /// Chart from whichever metric sources are available; the analytic one
    /// takes precedence.
    pub fn from_sources(axes: Vec<Axis<T>>, analytic: Option<MetricFn<T>>, sampled: Option<Vec<T>>) -> Result<Self> {
        match (analytic, sampled) {
            (Some(f), _) => Self::new(axes, Metric::Analytic(f)),
            (None, Some(s)) => Self::new(axes, Metric::Sampled(s)),
            (None, None) => Err(Error::Grid("no metric source given".into())),
        }
    }

    /// Flat coordinates on every axis except a round 2-sphere of `radius`
    /// spanned by the polar axis `theta` and azimuthal axis `phi`.
    pub fn with_sphere(axes: Vec<Axis<T>>, radius: T, theta: usize, phi: usize) -> Result<Self> {
        let n = axes.len();
        if theta >= n || phi >= n || theta == phi {
            return Err(Error::Dimension {
                found: n,
                reason: "sphere axes out of range".into(),
            });
        }
        Self::analytic(axes, move |q, g| {
            for v in g.iter_mut() {
                *v = T::zero();
            }
            for i in 0..n {
                g[i * n + i] = T::one();
            }
            let r2 = radius * radius;
            let s = q[theta].sin();
            g[theta * n + theta] = r2;
            g[phi * n + phi] = r2 * s * s;
        })
    }

    /// Plane in polar coordinates `(r, φ)` on axes `radial`, `angle`; other
    /// axes flat.
    pub fn with_polar(axes: Vec<Axis<T>>, radial: usize, angle: usize) -> Result<Self> {
        let n = axes.len();
        Self::analytic(axes, move |q, g| {
            for v in g.iter_mut() {
                *v = T::zero();
            }
            for i in 0..n {
                g[i * n + i] = T::one();
            }
            g[angle * n + angle] = q[radial] * q[radial];
        })
    }

    pub fn new(axes: Vec<Axis<T>>, metric: Metric<T>) -> Result<Self> {
        let grid = Grid::new(axes)?;
        let n = grid.dim();
        match &metric {
            Metric::Constant(g) if g.len() != n * n => {
                return Err(Error::Shape {
                    expected: vec![n, n],
                    found: vec![g.len()],
                })
            }
            Metric::Sampled(g) if g.len() != n * n * grid.len() => {
                return Err(Error::Shape {
                    expected: vec![grid.len(), n, n],
                    found: vec![g.len()],
                })
            }
            _ => {}
        }
        let chart = MetricChart {
            grid,
            metric,
            pointwise: OnceLock::new(),
            scalar_curvature: OnceLock::new(),
        };
        chart.validate()?;
        Ok(chart)
    }

    /// Checks symmetry and positive definiteness at every grid point.
    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let points = if self.is_constant() { 1 } else { self.grid.len() };
        let mut g = vec![T::zero(); n * n];
        let mut sqrt_g = Vec::with_capacity(points);
        let mut inverse = Vec::with_capacity(points * n * n);
        for p in 0..points {
            self.metric_into(p, &mut g);
            if !is_symmetric(&g, n) {
                return Err(Error::Definiteness { point: p });
            }
            let (inv, sd) = spd_inverse(&g, n).ok_or(Error::Definiteness { point: p })?;
            sqrt_g.push(sd);
            inverse.extend(inv);
        }
        let _ = self.pointwise.set(Pointwise { sqrt_g, inverse });
        Ok(())
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn metric(&self) -> &Metric<T> {
        &self.metric
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.metric, Metric::Constant(_))
    }

    /// `g_ij` at a grid point, row-major.
    pub fn metric_at(&self, flat: usize) -> Vec<T> {
        let n = self.dim();
        let mut g = vec![T::zero(); n * n];
        self.metric_into(flat, &mut g);
        g
    }

    fn metric_into(&self, flat: usize, out: &mut [T]) {
        let n = self.dim();
        match &self.metric {
            Metric::Constant(g) => out.copy_from_slice(g),
            Metric::Analytic(f) => f(&self.grid.coords(flat), out),
            Metric::Sampled(g) => out.copy_from_slice(&g[flat * n * n..(flat + 1) * n * n]),
        }
    }

    fn pointwise(&self) -> &Pointwise<T> {
        self.pointwise.get().expect("validated at construction")
    }

    /// `g^{ij}` at a grid point.
    pub fn inverse_at(&self, flat: usize) -> &[T] {
        let n = self.dim();
        let p = if self.is_constant() { 0 } else { flat };
        &self.pointwise().inverse[p * n * n..(p + 1) * n * n]
    }

    /// `√det g` at a grid point.
    pub fn sqrt_g(&self, flat: usize) -> T {
        let p = if self.is_constant() { 0 } else { flat };
        self.pointwise().sqrt_g[p]
    }

    /// Quadrature weights for the Riemannian measure `√g dⁿq`.
    pub fn volume_weights(&self) -> Vec<T> {
        let mut w = self.grid.quadrature_weights();
        for (p, w) in w.iter_mut().enumerate() {
            *w = *w * self.sqrt_g(p);
        }
        w
    }

    /// Metric with first and second coordinate derivatives at a point.
    pub fn jet(&self, flat: usize) -> Result<MetricJet<T>> {
        let n = self.dim();
        let g = self.metric_at(flat);
        let inv = self.inverse_at(flat).to_vec();
        let mut dg = vec![T::zero(); n * n * n];
        let mut ddg = vec![T::zero(); n * n * n * n];
        match &self.metric {
            Metric::Constant(_) => {}
            Metric::Analytic(f) => analytic_jet(f, &self.grid.coords(flat), n, &mut dg, &mut ddg),
            Metric::Sampled(data) => {
                for i in 0..n {
                    for j in 0..n {
                        let comp = |p: usize| data[p * n * n + i * n + j];
                        for a in 0..n {
                            dg[(a * n + i) * n + j] = derivative_at(&self.grid, flat, a, Order::First, comp)?;
                            for b in 0..n {
                                let v = if a == b {
                                    derivative_at(&self.grid, flat, a, Order::Second, comp)?
                                } else {
                                    mixed_at(&self.grid, flat, a, b, comp)?
                                };
                                ddg[((a * n + b) * n + i) * n + j] = v;
                            }
                        }
                    }
                }
            }
        }
        Ok(MetricJet { n, g, inv, dg, ddg })
    }
}

fn analytic_jet<T: Real>(f: &MetricFn<T>, q: &[T], n: usize, dg: &mut [T], ddg: &mut [T]) {
    // Fourth-order central differences; step balances truncation (δ⁴)
    // against cancellation (ε/δ²) for the second derivatives.
    let base = T::epsilon().powf(lit(1.0 / 6.0));
    let steps: Vec<T> = q.iter().map(|x| base * x.abs().max(T::one())).collect();
    let nn = n * n;
    let eval = |shift: &[(usize, T)]| {
        let mut x = q.to_vec();
        for &(k, d) in shift {
            x[k] = x[k] + d;
        }
        let mut g = vec![T::zero(); nn];
        f(&x, &mut g);
        g
    };
    let c1 = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let c2 = [(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)];
    let twelve = lit::<T>(12.0);
    for a in 0..n {
        let h = steps[a];
        let mut d1 = vec![T::zero(); nn];
        for &(o, w) in &c1 {
            let g = eval(&[(a, h * lit(o))]);
            for m in 0..nn {
                d1[m] = d1[m] + g[m] * lit(w);
            }
        }
        for m in 0..nn {
            dg[a * nn + m] = d1[m] / (twelve * h);
        }
        let mut d2 = vec![T::zero(); nn];
        for &(o, w) in &c2 {
            let g = eval(&[(a, h * lit(o))]);
            for m in 0..nn {
                d2[m] = d2[m] + g[m] * lit(w);
            }
        }
        for m in 0..nn {
            ddg[(a * n + a) * nn + m] = d2[m] / (twelve * h * h);
        }
        for b in 0..a {
            let hb = steps[b];
            let mut mixed = vec![T::zero(); nn];
            for &(oa, wa) in &c1 {
                for &(ob, wb) in &c1 {
                    let g = eval(&[(a, h * lit(oa)), (b, hb * lit(ob))]);
                    for m in 0..nn {
                        mixed[m] = mixed[m] + g[m] * lit(wa * wb);
                    }
                }
            }
            for m in 0..nn {
                let v = mixed[m] / (twelve * twelve * h * hb);
                ddg[(a * n + b) * nn + m] = v;
                ddg[(b * n + a) * nn + m] = v;
            }
        }
    }
}

/// Metric, inverse metric, `∂_k g_ij` (`dg[(k n + i) n + j]`) and
/// `∂_k ∂_l g_ij` at one point.
#[derive(Clone, Debug)]
pub struct MetricJet<T> {
    pub n: usize,
    pub g: Vec<T>,
    pub inv: Vec<T>,
    pub dg: Vec<T>,
    pub ddg: Vec<T>,
}

impl<T: Real> MetricJet<T> {
    fn dg(&self, k: usize, i: usize, j: usize) -> T {
        self.dg[(k * self.n + i) * self.n + j]
    }

    fn ddg(&self, k: usize, l: usize, i: usize, j: usize) -> T {
        let n = self.n;
        self.ddg[((k * n + l) * n + i) * n + j]
    }

    pub fn christoffel(&self) -> Christoffel<T> {
        let n = self.n;
        let half = lit::<T>(0.5);
        let mut data = vec![T::zero(); n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..=i {
                    let mut s = T::zero();
                    for l in 0..n {
                        s = s + self.inv[k * n + l] * (self.dg(i, l, j) + self.dg(j, l, i) - self.dg(l, i, j));
                    }
                    data[(k * n + i) * n + j] = half * s;
                    data[(k * n + j) * n + i] = half * s;
                }
            }
        }
        Christoffel { n, data }
    }

    /// `∂_m Γ^k_ij`, laid out `[m][k][i][j]`.
    fn christoffel_derivative(&self) -> Vec<T> {
        let n = self.n;
        let half = lit::<T>(0.5);
        // ∂_m g^{kl} = −g^{ka} ∂_m g_ab g^{bl}
        let mut dinv = vec![T::zero(); n * n * n];
        for m in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = T::zero();
                    for a in 0..n {
                        for b in 0..n {
                            s = s + self.inv[k * n + a] * self.dg(m, a, b) * self.inv[b * n + l];
                        }
                    }
                    dinv[(m * n + k) * n + l] = -s;
                }
            }
        }
        let mut out = vec![T::zero(); n * n * n * n];
        for m in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = T::zero();
                        for l in 0..n {
                            let first = self.dg(i, l, j) + self.dg(j, l, i) - self.dg(l, i, j);
                            let second = self.ddg(m, i, l, j) + self.ddg(m, j, l, i) - self.ddg(m, l, i, j);
                            s = s + dinv[(m * n + k) * n + l] * first + self.inv[k * n + l] * second;
                        }
                        out[((m * n + k) * n + i) * n + j] = half * s;
                    }
                }
            }
        }
        out
    }

    /// Scalar curvature `R = g^{ij} R_ij` (positive on spheres).
    pub fn scalar_curvature(&self) -> T {
        let n = self.n;
        let gamma = self.christoffel();
        let dgamma = self.christoffel_derivative();
        let dg = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];
        let mut r = T::zero();
        for s in 0..n {
            for v in 0..n {
                let ginv = self.inv[s * n + v];
                if ginv == T::zero() {
                    continue;
                }
                // R_sv = ∂_m Γ^m_vs − ∂_v Γ^m_ms + Γ^m_ml Γ^l_vs − Γ^m_vl Γ^l_ms
                let mut ric = T::zero();
                for m in 0..n {
                    ric = ric + dg(m, m, v, s) - dg(v, m, m, s);
                    for l in 0..n {
                        ric = ric + gamma.get(m, m, l) * gamma.get(l, v, s) - gamma.get(m, v, l) * gamma.get(l, m, s);
                    }
                }
                r = r + ginv * ric;
            }
        }
        r
    }
}

/// `Γ^k_ij`, symmetric in the lower pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Christoffel<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> T {
        self.data[(k * self.n + i) * self.n + j]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

/// Christoffel symbols of the second kind at a grid point.
pub fn christoffel<T: Real>(chart: &MetricChart<T>, point: &[usize]) -> Result<Christoffel<T>> {
    let flat = chart.grid().ravel(point).ok_or_else(|| Error::OutOfChart {
        index: point.to_vec(),
    })?;
    Ok(chart.jet(flat)?.christoffel())
}

/// Scalar curvature of the metric at every grid point.
pub fn riemann_scalar<T: Real>(chart: &MetricChart<T>) -> Result<ScalarField<T>> {
    let grid = chart.grid();
    if let Some(r) = chart.scalar_curvature.get() {
        return Field::new(grid.shape().to_vec(), r.clone());
    }
    let data = if chart.is_constant() {
        vec![T::zero(); grid.len()]
    } else {
        (0..grid.len())
            .map(|p| chart.jet(p).map(|j| j.scalar_curvature()))
            .collect::<Result<Vec<T>>>()?
    };
    let _ = chart.scalar_curvature.set(data.clone());
    Field::new(grid.shape().to_vec(), data)
}

/// Components `∂_i f`; `jumps[i]` is the per-period offset on periodic axes.
pub(crate) fn gradient<T: Real, V: FieldValue<T>>(
    chart: &MetricChart<T>,
    data: &[V],
    jumps: &[T],
    edge: Edge,
) -> Result<Vec<Vec<V>>> {
    (0..chart.dim())
        .map(|k| derivative(chart.grid(), data, k, Order::First, edge, jumps[k]))
        .collect()
}

/// `g^{ij} a_i b_j` pointwise.
pub(crate) fn contract<T: Real>(chart: &MetricChart<T>, a: &[Vec<T>], b: &[Vec<T>]) -> Vec<T> {
    let n = chart.dim();
    (0..chart.grid().len())
        .map(|p| {
            let inv = chart.inverse_at(p);
            let mut s = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let gij = inv[i * n + j];
                    if gij != T::zero() {
                        s = s + gij * a[i][p] * b[j][p];
                    }
                }
            }
            s
        })
        .collect()
}

/// `(1/√g) ∂_i(√g g^{ij} w_j)` for a covector field `w`.
pub(crate) fn divergence<T: Real, V: FieldValue<T>>(chart: &MetricChart<T>, w: &[Vec<V>], edge: Edge) -> Result<Vec<V>> {
    let n = chart.dim();
    let len = chart.grid().len();
    let mut out = vec![V::zero(); len];
    for i in 0..n {
        let flux: Vec<V> = (0..len)
            .map(|p| {
                let inv = chart.inverse_at(p);
                let mut s = V::zero();
                for j in 0..n {
                    let gij = inv[i * n + j];
                    if gij != T::zero() {
                        s = s + w[j][p] * gij;
                    }
                }
                s * chart.sqrt_g(p)
            })
            .collect();
        let d = derivative(chart.grid(), &flux, i, Order::First, edge, T::zero())?;
        for p in 0..len {
            out[p] = out[p] + d[p];
        }
    }
    for (p, v) in out.iter_mut().enumerate() {
        *v = *v * (T::one() / chart.sqrt_g(p));
    }
    Ok(out)
}

/// Laplace–Beltrami operator on raw samples. Constant metrics use direct
/// second-derivative stencils (no odd-even decoupling); otherwise the flux
/// form is differentiated.
pub(crate) fn laplace_beltrami_raw<T: Real, V: FieldValue<T>>(
    chart: &MetricChart<T>,
    data: &[V],
    jumps: &[T],
    edge: Edge,
) -> Result<Vec<V>> {
    let n = chart.dim();
    let grid = chart.grid();
    if chart.is_constant() {
        let inv = chart.inverse_at(0).to_vec();
        let mut out = vec![V::zero(); data.len()];
        for i in 0..n {
            let gii = inv[i * n + i];
            if gii != T::zero() && !grid.axis(i).is_homogeneous() {
                let d2 = derivative(grid, data, i, Order::Second, edge, jumps[i])?;
                for (o, d) in out.iter_mut().zip(d2) {
                    *o = *o + d * gii;
                }
            }
            for j in 0..i {
                let gij = inv[i * n + j];
                if gij == T::zero() {
                    continue;
                }
                let di = derivative(grid, data, i, Order::First, edge, jumps[i])?;
                let dij = derivative(grid, &di, j, Order::First, edge, T::zero())?;
                let two = gij + gij;
                for (o, d) in out.iter_mut().zip(dij) {
                    *o = *o + d * two;
                }
            }
        }
        return Ok(out);
    }
    let grad = gradient(chart, data, jumps, edge)?;
    divergence(chart, &grad, edge)
}

/// `(1/√g) ∂_i(√g g^{ij} ∂_j f)`.
pub fn laplace_beltrami<T: Real>(f: &ScalarField<T>, chart: &MetricChart<T>) -> Result<ScalarField<T>> {
    chart.grid().check_shape(f.shape())?;
    let zeros = vec![T::zero(); chart.dim()];
    let out = laplace_beltrami_raw(chart, f.data(), &zeros, Edge::OneSided)?;
    Ok(f.with_data(out))
}

/// Relative density floor: points with `ρ < floor · max ρ` are masked out of
/// Weyl evaluations and filled from the nearest unmasked point.
pub const DEFAULT_RHO_FLOOR: f64 = 1e-12;

/// `φ_i` sampled on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylVector<T> {
    pub components: Vec<ScalarField<T>>,
}

struct LogDensity<T> {
    log: Vec<T>,
    masked: Vec<bool>,
}

fn log_density<T: Real>(rho: &ScalarField<T>, chart: &MetricChart<T>, floor: T) -> Result<LogDensity<T>> {
    chart.grid().check_shape(rho.shape())?;
    let n = chart.dim();
    if n <= 2 {
        return Err(Error::Dimension {
            found: n,
            reason: "Weyl quantities need n > 2".into(),
        });
    }
    let mut max = T::zero();
    for (p, &r) in rho.data().iter().enumerate() {
        if !r.is_finite() || r < T::zero() {
            return Err(Error::Domain {
                what: format!("density {r} is negative or not finite"),
                point: p,
            });
        }
        if r == T::zero() && floor == T::zero() {
            return Err(Error::Domain {
                what: "density vanishes with the floor disabled".into(),
                point: p,
            });
        }
        max = max.max(r);
    }
    if max == T::zero() {
        return Err(Error::Domain {
            what: "density vanishes identically".into(),
            point: 0,
        });
    }
    let cut = floor * max;
    let masked: Vec<bool> = rho.data().iter().map(|&r| r < cut || r == T::zero()).collect();
    // Normalizing by the maximum keeps ρ → cρ bitwise invariant for
    // power-of-two c.
    let log = rho
        .data()
        .iter()
        .map(|&r| (r.max(cut) / max).ln())
        .collect();
    Ok(LogDensity { log, masked })
}

/// Replaces masked entries by the value at the nearest unmasked point
/// (breadth-first over grid neighbours, axis order breaks ties).
fn fill_masked<T: Real>(grid: &Grid<T>, values: &mut [T], masked: &[bool]) {
    if !masked.iter().any(|&m| m) {
        return;
    }
    let mut source: Vec<Option<usize>> = masked.iter().enumerate().map(|(p, &m)| (!m).then_some(p)).collect();
    let mut queue: VecDeque<usize> = (0..values.len()).filter(|&p| !masked[p]).collect();
    while let Some(p) = queue.pop_front() {
        for axis in 0..grid.dim() {
            for delta in [-1, 1] {
                if let Some((q, _)) = grid.step(p, axis, delta) {
                    if source[q].is_none() {
                        source[q] = source[p];
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    for p in 0..values.len() {
        if masked[p] {
            if let Some(s) = source[p] {
                values[p] = values[s];
            }
        }
    }
}

pub fn weyl_vector<T: Real>(rho: &ScalarField<T>, chart: &MetricChart<T>) -> Result<WeylVector<T>> {
    weyl_vector_with_floor(rho, chart, lit(DEFAULT_RHO_FLOOR))
}

/// `φ_i = -∂_i ln ρ / (n-2)`.
pub fn weyl_vector_with_floor<T: Real>(rho: &ScalarField<T>, chart: &MetricChart<T>, floor: T) -> Result<WeylVector<T>> {
    let ld = log_density(rho, chart, floor)?;
    let scale = -T::one() / count::<T>(chart.dim() - 2);
    let zeros = vec![T::zero(); chart.dim()];
    let grad = gradient(chart, &ld.log, &zeros, Edge::OneSided)?;
    let components = grad
        .into_iter()
        .map(|mut g| {
            for v in g.iter_mut() {
                *v = *v * scale;
            }
            fill_masked(chart.grid(), &mut g, &ld.masked);
            rho.with_data(g)
        })
        .collect();
    Ok(WeylVector { components })
}

pub fn weyl_curvature<T: Real>(rho: &ScalarField<T>, chart: &MetricChart<T>) -> Result<ScalarField<T>> {
    weyl_curvature_with_floor(rho, chart, lit(DEFAULT_RHO_FLOOR))
}

pub fn weyl_curvature_with_floor<T: Real>(
    rho: &ScalarField<T>,
    chart: &MetricChart<T>,
    floor: T,
) -> Result<ScalarField<T>> {
    let ld = log_density(rho, chart, floor)?;
    let mut rw = weyl_curvature_from_log(&ld.log, chart, Edge::OneSided)?;
    fill_masked(chart.grid(), &mut rw, &ld.masked);
    Ok(rho.with_data(rw))
}

/// `R_W` from samples of `u = ln ρ` (any additive constant).
pub fn weyl_curvature_from_log<T: Real>(log_rho: &[T], chart: &MetricChart<T>, edge: Edge) -> Result<Vec<T>> {
    let n = chart.dim();
    if n <= 2 {
        return Err(Error::Dimension {
            found: n,
            reason: "Weyl quantities need n > 2".into(),
        });
    }
    let zeros = vec![T::zero(); n];
    let grad = gradient(chart, log_rho, &zeros, edge)?;
    weyl_curvature_from_parts(chart, log_rho, &grad, edge)
}

pub(crate) fn weyl_curvature_from_parts<T: Real>(
    chart: &MetricChart<T>,
    log_rho: &[T],
    grad: &[Vec<T>],
    edge: Edge,
) -> Result<Vec<T>> {
    let n = chart.dim();
    let zeros = vec![T::zero(); n];
    let coupling = count::<T>(n - 1) / count::<T>(n - 2);
    let rg = riemann_scalar(chart)?;
    let norm = contract(chart, grad, grad);
    let lap = laplace_beltrami_raw(chart, log_rho, &zeros, edge)?;
    let two = lit::<T>(2.0);
    Ok((0..log_rho.len())
        .map(|p| rg.data()[p] - coupling * (norm[p] + two * lap[p]))
        .collect())
}
