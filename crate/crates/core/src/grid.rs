//! Uniform tensor-product grids, sampled fields and fourth-order stencils.
//!
//! Fields are stored row-major (axis 0 slowest). Periodic axes exclude the
//! right endpoint, so an axis of `count` points with spacing `h` has period
//! `count * h`. A periodic axis with a single point is a homogeneous
//! direction: every derivative along it vanishes, which is how
//! lower-dimensional problems are embedded in a higher-dimensional chart.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, from_i64, lit, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis<T> {
    pub name: String,
    pub min: T,
    pub spacing: T,
    pub count: usize,
    pub periodic: bool,
}

impl<T: Real> Axis<T> {
    /// `count` points covering `[min, max]` (non-periodic) or `[min, max)`
    /// (periodic).
    pub fn uniform(name: impl Into<String>, min: T, max: T, count: usize, periodic: bool) -> Self {
        let intervals = if periodic { count } else { count.saturating_sub(1).max(1) };
        Axis {
            name: name.into(),
            min,
            spacing: (max - min) / crate::scalar::count(intervals),
            count,
            periodic,
        }
    }

    /// A single-point periodic axis along which every field is constant.
    pub fn homogeneous(name: impl Into<String>) -> Self {
        Axis {
            name: name.into(),
            min: T::zero(),
            spacing: T::one(),
            count: 1,
            periodic: true,
        }
    }

    pub fn coord(&self, i: usize) -> T {
        self.min + self.spacing * count::<T>(i)
    }

    /// Period of a periodic axis, or the covered interval of an open one.
    pub fn length(&self) -> T {
        if self.periodic {
            self.spacing * count::<T>(self.count)
        } else {
            self.spacing * count::<T>(self.count.saturating_sub(1))
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.periodic && self.count == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    axes: Vec<Axis<T>>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl<T: Real> Grid<T> {
    pub fn new(axes: Vec<Axis<T>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Grid("grid needs at least one axis".into()));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.count == 0 {
                return Err(Error::Grid(format!("axis {k} ({}) has no points", a.name)));
            }
            if !(a.spacing > T::zero()) || !a.spacing.is_finite() || !a.min.is_finite() {
                return Err(Error::Grid(format!(
                    "axis {k} ({}) needs a positive finite spacing",
                    a.name
                )));
            }
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.count).collect();
        let mut strides = vec![1; shape.len()];
        for k in (0..shape.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let len = shape.iter().product();
        Ok(Grid {
            axes,
            shape,
            strides,
            len,
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis<T> {
        &self.axes[k]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn ravel(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.dim() {
            return None;
        }
        let mut flat = 0;
        for ((&i, &n), &s) in index.iter().zip(&self.shape).zip(&self.strides) {
            if i >= n {
                return None;
            }
            flat += i * s;
        }
        Some(flat)
    }

    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        self.shape
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| (flat / s) % n)
            .collect()
    }

    pub fn index_along(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.shape[axis]
    }

    pub fn coord(&self, flat: usize, axis: usize) -> T {
        self.axes[axis].coord(self.index_along(flat, axis))
    }

    pub fn coords(&self, flat: usize) -> Vec<T> {
        (0..self.dim()).map(|k| self.coord(flat, k)).collect()
    }

    /// Moves `delta` points along `axis`. Returns the target and the number
    /// of periods wrapped, or `None` when leaving an open axis.
    pub fn step(&self, flat: usize, axis: usize, delta: i64) -> Option<(usize, i64)> {
        let n = self.shape[axis] as i64;
        let i = self.index_along(flat, axis) as i64;
        let k = i + delta;
        let (j, wraps) = if self.axes[axis].periodic {
            (k.rem_euclid(n), k.div_euclid(n))
        } else if (0..n).contains(&k) {
            (k, 0)
        } else {
            return None;
        };
        let base = flat - (i as usize) * self.strides[axis];
        Some((base + j as usize * self.strides[axis], wraps))
    }

    /// Product trapezoid weights; periodic axes carry the uniform weight.
    pub fn quadrature_weights(&self) -> Vec<T> {
        let half = lit::<T>(0.5);
        let per_axis: Vec<Vec<T>> = self
            .axes
            .iter()
            .map(|a| {
                (0..a.count)
                    .map(|i| {
                        if !a.periodic && a.count > 1 && (i == 0 || i + 1 == a.count) {
                            a.spacing * half
                        } else {
                            a.spacing
                        }
                    })
                    .collect()
            })
            .collect();
        (0..self.len)
            .map(|flat| {
                per_axis
                    .iter()
                    .enumerate()
                    .fold(T::one(), |w, (k, ws)| w * ws[self.index_along(flat, k)])
            })
            .collect()
    }

    /// Smallest spacing among axes that actually resolve something.
    pub fn min_spacing(&self) -> T {
        self.axes
            .iter()
            .filter(|a| !a.is_homogeneous())
            .map(|a| a.spacing)
            .fold(T::infinity(), T::min)
    }

    pub fn check_shape(&self, shape: &[usize]) -> Result<()> {
        if shape != self.shape.as_slice() {
            return Err(Error::Shape {
                expected: self.shape.clone(),
                found: shape.to_vec(),
            });
        }
        Ok(())
    }
}

/// A sampled field over a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<V> {
    shape: Vec<usize>,
    data: Vec<V>,
}

pub type ScalarField<T> = Field<T>;
pub type ComplexField<T> = Field<Complex<T>>;

impl<V: Copy> Field<V> {
    pub fn new(shape: Vec<usize>, data: Vec<V>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape {
                expected: shape,
                found: vec![data.len()],
            });
        }
        Ok(Field { shape, data })
    }

    pub fn filled<T: Real>(grid: &Grid<T>, value: V) -> Self {
        Field {
            shape: grid.shape().to_vec(),
            data: vec![value; grid.len()],
        }
    }

    pub fn from_fn<T: Real>(grid: &Grid<T>, mut f: impl FnMut(&[T]) -> V) -> Self {
        let data = (0..grid.len()).map(|p| f(&grid.coords(p))).collect();
        Field {
            shape: grid.shape().to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[V] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<V> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<W: Copy>(&self, f: impl FnMut(V) -> W) -> Field<W> {
        Field {
            shape: self.shape.clone(),
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    pub fn zip_map<U: Copy, W: Copy>(&self, other: &Field<U>, mut f: impl FnMut(V, U) -> W) -> Field<W> {
        debug_assert_eq!(self.shape, other.shape);
        Field {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub(crate) fn with_data<W: Copy>(&self, data: Vec<W>) -> Field<W> {
        debug_assert_eq!(data.len(), self.data.len());
        Field {
            shape: self.shape.clone(),
            data,
        }
    }
}

/// Values a stencil can act on. `shift` maps a sample to its image after
/// `wraps` traversals of a periodic axis whose traversal contributes `jump`:
/// an additive offset for real fields (multi-valued action), a phase twist in
/// radians for complex fields.
pub trait FieldValue<T>:
    Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self> + Send + Sync
{
    fn shift(self, jump: T, wraps: i64) -> Self;
}

impl<T: Real> FieldValue<T> for T {
    #[inline]
    fn shift(self, jump: T, wraps: i64) -> Self {
        if wraps == 0 {
            self
        } else {
            self + jump * from_i64::<T>(wraps)
        }
    }
}

impl<T: Real> FieldValue<T> for Complex<T> {
    #[inline]
    fn shift(self, jump: T, wraps: i64) -> Self {
        if wraps == 0 || jump == T::zero() {
            self
        } else {
            self * Complex::from_polar(T::one(), jump * from_i64::<T>(wraps))
        }
    }
}

/// Treatment of the ends of a non-periodic axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    /// One-sided fourth-order stencils; no boundary condition imposed.
    OneSided,
    /// Homogeneous Dirichlet walls one spacing beyond each end, realized by
    /// odd reflection (a hard, reflecting wall).
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

const D1_CENTRAL: [(i64, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
const D1_EDGE0: [(i64, f64); 5] = [(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)];
const D1_EDGE1: [(i64, f64); 5] = [(-1, -3.0), (0, -10.0), (1, 18.0), (2, -6.0), (3, 1.0)];
const D2_CENTRAL: [(i64, f64); 5] = [(-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)];
const D2_EDGE0: [(i64, f64); 6] = [
    (0, 45.0),
    (1, -154.0),
    (2, 214.0),
    (3, -156.0),
    (4, 61.0),
    (5, -10.0),
];
const D2_EDGE1: [(i64, f64); 6] = [
    (-1, 10.0),
    (0, -15.0),
    (1, -4.0),
    (2, 14.0),
    (3, -6.0),
    (4, 1.0),
];

/// Tap of a stencil placed at one position of an axis: target index along the
/// axis, periods wrapped, weight (sign of odd reflections folded in).
#[derive(Clone, Copy, Debug)]
struct Tap<T> {
    index: usize,
    wraps: i64,
    weight: T,
}

fn taps_for<T: Real>(axis: &Axis<T>, k: usize, i: usize, order: Order, edge: Edge) -> Result<Vec<Tap<T>>> {
    let n = axis.count;
    let scale = match order {
        Order::First => lit::<T>(12.0) * axis.spacing,
        Order::Second => lit::<T>(12.0) * axis.spacing * axis.spacing,
    };
    let central: &[(i64, f64)] = match order {
        Order::First => &D1_CENTRAL,
        Order::Second => &D2_CENTRAL,
    };
    let mut taps = Vec::new();
    if axis.periodic {
        for &(off, w) in central {
            let k = i as i64 + off;
            taps.push(Tap {
                index: k.rem_euclid(n as i64) as usize,
                wraps: k.div_euclid(n as i64),
                weight: lit::<T>(w) / scale,
            });
        }
        return Ok(taps);
    }
    match edge {
        Edge::OneSided => {
            let needed = match order {
                Order::First => 5,
                Order::Second => 6,
            };
            if n < needed {
                return Err(Error::Stencil {
                    axis: k,
                    count: n,
                    needed,
                });
            }
            let (table, mirrored): (&[(i64, f64)], bool) = match (order, i) {
                (Order::First, 0) => (&D1_EDGE0, false),
                (Order::First, 1) => (&D1_EDGE1, false),
                (Order::First, _) if i + 1 == n => (&D1_EDGE0, true),
                (Order::First, _) if i + 2 == n => (&D1_EDGE1, true),
                (Order::Second, 0) => (&D2_EDGE0, false),
                (Order::Second, 1) => (&D2_EDGE1, false),
                (Order::Second, _) if i + 1 == n => (&D2_EDGE0, true),
                (Order::Second, _) if i + 2 == n => (&D2_EDGE1, true),
                _ => (central, false),
            };
            // Mirroring reverses offsets; odd-order weights flip sign.
            let sign = if mirrored && order == Order::First { -1.0 } else { 1.0 };
            for &(off, w) in table {
                let off = if mirrored { -off } else { off };
                taps.push(Tap {
                    index: (i as i64 + off) as usize,
                    wraps: 0,
                    weight: lit::<T>(sign * w) / scale,
                });
            }
        }
        Edge::Odd => {
            let n = n as i64;
            for &(off, w) in central {
                let k = i as i64 + off;
                let (index, s) = if k == -1 || k == n {
                    continue;
                } else if k < -1 {
                    (-2 - k, -1.0)
                } else if k > n {
                    (2 * n - k, -1.0)
                } else {
                    (k, 1.0)
                };
                if index < 0 || index >= n {
                    // Axis shorter than the reflected stencil: the mirrored
                    // point lies past the opposite wall, where the odd
                    // extension vanishes to this order.
                    continue;
                }
                taps.push(Tap {
                    index: index as usize,
                    wraps: 0,
                    weight: lit::<T>(s * w) / scale,
                });
            }
        }
    }
    Ok(taps)
}

/// Derivative of `data` along `axis`. `jump` is the per-period offset of a
/// multi-valued field on a periodic axis (ignored on open axes).
pub fn derivative<T: Real, V: FieldValue<T>>(
    grid: &Grid<T>,
    data: &[V],
    axis: usize,
    order: Order,
    edge: Edge,
    jump: T,
) -> Result<Vec<V>> {
    let ax = grid.axis(axis);
    if ax.is_homogeneous() && jump == T::zero() {
        return Ok(vec![V::zero(); data.len()]);
    }
    let table: Vec<Vec<Tap<T>>> = (0..ax.count)
        .map(|i| taps_for(ax, axis, i, order, edge))
        .collect::<Result<_>>()?;
    let stride = grid.strides()[axis];
    let n = ax.count;
    // Odd-reflected stencils carry the wall and do not sum to zero.
    let differenced = ax.periodic || edge == Edge::OneSided;
    let out = (0..data.len())
        .map(|flat| {
            let i = (flat / stride) % n;
            let base = flat - i * stride;
            // Weights sum to zero, so differencing against the centre is
            // exact on constant lines and loses less to cancellation.
            let centre = if differenced { data[flat] } else { V::zero() };
            table[i].iter().fold(V::zero(), |acc, tap| {
                acc + (data[base + tap.index * stride].shift(jump, tap.wraps) - centre) * tap.weight
            })
        })
        .collect();
    Ok(out)
}

/// Derivative at a single grid point of values supplied by `value(flat)`.
pub(crate) fn derivative_at<T: Real>(
    grid: &Grid<T>,
    flat: usize,
    axis: usize,
    order: Order,
    value: impl Fn(usize) -> T,
) -> Result<T> {
    let ax = grid.axis(axis);
    if ax.is_homogeneous() {
        return Ok(T::zero());
    }
    let i = grid.index_along(flat, axis);
    let stride = grid.strides()[axis];
    let base = flat - i * stride;
    let taps = taps_for(ax, axis, i, order, Edge::OneSided)?;
    let centre = value(flat);
    Ok(taps
        .iter()
        .fold(T::zero(), |acc, t| acc + (value(base + t.index * stride) - centre) * t.weight))
}

/// Mixed second derivative `∂_a ∂_b` at a point (`a != b`).
pub(crate) fn mixed_at<T: Real>(
    grid: &Grid<T>,
    flat: usize,
    a: usize,
    b: usize,
    value: impl Fn(usize) -> T,
) -> Result<T> {
    let ax = grid.axis(a);
    if ax.is_homogeneous() || grid.axis(b).is_homogeneous() {
        return Ok(T::zero());
    }
    let i = grid.index_along(flat, a);
    let stride = grid.strides()[a];
    let base = flat - i * stride;
    let taps = taps_for(ax, a, i, Order::First, Edge::OneSided)?;
    let mut acc = T::zero();
    for t in taps {
        acc = acc + derivative_at(grid, base + t.index * stride, b, Order::First, &value)? * t.weight;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(count: usize, periodic: bool) -> Grid<f64> {
        let max = if periodic { std::f64::consts::TAU } else { 1.0 };
        Grid::new(vec![Axis::uniform("x", 0.0, max, count, periodic)]).unwrap()
    }

    #[test]
    fn one_sided_stencils_are_exact_on_quartics() {
        let g = line(9, false);
        let f: Vec<f64> = (0..9).map(|i| g.coord(i, 0).powi(4) - g.coord(i, 0)).collect();
        let d1 = derivative(&g, &f, 0, Order::First, Edge::OneSided, 0.0).unwrap();
        let d2 = derivative(&g, &f, 0, Order::Second, Edge::OneSided, 0.0).unwrap();
        for i in 0..9 {
            let x = g.coord(i, 0);
            assert!((d1[i] - (4.0 * x.powi(3) - 1.0)).abs() < 1e-11, "d1 at {i}");
            assert!((d2[i] - 12.0 * x * x).abs() < 1e-9, "d2 at {i}");
        }
    }

    #[test]
    fn periodic_jump_makes_linear_action_exact() {
        let g = line(16, true);
        let s: Vec<f64> = (0..16).map(|i| 0.5 * g.coord(i, 0)).collect();
        let jump = 0.5 * std::f64::consts::TAU;
        let d1 = derivative(&g, &s, 0, Order::First, Edge::OneSided, jump).unwrap();
        let d2 = derivative(&g, &s, 0, Order::Second, Edge::OneSided, jump).unwrap();
        assert!(d1.iter().all(|v| (v - 0.5).abs() < 1e-13));
        assert!(d2.iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn short_open_axis_is_a_stencil_error() {
        let g = line(4, false);
        let err = derivative(&g, &[0.0; 4], 0, Order::First, Edge::OneSided, 0.0).unwrap_err();
        assert!(matches!(err, Error::Stencil { needed: 5, .. }));
    }

    #[test]
    fn odd_edge_matches_sine_mode() {
        // sin(π(i+1)/(n+1)) vanishes at both walls; its odd extension is smooth.
        let n = 40;
        let h = 1.0 / (n as f64 + 1.0);
        let g = Grid::new(vec![Axis {
            name: "x".into(),
            min: h,
            spacing: h,
            count: n,
            periodic: false,
        }])
        .unwrap();
        let k = std::f64::consts::PI;
        let f: Vec<f64> = (0..n).map(|i| (k * g.coord(i, 0)).sin()).collect();
        let d2 = derivative(&g, &f, 0, Order::Second, Edge::Odd, 0.0).unwrap();
        for i in 0..n {
            assert!((d2[i] + k * k * f[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn homogeneous_axis_has_zero_derivative_and_unit_weight() {
        let g: Grid<f64> = Grid::new(vec![Axis::uniform("x", 0.0, 1.0, 11, false), Axis::homogeneous("y")]).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|p| g.coord(p, 0).exp()).collect();
        let d = derivative(&g, &f, 1, Order::Second, Edge::OneSided, 0.0).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        let total: f64 = g.quadrature_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn step_reports_wraps() {
        let g = line(8, true);
        assert_eq!(g.step(7, 0, 1), Some((0, 1)));
        assert_eq!(g.step(0, 0, -1), Some((7, -1)));
        let open = line(8, false);
        assert_eq!(open.step(7, 0, 1), None);
    }
}
