//! Quantum states as density/action pairs and as complex wave functions.
//!
//! On a periodic axis the action need not be periodic: one traversal adds
//! `2πℏ·w` where `w` is the axis winding. States store `S` on one period
//! together with `w`; wave functions store the matching boundary twist
//! `2π·w` (radians), so `Ψ(q + L) = e^{2πiw} Ψ(q)`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{gradient, MetricChart, DEFAULT_RHO_FLOOR};
use crate::grid::{ComplexField, Edge, ScalarField};
use crate::scalar::{lit, wrap_angle, Real};

/// Physical constants. Natural units by default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Units<T> {
    pub hbar: T,
    pub mass: T,
}

impl<T: Real> Default for Units<T> {
    fn default() -> Self {
        Units {
            hbar: T::one(),
            mass: T::one(),
        }
    }
}

#[derive(Clone)]
pub struct CqgState<T> {
    pub rho: ScalarField<T>,
    pub action: ScalarField<T>,
    pub time: T,
    /// Action gained per traversal of each axis, in units of `2πℏ`. Zero on
    /// open axes.
    pub windings: Vec<T>,
    pub units: Units<T>,
    pub chart: Arc<MetricChart<T>>,
}

impl<T: Real> CqgState<T> {
    pub fn new(chart: Arc<MetricChart<T>>, rho: ScalarField<T>, action: ScalarField<T>, units: Units<T>) -> Result<Self> {
        let n = chart.dim();
        let state = CqgState {
            rho,
            action,
            time: T::zero(),
            windings: vec![T::zero(); n],
            units,
            chart,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn with_windings(mut self, windings: Vec<T>) -> Result<Self> {
        self.windings = windings;
        self.validate()?;
        Ok(self)
    }

    pub fn with_time(mut self, time: T) -> Self {
        self.time = time;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.chart.grid();
        grid.check_shape(self.rho.shape())?;
        grid.check_shape(self.action.shape())?;
        if self.windings.len() != grid.dim() {
            return Err(Error::Shape {
                expected: vec![grid.dim()],
                found: vec![self.windings.len()],
            });
        }
        for (k, &w) in self.windings.iter().enumerate() {
            if w != T::zero() && !grid.axis(k).periodic {
                return Err(Error::Precondition(format!("winding on open axis {k}")));
            }
        }
        if !(self.units.hbar > T::zero() && self.units.mass > T::zero()) {
            return Err(Error::Precondition("ℏ and m must be positive".into()));
        }
        check_density(self.rho.data())
    }

    /// Per-period jumps of `S` for the stencils.
    pub fn action_jumps(&self) -> Vec<T> {
        self.windings.iter().map(|&w| T::TAU() * self.units.hbar * w).collect()
    }

    /// `∂_i S`, consistent with the windings.
    pub fn momentum(&self, edge: Edge) -> Result<Vec<Vec<T>>> {
        gradient(&self.chart, self.action.data(), &self.action_jumps(), edge)
    }
}

impl<T: Real> fmt::Debug for CqgState<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CqgState")
            .field("shape", &self.rho.shape())
            .field("time", &self.time)
            .field("windings", &self.windings)
            .field("units", &self.units)
            .finish()
    }
}

pub(crate) fn check_density<T: Real>(rho: &[T]) -> Result<()> {
    match rho.iter().position(|&r| !(r >= T::zero()) || !r.is_finite()) {
        Some(p) => Err(Error::Domain {
            what: format!("density {} is negative or not finite", rho[p]),
            point: p,
        }),
        None => Ok(()),
    }
}

#[derive(Clone)]
pub struct WaveField<T> {
    pub psi: ComplexField<T>,
    /// Boundary phase per traversal of each axis, radians.
    pub twist: Vec<T>,
    pub time: T,
    pub units: Units<T>,
    pub chart: Arc<MetricChart<T>>,
}

impl<T: Real> WaveField<T> {
    pub fn new(chart: Arc<MetricChart<T>>, psi: ComplexField<T>, units: Units<T>) -> Result<Self> {
        chart.grid().check_shape(psi.shape())?;
        let n = chart.dim();
        Ok(WaveField {
            psi,
            twist: vec![T::zero(); n],
            time: T::zero(),
            units,
            chart,
        })
    }

    pub fn norm(&self) -> T {
        weighted_sum(&self.chart, self.psi.data().iter().map(|z| z.norm_sqr()))
    }
}

impl<T: Real> fmt::Debug for WaveField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveField")
            .field("shape", &self.psi.shape())
            .field("time", &self.time)
            .field("twist", &self.twist)
            .field("units", &self.units)
            .finish()
    }
}

fn weighted_sum<T: Real>(chart: &MetricChart<T>, values: impl Iterator<Item = T>) -> T {
    chart
        .volume_weights()
        .into_iter()
        .zip(values)
        .fold(T::zero(), |acc, (w, v)| acc + w * v)
}

/// `∫ ρ √g dⁿq` by the product trapezoid rule.
pub fn norm<T: Real>(state: &CqgState<T>) -> T {
    weighted_sum(&state.chart, state.rho.data().iter().copied())
}

/// `Ψ = √ρ e^{iS/ℏ}`.
pub fn to_wavefunction<T: Real>(state: &CqgState<T>) -> Result<WaveField<T>> {
    check_density(state.rho.data())?;
    let hbar = state.units.hbar;
    let psi = state
        .rho
        .zip_map(&state.action, |r, s| Complex::from_polar(r.sqrt(), s / hbar));
    Ok(WaveField {
        psi,
        twist: state.windings.iter().map(|&w| T::TAU() * w).collect(),
        time: state.time,
        units: state.units,
        chart: state.chart.clone(),
    })
}

/// Inverts [`to_wavefunction`] on the whole grid.
pub fn from_wavefunction<T: Real>(w: &WaveField<T>) -> Result<CqgState<T>> {
    from_wavefunction_in(w, None, lit(DEFAULT_RHO_FLOOR))
}

/// Steps whose wrapped phase increment exceeds this are treated as
/// unresolved (the phase could have gone either way round).
fn ambiguous_step<T: Real>() -> T {
    lit::<T>(0.75) * T::PI()
}

/// `ρ = |Ψ|²` everywhere; `S = ℏ arg Ψ` unwrapped over `region` (all points
/// when `None`). Outside the region `S` keeps its principal value. Points
/// with `|Ψ|² ≤ floor · max |Ψ|²`, or joined to a neighbour by a phase step
/// larger than 3π/4, are nodal; plaquettes with nonzero phase circulation
/// are vortices. Either makes the branch ambiguous.
pub fn from_wavefunction_in<T: Real>(w: &WaveField<T>, region: Option<&[bool]>, floor: T) -> Result<CqgState<T>> {
    let chart = &w.chart;
    let grid = chart.grid();
    grid.check_shape(w.psi.shape())?;
    let len = grid.len();
    let n = grid.dim();
    if let Some(r) = region {
        if r.len() != len {
            return Err(Error::Shape {
                expected: grid.shape().to_vec(),
                found: vec![r.len()],
            });
        }
    }
    let inside = |p: usize| region.map_or(true, |r| r[p]);
    let psi = w.psi.data();
    let rho: Vec<T> = psi.iter().map(|z| z.norm_sqr()).collect();
    check_density(&rho)?;
    let max = rho.iter().copied().fold(T::zero(), T::max);
    let cut = floor * max;
    let arg: Vec<T> = psi.iter().map(|z| z.arg()).collect();

    // Wrapped phase increment from p to its neighbour q across `wraps`
    // periods of axis k.
    let increment = |p: usize, q: usize, k: usize, wraps: i64| -> T {
        let twist = w.twist.get(k).copied().unwrap_or_else(T::zero);
        wrap_angle(arg[q] + twist * T::from_i64(wraps).unwrap() - arg[p])
    };

    let mut nodal: Vec<usize> = (0..len).filter(|&p| inside(p) && !(rho[p] > cut)).collect();
    let mut vortices = Vec::new();
    for p in (0..len).filter(|&p| inside(p)) {
        for k in 0..n {
            if grid.axis(k).is_homogeneous() {
                continue;
            }
            if let Some((q, wraps)) = grid.step(p, k, 1) {
                if inside(q) && increment(p, q, k, wraps).abs() > ambiguous_step() {
                    nodal.push(p);
                    nodal.push(q);
                }
            }
        }
    }
    for p in (0..len).filter(|&p| inside(p)) {
        for a in 0..n {
            for b in a + 1..n {
                if grid.axis(a).is_homogeneous() || grid.axis(b).is_homogeneous() {
                    continue;
                }
                let Some((pa, wa)) = grid.step(p, a, 1) else { continue };
                let Some((pab, wab)) = grid.step(pa, b, 1) else { continue };
                let Some((pb, wb)) = grid.step(p, b, 1) else { continue };
                if ![pa, pab, pb].iter().all(|&q| inside(q)) {
                    continue;
                }
                let circulation = increment(p, pa, a, wa) + increment(pa, pab, b, wab)
                    - increment(pb, pab, a, grid.step(pb, a, 1).map_or(0, |s| s.1))
                    - increment(p, pb, b, wb);
                if circulation.abs() > T::PI() {
                    vortices.push(grid.unravel(p));
                }
            }
        }
    }
    nodal.sort_unstable();
    nodal.dedup();
    if !nodal.is_empty() || !vortices.is_empty() {
        return Err(Error::BranchAmbiguity {
            nodal: nodal.into_iter().map(|p| grid.unravel(p)).collect(),
            vortices,
        });
    }

    let hbar = w.units.hbar;
    let mut phase: Vec<T> = arg.clone();
    let mut seen = vec![false; len];
    for seed in 0..len {
        if seen[seed] || !inside(seed) {
            continue;
        }
        seen[seed] = true;
        let mut queue = VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            for k in 0..n {
                for delta in [1, -1] {
                    // Stay inside one period so the stored branch is continuous.
                    let Some((q, 0)) = grid.step(p, k, delta) else { continue };
                    if seen[q] || !inside(q) {
                        continue;
                    }
                    seen[q] = true;
                    phase[q] = phase[p] + increment(p, q, k, 0);
                    queue.push_back(q);
                }
            }
        }
    }

    // Winding of each periodic axis from one full line through the first
    // region point; with no complete line the principal twist is kept.
    let mut windings = vec![T::zero(); n];
    let first = (0..len).find(|&p| inside(p));
    for k in 0..n {
        let axis = grid.axis(k);
        if !axis.periodic {
            continue;
        }
        let twist = w.twist.get(k).copied().unwrap_or_else(T::zero);
        let mut total = T::zero();
        let mut complete = first.is_some();
        if let Some(start) = first {
            let mut p = start;
            for _ in 0..axis.count {
                let (q, wraps) = grid.step(p, k, 1).expect("periodic step");
                if !inside(q) {
                    complete = false;
                    break;
                }
                total = total + increment(p, q, k, wraps);
                p = q;
            }
        }
        // The measured winding lies on twist/2π + ℤ up to rounding.
        let base = twist / T::TAU();
        windings[k] = if complete { base + (total / T::TAU() - base).round() } else { base };
    }

    let action: Vec<T> = phase.into_iter().map(|t| t * hbar).collect();
    Ok(CqgState {
        rho: w.psi.with_data(rho),
        action: w.psi.with_data(action),
        time: w.time,
        windings,
        units: w.units,
        chart: w.chart.clone(),
    })
}

/// Trapezoid line integral of `∂_i S dq^i` along a closed lattice loop given
/// as multi-indices (first equals last). Consecutive vertices must be grid
/// neighbours; crossing the seam of a periodic axis is allowed.
pub fn loop_integral<T: Real>(state: &CqgState<T>, path: &[Vec<usize>]) -> Result<T> {
    let grid = state.chart.grid();
    if path.len() < 2 || path.first() != path.last() {
        return Err(Error::Precondition("loop must be closed (first vertex repeated at the end)".into()));
    }
    let flats = path
        .iter()
        .map(|ix| grid.ravel(ix).ok_or_else(|| Error::OutOfChart { index: ix.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let p_i = state.momentum(Edge::OneSided)?;
    let half = lit::<T>(0.5);
    let mut total = T::zero();
    for (step, pair) in flats.windows(2).enumerate() {
        let (p, q) = (pair[0], pair[1]);
        let hop = (0..grid.dim()).find_map(|k| {
            [1i64, -1].into_iter().find_map(|d| {
                (p != q && grid.step(p, k, d).map(|s| s.0) == Some(q)).then_some((k, d))
            })
        });
        let Some((k, d)) = hop else {
            return Err(Error::Precondition(format!("vertices {step} and {} are not lattice neighbours", step + 1)));
        };
        let dq = grid.axis(k).spacing * T::from_i64(d).unwrap();
        total = total + half * (p_i[k][p] + p_i[k][q]) * dq;
    }
    Ok(total)
}
