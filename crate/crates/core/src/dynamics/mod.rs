//! Time evolution of `(ρ, S)` and of the equivalent linear wave equation.

mod cqg;
mod equivalence;
mod fill;
mod reference;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{contract, divergence, gradient, laplace_beltrami_raw, weyl_curvature_from_parts, MetricChart};
use crate::grid::{Edge, FieldValue, Grid, ScalarField};
use crate::qstate::{CqgState, Units};
use crate::scalar::{count, lit, Real};

pub use cqg::CqgSolver;
pub use equivalence::{equivalence_report, equivalence_report_sampled, EquivalenceReport, EquivalenceSample};
pub use reference::ReferenceSolver;

/// `f(q, t)` evaluated at grid coordinates.
pub type FieldFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;
pub type StationaryFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// One scalar component of an external field.
#[derive(Clone, Default)]
pub enum Source<T> {
    #[default]
    Zero,
    Constant(T),
    /// Time-independent samples on the grid.
    Sampled(Vec<T>),
    /// Time-independent function of position.
    Stationary(StationaryFn<T>),
    Function(FieldFn<T>),
}

impl<T: Real> Source<T> {
    pub fn function(f: impl Fn(&[T], T) -> T + Send + Sync + 'static) -> Self {
        Source::Function(Arc::new(f))
    }

    pub fn stationary(f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Source::Stationary(Arc::new(f))
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, Source::Function(_))
    }

    /// The value when the source is the same everywhere and always.
    pub fn uniform_value(&self) -> Option<T> {
        match self {
            Source::Zero => Some(T::zero()),
            Source::Constant(c) => Some(*c),
            _ => None,
        }
    }

    pub fn sample(&self, grid: &Grid<T>, t: T) -> Result<Vec<T>> {
        match self {
            Source::Zero => Ok(vec![T::zero(); grid.len()]),
            Source::Constant(c) => Ok(vec![*c; grid.len()]),
            Source::Sampled(v) => {
                if v.len() != grid.len() {
                    return Err(Error::Shape {
                        expected: grid.shape().to_vec(),
                        found: vec![v.len()],
                    });
                }
                Ok(v.clone())
            }
            Source::Stationary(f) => Ok((0..grid.len()).map(|p| f(&grid.coords(p))).collect()),
            Source::Function(f) => Ok((0..grid.len()).map(|p| f(&grid.coords(p), t)).collect()),
        }
    }

    fn offset(&self, c: T) -> Self {
        match self {
            Source::Zero => Source::Constant(c),
            Source::Constant(v) => Source::Constant(*v + c),
            Source::Sampled(v) => Source::Sampled(v.iter().map(|&x| x + c).collect()),
            Source::Stationary(f) => {
                let f = f.clone();
                Source::stationary(move |q| f(q) + c)
            }
            Source::Function(f) => {
                let f = f.clone();
                Source::function(move |q, t| f(q, t) + c)
            }
        }
    }
}

impl<T: Real> fmt::Debug for Source<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Zero => write!(f, "Zero"),
            Source::Constant(c) => write!(f, "Constant({c})"),
            Source::Sampled(v) => write!(f, "Sampled({} points)", v.len()),
            Source::Stationary(_) => write!(f, "Stationary"),
            Source::Function(_) => write!(f, "Function"),
        }
    }
}

/// Scalar potential `V(q, t)` and covector potential `a_i(q, t)`.
#[derive(Clone, Default)]
pub struct ExternalFields<T> {
    pub potential: Source<T>,
    /// One source per chart axis, or empty for no vector potential.
    pub vector: Vec<Source<T>>,
}

impl<T: Real> fmt::Debug for ExternalFields<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalFields")
            .field("potential", &self.potential)
            .field("vector", &self.vector)
            .finish()
    }
}

impl<T: Real> ExternalFields<T> {
    pub fn none() -> Self {
        ExternalFields {
            potential: Source::Zero,
            vector: Vec::new(),
        }
    }

    pub fn with_potential(potential: Source<T>) -> Self {
        ExternalFields {
            potential,
            vector: Vec::new(),
        }
    }

    pub fn with_vector(mut self, vector: Vec<Source<T>>) -> Self {
        self.vector = vector;
        self
    }

    /// `V(q) = ½ m ω² |q − centre|²` on a flat chart.
    pub fn harmonic(mass: T, omega: T, centre: Vec<T>) -> Self {
        let k = lit::<T>(0.5) * mass * omega * omega;
        Self::with_potential(Source::stationary(move |q| {
            k * q.iter().zip(&centre).map(|(&x, &c)| (x - c) * (x - c)).sum::<T>()
        }))
    }

    /// The same fields with `V` raised by `c`.
    pub fn offset_potential(&self, c: T) -> Self {
        ExternalFields {
            potential: self.potential.offset(c),
            vector: self.vector.clone(),
        }
    }

    pub fn has_vector(&self) -> bool {
        self.vector.iter().any(|s| !matches!(s, Source::Zero))
    }

    pub fn is_static(&self) -> bool {
        self.potential.is_static() && self.vector.iter().all(Source::is_static)
    }

    fn check(&self, chart: &MetricChart<T>) -> Result<()> {
        if !self.vector.is_empty() && self.vector.len() != chart.dim() {
            return Err(Error::Dimension {
                found: self.vector.len(),
                reason: format!("vector potential needs {} components", chart.dim()),
            });
        }
        Ok(())
    }

    fn sample(&self, chart: &MetricChart<T>, t: T) -> Result<Sampled<T>> {
        let grid = chart.grid();
        let potential = self.potential.sample(grid, t)?;
        let vector = if self.has_vector() {
            let a = self
                .vector
                .iter()
                .map(|s| s.sample(grid, t))
                .collect::<Result<Vec<_>>>()?;
            let div = divergence(chart, &a, Edge::OneSided)?;
            Some((a, div))
        } else {
            None
        };
        Ok(Sampled { potential, vector })
    }
}

/// External fields on the grid at one instant, with `div a`.
#[derive(Clone, Debug)]
struct Sampled<T> {
    potential: Vec<T>,
    vector: Option<(Vec<Vec<T>>, Vec<T>)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    CqgCoupled,
    ReferenceLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams<T> {
    pub dt: T,
    pub t_end: T,
    /// Curvature coupling; the conformal value when absent.
    pub xi: Option<T>,
    pub scheme: Scheme,
    /// Steps between Weyl-curvature re-evaluations.
    pub curvature_refresh: usize,
    /// `c` in `dt < c·h²·m/ℏ`.
    pub cfl: T,
    /// Relative density below which points are not evolved but extrapolated.
    pub rho_floor: T,
    /// Kreiss–Oliger dissipation strength, in units of the local transport
    /// speed of `ln ρ`.
    pub dissipation: T,
    /// Largest relative mass allowed in masked points.
    pub masked_mass_limit: T,
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        SolverParams {
            dt: lit(1e-3),
            t_end: T::one(),
            xi: None,
            scheme: Scheme::CqgCoupled,
            curvature_refresh: 1,
            cfl: lit(0.5),
            rho_floor: lit(crate::geometry::DEFAULT_RHO_FLOOR),
            dissipation: lit(2.0),
            masked_mass_limit: lit(1e-6),
        }
    }
}

impl<T: Real> SolverParams<T> {
    pub fn xi_for(&self, n: usize) -> T {
        self.xi.unwrap_or_else(|| xi_conformal(n))
    }

    /// Largest admissible step on `chart`.
    pub fn max_dt(&self, chart: &MetricChart<T>, units: &Units<T>) -> T {
        let h = chart.grid().min_spacing();
        if h.is_infinite() {
            return T::infinity();
        }
        self.cfl * h * h * units.mass / units.hbar
    }

    pub fn check(&self, chart: &MetricChart<T>, units: &Units<T>) -> Result<()> {
        let bad = |what: &str| Err(Error::Precondition(what.into()));
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.t_end >= T::zero()) {
            return bad("t_end must be nonnegative");
        }
        if self.curvature_refresh == 0 {
            return bad("curvature_refresh must be at least 1");
        }
        if !(self.rho_floor >= T::zero() && self.rho_floor < T::one()) {
            return bad("rho_floor must lie in [0, 1)");
        }
        if !(self.dissipation >= T::zero()) {
            return bad("dissipation must be nonnegative");
        }
        let max_dt = self.max_dt(chart, units);
        if self.dt >= max_dt {
            return Err(Error::Cfl {
                dt: self.dt.to_f64().unwrap_or(f64::NAN),
                max_dt: max_dt.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    /// Number of whole steps that reach `t_end` (the last may overshoot by
    /// less than one step).
    pub fn steps_to(&self, t_end: T) -> usize {
        (t_end / self.dt - lit(1e-9)).ceil().max(T::zero()).to_usize().unwrap_or(0)
    }
}

/// `ξ = (n − 2) / (8 (n − 1))`: the coupling at which the curvature term is
/// the quantum potential.
pub fn xi_conformal<T: Real>(n: usize) -> T {
    if n < 2 {
        return T::zero();
    }
    count::<T>(n - 2) / (count::<T>(8) * count::<T>(n - 1))
}

/// Points evolved by the log-density scheme: `ρ ≥ floor · max ρ`, away from
/// the three outermost points of every open axis.
pub(crate) fn active_set<T: Real>(grid: &Grid<T>, log_rho: &[T], floor: T) -> Vec<bool> {
    let top = log_rho
        .iter()
        .copied()
        .filter(|u| u.is_finite())
        .fold(T::neg_infinity(), T::max);
    let threshold = if floor > T::zero() { top + floor.ln() } else { T::neg_infinity() };
    let band: Vec<(usize, bool)> = grid
        .axes()
        .iter()
        .map(|a| (a.count, !a.periodic && a.count >= 8))
        .collect();
    (0..grid.len())
        .map(|p| {
            let u = log_rho[p];
            u.is_finite()
                && u >= threshold
                && band.iter().enumerate().all(|(k, &(n, open))| {
                    let i = grid.index_along(p, k);
                    !open || (i >= 3 && i + 3 < n)
                })
        })
        .collect()
}

/// Time derivatives of `(ln ρ, S)` together with the Weyl curvature used.
pub(crate) struct Rates<T> {
    pub log_rho: Vec<T>,
    pub action: Vec<T>,
    pub curvature: Vec<T>,
}

/// Evaluates the Hamilton–Jacobi and continuity right-hand sides in log
/// form. Masked points are first filled by extrapolation from `known`; the
/// returned rates are extrapolated the same way.
pub(crate) struct Evaluator<'a, T> {
    pub chart: &'a MetricChart<T>,
    pub units: Units<T>,
    pub xi: T,
    pub dissipation: T,
    pub jumps: &'a [T],
}

impl<T: Real> Evaluator<'_, T> {
    fn rates(
        &self,
        log_rho: &[T],
        action: &[T],
        known: &[bool],
        fields: &Sampled<T>,
        frozen_curvature: Option<&[T]>,
    ) -> Result<Rates<T>> {
        let chart = self.chart;
        let grid = chart.grid();
        let n = chart.dim();
        let zeros = vec![T::zero(); n];
        let mut u = log_rho.to_vec();
        let mut s = action.to_vec();
        fill::extrapolate(grid, &mut u, known, &zeros, 2);
        fill::extrapolate(grid, &mut s, known, self.jumps, 2);

        let grad_u = gradient(chart, &u, &zeros, Edge::OneSided)?;
        let grad_s = gradient(chart, &s, self.jumps, Edge::OneSided)?;
        let velocity: Vec<Vec<T>> = match &fields.vector {
            Some((a, _)) => grad_s
                .iter()
                .zip(a)
                .map(|(g, a)| g.iter().zip(a).map(|(&g, &a)| g - a).collect())
                .collect(),
            None => grad_s,
        };
        let curvature = match frozen_curvature {
            Some(r) => r.to_vec(),
            None => weyl_curvature_from_parts(chart, &u, &grad_u, Edge::OneSided)?,
        };
        let lap_s = laplace_beltrami_raw(chart, &s, self.jumps, Edge::OneSided)?;
        let kinetic = contract(chart, &velocity, &velocity);
        let transport = contract(chart, &grad_u, &velocity);

        let Units { hbar, mass } = self.units;
        let half = lit::<T>(0.5);
        let coupling = self.xi * hbar * hbar / mass;
        let mut du = vec![T::zero(); grid.len()];
        let mut ds = vec![T::zero(); grid.len()];
        for p in 0..grid.len() {
            let div_a = fields.vector.as_ref().map_or(T::zero(), |(_, d)| d[p]);
            ds[p] = -(half * kinetic[p] / mass + fields.potential[p] + coupling * curvature[p]);
            du[p] = -(transport[p] + lap_s[p] - div_a) / mass;
        }
        if self.dissipation > T::zero() {
            self.dissipate(&u, &s, &grad_u, known, &mut du, &mut ds);
        }
        // Masked rates are never used: masked values are re-extrapolated
        // before every evaluation and after every step.
        for p in 0..grid.len() {
            if !known[p] {
                du[p] = T::zero();
                ds[p] = T::zero();
            }
        }
        Ok(Rates {
            log_rho: du,
            action: ds,
            curvature,
        })
    }

    /// Sixth-difference damping per axis, scaled by the local speed
    /// `(ℏ/2m) g^{kk} |∂_k ln ρ|`. Vanishes on quadratics.
    fn dissipate(&self, u: &[T], s: &[T], grad_u: &[Vec<T>], known: &[bool], du: &mut [T], ds: &mut [T]) {
        const D6: [(i64, f64); 6] = [(-3, 1.0), (-2, -6.0), (-1, 15.0), (1, 15.0), (2, -6.0), (3, 1.0)];
        let chart = self.chart;
        let grid = chart.grid();
        let n = chart.dim();
        let scale = self.dissipation * self.units.hbar / (lit::<T>(2.0) * self.units.mass) / lit::<T>(64.0);
        for k in 0..n {
            let axis = grid.axis(k);
            if axis.is_homogeneous() || axis.count < 7 {
                continue;
            }
            let jump = self.jumps[k];
            for p in 0..grid.len() {
                if !known[p] {
                    continue;
                }
                let mut du6 = T::zero();
                let mut ds6 = T::zero();
                let mut inside = true;
                for &(o, c) in &D6 {
                    match grid.step(p, k, o) {
                        Some((q, wraps)) => {
                            let c = lit::<T>(c);
                            du6 = du6 + c * (u[q] - u[p]);
                            ds6 = ds6 + c * (s[q].shift(jump, wraps) - s[p]);
                        }
                        None => {
                            inside = false;
                            break;
                        }
                    }
                }
                if !inside {
                    continue;
                }
                let gkk = chart.inverse_at(p)[k * n + k];
                let eps = scale * gkk * grad_u[k][p].abs() / axis.spacing;
                du[p] = du[p] + eps * du6;
                ds[p] = ds[p] + eps * ds6;
            }
        }
    }
}

/// `H(q, ∂S)`: the right-hand side of the Hamilton–Jacobi equation,
/// `(1/2m) g^{ij}(∂_iS − a_i)(∂_jS − a_j) + V + (ξℏ²/m) R_W`, at the state's
/// time. Evaluated where `ρ` is above the default floor (with `ln ρ` and `S`
/// extrapolated beyond it for the stencils) and continued from the nearest
/// evaluated point below it.
pub fn hamiltonian_density<T: Real>(state: &CqgState<T>, fields: &ExternalFields<T>, xi: T) -> Result<ScalarField<T>> {
    state.validate()?;
    fields.check(&state.chart)?;
    let chart = &*state.chart;
    let u: Vec<T> = state.rho.data().iter().map(|r| r.ln()).collect();
    let known = active_set(chart.grid(), &u, lit(crate::geometry::DEFAULT_RHO_FLOOR));
    let jumps = state.action_jumps();
    let eval = Evaluator {
        chart,
        units: state.units,
        xi,
        dissipation: T::zero(),
        jumps: &jumps,
    };
    let sampled = fields.sample(chart, state.time)?;
    let rates = eval.rates(&u, state.action.data(), &known, &sampled, None)?;
    let mut h: Vec<T> = rates.action.into_iter().map(|x| -x).collect();
    fill::extrapolate(chart.grid(), &mut h, &known, &vec![T::zero(); chart.dim()], 0);
    ScalarField::new(chart.grid().shape().to_vec(), h)
}

/// Pointwise data the Lagrangian needs: `R_W` from the context density, `V`
/// and `a` at one instant.
#[derive(Clone)]
pub struct LagrangianContext<T: Real> {
    chart: Arc<MetricChart<T>>,
    units: Units<T>,
    xi: T,
    curvature: Vec<T>,
    potential: Vec<T>,
    vector: Option<Vec<Vec<T>>>,
}

impl<T: Real> LagrangianContext<T> {
    pub fn new(state: &CqgState<T>, fields: &ExternalFields<T>, xi: T) -> Result<Self> {
        state.validate()?;
        fields.check(&state.chart)?;
        let chart = &*state.chart;
        let u: Vec<T> = state.rho.data().iter().map(|r| r.ln()).collect();
        let known = active_set(chart.grid(), &u, lit(crate::geometry::DEFAULT_RHO_FLOOR));
        let zeros = vec![T::zero(); chart.dim()];
        let mut filled = u;
        fill::extrapolate(chart.grid(), &mut filled, &known, &zeros, 2);
        let grad = gradient(chart, &filled, &zeros, Edge::OneSided)?;
        let mut curvature = weyl_curvature_from_parts(chart, &filled, &grad, Edge::OneSided)?;
        fill::extrapolate(chart.grid(), &mut curvature, &known, &zeros, 0);
        let sampled = fields.sample(chart, state.time)?;
        Ok(LagrangianContext {
            chart: state.chart.clone(),
            units: state.units,
            xi,
            curvature,
            potential: sampled.potential,
            vector: sampled.vector.map(|(a, _)| a),
        })
    }

    fn flat(&self, q: &[usize]) -> Result<usize> {
        self.chart
            .grid()
            .ravel(q)
            .ok_or_else(|| Error::OutOfChart { index: q.to_vec() })
    }

    fn a_at(&self, p: usize) -> Vec<T> {
        match &self.vector {
            Some(a) => a.iter().map(|c| c[p]).collect(),
            None => vec![T::zero(); self.chart.dim()],
        }
    }

    pub fn weyl_curvature_at(&self, q: &[usize]) -> Result<T> {
        Ok(self.curvature[self.flat(q)?])
    }

    /// `p_i = ∂L/∂q̇^i = m g_ij q̇^j + a_i`.
    pub fn momentum(&self, q: &[usize], qdot: &[T]) -> Result<Vec<T>> {
        let p = self.flat(q)?;
        let n = self.chart.dim();
        let g = self.chart.metric_at(p);
        let a = self.a_at(p);
        Ok((0..n)
            .map(|i| self.units.mass * (0..n).map(|j| g[i * n + j] * qdot[j]).sum::<T>() + a[i])
            .collect())
    }

    /// `(1/2m) g^{ij}(p_i − a_i)(p_j − a_j) + V + (ξℏ²/m) R_W`.
    pub fn hamiltonian(&self, q: &[usize], momentum: &[T]) -> Result<T> {
        let p = self.flat(q)?;
        let n = self.chart.dim();
        let inv = self.chart.inverse_at(p);
        let a = self.a_at(p);
        let mut k = T::zero();
        for i in 0..n {
            for j in 0..n {
                k = k + inv[i * n + j] * (momentum[i] - a[i]) * (momentum[j] - a[j]);
            }
        }
        let Units { hbar, mass } = self.units;
        Ok(lit::<T>(0.5) * k / mass + self.potential[p] + self.xi * hbar * hbar / mass * self.curvature[p])
    }
}

/// `L = ½ m g_ij q̇^i q̇^j + a_i q̇^i − (ξℏ²/m) R_W(q) − V(q)` at grid point `q`.
pub fn lagrangian<T: Real>(q: &[usize], qdot: &[T], context: &LagrangianContext<T>) -> Result<T> {
    let p = context.flat(q)?;
    let n = context.chart.dim();
    if qdot.len() != n {
        return Err(Error::Dimension {
            found: qdot.len(),
            reason: format!("velocity needs {n} components"),
        });
    }
    let g = context.chart.metric_at(p);
    let a = context.a_at(p);
    let mut kinetic = T::zero();
    let mut coupling = T::zero();
    for i in 0..n {
        coupling = coupling + a[i] * qdot[i];
        for j in 0..n {
            kinetic = kinetic + g[i * n + j] * qdot[i] * qdot[j];
        }
    }
    let Units { hbar, mass } = context.units;
    Ok(lit::<T>(0.5) * mass * kinetic + coupling
        - context.xi * hbar * hbar / mass * context.curvature[p]
        - context.potential[p])
}

/// Summary statistics of a density at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables<T> {
    pub time: T,
    pub norm: T,
    pub mean: Vec<T>,
    pub width: Vec<T>,
    pub energy: T,
}

/// `(∫ρ dμ, ⟨q^k⟩, √⟨(q^k − ⟨q^k⟩)²⟩)` with the volume weights of the chart.
pub fn density_moments<T: Real>(chart: &MetricChart<T>, rho: &[T]) -> (T, Vec<T>, Vec<T>) {
    let grid = chart.grid();
    let n = chart.dim();
    let w = chart.volume_weights();
    let mut mass = T::zero();
    let mut first = vec![T::zero(); n];
    let mut second = vec![T::zero(); n];
    for p in 0..grid.len() {
        let m = w[p] * rho[p];
        mass = mass + m;
        for k in 0..n {
            let x = grid.coord(p, k);
            first[k] = first[k] + m * x;
            second[k] = second[k] + m * x * x;
        }
    }
    let mean: Vec<T> = first.iter().map(|&f| f / mass).collect();
    let width = second
        .iter()
        .zip(&mean)
        .map(|(&s, &m)| (s / mass - m * m).max(T::zero()).sqrt())
        .collect();
    (mass, mean, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Field};

    fn line(count: usize, half: f64, periodic: bool) -> Arc<MetricChart<f64>> {
        let axis = if periodic {
            Axis::uniform("x", -half, half, count, true)
        } else {
            Axis::uniform("x", -half, half, count, false)
        };
        Arc::new(MetricChart::euclidean_embedded(vec![axis], 3).unwrap())
    }

    #[test]
    fn conformal_coupling_in_three_dimensions() {
        assert_eq!(xi_conformal::<f64>(3), 1.0 / 16.0);
        assert_eq!(xi_conformal::<f64>(4), 2.0 / 24.0);
    }

    #[test]
    fn free_uniform_state_has_zero_energy() {
        let chart = line(64, 4.0, false);
        let rho = Field::filled(chart.grid(), 0.25);
        let st = CqgState::new(chart.clone(), rho, Field::filled(chart.grid(), 0.0), Units::default()).unwrap();
        let h = hamiltonian_density(&st, &ExternalFields::none(), xi_conformal(3)).unwrap();
        assert!(h.data().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn plane_wave_has_kinetic_energy_only() {
        let chart = line(64, 4.0, false);
        let p = 1.7;
        let rho = Field::filled(chart.grid(), 1.0);
        let s = Field::from_fn(chart.grid(), |q| p * q[0]);
        let st = CqgState::new(chart.clone(), rho, s, Units::default()).unwrap();
        let h = hamiltonian_density(&st, &ExternalFields::none(), xi_conformal(3)).unwrap();
        for &v in h.data() {
            assert!((v - p * p / 2.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn oscillator_ground_state_is_stationary_energy() {
        let omega = 1.3;
        let chart = line(201, 8.0, false);
        let rho = Field::from_fn(chart.grid(), |q| (-omega * q[0] * q[0]).exp());
        let st = CqgState::new(chart.clone(), rho, Field::filled(chart.grid(), 0.0), Units::default()).unwrap();
        let h = hamiltonian_density(&st, &ExternalFields::harmonic(1.0, omega, vec![0.0; 3]), xi_conformal(3)).unwrap();
        for &v in h.data() {
            assert!((v - omega / 2.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn extrapolated_tail_keeps_energy_exact() {
        // Far tails underflow to zero; the masked evaluation must not care.
        let chart = line(401, 40.0, false);
        let rho = Field::from_fn(chart.grid(), |q| (-q[0] * q[0]).exp());
        let st = CqgState::new(chart.clone(), rho, Field::filled(chart.grid(), 0.0), Units::default()).unwrap();
        let h = hamiltonian_density(&st, &ExternalFields::harmonic(1.0, 1.0, vec![0.0; 3]), xi_conformal(3)).unwrap();
        let worst = h.data().iter().map(|&v| (v - 0.5).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn cfl_violation_suggests_a_step() {
        let chart = line(101, 5.0, false);
        let params = SolverParams {
            dt: 0.01,
            ..Default::default()
        };
        match params.check(&chart, &Units::default()) {
            Err(Error::Cfl { max_dt, .. }) => assert!((max_dt - 0.5 * 0.01).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn legendre_transform_matches_hamiltonian_density() {
        let chart = line(101, 6.0, false);
        let rho = Field::from_fn(chart.grid(), |q| (-(q[0] - 0.3) * (q[0] - 0.3) / 1.7).exp());
        let s = Field::from_fn(chart.grid(), |q| 0.4 * q[0] - 0.2 * q[0] * q[0]);
        let st = CqgState::new(chart.clone(), rho, s, Units { hbar: 1.0, mass: 2.0 }).unwrap();
        let fields = ExternalFields::harmonic(2.0, 0.7, vec![0.0; 3]);
        let xi = xi_conformal(3);
        let ctx = LagrangianContext::new(&st, &fields, xi).unwrap();
        let h = hamiltonian_density(&st, &fields, xi).unwrap();
        for i in [20usize, 50, 77] {
            let q = [i, 0, 0];
            let x = chart.grid().axis(0).coord(i);
            let qdot = [(0.4 - 0.4 * x) / 2.0, 0.0, 0.0];
            let p = ctx.momentum(&q, &qdot).unwrap();
            let l = lagrangian(&q, &qdot, &ctx).unwrap();
            let legendre = p[0] * qdot[0] - l;
            let flat = chart.grid().ravel(&q).unwrap();
            assert!((legendre - h.data()[flat]).abs() < 1e-9, "{legendre} vs {}", h.data()[flat]);
            assert!((ctx.hamiltonian(&q, &p).unwrap() - legendre).abs() < 1e-12);
        }
    }
}
