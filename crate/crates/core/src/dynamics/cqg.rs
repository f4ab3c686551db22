//! RK4 integration of the coupled Hamilton–Jacobi and continuity equations.
//!
//! The density is carried as `u = ln ρ`. Points below `rho_floor · max ρ`
//! are not evolved: each right-hand side evaluation fills them by
//! extrapolation from the evolved region, and after each step their values
//! are re-extrapolated. Far tails of a smooth density are numerically
//! meaningless in log form (relative errors there are amplified by
//! `√(ρ_max/ρ)`), which is what the floor guards against.

use std::sync::Arc;

use super::{active_set, density_moments, fill, Evaluator, ExternalFields, Observables, Sampled, SolverParams};
use crate::error::{Error, Result};
use crate::geometry::MetricChart;
use crate::grid::ScalarField;
use crate::qstate::{CqgState, Units};
use crate::scalar::{lit, Real};

pub struct CqgSolver<T: Real> {
    chart: Arc<MetricChart<T>>,
    fields: ExternalFields<T>,
    params: SolverParams<T>,
    units: Units<T>,
    xi: T,
    windings: Vec<T>,
    jumps: Vec<T>,
    log_rho: Vec<T>,
    action: Vec<T>,
    time: T,
    steps: usize,
    static_fields: Option<Sampled<T>>,
    frozen_curvature: Option<Vec<T>>,
    masked_mass: T,
    warned: bool,
}

impl<T: Real> CqgSolver<T> {
    pub fn new(state: &CqgState<T>, fields: ExternalFields<T>, params: SolverParams<T>) -> Result<Self> {
        state.validate()?;
        params.check(&state.chart, &state.units)?;
        fields.check(&state.chart)?;
        if state.chart.dim() < 3 {
            return Err(Error::Dimension {
                found: state.chart.dim(),
                reason: "the curvature coupling needs n > 2; embed lower-dimensional problems".into(),
            });
        }
        let static_fields = if fields.is_static() {
            Some(fields.sample(&state.chart, state.time)?)
        } else {
            None
        };
        let mut solver = CqgSolver {
            chart: state.chart.clone(),
            xi: params.xi_for(state.chart.dim()),
            units: state.units,
            windings: state.windings.clone(),
            jumps: state.action_jumps(),
            log_rho: state.rho.data().iter().map(|r| r.ln()).collect(),
            action: state.action.data().to_vec(),
            time: state.time,
            steps: 0,
            static_fields,
            frozen_curvature: None,
            masked_mass: T::zero(),
            warned: false,
            fields,
            params,
        };
        let known = active_set(solver.chart.grid(), &solver.log_rho, solver.params.rho_floor);
        solver.slave_masked(&known);
        Ok(solver)
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn params(&self) -> &SolverParams<T> {
        &self.params
    }

    pub fn xi(&self) -> T {
        self.xi
    }

    pub fn log_density(&self) -> &[T] {
        &self.log_rho
    }

    pub fn action(&self) -> &[T] {
        &self.action
    }

    pub fn density(&self) -> Vec<T> {
        self.log_rho.iter().map(|u| u.exp()).collect()
    }

    /// Relative mass carried by masked points at the start of the last step.
    pub fn masked_mass(&self) -> T {
        self.masked_mass
    }

    pub fn state(&self) -> Result<CqgState<T>> {
        let shape = self.chart.grid().shape().to_vec();
        let mut st = CqgState::new(
            self.chart.clone(),
            ScalarField::new(shape.clone(), self.density())?,
            ScalarField::new(shape, self.action.clone())?,
            self.units,
        )?
        .with_windings(self.windings.clone())?;
        st.time = self.time;
        Ok(st)
    }

    fn sampled(&self, t: T) -> Result<Sampled<T>> {
        match &self.static_fields {
            Some(s) => Ok(s.clone()),
            None => self.fields.sample(&self.chart, t),
        }
    }

    fn evaluator(&self) -> Evaluator<'_, T> {
        Evaluator {
            chart: &self.chart,
            units: self.units,
            xi: self.xi,
            dissipation: self.params.dissipation,
            jumps: &self.jumps,
        }
    }

    /// Replaces masked values by extrapolation, capping `ln ρ` at the
    /// evolved maximum so a poor extrapolant cannot run away.
    fn slave_masked(&mut self, known: &[bool]) {
        let grid = self.chart.grid();
        let zeros = vec![T::zero(); self.chart.dim()];
        let top = self
            .log_rho
            .iter()
            .zip(known)
            .filter(|(_, &k)| k)
            .map(|(&u, _)| u)
            .fold(T::neg_infinity(), T::max);
        fill::extrapolate(grid, &mut self.log_rho, known, &zeros, 2);
        fill::extrapolate(grid, &mut self.action, known, &self.jumps, 2);
        for (u, &k) in self.log_rho.iter_mut().zip(known) {
            if !k && *u > top {
                *u = top;
            }
        }
    }

    fn check_masked_mass(&mut self, known: &[bool]) -> Result<()> {
        let w = self.chart.volume_weights();
        let (mut total, mut masked) = (T::zero(), T::zero());
        for p in 0..w.len() {
            let m = w[p] * self.log_rho[p].exp();
            total = total + m;
            if !known[p] {
                masked = masked + m;
            }
        }
        let fraction = if total > T::zero() { masked / total } else { T::zero() };
        self.masked_mass = fraction;
        let limit = self.params.masked_mass_limit;
        if fraction > limit {
            return Err(Error::Limiter {
                clipped: fraction.to_f64().unwrap_or(f64::NAN),
                limit: limit.to_f64().unwrap_or(f64::NAN),
            });
        }
        if !self.warned && fraction > limit * lit(1e-3) {
            log::warn!("t = {}: masked points carry relative mass {fraction:e}", self.time);
            self.warned = true;
        }
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        let dt = self.params.dt;
        let half = lit::<T>(0.5);
        let known = active_set(self.chart.grid(), &self.log_rho, self.params.rho_floor);
        self.check_masked_mass(&known)?;
        let refresh = self.params.curvature_refresh;
        let t0 = self.time;
        let f0 = self.sampled(t0)?;
        let mut frozen = self.frozen_curvature.take();
        if refresh == 1 || self.steps % refresh == 0 {
            frozen = None;
        }
        let eval = self.evaluator();
        let (u0, s0) = (&self.log_rho, &self.action);
        let k1 = eval.rates(u0, s0, &known, &f0, frozen.as_deref())?;
        if refresh > 1 && frozen.is_none() {
            frozen = Some(k1.curvature.clone());
        }

        let axpy = |x: &[T], a: T, y: &[T]| -> Vec<T> { x.iter().zip(y).map(|(&x, &y)| x + a * y).collect() };
        let fh = self.sampled(t0 + half * dt)?;
        let k2 = eval.rates(
            &axpy(u0, half * dt, &k1.log_rho),
            &axpy(s0, half * dt, &k1.action),
            &known,
            &fh,
            frozen.as_deref(),
        )?;
        let k3 = eval.rates(
            &axpy(u0, half * dt, &k2.log_rho),
            &axpy(s0, half * dt, &k2.action),
            &known,
            &fh,
            frozen.as_deref(),
        )?;
        let f1 = self.sampled(t0 + dt)?;
        let k4 = eval.rates(
            &axpy(u0, dt, &k3.log_rho),
            &axpy(s0, dt, &k3.action),
            &known,
            &f1,
            frozen.as_deref(),
        )?;
        let sixth = dt / lit(6.0);
        let two = lit::<T>(2.0);
        let combine = |x: &[T], a: &[T], b: &[T], c: &[T], d: &[T]| -> Vec<T> {
            (0..x.len())
                .map(|p| x[p] + sixth * (a[p] + two * b[p] + two * c[p] + d[p]))
                .collect()
        };
        let u1 = combine(u0, &k1.log_rho, &k2.log_rho, &k3.log_rho, &k4.log_rho);
        let s1 = combine(s0, &k1.action, &k2.action, &k3.action, &k4.action);
        self.frozen_curvature = frozen;
        self.log_rho = u1;
        self.action = s1;
        self.slave_masked(&known);
        self.time = t0 + dt;
        self.steps += 1;
        let finite = self
            .log_rho
            .iter()
            .zip(&self.action)
            .zip(&known)
            .all(|((u, s), &k)| !k || (u.is_finite() && s.is_finite()));
        if !finite {
            return Err(Error::Blowup {
                time: self.time.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    /// Steps until `t_end` is reached, calling `observe` after every step.
    pub fn run_until(&mut self, t_end: T, mut observe: impl FnMut(&Self) -> Result<()>) -> Result<()> {
        let steps = self.params.steps_to(t_end - self.time);
        for _ in 0..steps {
            self.step()?;
            observe(self)?;
        }
        Ok(())
    }

    /// `H` at the current state, from the same evaluation the stepper uses.
    pub fn hamiltonian(&self) -> Result<Vec<T>> {
        let known = active_set(self.chart.grid(), &self.log_rho, self.params.rho_floor);
        let eval = Evaluator {
            dissipation: T::zero(),
            ..self.evaluator()
        };
        let f = self.sampled(self.time)?;
        let r = eval.rates(&self.log_rho, &self.action, &known, &f, None)?;
        let mut h: Vec<T> = r.action.into_iter().map(|x| -x).collect();
        fill::extrapolate(self.chart.grid(), &mut h, &known, &vec![T::zero(); self.chart.dim()], 0);
        Ok(h)
    }

    pub fn observables(&self) -> Result<Observables<T>> {
        let rho = self.density();
        let (norm, mean, width) = density_moments(&self.chart, &rho);
        let h = self.hamiltonian()?;
        let w = self.chart.volume_weights();
        let energy = (0..rho.len()).fold(T::zero(), |acc, p| acc + w[p] * rho[p] * h[p]) / norm;
        Ok(Observables {
            time: self.time,
            norm,
            mean,
            width,
            energy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{xi_conformal, Source};
    use crate::grid::{Axis, Field};

    fn chart(count: usize, half: f64) -> Arc<MetricChart<f64>> {
        Arc::new(MetricChart::euclidean_embedded(vec![Axis::uniform("x", -half, half, count, false)], 3).unwrap())
    }

    fn gaussian(chart: &Arc<MetricChart<f64>>, x0: f64, sigma: f64) -> CqgState<f64> {
        let rho = Field::from_fn(chart.grid(), |q| {
            (-(q[0] - x0) * (q[0] - x0) / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt()
        });
        CqgState::new(chart.clone(), rho, Field::filled(chart.grid(), 0.0), Units::default()).unwrap()
    }

    #[test]
    fn ground_state_stays_put() {
        let c = chart(129, 8.0);
        let h = c.grid().min_spacing();
        let params = SolverParams {
            dt: 0.4 * h * h,
            ..Default::default()
        };
        let st = gaussian(&c, 0.0, std::f64::consts::FRAC_1_SQRT_2);
        let mut s = CqgSolver::new(&st, ExternalFields::harmonic(1.0, 1.0, vec![0.0; 3]), params).unwrap();
        for _ in 0..200 {
            s.step().unwrap();
        }
        let rho = s.density();
        for (a, b) in rho.iter().zip(st.rho.data()) {
            assert!((a - b).abs() < 1e-10);
        }
        // S = −E₀ t.
        let mid = 64;
        assert!((s.action()[mid] + 0.5 * s.time()).abs() < 1e-10);
    }

    #[test]
    fn norm_is_conserved_per_step() {
        let c = chart(129, 10.0);
        let h = c.grid().min_spacing();
        let params = SolverParams {
            dt: 0.4 * h * h,
            ..Default::default()
        };
        let st = gaussian(&c, 1.0, 0.8);
        let mut s = CqgSolver::new(&st, ExternalFields::none(), params).unwrap();
        let mut last = s.observables().unwrap().norm;
        for _ in 0..50 {
            s.step().unwrap();
            let n = s.observables().unwrap().norm;
            assert!(((n - last) / last).abs() < 1e-9);
            last = n;
        }
    }

    #[test]
    fn refuses_two_dimensional_charts() {
        let c = Arc::new(
            MetricChart::euclidean(vec![
                Axis::uniform("x", -1.0, 1.0, 11, false),
                Axis::uniform("y", -1.0, 1.0, 11, false),
            ])
            .unwrap(),
        );
        let st = CqgState::new(c.clone(), Field::filled(c.grid(), 1.0), Field::filled(c.grid(), 0.0), Units::default()).unwrap();
        let params = SolverParams {
            dt: 1e-4,
            ..Default::default()
        };
        assert!(matches!(
            CqgSolver::new(&st, ExternalFields::none(), params),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn potential_offset_only_shifts_the_action() {
        let c = chart(101, 8.0);
        let h = c.grid().min_spacing();
        let params = SolverParams {
            dt: 0.4 * h * h,
            xi: Some(xi_conformal(3)),
            ..Default::default()
        };
        let st = gaussian(&c, 0.5, 1.0);
        let base = ExternalFields::with_potential(Source::function(|q: &[f64], _| 0.1 * q[0] * q[0]));
        let mut a = CqgSolver::new(&st, base.clone(), params.clone()).unwrap();
        let mut b = CqgSolver::new(&st, base.offset_potential(3.0), params).unwrap();
        for _ in 0..100 {
            a.step().unwrap();
            b.step().unwrap();
        }
        for p in 0..a.density().len() {
            assert!((a.density()[p] - b.density()[p]).abs() < 1e-12);
        }
        let shift = b.action()[50] - a.action()[50];
        assert!((shift + 3.0 * a.time()).abs() < 1e-9);
    }
}
