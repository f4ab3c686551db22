//! Linear wave equation `iℏ ∂_tΨ = HΨ` with
//! `HΨ = (1/2m)(−iℏ∇ − a)²Ψ + (V + (ξℏ²/m) R_g)Ψ`.
//!
//! Constant metrics with constant `a` use Strang splitting with exact
//! kinetic propagation: FFT along periodic axes (boundary twist included in
//! the wavenumbers) and the odd extension along open axes, which places a
//! hard wall one spacing beyond each end. Anything else falls back to RK4 on
//! fourth-order differences with the same walls.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{density_moments, ExternalFields, Observables, Sampled, SolverParams, Source};
use crate::error::{Error, Result};
use crate::geometry::{gradient, laplace_beltrami_raw, riemann_scalar, MetricChart};
use crate::grid::{ComplexField, Edge};
use crate::qstate::{Units, WaveField};
use crate::scalar::{count, lit, Real};

type C<T> = Complex<T>;

pub struct ReferenceSolver<T: Real> {
    chart: Arc<MetricChart<T>>,
    fields: ExternalFields<T>,
    params: SolverParams<T>,
    units: Units<T>,
    twist: Vec<T>,
    psi: Vec<C<T>>,
    time: T,
    steps: usize,
    /// `(ξℏ²/m) R_g`.
    curvature: Vec<T>,
    static_fields: Option<Sampled<T>>,
    spectral: Option<Spectral<T>>,
}

impl<T: Real> ReferenceSolver<T> {
    pub fn new(w: &WaveField<T>, fields: ExternalFields<T>, params: SolverParams<T>) -> Result<Self> {
        let chart = w.chart.clone();
        chart.grid().check_shape(w.psi.shape())?;
        params.check(&chart, &w.units)?;
        fields.check(&chart)?;
        let xi = params.xi_for(chart.dim());
        let Units { hbar, mass } = w.units;
        let curvature = riemann_scalar(&chart)?
            .data()
            .iter()
            .map(|&r| xi * hbar * hbar / mass * r)
            .collect();
        let static_fields = if fields.is_static() {
            Some(fields.sample(&chart, w.time)?)
        } else {
            None
        };
        let spectral = Spectral::plan(&chart, &fields, &w.twist, w.units, params.dt);
        Ok(ReferenceSolver {
            twist: w.twist.clone(),
            psi: w.psi.data().to_vec(),
            time: w.time,
            steps: 0,
            units: w.units,
            curvature,
            static_fields,
            spectral,
            chart,
            fields,
            params,
        })
    }

    pub fn is_spectral(&self) -> bool {
        self.spectral.is_some()
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn psi(&self) -> &[C<T>] {
        &self.psi
    }

    pub fn density(&self) -> Vec<T> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn wave(&self) -> Result<WaveField<T>> {
        let mut w = WaveField::new(
            self.chart.clone(),
            ComplexField::new(self.chart.grid().shape().to_vec(), self.psi.clone())?,
            self.units,
        )?;
        w.twist = self.twist.clone();
        w.time = self.time;
        Ok(w)
    }

    fn sampled(&self, t: T) -> Result<Sampled<T>> {
        match &self.static_fields {
            Some(s) => Ok(s.clone()),
            None => self.fields.sample(&self.chart, t),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let dt = self.params.dt;
        let t0 = self.time;
        if self.spectral.is_some() {
            let hbar = self.units.hbar;
            let half = lit::<T>(0.5) * dt / hbar;
            let v0 = self.sampled(t0)?.potential;
            for (z, (&v, &r)) in self.psi.iter_mut().zip(v0.iter().zip(&self.curvature)) {
                *z = *z * C::from_polar(T::one(), -(v + r) * half);
            }
            if let Some(sp) = &self.spectral {
                sp.kinetic(&mut self.psi);
            }
            let v1 = self.sampled(t0 + dt)?.potential;
            for (z, (&v, &r)) in self.psi.iter_mut().zip(v1.iter().zip(&self.curvature)) {
                *z = *z * C::from_polar(T::one(), -(v + r) * half);
            }
        } else {
            let half = lit::<T>(0.5);
            let f0 = self.sampled(t0)?;
            let fh = self.sampled(t0 + half * dt)?;
            let f1 = self.sampled(t0 + dt)?;
            let psi = &self.psi;
            let axpy = |a: T, k: &[C<T>]| -> Vec<C<T>> { psi.iter().zip(k).map(|(&x, &k)| x + k * a).collect() };
            let k1 = self.rate(psi, &f0)?;
            let k2 = self.rate(&axpy(half * dt, &k1), &fh)?;
            let k3 = self.rate(&axpy(half * dt, &k2), &fh)?;
            let k4 = self.rate(&axpy(dt, &k3), &f1)?;
            let sixth = dt / lit(6.0);
            let two = lit::<T>(2.0);
            self.psi = (0..psi.len())
                .map(|p| psi[p] + (k1[p] + k2[p] * two + k3[p] * two + k4[p]) * sixth)
                .collect();
        }
        self.time = t0 + dt;
        self.steps += 1;
        if !self.psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Blowup {
                time: self.time.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    /// `∂_tΨ = −(i/ℏ) HΨ`.
    fn rate(&self, psi: &[C<T>], f: &Sampled<T>) -> Result<Vec<C<T>>> {
        let h = self.apply_h(psi, f)?;
        let factor = C::new(T::zero(), -T::one() / self.units.hbar);
        Ok(h.into_iter().map(|z| z * factor).collect())
    }

    fn apply_h(&self, psi: &[C<T>], f: &Sampled<T>) -> Result<Vec<C<T>>> {
        let chart = &*self.chart;
        let n = chart.dim();
        let Units { hbar, mass } = self.units;
        let half = lit::<T>(0.5);
        let lap = laplace_beltrami_raw(chart, psi, &self.twist, Edge::Odd)?;
        let mut out: Vec<C<T>> = (0..psi.len())
            .map(|p| lap[p] * (-half * hbar * hbar / mass) + psi[p] * (f.potential[p] + self.curvature[p]))
            .collect();
        if let Some((a, div)) = &f.vector {
            let grad = gradient(chart, psi, &self.twist, Edge::Odd)?;
            let i_hbar = C::new(T::zero(), hbar / (lit::<T>(2.0) * mass));
            for p in 0..psi.len() {
                let inv = chart.inverse_at(p);
                let mut a_dot_grad = C::new(T::zero(), T::zero());
                let mut a2 = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        let gij = inv[i * n + j];
                        a_dot_grad = a_dot_grad + grad[j][p] * (gij * a[i][p]);
                        a2 = a2 + gij * a[i][p] * a[j][p];
                    }
                }
                out[p] = out[p] + i_hbar * (a_dot_grad * lit::<T>(2.0) + psi[p] * div[p]) + psi[p] * (half * a2 / mass);
            }
        }
        Ok(out)
    }

    /// `Σ |Ψ|² √g Πh`: with walls beyond the end points every sample carries
    /// a full cell, and this is the norm the propagator conserves.
    pub fn norm(&self) -> T {
        let w = self.weights();
        self.psi.iter().zip(&w).fold(T::zero(), |acc, (z, &w)| acc + w * z.norm_sqr())
    }

    fn weights(&self) -> Vec<T> {
        let cell = self.chart.grid().axes().iter().fold(T::one(), |acc, a| acc * a.spacing);
        (0..self.psi.len()).map(|p| cell * self.chart.sqrt_g(p)).collect()
    }

    /// `⟨Ψ, HΨ⟩ / ⟨Ψ, Ψ⟩` with difference operators.
    pub fn energy(&self) -> Result<T> {
        let f = self.sampled(self.time)?;
        let h = self.apply_h(&self.psi, &f)?;
        let w = self.weights();
        let e = (0..h.len()).fold(T::zero(), |acc, p| acc + w[p] * (self.psi[p].conj() * h[p]).re);
        Ok(e / self.norm())
    }

    pub fn observables(&self) -> Result<Observables<T>> {
        let (norm, mean, width) = density_moments(&self.chart, &self.density());
        Ok(Observables {
            time: self.time,
            norm,
            mean,
            width,
            energy: self.energy()?,
        })
    }
}

#[derive(Clone, Copy, Debug)]
enum Extension {
    Periodic,
    /// Odd about virtual zeros at index −1 and `n`.
    Odd,
}

/// Exact kinetic propagator `exp(−i dt K/ℏ)` in a Fourier basis.
struct Spectral<T: Real> {
    shape: Vec<usize>,
    ext_shape: Vec<usize>,
    ext_strides: Vec<usize>,
    kinds: Vec<Extension>,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
    /// Per axis, `e^{−iτ j/n}` removing the boundary twist.
    untwist: Vec<Vec<C<T>>>,
    propagator: Vec<C<T>>,
}

impl<T: Real> Spectral<T> {
    fn plan(chart: &MetricChart<T>, fields: &ExternalFields<T>, twist: &[T], units: Units<T>, dt: T) -> Option<Self> {
        if !chart.is_constant() {
            return None;
        }
        let n = chart.dim();
        let grid = chart.grid();
        let a: Vec<T> = if fields.vector.is_empty() {
            vec![T::zero(); n]
        } else {
            fields.vector.iter().map(Source::uniform_value).collect::<Option<Vec<T>>>()?
        };
        let inv = chart.inverse_at(0).to_vec();
        let kinds: Vec<Extension> = grid
            .axes()
            .iter()
            .map(|ax| if ax.periodic { Extension::Periodic } else { Extension::Odd })
            .collect();
        for (i, kind) in kinds.iter().enumerate() {
            if let Extension::Odd = kind {
                // Odd extension only diagonalizes a kinetic term that is even
                // in this wavenumber.
                if a[i] != T::zero() || (0..n).any(|j| j != i && inv[i * n + j] != T::zero()) {
                    return None;
                }
            }
        }
        let shape = grid.shape().to_vec();
        let ext_shape: Vec<usize> = shape
            .iter()
            .zip(&kinds)
            .map(|(&m, k)| match k {
                Extension::Periodic => m,
                Extension::Odd => 2 * (m + 1),
            })
            .collect();
        let mut ext_strides = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            ext_strides[k] = ext_strides[k + 1] * ext_shape[k + 1];
        }
        let mut planner = FftPlanner::<T>::new();
        let forward = ext_shape.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        let inverse = ext_shape.iter().map(|&m| planner.plan_fft_inverse(m)).collect();
        let untwist = (0..n)
            .map(|k| {
                let m = shape[k];
                (0..m)
                    .map(|j| {
                        let tau = if grid.axis(k).periodic { twist[k] } else { T::zero() };
                        C::from_polar(T::one(), -tau * count::<T>(j) / count::<T>(m))
                    })
                    .collect()
            })
            .collect();
        // Wavenumbers per axis.
        let wavenumbers: Vec<Vec<T>> = (0..n)
            .map(|k| {
                let m = ext_shape[k];
                let h = grid.axis(k).spacing;
                let length = count::<T>(m) * h;
                let tau = match kinds[k] {
                    Extension::Periodic => twist[k],
                    Extension::Odd => T::zero(),
                };
                (0..m)
                    .map(|j| {
                        let signed = if 2 * j <= m { j as i64 } else { j as i64 - m as i64 };
                        (T::TAU() * crate::scalar::from_i64::<T>(signed) + tau) / length
                    })
                    .collect()
            })
            .collect();
        let Units { hbar, mass } = units;
        let total: usize = ext_shape.iter().product();
        let half = lit::<T>(0.5);
        let propagator = (0..total)
            .map(|e| {
                let idx: Vec<usize> = (0..n).map(|k| (e / ext_strides[k]) % ext_shape[k]).collect();
                let p: Vec<T> = (0..n).map(|k| hbar * wavenumbers[k][idx[k]] - a[k]).collect();
                let mut energy = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        energy = energy + inv[i * n + j] * p[i] * p[j];
                    }
                }
                energy = half * energy / mass;
                C::from_polar(T::one(), -energy * dt / hbar)
            })
            .collect();
        Some(Spectral {
            shape,
            ext_shape,
            ext_strides,
            kinds,
            forward,
            inverse,
            untwist,
            propagator,
        })
    }

    fn kinetic(&self, psi: &mut [C<T>]) {
        let n = self.shape.len();
        let total: usize = self.ext_shape.iter().product();
        let zero = C::new(T::zero(), T::zero());
        let mut ext = vec![zero; total];
        let mut strides = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.shape[k + 1];
        }
        // Scatter into the extended array, applying odd images.
        for (p, &z) in psi.iter().enumerate() {
            let idx: Vec<usize> = (0..n).map(|k| (p / strides[k]) % self.shape[k]).collect();
            let mut base = z;
            for k in 0..n {
                base = base * self.untwist[k][idx[k]];
            }
            let odd: Vec<usize> = (0..n).filter(|&k| matches!(self.kinds[k], Extension::Odd)).collect();
            for mask in 0..(1usize << odd.len()) {
                let mut e = 0;
                let mut sign = false;
                for k in 0..n {
                    let pos = match self.kinds[k] {
                        Extension::Periodic => idx[k],
                        Extension::Odd => {
                            let bit = odd.iter().position(|&o| o == k).unwrap();
                            if mask >> bit & 1 == 1 {
                                sign = !sign;
                                self.ext_shape[k] - 1 - idx[k]
                            } else {
                                idx[k] + 1
                            }
                        }
                    };
                    e += pos * self.ext_strides[k];
                }
                ext[e] = if sign { -base } else { base };
            }
        }
        self.transform(&mut ext, &self.forward);
        for (z, &u) in ext.iter_mut().zip(&self.propagator) {
            *z = *z * u;
        }
        self.transform(&mut ext, &self.inverse);
        let scale = T::one() / count::<T>(total);
        for (p, z) in psi.iter_mut().enumerate() {
            let idx: Vec<usize> = (0..n).map(|k| (p / strides[k]) % self.shape[k]).collect();
            let mut e = 0;
            let mut value_twist = C::new(T::one(), T::zero());
            for k in 0..n {
                let pos = match self.kinds[k] {
                    Extension::Periodic => idx[k],
                    Extension::Odd => idx[k] + 1,
                };
                e += pos * self.ext_strides[k];
                value_twist = value_twist * self.untwist[k][idx[k]].conj();
            }
            *z = ext[e] * value_twist * scale;
        }
    }

    fn transform(&self, data: &mut [C<T>], plans: &[Arc<dyn Fft<T>>]) {
        let n = self.ext_shape.len();
        let mut line = Vec::new();
        for k in 0..n {
            let m = self.ext_shape[k];
            if m == 1 {
                continue;
            }
            let stride = self.ext_strides[k];
            for start in 0..data.len() {
                if (start / stride) % m != 0 {
                    continue;
                }
                line.clear();
                line.extend((0..m).map(|i| data[start + i * stride]));
                plans[k].process(&mut line);
                for (i, &z) in line.iter().enumerate() {
                    data[start + i * stride] = z;
                }
            }
        }
    }
}
