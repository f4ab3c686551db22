//! Standard one-dimensional initial states with closed-form evolution,
//! embedded in three dimensions along the first axis.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::ExternalFields;
use crate::error::{Error, Result};
use crate::geometry::MetricChart;
use crate::grid::{Axis, Field};
use crate::qstate::{CqgState, Units};
use crate::scalar::{lit, Real};

/// Dimension used to embed one-dimensional problems.
pub const EMBEDDING_DIM: usize = 3;

/// Flat chart with one resolved axis and homogeneous padding.
pub fn line_chart<T: Real>(count: usize, min: T, max: T, periodic: bool) -> Result<Arc<MetricChart<T>>> {
    Ok(Arc::new(MetricChart::euclidean_embedded(
        vec![Axis::uniform("x", min, max, count, periodic)],
        EMBEDDING_DIM,
    )?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Preset<T> {
    /// `V ≡ 0`, Gaussian of width `sigma` at `x0` with momentum `p0`.
    FreeGaussian { sigma: T, x0: T, p0: T },
    /// Ground state of `V = ½ m ω² x²`.
    OscillatorGround { omega: T },
    /// Ground-state profile displaced to `x0` with momentum `p0`.
    Coherent { omega: T, x0: T, p0: T },
    /// `ρ` constant, `S = ℏ k x` on a periodic axis.
    PlaneWave { k: T },
}

impl<T: Real> Preset<T> {
    pub fn fields(&self, units: Units<T>) -> ExternalFields<T> {
        match *self {
            Preset::OscillatorGround { omega } | Preset::Coherent { omega, .. } => {
                ExternalFields::harmonic(units.mass, omega, vec![T::zero(); EMBEDDING_DIM])
            }
            _ => ExternalFields::none(),
        }
    }

    /// Width of the initial density.
    pub fn sigma(&self, units: Units<T>) -> Option<T> {
        match *self {
            Preset::FreeGaussian { sigma, .. } => Some(sigma),
            Preset::OscillatorGround { omega } | Preset::Coherent { omega, .. } => {
                Some((units.hbar / (lit::<T>(2.0) * units.mass * omega)).sqrt())
            }
            Preset::PlaneWave { .. } => None,
        }
    }

    pub fn state(&self, chart: Arc<MetricChart<T>>, units: Units<T>) -> Result<CqgState<T>> {
        let grid = chart.grid();
        let axis = grid.axis(0).clone();
        match *self {
            Preset::PlaneWave { k } => {
                if !axis.periodic {
                    return Err(Error::Precondition("a plane wave needs a periodic first axis".into()));
                }
                let length = axis.length();
                let rho = Field::filled(grid, T::one() / length);
                let action = Field::from_fn(grid, |q| units.hbar * k * (q[0] - axis.min));
                let mut windings = vec![T::zero(); chart.dim()];
                windings[0] = k * length / T::TAU();
                CqgState::new(chart.clone(), rho, action, units)?.with_windings(windings)
            }
            _ => {
                let rho = Field::from_fn(grid, |q| self.density(q[0], T::zero(), units));
                let (x0, p0) = self.launch();
                let action = Field::from_fn(grid, |q| p0 * (q[0] - x0));
                CqgState::new(chart.clone(), rho, action, units)
            }
        }
    }

    fn launch(&self) -> (T, T) {
        match *self {
            Preset::FreeGaussian { x0, p0, .. } | Preset::Coherent { x0, p0, .. } => (x0, p0),
            _ => (T::zero(), T::zero()),
        }
    }

    /// Closed-form centre `⟨x⟩(t)`.
    pub fn mean(&self, t: T, units: Units<T>) -> T {
        match *self {
            Preset::FreeGaussian { x0, p0, .. } => x0 + p0 * t / units.mass,
            Preset::OscillatorGround { .. } | Preset::PlaneWave { .. } => T::zero(),
            Preset::Coherent { omega, x0, p0 } => {
                x0 * (omega * t).cos() + p0 / (units.mass * omega) * (omega * t).sin()
            }
        }
    }

    /// Closed-form width; `σ(t)² = σ₀²(1 + (ℏt/2mσ₀²)²)` for the free packet.
    pub fn width(&self, t: T, units: Units<T>) -> Option<T> {
        let sigma = self.sigma(units)?;
        Some(match self {
            Preset::FreeGaussian { .. } => {
                let r = units.hbar * t / (lit::<T>(2.0) * units.mass * sigma * sigma);
                sigma * (T::one() + r * r).sqrt()
            }
            _ => sigma,
        })
    }

    /// Closed-form density at `x`, time `t` (normalized on the line).
    pub fn density(&self, x: T, t: T, units: Units<T>) -> T {
        match (self.width(t, units), self) {
            (Some(w), _) => {
                let d = x - self.mean(t, units);
                (-(d * d) / (lit::<T>(2.0) * w * w)).exp() / (T::TAU() * w * w).sqrt()
            }
            (None, _) => T::nan(),
        }
    }

    /// `ρ` at every grid point at time `t` (plane waves stay uniform).
    pub fn density_on(&self, chart: &MetricChart<T>, t: T, units: Units<T>) -> Vec<T> {
        let grid = chart.grid();
        match self {
            Preset::PlaneWave { .. } => vec![T::one() / grid.axis(0).length(); grid.len()],
            _ => (0..grid.len()).map(|p| self.density(grid.coord(p, 0), t, units)).collect(),
        }
    }

    /// Energy per particle of the exact state.
    pub fn energy(&self, units: Units<T>) -> T {
        let half = lit::<T>(0.5);
        let Units { hbar, mass } = units;
        match *self {
            Preset::FreeGaussian { sigma, p0, .. } => {
                half * p0 * p0 / mass + hbar * hbar / (lit::<T>(8.0) * mass * sigma * sigma)
            }
            Preset::OscillatorGround { omega } => half * hbar * omega,
            Preset::Coherent { omega, x0, p0 } => {
                half * hbar * omega + half * p0 * p0 / mass + half * mass * omega * omega * x0 * x0
            }
            Preset::PlaneWave { k } => half * hbar * hbar * k * k / mass,
        }
    }

    /// Classical period or doubling time, whichever is natural.
    pub fn natural_time(&self, units: Units<T>) -> T {
        match *self {
            Preset::FreeGaussian { sigma, .. } => {
                // σ(t) = 2σ₀ at t = 2√3 m σ₀²/ℏ.
                lit::<T>(2.0) * lit::<T>(3.0).sqrt() * units.mass * sigma * sigma / units.hbar
            }
            Preset::OscillatorGround { omega } | Preset::Coherent { omega, .. } => T::TAU() / omega,
            Preset::PlaneWave { k } => {
                if k == T::zero() {
                    T::one()
                } else {
                    units.mass / (units.hbar * k.abs())
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{hamiltonian_density, xi_conformal};
    use crate::qstate::norm;

    #[test]
    fn doubling_time_doubles_the_width() {
        let p = Preset::FreeGaussian {
            sigma: 0.7f64,
            x0: 0.0,
            p0: 0.0,
        };
        let u = Units { hbar: 1.3, mass: 0.8 };
        let t = p.natural_time(u);
        assert!((p.width(t, u).unwrap() - 1.4).abs() < 1e-14);
    }

    #[test]
    fn presets_are_normalized() {
        let chart = line_chart(401, -12.0, 12.0, false).unwrap();
        for p in [
            Preset::FreeGaussian {
                sigma: 1.0,
                x0: 0.5,
                p0: 1.0,
            },
            Preset::OscillatorGround { omega: 1.0 },
            Preset::Coherent {
                omega: 1.0,
                x0: 2.0,
                p0: 0.0,
            },
        ] {
            let st = p.state(chart.clone(), Units::default()).unwrap();
            assert!((norm::<f64>(&st) - 1.0).abs() < 1e-12);
        }
        let ring = line_chart(64, 0.0, 2.0, true).unwrap();
        let st = Preset::PlaneWave { k: 3.0 }.state(ring, Units::default()).unwrap();
        assert!((norm::<f64>(&st) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn plane_wave_energy_density_is_kinetic() {
        let ring = line_chart(64, 0.0, 2.0, true).unwrap();
        let p = Preset::PlaneWave { k: std::f64::consts::PI };
        let st = p.state(ring, Units::default()).unwrap();
        let h = hamiltonian_density(&st, &p.fields(Units::default()), xi_conformal(3)).unwrap();
        for &v in h.data() {
            assert!((v - p.energy(Units::default())).abs() < 1e-12);
        }
    }
}
