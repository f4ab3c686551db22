//! Single spinning particle on ℝ³ × SO(3) in z-y-z Euler angles.
//!
//! Spinor components are indexed by `σ = −s, …, s` in increasing order. The
//! orientation coefficients are `c_σ(α, β) = e^{iσα} d^s_{σ,s}(β)`, the
//! highest-weight column of the small Wigner matrix.

use num_complex::Complex;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, PoleLimit, Result};
use crate::grid::{Field, ScalarField};
use crate::scalar::{count, from_i64, lit, Real};

/// Spin `s = two_s / 2`, a nonnegative integer or half-integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinValue {
    pub two_s: u32,
}

impl SpinValue {
    pub fn from_two_s(two_s: u32) -> Self {
        SpinValue { two_s }
    }

    pub fn s(&self) -> Ratio<i64> {
        Ratio::new(self.two_s as i64, 2)
    }

    pub fn value<T: Real>(&self) -> T {
        count::<T>(self.two_s as usize) / lit(2.0)
    }

    /// `s_ζ = ℏs`.
    pub fn helicity<T: Real>(&self, hbar: T) -> T {
        hbar * self.value::<T>()
    }

    pub fn multiplicity(&self) -> usize {
        self.two_s as usize + 1
    }

    pub fn is_fermionic(&self) -> bool {
        self.two_s % 2 == 1
    }

    /// `2σ` for `σ = −s, …, s`.
    pub fn two_sigmas(&self) -> impl Iterator<Item = i64> {
        let two_s = self.two_s as i64;
        (0..=self.two_s as i64).map(move |k| 2 * k - two_s)
    }

    pub fn check_two_sigma(&self, two_sigma: i64) -> Result<()> {
        let two_s = self.two_s as i64;
        if two_sigma.abs() > two_s || (two_sigma + two_s) % 2 != 0 {
            return Err(Error::SigmaRange {
                two_sigma,
                two_s: self.two_s,
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for SpinValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.two_s % 2 == 0 {
            write!(f, "{}", self.two_s / 2)
        } else {
            write!(f, "{}/2", self.two_s)
        }
    }
}

/// Accepts `s` iff `2s` is a nonnegative integer.
pub fn validate_spin(s: Ratio<i64>) -> Result<SpinValue> {
    let two_s = s * 2;
    if s.is_negative() || !two_s.is_integer() {
        return Err(Error::Quantization(s.to_string()));
    }
    let two_s = two_s
        .to_integer()
        .to_u32()
        .ok_or_else(|| Error::Quantization(s.to_string()))?;
    Ok(SpinValue { two_s })
}

/// Parses `"3/2"`, `"-1"` or a finite decimal such as `"0.7"` exactly.
pub fn parse_rational(text: &str) -> Result<Ratio<i64>> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((num, den)) = t.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| bad())?;
        let den: i64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(num, den));
    }
    let (negative, digits) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() || !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let scale = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
    let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
    let frac_val: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let num = whole.checked_mul(scale).and_then(|w| w.checked_add(frac_val)).ok_or_else(bad)?;
    let r = Ratio::new(num, scale);
    Ok(if negative { -r } else { r })
}

/// Configuration of one spinning particle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinConfig<T> {
    pub position: [T; 3],
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    /// Angular momentum along the laboratory z axis.
    pub sz: T,
    pub mass: T,
    /// Length setting the moment of inertia `mλ²` of the frame.
    pub lambda: T,
    pub hbar: T,
}

impl<T: Real> SpinConfig<T> {
    /// Unit mass, length and `ℏ`, at the origin.
    pub fn natural(beta: T, sz: T) -> Self {
        SpinConfig {
            position: [T::zero(); 3],
            alpha: T::zero(),
            beta,
            gamma: T::zero(),
            sz,
            mass: T::one(),
            lambda: T::one(),
            hbar: T::one(),
        }
    }

    /// `|s_z| ≤ ℏs`, `β ∈ [0, π]`, positive `m` and `λ`.
    pub fn check(&self, s: SpinValue) -> Result<()> {
        let bound = s.helicity(self.hbar);
        if !(self.sz.abs() <= bound) {
            return Err(Error::Precondition(format!("s_z = {} outside [-{bound}, {bound}]", self.sz)));
        }
        if !(self.beta >= T::zero() && self.beta <= T::PI()) {
            return Err(Error::Precondition(format!("β = {} outside [0, π]", self.beta)));
        }
        if !(self.mass > T::zero() && self.lambda > T::zero() && self.hbar > T::zero()) {
            return Err(Error::Precondition("m, λ and ℏ must be positive".into()));
        }
        Ok(())
    }
}

/// Whether accumulated Euler-angle changes stay inside one admissible motion
/// window: `Δγ ∈ [0, 2π)` and `|Δα| < 2π − Δγ`.
pub fn in_motion_window<T: Real>(delta_gamma: T, delta_alpha: T) -> bool {
    delta_gamma >= T::zero() && delta_gamma < T::TAU() && delta_alpha.abs() < T::TAU() - delta_gamma
}

/// `dγ/dt = (s_ζ − s_z cos β) / (mλ² sin² β)`.
pub fn gamma_rate<T: Real>(cfg: &SpinConfig<T>, s: SpinValue) -> Result<T> {
    cfg.check(s)?;
    let helicity = s.helicity(cfg.hbar);
    let inertia = cfg.mass * cfg.lambda * cfg.lambda;
    let at_pole = |numerator: T| {
        let limit = if numerator == T::zero() {
            // ℏs(1 ∓ cos β) / (mλ² sin² β) → ℏs / (2mλ²).
            PoleLimit::Finite((helicity / (lit::<T>(2.0) * inertia)).to_f64().unwrap_or(f64::NAN))
        } else {
            PoleLimit::Divergent
        };
        Err(Error::Pole {
            beta: cfg.beta.to_f64().unwrap_or(f64::NAN),
            limit,
        })
    };
    if cfg.beta == T::zero() {
        return at_pole(helicity - cfg.sz);
    }
    if cfg.beta == T::PI() {
        return at_pole(helicity + cfg.sz);
    }
    let sin = cfg.beta.sin();
    Ok((helicity - cfg.sz * cfg.beta.cos()) / (inertia * sin * sin))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatchetReport<T> {
    pub samples: usize,
    /// Samples exactly at β ∈ {0, π}; finite limits enter the minimum.
    pub poles: usize,
    pub violations: usize,
    pub min_rate: T,
    /// `(s_z, β)` of the minimum.
    pub argmin: (T, T),
}

/// Evaluates the γ rate on every `(s_z, β)` sample for the given `m`, `λ`
/// and `ℏ`. Any negative rate is an error.
pub fn ratchet_check<T: Real>(
    samples: impl IntoIterator<Item = (T, T)>,
    s: SpinValue,
    mass: T,
    lambda: T,
    hbar: T,
) -> Result<RatchetReport<T>> {
    let mut report = RatchetReport {
        samples: 0,
        poles: 0,
        violations: 0,
        min_rate: T::infinity(),
        argmin: (T::nan(), T::nan()),
    };
    let mut first_violation = None;
    for (sz, beta) in samples {
        let cfg = SpinConfig {
            sz,
            beta,
            mass,
            lambda,
            hbar,
            ..SpinConfig::natural(beta, sz)
        };
        report.samples += 1;
        let rate = match gamma_rate(&cfg, s) {
            Ok(r) => r,
            Err(Error::Pole { limit, .. }) => {
                report.poles += 1;
                match limit {
                    PoleLimit::Finite(v) => lit(v),
                    PoleLimit::Divergent => T::infinity(),
                }
            }
            Err(e) => return Err(e),
        };
        if rate < T::zero() || rate.is_nan() {
            report.violations += 1;
            first_violation.get_or_insert((sz, beta, rate));
        }
        if rate < report.min_rate {
            report.min_rate = rate;
            report.argmin = (sz, beta);
        }
    }
    if let Some((sz, beta, rate)) = first_violation {
        return Err(Error::InvariantViolation(format!(
            "{} negative γ rate(s); first at s_z = {sz}, β = {beta}: {rate}",
            report.violations
        )));
    }
    Ok(report)
}

fn binomial<T: Real>(n: u32, k: u32) -> T {
    let k = k.min(n - k);
    (0..k).fold(T::one(), |acc, i| acc * count::<T>((n - i) as usize) / count::<T>((i + 1) as usize))
}

/// `d^s_{σ,s}(β) = √C(2s, s+σ) cos^{s+σ}(β/2) sin^{s−σ}(β/2)`, with `σ`
/// given as `2σ`.
pub fn wigner_small_d<T: Real>(s: SpinValue, two_sigma: i64, beta: T) -> Result<T> {
    s.check_two_sigma(two_sigma)?;
    let up = ((s.two_s as i64 + two_sigma) / 2) as u32;
    let down = s.two_s - up;
    let half = beta / lit(2.0);
    Ok(binomial::<T>(s.two_s, up).sqrt() * half.cos().powi(up as i32) * half.sin().powi(down as i32))
}

/// `c_σ(α, β) = e^{iσα} d^s_{σ,s}(β)`.
pub fn orientation_coefficient<T: Real>(s: SpinValue, two_sigma: i64, alpha: T, beta: T) -> Result<Complex<T>> {
    let d = wigner_small_d(s, two_sigma, beta)?;
    let sigma = from_i64::<T>(two_sigma) / lit(2.0);
    Ok(Complex::from_polar(d, sigma * alpha))
}

/// `Ψ = e^{isγ} Σ_σ c_σ(α, β) ψ^σ` for spinor values ordered `σ = −s, …, s`.
pub fn assemble_single_spin<T: Real>(
    components: &[Complex<T>],
    s: SpinValue,
    alpha: T,
    beta: T,
    gamma: T,
) -> Result<Complex<T>> {
    if components.len() != s.multiplicity() {
        return Err(Error::Dimension {
            found: components.len(),
            reason: format!("spin {s} needs {} components", s.multiplicity()),
        });
    }
    let mut phi = Complex::<T>::zero();
    for (two_sigma, &psi) in s.two_sigmas().zip(components) {
        phi = phi + orientation_coefficient(s, two_sigma, alpha, beta)? * psi;
    }
    Ok(phi * Complex::from_polar(T::one(), s.value::<T>() * gamma))
}

/// `S = ℏsγ + S₀` split of an action sampled on a grid with a γ axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSplit<T> {
    /// γ-average of `S − ℏsγ`, on the grid with the γ axis removed.
    pub reduced: ScalarField<T>,
    /// Largest deviation of `S − ℏsγ` from that average.
    pub residual: T,
}

/// Splits `action` (shape `shape`, γ coordinates `gammas` along
/// `gamma_axis`) into `ℏsγ + S₀`.
pub fn decompose_action<T: Real>(
    action: &ScalarField<T>,
    gamma_axis: usize,
    gammas: &[T],
    s: SpinValue,
    hbar: T,
) -> Result<ActionSplit<T>> {
    let shape = action.shape().to_vec();
    if gamma_axis >= shape.len() {
        return Err(Error::Dimension {
            found: shape.len(),
            reason: format!("no axis {gamma_axis} for γ"),
        });
    }
    let ng = shape[gamma_axis];
    if gammas.len() != ng || ng == 0 {
        return Err(Error::Shape {
            expected: vec![ng],
            found: vec![gammas.len()],
        });
    }
    let inner: usize = shape[gamma_axis + 1..].iter().product();
    let outer: usize = shape[..gamma_axis].iter().product();
    let helicity = s.helicity(hbar);
    let data = action.data();
    let mut reduced = Vec::with_capacity(outer * inner);
    let mut residual = T::zero();
    for o in 0..outer {
        for i in 0..inner {
            let at = |g: usize| data[(o * ng + g) * inner + i] - helicity * gammas[g];
            let mean = (0..ng).map(at).fold(T::zero(), |a, b| a + b) / count::<T>(ng);
            for g in 0..ng {
                residual = residual.max((at(g) - mean).abs());
            }
            reduced.push(mean);
        }
    }
    let mut reduced_shape = shape.clone();
    reduced_shape.remove(gamma_axis);
    Ok(ActionSplit {
        reduced: Field::new(reduced_shape, reduced)?,
        residual,
    })
}
