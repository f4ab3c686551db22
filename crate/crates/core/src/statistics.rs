//! Identical spinning particles: product-state (anti)symmetrization,
//! exchange phases and the reduced and full many-particle functions.
//!
//! A many-particle tensor is stored densely in row-major order over the
//! indices `(σ₁, …, σ_N, r₁, …, r_N)`, each `σ` running over `−s, …, s` and
//! each `r` over a basis of size `d`.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exchange::Permutation;
use crate::scalar::{count, lit, Real};
use crate::spin::{orientation_coefficient, SpinValue};

/// Largest particle count handled by the dense permutation sum.
pub const MAX_PARTICLES: usize = 8;

/// Largest dense tensor, in complex entries.
pub const MAX_ENTRIES: usize = 1 << 24;

/// Residual above which [`exchange_test`] refuses to report a phase.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

/// One particle: `(2s + 1) × d` amplitudes, `σ` major.
#[derive(Clone, Debug, PartialEq)]
pub struct Spinor<T> {
    pub s: SpinValue,
    pub basis: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> Spinor<T> {
    pub fn new(s: SpinValue, basis: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let expected = s.multiplicity() * basis;
        if data.len() != expected {
            return Err(Error::Shape {
                expected: vec![s.multiplicity(), basis],
                found: vec![data.len()],
            });
        }
        Ok(Self { s, basis, data })
    }

    /// Unit amplitude on component `sigma_index` (0 is `σ = −s`) and basis
    /// state `r`.
    pub fn basis_state(s: SpinValue, basis: usize, sigma_index: usize, r: usize) -> Self {
        let mut data = vec![Complex::zero(); s.multiplicity() * basis];
        data[sigma_index * basis + r] = Complex::new(T::one(), T::zero());
        Self { s, basis, data }
    }

    pub fn at(&self, sigma_index: usize, r: usize) -> Complex<T> {
        self.data[sigma_index * self.basis + r]
    }

    /// Nested `[σ][r] = [re, im]`.
    pub fn to_json(&self) -> Value {
        nested(&self.data, &[self.s.multiplicity(), self.basis])
    }

    pub fn from_json(s: SpinValue, value: &Value) -> Result<Self> {
        let (data, shape) = flatten(value)?;
        match shape.as_slice() {
            [m, d] if *m == s.multiplicity() => Self::new(s, *d, data),
            _ => Err(Error::Shape {
                expected: vec![s.multiplicity(), 0],
                found: shape,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiSpinor<T> {
    pub s: SpinValue,
    pub particles: usize,
    pub basis: usize,
    pub data: Vec<Complex<T>>,
}

/// Row-major shape `[m; N] ++ [d; N]`.
fn tensor_shape(m: usize, d: usize, n: usize) -> Vec<usize> {
    let mut shape = vec![m; n];
    shape.extend(std::iter::repeat(d).take(n));
    shape
}

fn checked_size(s: SpinValue, particles: usize, basis: usize) -> Result<usize> {
    if particles == 0 {
        return Err(Error::Precondition("at least one particle is needed".into()));
    }
    if particles > MAX_PARTICLES {
        return Err(Error::TooManyParticles {
            n: particles,
            max: MAX_PARTICLES,
        });
    }
    let single = s.multiplicity() * basis;
    let size = (0..particles).try_fold(1usize, |acc, _| acc.checked_mul(single));
    match size {
        Some(n) if n <= MAX_ENTRIES => Ok(n),
        _ => Err(Error::Precondition(format!(
            "{particles} particles over {single} single-particle states exceed {MAX_ENTRIES} entries"
        ))),
    }
}

impl<T: Real> MultiSpinor<T> {
    pub fn new(s: SpinValue, particles: usize, basis: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let size = checked_size(s, particles, basis)?;
        if data.len() != size {
            return Err(Error::Shape {
                expected: tensor_shape(s.multiplicity(), basis, particles),
                found: vec![data.len()],
            });
        }
        Ok(Self {
            s,
            particles,
            basis,
            data,
        })
    }

    pub fn zeros(s: SpinValue, particles: usize, basis: usize) -> Result<Self> {
        let size = checked_size(s, particles, basis)?;
        Ok(Self {
            s,
            particles,
            basis,
            data: vec![Complex::zero(); size],
        })
    }

    /// Unsymmetrized `ψ₁(x₁) ψ₂(x₂) ⋯ ψ_N(x_N)`.
    pub fn product(factors: &[Spinor<T>]) -> Result<Self> {
        let (s, basis) = common_shape(factors)?;
        let mut out = Self::zeros(s, factors.len(), basis)?;
        let mut slots = vec![(0, 0); factors.len()];
        for k in 0..out.data.len() {
            out.decode(k, &mut slots);
            out.data[k] = factors
                .iter()
                .zip(&slots)
                .fold(Complex::new(T::one(), T::zero()), |acc, (f, &(sg, r))| acc * f.at(sg, r));
        }
        Ok(out)
    }

    pub fn shape(&self) -> Vec<usize> {
        tensor_shape(self.s.multiplicity(), self.basis, self.particles)
    }

    /// `(σ index, r)` of every particle for flat index `k`.
    pub fn decode(&self, mut k: usize, slots: &mut [(usize, usize)]) {
        let (m, d, n) = (self.s.multiplicity(), self.basis, self.particles);
        for a in (0..n).rev() {
            slots[a].1 = k % d;
            k /= d;
        }
        for a in (0..n).rev() {
            slots[a].0 = k % m;
            k /= m;
        }
    }

    pub fn encode(&self, slots: &[(usize, usize)]) -> usize {
        let (m, d) = (self.s.multiplicity(), self.basis);
        let k = slots.iter().fold(0, |k, &(sg, _)| k * m + sg);
        slots.iter().fold(k, |k, &(_, r)| k * d + r)
    }

    pub fn at(&self, slots: &[(usize, usize)]) -> Complex<T> {
        self.data[self.encode(slots)]
    }

    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.data
            .iter()
            .zip(&other.data)
            .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// `(Pψ)(x₁, …, x_N) = ψ(x_{p(1)}, …, x_{p(N)})`, permuting `σ` and `r`
    /// slots together.
    pub fn permuted(&self, p: &Permutation) -> Result<Self> {
        if p.len() != self.particles {
            return Err(Error::Shape {
                expected: vec![self.particles],
                found: vec![p.len()],
            });
        }
        let mut out = self.clone();
        let mut slots = vec![(0, 0); self.particles];
        let mut source = slots.clone();
        for k in 0..self.data.len() {
            self.decode(k, &mut slots);
            for a in 0..self.particles {
                source[a] = slots[p.apply(a)];
            }
            out.data[k] = self.at(&source);
        }
        Ok(out)
    }

    /// `(1/N!) Σ_p (−1)^{2s k_p} Pψ`.
    pub fn project(&self) -> Self {
        let mut out = Self {
            data: vec![Complex::zero(); self.data.len()],
            ..self.clone()
        };
        let fermion = self.s.is_fermionic();
        let mut total = 0usize;
        for_each_permutation(self.particles, |p, odd| {
            let term = self.permuted(p).expect("sizes agree");
            let sign = if fermion && odd { -T::one() } else { T::one() };
            for (o, t) in out.data.iter_mut().zip(&term.data) {
                *o = *o + t * sign;
            }
            total += 1;
        });
        let scale = T::one() / count::<T>(total);
        out.data.iter_mut().for_each(|z| *z = *z * scale);
        out
    }

    /// Nested arrays over `σ₁, …, σ_N, r₁, …, r_N`, leaves `[re, im]`.
    pub fn to_json(&self) -> Value {
        nested(&self.data, &self.shape())
    }

    pub fn from_json(s: SpinValue, value: &Value) -> Result<Self> {
        let (data, shape) = flatten(value)?;
        let n = shape.len() / 2;
        if shape.len() % 2 != 0 || n == 0 || shape[..n].iter().any(|&m| m != s.multiplicity()) {
            return Err(Error::Shape {
                expected: tensor_shape(s.multiplicity(), shape.last().copied().unwrap_or(0), n.max(1)),
                found: shape,
            });
        }
        let d = shape[n];
        if shape[n..].iter().any(|&x| x != d) {
            return Err(Error::Shape {
                expected: tensor_shape(s.multiplicity(), d, n),
                found: shape,
            });
        }
        Self::new(s, n, d, data)
    }
}

fn common_shape<T: Real>(factors: &[Spinor<T>]) -> Result<(SpinValue, usize)> {
    let first = factors
        .first()
        .ok_or_else(|| Error::Precondition("at least one particle is needed".into()))?;
    for f in factors {
        if f.s != first.s || f.basis != first.basis || f.data.len() != first.data.len() {
            return Err(Error::Shape {
                expected: vec![first.s.multiplicity(), first.basis],
                found: vec![f.s.multiplicity(), f.basis],
            });
        }
    }
    Ok((first.s, first.basis))
}

/// Calls `visit(p, odd)` for every permutation of `n` labels.
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&Permutation, bool)) {
    fn go(
        map: &mut Vec<usize>,
        used: &mut [bool],
        inversions: usize,
        visit: &mut impl FnMut(&Permutation, bool),
    ) {
        let n = used.len();
        if map.len() == n {
            let p = Permutation::new(map.clone()).expect("built as a bijection");
            visit(&p, inversions % 2 == 1);
            return;
        }
        for b in 0..n {
            if used[b] {
                continue;
            }
            let added = used[b + 1..].iter().filter(|&&u| u).count();
            used[b] = true;
            map.push(b);
            go(map, used, inversions + added, visit);
            map.pop();
            used[b] = false;
        }
    }
    go(&mut Vec::with_capacity(n), &mut vec![false; n], 0, &mut visit);
}

/// `(1/√N!) Σ_p (−1)^{2s k_p} Π_a ψ_a(x_{p(a)})`.
pub fn symmetrize<T: Real>(factors: &[Spinor<T>]) -> Result<MultiSpinor<T>> {
    let (s, basis) = common_shape(factors)?;
    let n = factors.len();
    let mut out = MultiSpinor::zeros(s, n, basis)?;
    let fermion = s.is_fermionic();
    let factorial = (1..=n).fold(T::one(), |acc, k| acc * count::<T>(k));
    let scale = T::one() / factorial.sqrt();
    let mut slots = vec![(0, 0); n];
    let mut matrix = vec![Complex::<T>::zero(); n * n];
    let mut table = Vec::new();
    for k in 0..out.data.len() {
        out.decode(k, &mut slots);
        for a in 0..n {
            for b in 0..n {
                matrix[a * n + b] = factors[a].at(slots[b].0, slots[b].1);
            }
        }
        out.data[k] = permutation_sum(&matrix, n, fermion, &mut table) * scale;
    }
    Ok(out)
}

/// `Σ_p sign(p)^{[fermion]} Π_a M[a][p(a)]`.
///
/// Permutations sharing their first rows share the partial sum over the
/// remaining rows, which depends only on the set of columns already taken:
/// `f(used) = Σ_{b ∉ used} M[|used|][b] (−1)^{#{c ∈ used : c > b}} f(used ∪ {b})`.
fn permutation_sum<T: Real>(matrix: &[Complex<T>], n: usize, fermion: bool, table: &mut Vec<Complex<T>>) -> Complex<T> {
    let full = (1usize << n) - 1;
    table.clear();
    table.resize(1 << n, Complex::zero());
    table[full] = Complex::new(T::one(), T::zero());
    for used in (0..full).rev() {
        let row = used.count_ones() as usize;
        let mut acc = Complex::zero();
        for b in 0..n {
            if used & (1 << b) != 0 {
                continue;
            }
            let term = matrix[row * n + b] * table[used | (1 << b)];
            acc = if fermion && (used >> (b + 1)).count_ones() % 2 == 1 {
                acc - term
            } else {
                acc + term
            };
        }
        table[used] = acc;
    }
    table[0]
}

/// `λ` with `Pψ = λψ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangePhase<T> {
    pub re: T,
    pub im: T,
    /// `‖Pψ − λψ‖ / ‖ψ‖`.
    pub residual: T,
}

/// Applies `p` to the particle slots and returns the eigenvalue, or
/// [`Error::NotEigenstate`] with the residual.
pub fn exchange_test<T: Real>(psi: &MultiSpinor<T>, p: &Permutation) -> Result<ExchangePhase<T>> {
    let norm2 = psi.inner(psi).re;
    if !(norm2 > T::zero()) {
        return Err(Error::Precondition("exchange test of a zero tensor".into()));
    }
    let moved = psi.permuted(p)?;
    let lambda = psi.inner(&moved) / norm2;
    let residual = moved
        .data
        .iter()
        .zip(&psi.data)
        .map(|(m, a)| (m - lambda * a).norm_sqr())
        .sum::<T>()
        .sqrt()
        / norm2.sqrt();
    if residual > lit(EIGEN_TOLERANCE) {
        return Err(Error::NotEigenstate {
            residual: residual.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(ExchangePhase {
        re: lambda.re,
        im: lambda.im,
        residual,
    })
}

/// `c_{σ₁…σ_N}(α₁, β₁, …) = Π_a e^{iσ_a α_a} d^s_{σ_a,s}(β_a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    pub s: SpinValue,
    pub angles: Vec<(T, T)>,
    /// Row-major over `σ₁, …, σ_N`.
    pub data: Vec<Complex<T>>,
}

impl<T: Real> CoefficientField<T> {
    pub fn product(s: SpinValue, angles: &[(T, T)]) -> Result<Self> {
        let n = angles.len();
        checked_size(s, n, 1)?;
        let m = s.multiplicity();
        let single: Vec<Vec<Complex<T>>> = angles
            .iter()
            .map(|&(alpha, beta)| {
                s.two_sigmas()
                    .map(|ts| orientation_coefficient(s, ts, alpha, beta))
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        let size = m.pow(n as u32);
        let mut data = Vec::with_capacity(size);
        for k in 0..size {
            let mut rest = k;
            let mut c = Complex::new(T::one(), T::zero());
            for a in (0..n).rev() {
                c = c * single[a][rest % m];
                rest /= m;
            }
            data.push(c);
        }
        Ok(Self {
            s,
            angles: angles.to_vec(),
            data,
        })
    }

    fn sigma_indices(&self, mut k: usize, out: &mut [usize]) {
        let m = self.s.multiplicity();
        for a in (0..out.len()).rev() {
            out[a] = k % m;
            k /= m;
        }
    }

    /// The field at angles `q ∘ p` holding `c_σ(q)` at index `σ ∘ p`, i.e.
    /// `p` applied to the labels of both the `σ` indices and the angles.
    pub fn relabeled(&self, p: &Permutation) -> Self {
        let n = self.angles.len();
        let m = self.s.multiplicity();
        let angles = (0..n).map(|a| self.angles[p.apply(a)]).collect();
        let mut sig = vec![0; n];
        let mut data = vec![Complex::zero(); self.data.len()];
        for (k, &c) in self.data.iter().enumerate() {
            self.sigma_indices(k, &mut sig);
            let moved = (0..n).fold(0, |acc, a| acc * m + sig[p.apply(a)]);
            data[moved] = c;
        }
        Self {
            s: self.s,
            angles,
            data,
        }
    }
}

/// Coefficient model used by the reduced function: `(σ indices, angles)`
/// to the coefficient.
pub type Coefficients<'a, T> = dyn Fn(&[usize], &[(T, T)]) -> Complex<T> + 'a;

/// Product-form coefficients.
pub fn product_coefficients<T: Real>(s: SpinValue) -> impl Fn(&[usize], &[(T, T)]) -> Complex<T> {
    let sigmas: Vec<i64> = s.two_sigmas().collect();
    move |sig, angles| {
        sig.iter()
            .zip(angles)
            .fold(Complex::new(T::one(), T::zero()), |acc, (&i, &(alpha, beta))| {
                acc * orientation_coefficient(s, sigmas[i], alpha, beta).expect("index in range")
            })
    }
}

fn check_arguments<T: Real>(psi: &MultiSpinor<T>, angles: &[(T, T)], positions: &[usize]) -> Result<()> {
    if angles.len() != psi.particles || positions.len() != psi.particles {
        return Err(Error::Shape {
            expected: vec![psi.particles, psi.particles],
            found: vec![angles.len(), positions.len()],
        });
    }
    if let Some(&r) = positions.iter().find(|&&r| r >= psi.basis) {
        return Err(Error::Shape {
            expected: vec![psi.basis],
            found: vec![r],
        });
    }
    Ok(())
}

/// `Φ = Σ_σ c_σ(α, β) ψ^σ(r)` with arbitrary coefficients.
pub fn assemble_reduced_with<T: Real>(
    psi: &MultiSpinor<T>,
    coefficients: &Coefficients<'_, T>,
    angles: &[(T, T)],
    positions: &[usize],
) -> Result<Complex<T>> {
    check_arguments(psi, angles, positions)?;
    let n = psi.particles;
    let m = psi.s.multiplicity();
    let mut sig = vec![0; n];
    let mut slots: Vec<(usize, usize)> = positions.iter().map(|&r| (0, r)).collect();
    let mut phi = Complex::zero();
    for k in 0..m.pow(n as u32) {
        let mut rest = k;
        for a in (0..n).rev() {
            sig[a] = rest % m;
            rest /= m;
        }
        for a in 0..n {
            slots[a].0 = sig[a];
        }
        phi = phi + coefficients(&sig, angles) * psi.at(&slots);
    }
    Ok(phi)
}

/// `Φ(q̃₁, …, q̃_N)` with product coefficients; particle `a` sits at
/// orientation `angles[a] = (α_a, β_a)` and basis point `positions[a]`.
pub fn assemble_reduced<T: Real>(psi: &MultiSpinor<T>, angles: &[(T, T)], positions: &[usize]) -> Result<Complex<T>> {
    check_arguments(psi, angles, positions)?;
    let field = CoefficientField::product(psi.s, angles)?;
    let n = psi.particles;
    let mut slots: Vec<(usize, usize)> = positions.iter().map(|&r| (0, r)).collect();
    let mut sig = vec![0; n];
    let mut phi = Complex::zero();
    for (k, c) in field.data.iter().enumerate() {
        field.sigma_indices(k, &mut sig);
        for a in 0..n {
            slots[a].0 = sig[a];
        }
        phi = phi + c * psi.at(&slots);
    }
    Ok(phi)
}

/// `Ψ = e^{is Σ_a γ_a} Φ`.
pub fn assemble_full<T: Real>(
    psi: &MultiSpinor<T>,
    angles: &[(T, T)],
    gammas: &[T],
    positions: &[usize],
) -> Result<Complex<T>> {
    if gammas.len() != psi.particles {
        return Err(Error::Shape {
            expected: vec![psi.particles],
            found: vec![gammas.len()],
        });
    }
    let phi = assemble_reduced(psi, angles, positions)?;
    let total = gammas.iter().fold(T::zero(), |acc, &g| acc + g);
    Ok(phi * Complex::from_polar(T::one(), psi.s.value::<T>() * total))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck<T> {
    pub samples: usize,
    pub max_deviation: T,
}

/// Compares `Φ` at permuted arguments with the original coefficients
/// contracted against the slot-permuted tensor, for random orientations,
/// basis points and permutations, using product coefficients.
pub fn permutation_equivalence_check<T: Real, R: Rng + ?Sized>(
    psi: &MultiSpinor<T>,
    samples: usize,
    rng: &mut R,
) -> Result<EquivalenceCheck<T>> {
    let c = product_coefficients::<T>(psi.s);
    permutation_equivalence_check_with(psi, &c, samples, rng)
}

pub fn permutation_equivalence_check_with<T: Real, R: Rng + ?Sized>(
    psi: &MultiSpinor<T>,
    coefficients: &Coefficients<'_, T>,
    samples: usize,
    rng: &mut R,
) -> Result<EquivalenceCheck<T>> {
    let n = psi.particles;
    let mut worst = T::zero();
    for _ in 0..samples {
        let angles: Vec<(T, T)> = (0..n)
            .map(|_| (lit::<T>(rng.gen_range(0.0..std::f64::consts::TAU)), lit::<T>(rng.gen_range(0.0..std::f64::consts::PI))))
            .collect();
        let positions: Vec<usize> = (0..n).map(|_| rng.gen_range(0..psi.basis)).collect();
        let p = Permutation::random(n, rng);
        let moved_angles: Vec<(T, T)> = (0..n).map(|a| angles[p.apply(a)]).collect();
        let moved_positions: Vec<usize> = (0..n).map(|a| positions[p.apply(a)]).collect();
        let lhs = assemble_reduced_with(psi, coefficients, &moved_angles, &moved_positions)?;
        let rhs = assemble_reduced_with(&psi.permuted(&p)?, coefficients, &angles, &positions)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(EquivalenceCheck {
        samples,
        max_deviation: worst,
    })
}

fn nested<T: Real>(data: &[Complex<T>], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => {
            let z = data[0];
            Value::from(vec![z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN)])
        }
        Some((&len, rest)) => {
            let stride: usize = rest.iter().product();
            Value::Array((0..len).map(|i| nested(&data[i * stride..], rest)).collect())
        }
    }
}

/// Inverse of [`nested`]; returns the flat data and the shape.
fn flatten<T: Real>(value: &Value) -> Result<(Vec<Complex<T>>, Vec<usize>)> {
    fn leaf(v: &Value) -> Option<(f64, f64)> {
        match v.as_array()?.as_slice() {
            [re, im] if re.is_number() && im.is_number() => Some((re.as_f64()?, im.as_f64()?)),
            _ => None,
        }
    }
    fn go<T: Real>(v: &Value, depth: usize, shape: &mut Vec<usize>, out: &mut Vec<Complex<T>>) -> Result<()> {
        if let Some((re, im)) = leaf(v) {
            if depth != shape.len() {
                return Err(Error::Parse("ragged tensor".into()));
            }
            out.push(Complex::new(lit(re), lit(im)));
            return Ok(());
        }
        let items = v
            .as_array()
            .ok_or_else(|| Error::Parse("tensor entries must be arrays or [re, im] pairs".into()))?;
        if depth == shape.len() {
            if !out.is_empty() {
                return Err(Error::Parse("ragged tensor".into()));
            }
            shape.push(items.len());
        } else if shape[depth] != items.len() {
            return Err(Error::Parse("ragged tensor".into()));
        }
        items.iter().try_for_each(|x| go(x, depth + 1, shape, out))
    }
    let mut shape = Vec::new();
    let mut out = Vec::new();
    go(value, 0, &mut shape, &mut out)?;
    Ok((out, shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half() -> SpinValue {
        SpinValue::from_two_s(1)
    }

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn single_particle_is_unchanged() {
        let f = Spinor::new(half(), 2, vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let psi = symmetrize(&[f.clone()]).unwrap();
        assert_eq!(psi.data, f.data);
    }

    #[test]
    fn identical_fermions_vanish() {
        let f = Spinor::new(half(), 2, vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(symmetrize(&[f.clone(), f]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn two_fermions_match_the_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut random = || {
            Spinor::new(
                half(),
                3,
                (0..6).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
            )
            .unwrap()
        };
        let (f, g) = (random(), random());
        let psi = symmetrize(&[f.clone(), g.clone()]).unwrap();
        let mut slots = [(0, 0); 2];
        for k in 0..psi.data.len() {
            psi.decode(k, &mut slots);
            let [x, y] = slots;
            let det = (f.at(x.0, x.1) * g.at(y.0, y.1) - f.at(y.0, y.1) * g.at(x.0, x.1)) / 2f64.sqrt();
            assert!((psi.data[k] - det).norm() < 1e-15);
            assert!((psi.data[k] + psi.at(&[y, x])).norm() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_fermions_have_unit_norm() {
        let f = Spinor::basis_state(half(), 2, 0, 1);
        let g = Spinor::basis_state(half(), 2, 1, 1);
        let psi = symmetrize::<f64>(&[f, g]).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let swap = Permutation::transposition(2, 1, 2).unwrap();
        let phase = exchange_test(&psi, &swap).unwrap();
        assert!((phase.re + 1.0).abs() < 1e-12 && phase.im.abs() < 1e-12);
    }

    #[test]
    fn generic_tensor_is_no_eigenstate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = (0..36).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let psi = MultiSpinor::new(half(), 2, 3, data).unwrap();
        let swap = Permutation::transposition(2, 1, 2).unwrap();
        match exchange_test(&psi, &swap) {
            Err(Error::NotEigenstate { residual }) => assert!(residual > 0.1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spin_zero_ignores_angles() {
        let s = SpinValue::from_two_s(0);
        let f = Spinor::new(s, 3, vec![c(1.0, 2.0), c(3.0, 0.5), c(-1.0, 0.0)]).unwrap();
        let psi = MultiSpinor::product(&[f.clone()]).unwrap();
        let phi = assemble_reduced(&psi, &[(0.3, 1.1)], &[1]).unwrap();
        assert_eq!(phi, f.at(0, 1));
    }

    #[test]
    fn north_pole_picks_the_top_component() {
        let s = SpinValue::from_two_s(3);
        let data: Vec<_> = (0..8).map(|k| c(k as f64, -(k as f64))).collect();
        let f = Spinor::new(s, 2, data).unwrap();
        let psi = MultiSpinor::product(&[f.clone()]).unwrap();
        let phi = assemble_reduced(&psi, &[(0.0, 0.0)], &[1]).unwrap();
        assert!((phi - f.at(3, 1)).norm() < 1e-14);
        // At β = 0 only α + γ is meaningful; α alone contributes e^{isα}.
        let phi = assemble_reduced(&psi, &[(0.9, 0.0)], &[1]).unwrap();
        assert!((phi - f.at(3, 1) * Complex::from_polar(1.0, 1.5 * 0.9)).norm() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let f = Spinor::basis_state(half(), 2, 0, 1);
        let g = Spinor::new(half(), 2, vec![c(0.5, 0.5), c(0.0, 0.0), c(0.5, -0.5), c(0.0, 0.0)]).unwrap();
        let psi = symmetrize::<f64>(&[f.clone(), g]).unwrap();
        let back = MultiSpinor::from_json(half(), &psi.to_json()).unwrap();
        assert_eq!(back, psi);
        assert_eq!(Spinor::from_json(half(), &f.to_json()).unwrap(), f);
        assert!(MultiSpinor::<f64>::from_json(half(), &serde_json::json!([[[1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]])).is_err());
    }

    #[test]
    fn refuses_too_many_particles() {
        let f = Spinor::<f64>::basis_state(SpinValue::from_two_s(0), 1, 0, 0);
        assert!(matches!(
            symmetrize(&vec![f; 9]),
            Err(Error::TooManyParticles { n: 9, max: 8 })
        ));
    }
}
