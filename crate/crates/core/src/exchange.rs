//! Permutation parity and exchange paths on the lattice model of the
//! configuration square `(γ_a, γ_b) ∈ [0, 2π)²`.
//!
//! Angles are multiples of `2π/K`. A path is stored by its lifted vertices
//! (plain integers, no reduction mod `K`), so wraps through the square's
//! edges are explicit and displacements are exact. The torus point of a
//! vertex is its reduction mod `K`. The boundary of the strip is the
//! diagonal `i ≡ j (mod K)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spin::SpinValue;

/// Largest lattice resolution [`enumerate_exchange_paths`] accepts by default.
pub const DEFAULT_ENUMERATION_BOUND: u64 = 128;

/// Bijection on `{0, …, N−1}`; `apply(i)` is the image of `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || seen[m] {
                return Err(Error::Precondition(format!("{map:?} is not a bijection")));
            }
            seen[m] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    /// From images written on `{1, …, N}`.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.iter().any(|&i| i == 0) {
            return Err(Error::Precondition("one-based images start at 1".into()));
        }
        Self::new(images.iter().map(|&i| i - 1).collect())
    }

    /// Product of one-based cycles, e.g. `[[1, 2, 3]]` sends 1→2→3→1.
    /// Cycles act right to left.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut p = Self::identity(n);
        for cycle in cycles.iter().rev() {
            let mut map: Vec<usize> = (0..n).collect();
            for (k, &from) in cycle.iter().enumerate() {
                let to = cycle[(k + 1) % cycle.len()];
                if from == 0 || to == 0 || from > n || to > n {
                    return Err(Error::Precondition(format!("cycle {cycle:?} leaves 1..={n}")));
                }
                map[from - 1] = to - 1;
            }
            p = Self::new(map)?.compose(&p);
        }
        Ok(p)
    }

    /// Swap of one-based labels `a` and `b`.
    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        Self::from_cycles(n, &[vec![a, b]])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "composing permutations of different sizes");
        Self {
            map: other.map.iter().map(|&i| self.map[i]).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut map = vec![0; self.len()];
        for (i, &m) in self.map.iter().enumerate() {
            map[m] = i;
        }
        Self { map }
    }

    /// Number of pairs `i < j` with `p(i) > p(j)`.
    pub fn inversions(&self) -> usize {
        let n = self.len();
        (0..n)
            .map(|i| (i + 1..n).filter(|&j| self.map[i] > self.map[j]).count())
            .sum()
    }

    pub fn parity(&self) -> Parity {
        // Bubble sort records p ∘ s₁ ∘ … ∘ s_k = id, hence p = s_k ∘ … ∘ s₁.
        let mut a = self.map.clone();
        let mut swaps = Vec::new();
        for end in (1..a.len()).rev() {
            for i in 0..end {
                if a[i] > a[i + 1] {
                    a.swap(i, i + 1);
                    swaps.push(i);
                }
            }
        }
        swaps.reverse();
        Parity {
            k_p: swaps.len(),
            adjacent: swaps,
        }
    }

    /// `(−1)^{k_p}`.
    pub fn signature(&self) -> i8 {
        if self.inversions() % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

impl fmt::Display for Permutation {
    /// One-based cycle notation; the identity prints as `()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut seen = vec![false; self.len()];
        let mut wrote = false;
        for start in 0..self.len() {
            if seen[start] || self.map[start] == start {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push((i + 1).to_string());
                i = self.map[i];
            }
            write!(f, "({})", cycle.join(" "))?;
            wrote = true;
        }
        if !wrote {
            write!(f, "()")?;
        }
        Ok(())
    }
}

/// Decomposition into adjacent transpositions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parity {
    /// Number of transpositions used.
    pub k_p: usize,
    /// `p = s_{a[0]} ∘ s_{a[1]} ∘ …`, where `s_i` swaps `i` and `i + 1`
    /// (zero-based).
    pub adjacent: Vec<usize>,
}

impl Parity {
    pub fn is_even(&self) -> bool {
        self.k_p % 2 == 0
    }

    /// Rebuilds the permutation from the transpositions.
    pub fn compose(&self, n: usize) -> Permutation {
        let mut p = Permutation::identity(n);
        for &i in &self.adjacent {
            let mut s = Permutation::identity(n);
            s.map.swap(i, i + 1);
            p = p.compose(&s);
        }
        p
    }
}

/// Change of the reduced action and the resulting phase factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionJump {
    pub k_p: usize,
    /// `ΔS₀` in units of `πℏ`: `−2 k_p s`.
    pub half_turns: i64,
    /// `(−1)^{2 k_p s}`.
    pub phase: i8,
}

impl ActionJump {
    pub fn delta_s0<T: Real>(&self, hbar: T) -> T {
        T::from(self.half_turns).expect("half-turn count fits the scalar") * T::PI() * hbar
    }
}

/// `ΔS₀ = −2πℏ k_p s` for `k_p` adjacent transpositions.
pub fn action_jump(s: SpinValue, p: &Permutation) -> ActionJump {
    action_jump_for(s, p.parity().k_p)
}

pub fn action_jump_for(s: SpinValue, k_p: usize) -> ActionJump {
    let half_turns = -(k_p as i64) * i64::from(s.two_s);
    ActionJump {
        k_p,
        half_turns,
        phase: if half_turns % 2 == 0 { 1 } else { -1 },
    }
}

/// Lattice point on the lifted configuration square.
pub type Vertex = (i64, i64);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangePath {
    pub k: u64,
    /// Lifted vertices; `(i mod K, j mod K)` is the torus point.
    pub vertices: Vec<Vertex>,
}

impl ExchangePath {
    pub fn new(k: u64, vertices: Vec<Vertex>) -> Result<Self> {
        if k == 0 || k > i64::MAX as u64 / 4 {
            return Err(Error::Precondition(format!("lattice resolution {k} out of range")));
        }
        Ok(Self { k, vertices })
    }

    /// From vertices already reduced to `[0, K)²`. Each step is lifted to its
    /// shortest representative, so steps must be shorter than `K/2` per axis.
    pub fn from_wrapped(k: u64, points: &[Vertex]) -> Result<Self> {
        let path = Self::new(k, Vec::new())?;
        let kk = k as i64;
        let mut vertices = Vec::with_capacity(points.len());
        for &(i, j) in points {
            if !(0..kk).contains(&i) || !(0..kk).contains(&j) {
                return Err(Error::Precondition(format!("({i}, {j}) outside the {k}×{k} lattice")));
            }
            let next = match vertices.last() {
                None => (i, j),
                Some(&(pi, pj)) => (pi + shortest(i - pi, kk), pj + shortest(j - pj, kk)),
            };
            vertices.push(next);
        }
        Ok(Self { vertices, ..path })
    }

    pub fn modulus(&self) -> i64 {
        self.k as i64
    }

    pub fn torus_point(&self, v: Vertex) -> Vertex {
        (v.0.rem_euclid(self.modulus()), v.1.rem_euclid(self.modulus()))
    }

    /// Total `(Δi, Δj)` in grid units.
    pub fn displacement(&self) -> Vertex {
        match (self.vertices.first(), self.vertices.last()) {
            (Some(a), Some(b)) => (b.0 - a.0, b.1 - a.1),
            _ => (0, 0),
        }
    }

    /// `Δγ_a + Δγ_b` in units of `2π`, whether or not the path is valid.
    pub fn winding(&self) -> Ratio<i64> {
        let (di, dj) = self.displacement();
        Ratio::new(di + dj, self.modulus())
    }

    /// The path with `γ_a` and `γ_b` exchanged.
    pub fn relabeled(&self) -> Self {
        Self {
            k: self.k,
            vertices: self.vertices.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }
}

fn shortest(d: i64, k: i64) -> i64 {
    let r = d.rem_euclid(k);
    if 2 * r > k {
        r - k
    } else {
        r
    }
}

/// Whether a path may touch the diagonal without crossing it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRule {
    /// Touching the diagonal counts as overtaking.
    #[default]
    Strict,
    /// Only leaving the starting band counts.
    Permissive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    Monotonicity,
    FullTurn,
    Endpoints,
    BoundaryCrossing,
}

impl Rejection {
    pub const ALL: [Rejection; 4] = [
        Rejection::Monotonicity,
        Rejection::FullTurn,
        Rejection::Endpoints,
        Rejection::BoundaryCrossing,
    ];
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rejection::Monotonicity => "monotonicity",
            Rejection::FullTurn => "full-turn",
            Rejection::Endpoints => "endpoints",
            Rejection::BoundaryCrossing => "boundary-crossing",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Valid,
    Rejected(Rejection),
}

impl Classification {
    pub fn is_valid(&self) -> bool {
        matches!(self, Classification::Valid)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Valid => f.write_str("valid"),
            Classification::Rejected(r) => write!(f, "rejected:{r}"),
        }
    }
}

/// Band `(m K, (m + 1) K)` of `i − j` containing an off-diagonal start.
fn band(d: i64, k: i64) -> (i64, i64) {
    let lo = d.div_euclid(k) * k;
    (lo, lo + k)
}

fn in_band(d: i64, (lo, hi): (i64, i64), rule: BoundaryRule) -> bool {
    match rule {
        BoundaryRule::Strict => lo < d && d < hi,
        BoundaryRule::Permissive => lo <= d && d <= hi,
    }
}

/// Checks a path from `start` to `end` (torus points) in the order
/// empty, monotonicity, full turn, boundary, endpoints.
pub fn is_valid_exchange_path(path: &ExchangePath, start: Vertex, end: Vertex) -> Result<Classification> {
    classify(path, start, end, BoundaryRule::Strict)
}

pub fn classify(path: &ExchangePath, start: Vertex, end: Vertex, rule: BoundaryRule) -> Result<Classification> {
    use Classification::Rejected;
    let k = path.modulus();
    let (first, last) = match (path.vertices.first(), path.vertices.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Precondition("empty exchange path".into())),
    };
    for w in path.vertices.windows(2) {
        let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        if di < 0 || dj < 0 || (di == 0 && dj == 0) {
            return Ok(Rejected(Rejection::Monotonicity));
        }
    }
    let (di, dj) = path.displacement();
    if di >= k || dj >= k {
        return Ok(Rejected(Rejection::FullTurn));
    }
    // i − j is affine along each step, so checking vertices covers the steps.
    // A start on the diagonal leaves no open band at all.
    let d0 = first.0 - first.1;
    let b = band(d0, k);
    let on_diagonal = d0.rem_euclid(k) == 0;
    if (on_diagonal && rule == BoundaryRule::Strict) || path.vertices.iter().any(|&(i, j)| !in_band(i - j, b, rule)) {
        return Ok(Rejected(Rejection::BoundaryCrossing));
    }
    let start = path.torus_point(start);
    let end = path.torus_point(end);
    let exchange = end == (start.1, start.0) && start.0 != start.1;
    if !exchange || path.torus_point(first) != start || path.torus_point(last) != end {
        return Ok(Rejected(Rejection::Endpoints));
    }
    Ok(Classification::Valid)
}

/// `Δγ_a + Δγ_b` of a valid exchange path, in units of `2π`.
pub fn winding_sum(path: &ExchangePath, start: Vertex, end: Vertex) -> Result<Ratio<i64>> {
    match is_valid_exchange_path(path, start, end)? {
        Classification::Valid => Ok(path.winding()),
        c => Err(Error::Precondition(format!("winding sum of an invalid path ({c})"))),
    }
}

/// Exact path counts over all unit-step monotone lattice paths from a start
/// to its exchanged point within the full-turn bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnumerationReport {
    #[serde(rename = "K")]
    pub k: u64,
    pub start: Vertex,
    #[serde(serialize_with = "decimal")]
    pub n_total: BigUint,
    #[serde(serialize_with = "decimal")]
    pub n_valid: BigUint,
    #[serde(serialize_with = "decimal_map")]
    pub n_rejected_by_reason: BTreeMap<Rejection, BigUint>,
    /// Distinct winding sums over valid paths, in units of `2π`.
    #[serde(serialize_with = "ratios")]
    pub winding_sums: Vec<Ratio<i64>>,
}

fn decimal<S: Serializer>(n: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&n.to_str_radix(10))
}

fn decimal_map<S: Serializer>(m: &BTreeMap<Rejection, BigUint>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, v)| (k.to_string(), v.to_str_radix(10))))
}

fn ratios<S: Serializer>(v: &[Ratio<i64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|r| r.to_string()))
}

/// Counts every monotone path from `start` to its exchanged point with
/// steps `(1,0)`, `(0,1)`, `(1,1)` and no full turn.
pub fn enumerate_exchange_paths(k: u64, start: Vertex, bound: u64, rule: BoundaryRule) -> Result<EnumerationReport> {
    if k > bound {
        return Err(Error::EnumerationBound { k, bound });
    }
    if k == 0 {
        return Err(Error::Precondition("lattice resolution must be positive".into()));
    }
    let kk = k as i64;
    let start = (start.0.rem_euclid(kk), start.1.rem_euclid(kk));
    let (a, b) = start;
    // The unique displacement below a full turn on each axis.
    let di = (b - a).rem_euclid(kk);
    let dj = (a - b).rem_euclid(kk);
    let mut rejected: BTreeMap<Rejection, BigUint> = Rejection::ALL.iter().map(|&r| (r, BigUint::zero())).collect();
    if a == b {
        // Only the zero-length path stays below a full turn, and it sits on
        // the boundary.
        rejected.insert(Rejection::BoundaryCrossing, BigUint::one());
        return Ok(EnumerationReport {
            k,
            start,
            n_total: BigUint::one(),
            n_valid: BigUint::zero(),
            n_rejected_by_reason: rejected,
            winding_sums: Vec::new(),
        });
    }
    let total = count_paths(di, dj, |_, _| true);
    let strip = band(a - b, kk);
    let valid = count_paths(di, dj, |x, y| in_band(a - b + x - y, strip, rule));
    rejected.insert(Rejection::BoundaryCrossing, &total - &valid);
    let winding_sums = if valid.is_zero() {
        Vec::new()
    } else {
        vec![Ratio::new(di + dj, kk)]
    };
    Ok(EnumerationReport {
        k,
        start,
        n_total: total,
        n_valid: valid,
        n_rejected_by_reason: rejected,
        winding_sums,
    })
}

/// Unit-step monotone paths from `(0,0)` to `(di, dj)` through allowed
/// offsets only.
fn count_paths(di: i64, dj: i64, allowed: impl Fn(i64, i64) -> bool) -> BigUint {
    let (w, h) = (di as usize + 1, dj as usize + 1);
    let mut table = vec![BigUint::zero(); w * h];
    for x in 0..w {
        for y in 0..h {
            if !allowed(x as i64, y as i64) {
                continue;
            }
            let at = x * h + y;
            if x == 0 && y == 0 {
                table[at] = BigUint::one();
                continue;
            }
            let mut c = BigUint::zero();
            if x > 0 {
                c += &table[at - h];
            }
            if y > 0 {
                c += &table[at - 1];
            }
            if x > 0 && y > 0 {
                c += &table[at - h - 1];
            }
            table[at] = c;
        }
    }
    table[w * h - 1].clone()
}
