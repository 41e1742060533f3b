//! Truncated Wiener-chaos expansions over a countable family of real standard
//! Gaussians `ξ_v`, the Wick product, the `C_α` combinatorics and sampling.
//!
//! Basis: `ξ_α = Π_v He_{α_v}(ξ_v) / √(α_v!)` with probabilists' Hermite
//! polynomials, which makes the basis orthonormal.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::{LazyLock, Mutex};

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::{Neumaier, NeumaierC};

pub type VarId = u32;

/// Finite-support multi-index: sorted `(variable, multiplicity)` pairs with
/// strictly positive multiplicities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<(VarId, u32)>);

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn unit(v: VarId) -> Self {
        MultiIndex(vec![(v, 1)])
    }

    /// Builds a canonical multi-index; repeated variables are merged and zero
    /// multiplicities dropped.
    pub fn from_pairs<I: IntoIterator<Item = (VarId, u32)>>(pairs: I) -> Self {
        let mut map: BTreeMap<VarId, u32> = BTreeMap::new();
        for (v, m) in pairs {
            *map.entry(v).or_insert(0) += m;
        }
        MultiIndex(map.into_iter().filter(|&(_, m)| m > 0).collect())
    }

    pub fn entries(&self) -> &[(VarId, u32)] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, m)| m).sum()
    }

    pub fn get(&self, v: VarId) -> u32 {
        self.0.binary_search_by_key(&v, |&(w, _)| w).map(|i| self.0[i].1).unwrap_or(0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        wick_combine(self, other).0
    }

    /// α! = Π α_v!
    pub fn factorial(&self) -> BigUint {
        self.0.iter().fold(BigUint::one(), |acc, &(_, m)| acc * factorial(m))
    }

    pub fn factorial_f64(&self) -> f64 {
        self.0.iter().map(|&(_, m)| (1..=m).map(f64::from).product::<f64>()).product()
    }

    /// All ordered splittings α = α₁ + α₂ (including the trivial ones).
    pub fn splittings(&self) -> Vec<(MultiIndex, MultiIndex)> {
        let mut out = vec![(Vec::new(), Vec::new())];
        for &(v, m) in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (m as usize + 1));
            for (a, b) in &out {
                for j in 0..=m {
                    let mut a2: Vec<(VarId, u32)> = a.clone();
                    let mut b2: Vec<(VarId, u32)> = b.clone();
                    if j > 0 {
                        a2.push((v, j));
                    }
                    if j < m {
                        b2.push((v, m - j));
                    }
                    next.push((a2, b2));
                }
            }
            out = next;
        }
        out.into_iter().map(|(a, b)| (MultiIndex(a), MultiIndex(b))).collect()
    }

    pub fn to_json(&self) -> Value {
        json!(self.0.iter().map(|&(v, m)| [v, m]).collect::<Vec<_>>())
    }
}

fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

fn binomial_u128(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Returns `(α₁+α₂, √((α₁+α₂)!/(α₁!α₂!)))`, the Wick weight of the pair.
pub fn wick_combine(a: &MultiIndex, b: &MultiIndex) -> (MultiIndex, f64) {
    let (x, y) = (&a.0, &b.0);
    let mut out = Vec::with_capacity(x.len() + y.len());
    let mut weight: u128 = 1;
    let mut weight_f = 1.0f64;
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        if j == y.len() || (i < x.len() && x[i].0 < y[j].0) {
            out.push(x[i]);
            i += 1;
        } else if i == x.len() || y[j].0 < x[i].0 {
            out.push(y[j]);
            j += 1;
        } else {
            let n = x[i].1 + y[j].1;
            let c = binomial_u128(n, x[i].1);
            match weight.checked_mul(c) {
                Some(w) => weight = w,
                None => weight_f *= c as f64,
            }
            out.push((x[i].0, n));
            i += 1;
            j += 1;
        }
    }
    (MultiIndex(out), (weight as f64 * weight_f).sqrt())
}

static C_ALPHA_CACHE: LazyLock<Mutex<HashMap<Vec<u32>, BigUint>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// `C_α` from the recursion `C_α = Σ_{α₁+α₂=α} C_{α₁} C_{α₂}` with `C_{(0)} = 0`
/// and `C_α = 1` for `|α| = 1`. The value only depends on the multiset of
/// multiplicities, which is the memoization key.
pub fn c_alpha(alpha: &MultiIndex) -> Result<BigUint> {
    if alpha.is_zero() {
        return Err(Error::domain("C_alpha is zero at the empty multi-index"));
    }
    let mut key: Vec<u32> = alpha.entries().iter().map(|&(_, m)| m).collect();
    key.sort_unstable();
    Ok(c_alpha_key(&key))
}

fn c_alpha_key(key: &[u32]) -> BigUint {
    let degree: u32 = key.iter().sum();
    if degree == 0 {
        return BigUint::zero();
    }
    if degree == 1 {
        return BigUint::one();
    }
    if let Some(v) = C_ALPHA_CACHE.lock().unwrap().get(key) {
        return v.clone();
    }
    // enumerate sub-multiplicity vectors s with 0 <= s <= key
    let mut total = BigUint::zero();
    let mut s = vec![0u32; key.len()];
    loop {
        let mut i = 0;
        while i < key.len() {
            if s[i] < key[i] {
                s[i] += 1;
                break;
            }
            s[i] = 0;
            i += 1;
        }
        if i == key.len() {
            break;
        }
        let a: Vec<u32> = canonical_key(&s);
        let b: Vec<u32> = canonical_key(&key.iter().zip(&s).map(|(k, x)| k - x).collect::<Vec<_>>());
        if a.iter().sum::<u32>() == 0 || b.iter().sum::<u32>() == 0 {
            continue;
        }
        total += c_alpha_key(&a) * c_alpha_key(&b);
    }
    C_ALPHA_CACHE.lock().unwrap().insert(key.to_vec(), total.clone());
    total
}

fn canonical_key(v: &[u32]) -> Vec<u32> {
    let mut k: Vec<u32> = v.iter().copied().filter(|&x| x > 0).collect();
    k.sort_unstable();
    k
}

/// Monic (probabilists') Hermite polynomial He_n(x).
pub fn hermite_eval(n: u32, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// He_0(x), …, He_nmax(x).
pub fn hermite_table(nmax: u32, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(nmax as usize + 1);
    t.push(1.0);
    if nmax >= 1 {
        t.push(x);
    }
    for k in 1..nmax {
        let v = x * t[k as usize] - k as f64 * t[k as usize - 1];
        t.push(v);
    }
    t
}

/// Scalar or time-dependent coefficient carried by a chaos expansion.
pub trait Coefficient: Clone + std::fmt::Debug + PartialEq + Send + Sync {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign(&mut self, other: &Self);
    fn scale(&self, s: Complex64) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn conj(&self) -> Self;
    fn eval(&self, t: f64) -> Complex64;
    fn to_json(&self) -> Value;
}

impl Coefficient for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn scale(&self, s: Complex64) -> Self {
        self * s
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn eval(&self, _t: f64) -> Complex64 {
        *self
    }
    fn to_json(&self) -> Value {
        json!([self.re, self.im])
    }
}

/// One mode's worth of coefficients: `(α, value)` pairs sorted by α.
pub type Slice<C> = Vec<(MultiIndex, C)>;

/// Wick product of two single-mode slices.
pub fn wick_slices<C: Coefficient>(a: &[(MultiIndex, C)], b: &[(MultiIndex, C)]) -> Slice<C> {
    let mut acc: HashMap<MultiIndex, C> = HashMap::with_capacity(a.len() * b.len());
    for (ia, ca) in a {
        for (ib, cb) in b {
            let (alpha, w) = wick_combine(ia, ib);
            let v = ca.mul(cb).scale(Complex64::new(w, 0.0));
            match acc.get_mut(&alpha) {
                Some(slot) => slot.add_assign(&v),
                None => {
                    acc.insert(alpha, v);
                }
            }
        }
    }
    let mut out: Slice<C> = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    out.sort_by(|x, y| x.0.cmp(&y.0));
    out
}

/// Truncated chaos expansion `Σ_α φ_α(k) ξ_α` over lattice modes `k = m/L`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosExpansion<C: Coefficient = Complex64> {
    lattice_size: u32,
    coeffs: BTreeMap<MultiIndex, BTreeMap<i64, C>>,
}

impl<C: Coefficient> ChaosExpansion<C> {
    pub fn new(lattice_size: u32) -> Self {
        Self { lattice_size, coeffs: BTreeMap::new() }
    }

    /// Deterministic (degree-0) element at a single mode.
    pub fn deterministic(lattice_size: u32, mode: i64, value: C) -> Self {
        let mut e = Self::new(lattice_size);
        e.add_term(MultiIndex::zero(), mode, value);
        e
    }

    pub fn from_slice(lattice_size: u32, mode: i64, slice: Slice<C>) -> Self {
        let mut e = Self::new(lattice_size);
        for (a, c) in slice {
            e.add_term(a, mode, c);
        }
        e
    }

    pub fn lattice_size(&self) -> u32 {
        self.lattice_size
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, BTreeMap<i64, C>> {
        &self.coeffs
    }

    /// Adds `value` to the coefficient at `(alpha, mode)`, dropping zeros.
    pub fn add_term(&mut self, alpha: MultiIndex, mode: i64, value: C) {
        let modes = self.coeffs.entry(alpha.clone()).or_default();
        match modes.get_mut(&mode) {
            Some(slot) => {
                slot.add_assign(&value);
                if slot.is_zero() {
                    modes.remove(&mode);
                }
            }
            None => {
                if !value.is_zero() {
                    modes.insert(mode, value);
                }
            }
        }
        if self.coeffs.get(&alpha).is_some_and(|m| m.is_empty()) {
            self.coeffs.remove(&alpha);
        }
    }

    pub fn get(&self, alpha: &MultiIndex, mode: i64) -> Option<&C> {
        self.coeffs.get(alpha).and_then(|m| m.get(&mode))
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Number of stored `(α, mode)` coefficients.
    pub fn len(&self) -> usize {
        self.coeffs.values().map(|m| m.len()).sum()
    }

    pub fn mode_set(&self) -> BTreeSet<i64> {
        self.coeffs.values().flat_map(|m| m.keys().copied()).collect()
    }

    pub fn degrees(&self) -> BTreeSet<u32> {
        self.coeffs.keys().map(|a| a.degree()).collect()
    }

    pub fn variables(&self) -> BTreeSet<VarId> {
        self.coeffs.keys().flat_map(|a| a.entries().iter().map(|&(v, _)| v)).collect()
    }

    /// The coefficients at one mode, sorted by α.
    pub fn mode_slice(&self, mode: i64) -> Slice<C> {
        self.coeffs
            .iter()
            .filter_map(|(a, m)| m.get(&mode).map(|c| (a.clone(), c.clone())))
            .collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::new(self.lattice_size);
        for (a, modes) in &self.coeffs {
            for (&m, c) in modes {
                out.add_term(a.clone(), m, c.scale(s));
            }
        }
        out
    }

    /// Coefficientwise complex conjugate, keeping mode labels.
    pub fn conj_coefficients(&self) -> Self {
        let mut out = Self::new(self.lattice_size);
        for (a, modes) in &self.coeffs {
            for (&m, c) in modes {
                out.add_term(a.clone(), m, c.conj());
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_lattice(self.lattice_size, other.lattice_size)?;
        let mut out = self.clone();
        for (a, modes) in &other.coeffs {
            for (&m, c) in modes {
                out.add_term(a.clone(), m, c.clone());
            }
        }
        Ok(out)
    }

    /// Wick product; mode coefficients are convolved (`k = k₁ + k₂`).
    pub fn wick_product(&self, other: &Self) -> Result<Self> {
        check_lattice(self.lattice_size, other.lattice_size)?;
        let mut acc: HashMap<(MultiIndex, i64), C> = HashMap::new();
        let mut order: Vec<(MultiIndex, i64)> = Vec::new();
        for (a1, m1s) in &self.coeffs {
            for (a2, m2s) in &other.coeffs {
                let (alpha, w) = wick_combine(a1, a2);
                let w = Complex64::new(w, 0.0);
                for (&m1, c1) in m1s {
                    for (&m2, c2) in m2s {
                        let key = (alpha.clone(), m1 + m2);
                        let v = c1.mul(c2).scale(w);
                        match acc.get_mut(&key) {
                            Some(slot) => slot.add_assign(&v),
                            None => {
                                order.push(key.clone());
                                acc.insert(key, v);
                            }
                        }
                    }
                }
            }
        }
        let mut out = Self::new(self.lattice_size);
        for key in order {
            let v = acc.remove(&key).unwrap();
            if !v.is_zero() {
                out.coeffs.entry(key.0).or_default().insert(key.1, v);
            }
        }
        Ok(out)
    }

    /// Projection onto chaos of degree ≤ n.
    pub fn truncate_degree(&self, n: u32) -> Self {
        Self {
            lattice_size: self.lattice_size,
            coeffs: self.coeffs.iter().filter(|(a, _)| a.degree() <= n).map(|(a, m)| (a.clone(), m.clone())).collect(),
        }
    }

    /// Evaluates time-dependent coefficients at `t`.
    pub fn eval_at(&self, t: f64) -> ChaosExpansion<Complex64> {
        let mut out = ChaosExpansion::new(self.lattice_size);
        for (a, modes) in &self.coeffs {
            for (&m, c) in modes {
                out.add_term(a.clone(), m, c.eval(t));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut rows = Vec::new();
        for (a, modes) in &self.coeffs {
            for (m, c) in modes {
                rows.push(json!({ "alpha": a.to_json(), "mode": m, "value": c.to_json() }));
            }
        }
        json!({ "lattice_size": self.lattice_size, "coefficients": rows })
    }
}

fn check_lattice(a: u32, b: u32) -> Result<()> {
    if a != b {
        return Err(Error::domain(format!("lattice size mismatch: {a} vs {b}")));
    }
    Ok(())
}

pub fn wick_product<C: Coefficient>(phi: &ChaosExpansion<C>, psi: &ChaosExpansion<C>) -> Result<ChaosExpansion<C>> {
    phi.wick_product(psi)
}

pub fn truncate_degree<C: Coefficient>(phi: &ChaosExpansion<C>, n: u32) -> ChaosExpansion<C> {
    phi.truncate_degree(n)
}

/// `E(conj(φ̂(k)) ψ̂(k′)) = Σ_α conj(φ_α(k)) ψ_α(k′)`.
pub fn pair_expectation<C: Coefficient>(phi: &ChaosExpansion<C>, psi: &ChaosExpansion<C>, k: i64, k2: i64) -> C {
    let mut acc = C::zero();
    for (a, modes) in &phi.coeffs {
        if let (Some(x), Some(y)) = (modes.get(&k), psi.coeffs.get(a).and_then(|m| m.get(&k2))) {
            acc.add_assign(&x.conj().mul(y));
        }
    }
    acc
}

/// Same as [`pair_expectation`] for two single-mode slices.
pub fn pair_expectation_slices<C: Coefficient>(a: &[(MultiIndex, C)], b: &[(MultiIndex, C)]) -> C {
    let mut acc = C::zero();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc.add_assign(&a[i].1.conj().mul(&b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// `sup_α ‖φ_α‖_{H^s} / (√α! C_α D^{|α|})` with the discrete measure `1/L`.
pub fn sobolev_x_norm(phi: &ChaosExpansion<Complex64>, d: f64, s: f64) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::domain("D must be positive"));
    }
    let l = phi.lattice_size as f64;
    let mut best = 0.0f64;
    for (a, modes) in &phi.coeffs {
        if a.is_zero() {
            return Err(Error::domain("sobolev_x_norm: nonzero coefficient at the empty multi-index"));
        }
        let mut acc = Neumaier::new();
        for (&m, c) in modes {
            let k = m as f64 / l;
            acc.add((1.0 + k * k).powf(s) * c.norm_sqr());
        }
        let hs = (acc.value() / l).sqrt();
        let c = c_alpha(a)?.to_f64().unwrap_or(f64::INFINITY);
        let denom = a.factorial_f64().sqrt() * c * d.powi(a.degree() as i32);
        best = best.max(hs / denom);
    }
    Ok(best)
}

/// Fixed complex-Gaussian indexing `φ: {0,1}×ℤ → ids`, with
/// `g_m = (ξ_{φ(0,m)} + i ξ_{φ(1,m)})/√2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComplexGaussianIndexing;

impl ComplexGaussianIndexing {
    pub const NORMALIZATION: f64 = FRAC_1_SQRT_2;

    pub fn var_id(&self, iota: u8, m: i64) -> VarId {
        assert!(iota < 2);
        let zig = if m >= 0 { 2 * m as u64 } else { (-2 * m - 1) as u64 };
        (2 * zig + iota as u64) as VarId
    }

    pub fn inverse(&self, id: VarId) -> (u8, i64) {
        let iota = (id % 2) as u8;
        let zig = (id / 2) as i64;
        let m = if zig % 2 == 0 { zig / 2 } else { -(zig + 1) / 2 };
        (iota, m)
    }

    /// Degree-1 slice of `g_m` (or its conjugate).
    pub fn gaussian_slice(&self, m: i64, conjugate: bool) -> Slice<Complex64> {
        let im = if conjugate { -Self::NORMALIZATION } else { Self::NORMALIZATION };
        let mut s = vec![
            (MultiIndex::unit(self.var_id(0, m)), Complex64::new(Self::NORMALIZATION, 0.0)),
            (MultiIndex::unit(self.var_id(1, m)), Complex64::new(0.0, im)),
        ];
        s.sort_by(|x, y| x.0.cmp(&y.0));
        s
    }

    /// `g_m` (or `conj(g_m)`) as an expansion placed at `mode`.
    pub fn gaussian(&self, lattice_size: u32, m: i64, conjugate: bool, mode: i64) -> ChaosExpansion<Complex64> {
        ChaosExpansion::from_slice(lattice_size, mode, self.gaussian_slice(m, conjugate))
    }
}

/// One joint draw of the Gaussian family. Each variable's value is a pure
/// function of `(rng_seed, id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    pub values: BTreeMap<VarId, f64>,
    pub rng_seed: u64,
}

impl GaussianSample {
    pub fn draw<I: IntoIterator<Item = VarId>>(rng_seed: u64, vars: I) -> Self {
        let values = vars.into_iter().map(|v| (v, standard_normal(rng_seed, v))).collect();
        Self { values, rng_seed }
    }

    pub fn from_values(values: BTreeMap<VarId, f64>) -> Self {
        Self { values, rng_seed: 0 }
    }
}

fn standard_normal(seed: u64, var: VarId) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(var as u64);
    StandardNormal.sample(&mut rng)
}

/// SplitMix64 finaliser; used to derive per-sample seeds from `(seed, index)`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

/// `Σ_α φ_α(t) ξ_α(s)` per mode.
pub fn sample_chaos<C: Coefficient>(phi: &ChaosExpansion<C>, s: &GaussianSample, t: f64) -> Result<BTreeMap<i64, Complex64>> {
    let mut out: BTreeMap<i64, NeumaierC> = BTreeMap::new();
    let mut tables: HashMap<VarId, Vec<f64>> = HashMap::new();
    for (a, modes) in &phi.coeffs {
        let mut basis = 1.0;
        for &(v, m) in a.entries() {
            let x = *s.values.get(&v).ok_or_else(|| Error::domain(format!("sample has no draw for variable {v}")))?;
            let tab = tables.entry(v).or_insert_with(|| hermite_table(0, x));
            if tab.len() <= m as usize {
                *tab = hermite_table(m.max(8), x);
            }
            basis *= tab[m as usize] / (1..=m).map(f64::from).product::<f64>().sqrt();
        }
        for (&k, c) in modes {
            out.entry(k).or_default().add(c.eval(t) * basis);
        }
    }
    Ok(out.into_iter().map(|(k, v)| (k, v.value())).collect())
}

/// Flattened single-mode expansion for fast repeated sampling.
#[derive(Debug, Clone)]
pub struct SampleEvaluator {
    vars: Vec<VarId>,
    max_mult: Vec<u32>,
    terms: Vec<(Vec<(usize, u32)>, f64, Complex64)>,
}

impl SampleEvaluator {
    pub fn new(slice: &[(MultiIndex, Complex64)]) -> Self {
        let vars: Vec<VarId> = slice.iter().flat_map(|(a, _)| a.entries().iter().map(|&(v, _)| v)).collect::<BTreeSet<_>>().into_iter().collect();
        let pos: HashMap<VarId, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut max_mult = vec![0u32; vars.len()];
        let terms = slice
            .iter()
            .map(|(a, c)| {
                let idx: Vec<(usize, u32)> = a.entries().iter().map(|&(v, m)| (pos[&v], m)).collect();
                for &(p, m) in &idx {
                    max_mult[p] = max_mult[p].max(m);
                }
                (idx, 1.0 / a.factorial_f64().sqrt(), *c)
            })
            .collect();
        Self { vars, max_mult, terms }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    /// Evaluates at a draw given as values aligned with [`Self::vars`].
    pub fn eval(&self, draws: &[f64]) -> Complex64 {
        let tables: Vec<Vec<f64>> = draws.iter().zip(&self.max_mult).map(|(&x, &m)| hermite_table(m, x)).collect();
        let mut acc = NeumaierC::new();
        for (idx, norm, c) in &self.terms {
            let mut b = *norm;
            for &(p, m) in idx {
                b *= tables[p][m as usize];
            }
            acc.add(c * b);
        }
        acc.value()
    }

    pub fn eval_seed(&self, seed: u64) -> Complex64 {
        let draws: Vec<f64> = self.vars.iter().map(|&v| standard_normal(seed, v)).collect();
        self.eval(&draws)
    }
}

/// Monte-Carlo estimate of `E(conj(X) Y)` for two single-mode slices, with the
/// standard error of the mean. Sample `i` uses seed `sample_seed(seed, i)`.
pub fn mc_pair_expectation(
    a: &[(MultiIndex, Complex64)],
    b: &[(MultiIndex, Complex64)],
    samples: u64,
    seed: u64,
) -> (Complex64, f64) {
    let ea = SampleEvaluator::new(a);
    let eb = SampleEvaluator::new(b);
    let vars: Vec<VarId> = ea.vars().iter().chain(eb.vars()).copied().collect::<BTreeSet<_>>().into_iter().collect();
    let pick = |ev: &SampleEvaluator, all: &[f64]| -> Vec<f64> {
        ev.vars().iter().map(|v| all[vars.binary_search(v).unwrap()]).collect()
    };
    let chunk = 1024u64;
    let n_chunks = samples.div_ceil(chunk) as usize;
    let stats = crate::numerics::det_reduce(
        n_chunks,
        (NeumaierC::new(), Neumaier::new()),
        |c| {
            let mut s = NeumaierC::new();
            let mut s2 = Neumaier::new();
            let lo = c as u64 * chunk;
            let hi = (lo + chunk).min(samples);
            for i in lo..hi {
                let sd = sample_seed(seed, i);
                let all: Vec<f64> = vars.iter().map(|&v| standard_normal(sd, v)).collect();
                let x = ea.eval(&pick(&ea, &all));
                let y = eb.eval(&pick(&eb, &all));
                let z = x.conj() * y;
                s.add(z);
                s2.add(z.norm_sqr());
            }
            (s, s2)
        },
        |a, b| (a.0.merge(b.0), a.1.merge(b.1)),
    );
    let n = samples as f64;
    let mean = stats.0.value() / n;
    let var = (stats.1.value() / n - mean.norm_sqr()).max(0.0) * n / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit(v: VarId, mode: i64) -> ChaosExpansion {
        ChaosExpansion::from_slice(1, mode, vec![(MultiIndex::unit(v), c(1.0, 0.0))])
    }

    #[test]
    fn multi_index_is_canonical() {
        let a = MultiIndex::from_pairs([(3, 1), (1, 2), (3, 1), (7, 0)]);
        assert_eq!(a.entries(), &[(1, 2), (3, 2)]);
        assert_eq!(a.degree(), 4);
        assert_eq!(a.get(3), 2);
        assert_eq!(a.get(7), 0);
        assert_eq!(a.factorial(), BigUint::from(4u32));
        assert_eq!(a.splittings().len(), 9);
    }

    #[test]
    fn wick_square_of_unit_is_sqrt_two() {
        let e0 = unit(0, 0);
        let sq = e0.wick_product(&e0).unwrap();
        let v = sq.get(&MultiIndex::from_pairs([(0, 2)]), 0).unwrap();
        assert!((v.re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sq.len(), 1);
    }

    #[test]
    fn wick_with_constant_scales() {
        let k = ChaosExpansion::deterministic(1, 0, c(2.0, -1.0));
        let psi = ChaosExpansion::from_slice(1, 3, vec![(MultiIndex::unit(4), c(0.5, 0.5))]);
        let out = k.wick_product(&psi).unwrap();
        assert_eq!(out, psi.scale(c(2.0, -1.0)));
    }

    #[test]
    fn wick_disjoint_units_has_weight_one() {
        let out = unit(0, 0).wick_product(&unit(1, 0)).unwrap();
        assert_eq!(out.get(&MultiIndex::from_pairs([(0, 1), (1, 1)]), 0), Some(&c(1.0, 0.0)));
    }

    #[test]
    fn wick_convolves_modes() {
        let out = unit(0, 2).wick_product(&unit(1, -5)).unwrap();
        assert_eq!(out.mode_set().into_iter().collect::<Vec<_>>(), vec![-3]);
    }

    #[test]
    fn lattice_mismatch_is_domain_error() {
        let a = ChaosExpansion::<Complex64>::new(1);
        let b = ChaosExpansion::<Complex64>::new(2);
        assert!(matches!(a.wick_product(&b), Err(Error::Domain(_))));
    }

    #[test]
    fn c_alpha_values() {
        assert_eq!(c_alpha(&MultiIndex::unit(0)).unwrap(), BigUint::from(1u32));
        assert_eq!(c_alpha(&MultiIndex::from_pairs([(0, 2)])).unwrap(), BigUint::from(1u32));
        assert_eq!(c_alpha(&MultiIndex::from_pairs([(0, 1), (1, 1), (2, 1)])).unwrap(), BigUint::from(12u32));
        assert!(c_alpha(&MultiIndex::zero()).is_err());
        // five distinct unit entries exceed 4^5
        let five = MultiIndex::from_pairs((0..5).map(|v| (v, 1)));
        assert_eq!(c_alpha(&five).unwrap(), BigUint::from(1680u32));
    }

    fn catalan(m: u32) -> BigUint {
        factorial(2 * m) / (factorial(m) * factorial(m + 1))
    }

    #[test]
    fn c_alpha_matches_closed_form_up_to_degree_six() {
        // every multiplicity pattern (partition) of degree 1..=6
        fn partitions(n: u32, max: u32) -> Vec<Vec<u32>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for first in (1..=max.min(n)).rev() {
                for mut rest in partitions(n - first, first) {
                    rest.insert(0, first);
                    out.push(rest);
                }
            }
            out
        }
        for n in 1..=6 {
            for p in partitions(n, n) {
                let alpha = MultiIndex::from_pairs(p.iter().enumerate().map(|(i, &m)| (i as VarId, m)));
                let closed = catalan(n - 1) * factorial(n) / alpha.factorial();
                assert_eq!(c_alpha(&alpha).unwrap(), closed, "{p:?}");
            }
        }
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_eval(0, 3.3), 1.0);
        assert_eq!(hermite_eval(2, 2.0), 3.0);
        assert_eq!(hermite_eval(3, 1.0), -2.0);
        let t = hermite_table(5, 0.7);
        for n in 0..=5 {
            assert_eq!(t[n as usize], hermite_eval(n, 0.7));
        }
    }

    #[test]
    fn sampling_basics() {
        let det = ChaosExpansion::deterministic(1, 4, c(1.5, 2.0));
        let s = GaussianSample::from_values(BTreeMap::new());
        assert_eq!(sample_chaos(&det, &s, 0.0).unwrap()[&4], c(1.5, 2.0));
        let s = GaussianSample::from_values([(0, 1.7)].into_iter().collect());
        assert_eq!(sample_chaos(&unit(0, 0), &s, 0.0).unwrap()[&0], c(1.7, 0.0));
        let missing = GaussianSample::from_values(BTreeMap::new());
        assert!(matches!(sample_chaos(&unit(0, 0), &missing, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn draws_are_reproducible_per_variable() {
        let a = GaussianSample::draw(42, [1, 5, 9]);
        let b = GaussianSample::draw(42, [9, 5]);
        assert_eq!(a.values[&5], b.values[&5]);
        assert_eq!(a.values[&9], b.values[&9]);
        assert_ne!(a.values[&1], a.values[&5]);
    }

    #[test]
    fn mc_mean_of_second_chaos_vanishes() {
        let s = vec![(MultiIndex::from_pairs([(0, 2)]), c(1.0, 0.0))];
        let one = vec![(MultiIndex::zero(), c(1.0, 0.0))];
        let (mean, se) = mc_pair_expectation(&one, &s, 100_000, 7);
        assert!(mean.norm() < 5.0 * se, "{mean} {se}");
    }

    #[test]
    fn hermite_moments_match_factorials() {
        let n = 1_000_000u64;
        for mm in 0..=4u32 {
            for nn in 0..=4u32 {
                let mut s = Neumaier::new();
                let mut s2 = Neumaier::new();
                for i in 0..n {
                    let x = standard_normal(sample_seed(99, i), 0);
                    let v = hermite_eval(mm, x) * hermite_eval(nn, x);
                    s.add(v);
                    s2.add(v * v);
                }
                let mean = s.value() / n as f64;
                let se = ((s2.value() / n as f64 - mean * mean) / n as f64).sqrt();
                let expect = if mm == nn { (1..=nn).product::<u32>() as f64 } else { 0.0 };
                assert!((mean - expect).abs() <= 5.0 * se.max(1e-12), "m={mm} n={nn}: {mean} vs {expect} (se {se})");
            }
        }
    }

    #[test]
    fn orthonormality_exact_and_sampled() {
        let e0 = unit(0, 0);
        let e1 = unit(1, 0);
        assert_eq!(pair_expectation(&e0, &e0, 0, 0), c(1.0, 0.0));
        assert_eq!(pair_expectation(&e0, &e1, 0, 0), c(0.0, 0.0));
        let a = vec![(MultiIndex::from_pairs([(0, 2), (1, 1)]), c(1.0, 0.0))];
        let (m, se) = mc_pair_expectation(&a, &a, 100_000, 3);
        assert!((m.re - 1.0).abs() < 5.0 * se, "{m} {se}");
    }

    #[test]
    fn complex_gaussian_indexing_roundtrip() {
        let idx = ComplexGaussianIndexing;
        for m in -20..=20 {
            for iota in 0..2 {
                assert_eq!(idx.inverse(idx.var_id(iota, m)), (iota, m));
            }
        }
        let g = idx.gaussian(1, 3, false, 3);
        let e = pair_expectation(&g, &g, 3, 3);
        assert!((e.re - 1.0).abs() < 1e-15 && e.im == 0.0);
        // E(g g) = 0: pair conj(conj g) with g
        let gbar = idx.gaussian(1, 3, true, 3);
        assert!(pair_expectation(&gbar, &g, 3, 3).norm() < 1e-15);
    }

    #[test]
    fn sobolev_norm_properties() {
        let z = ChaosExpansion::<Complex64>::new(2);
        assert_eq!(sobolev_x_norm(&z, 1.0, 1.0).unwrap(), 0.0);
        let phi = ChaosExpansion::from_slice(2, 1, vec![(MultiIndex::from_pairs([(0, 1), (2, 1)]), c(0.3, 0.4))]);
        let n1 = sobolev_x_norm(&phi, 2.0, 1.0).unwrap();
        let n2 = sobolev_x_norm(&phi.scale(c(0.0, -3.0)), 2.0, 1.0).unwrap();
        assert!((n2 - 3.0 * n1).abs() < 1e-15);
        let bad = ChaosExpansion::deterministic(2, 0, c(1.0, 0.0));
        assert!(matches!(sobolev_x_norm(&bad, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn truncation() {
        let e = unit(0, 0).wick_product(&unit(1, 0)).unwrap().add(&unit(2, 0)).unwrap();
        assert_eq!(e.truncate_degree(5), e);
        assert_eq!(e.truncate_degree(1).degrees().into_iter().collect::<Vec<_>>(), vec![1]);
        assert!(unit(0, 0).truncate_degree(0).is_empty());
    }

    #[test]
    fn json_shape() {
        let e = ChaosExpansion::from_slice(3, -1, vec![(MultiIndex::from_pairs([(4, 2), (1, 1)]), c(1.0, -2.0))]);
        let j = e.to_json();
        assert_eq!(j["lattice_size"], 3);
        assert_eq!(j["coefficients"][0]["alpha"], json!([[1, 1], [4, 2]]));
        assert_eq!(j["coefficients"][0]["value"], json!([1.0, -2.0]));
    }
}
