//! Profiles, regime parameters and resonance-constrained momentum tuples on
//! `ℤ/L`, together with parity permutations and exact Gaussian pairings.
//!
//! Momenta are stored as integers `m` (k = m/L) and frequencies as integers
//! `d` (Δ = d/L²); every cutoff comparison is done in integer arithmetic.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::chaos::{pair_expectation_slices, ComplexGaussianIndexing};
use crate::error::{Error, Result};
use crate::numerics::{det_reduce, quadrature::gauss_kronrod_c, GkOptions};
use crate::trees::{gaussian_word_slice, QuinticTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    SmoothBump,
    PolyBump,
}

/// Compactly supported real bump `amplitude · b((x − center)/radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub kind: ProfileKind,
    pub center: f64,
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn smooth_bump(radius: f64) -> Self {
        Self { kind: ProfileKind::SmoothBump, center: 0.0, radius, amplitude: 1.0 }
    }

    pub fn poly_bump(radius: f64) -> Self {
        Self { kind: ProfileKind::PolyBump, center: 0.0, radius, amplitude: 1.0 }
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::domain(format!("profile radius must be positive and finite, got {}", self.radius)));
        }
        if !self.center.is_finite() || !self.amplitude.is_finite() {
            return Err(Error::domain("profile center and amplitude must be finite"));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.radius;
        let s = 1.0 - u * u;
        if s <= 0.0 {
            return 0.0;
        }
        self.amplitude
            * match self.kind {
                ProfileKind::SmoothBump => (-1.0 / s).exp(),
                ProfileKind::PolyBump => s.powi(4),
            }
    }

    /// Open support interval.
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    /// Lattice momenta `m` (k = m/L) at which the profile is nonzero, ascending.
    pub fn window(&self, lattice_size: u32) -> Vec<i64> {
        let l = lattice_size as f64;
        let (a, b) = self.support();
        let lo = (a * l).floor() as i64 - 1;
        let hi = (b * l).ceil() as i64 + 1;
        (lo..=hi).filter(|&m| self.eval(m as f64 / l) != 0.0).collect()
    }

    pub fn at_mode(&self, m: i64, lattice_size: u32) -> f64 {
        self.eval(m as f64 / lattice_size as f64)
    }

    /// `sup_x ⟨x⟩^s |a(x)|`, sampled finely on the support.
    pub fn weighted_sup(&self, s: f64) -> f64 {
        let (a, b) = self.support();
        let n = 20_000;
        (0..=n)
            .map(|i| {
                let x = a + (b - a) * i as f64 / n as f64;
                (1.0 + x * x).powf(s / 2.0) * self.eval(x).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `â(k) = (2π)^{-1/2} ∫ e^{-ikx} a(x) dx`.
    pub fn fourier(&self, k: f64) -> Result<Complex64> {
        let (a, b) = self.support();
        let opts = GkOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 4000 };
        let (v, _) = gauss_kronrod_c(|x| Complex64::from_polar(self.eval(x), -k * x), a, b, &[self.center], opts)?;
        Ok(v / (2.0 * PI).sqrt())
    }
}

/// Parameter bundle `(L, ρ, μ, ν, α, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub lattice_size: u32,
    pub rho: f64,
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
    #[serde(default = "one")]
    pub s: f64,
}

impl Default for RegimeParams {
    fn default() -> Self {
        Self { lattice_size: 1, rho: 1.0, mu: 4.0, nu: 4.0, alpha: 0.2, s: 1.0 }
    }
}

impl RegimeParams {
    pub fn new(lattice_size: u32, mu: f64, nu: f64) -> Self {
        Self { lattice_size, mu, nu, ..Self::default() }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lattice_size == 0 {
            return Err(Error::domain("lattice size L must be positive"));
        }
        for (name, v) in [("rho", self.rho), ("mu", self.mu), ("nu", self.nu)] {
            if v.is_nan() || v < 1.0 {
                return Err(Error::domain(format!("{name} must be >= 1, got {v}")));
            }
        }
        if self.rho.is_infinite() {
            return Err(Error::domain("rho must be finite"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::domain(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn cutoffs(&self) -> Result<Cutoffs> {
        self.validate()?;
        Cutoffs::new(self.lattice_size, self.mu, self.nu)
    }
}

/// Exact cutoffs `|k̄| ≥ 1/μ`, `|Ω| ≥ 1/ν` in integer form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cutoffs {
    pub lattice_size: i64,
    inv_mu: Ratio<i64>,
    inv_nu: Ratio<i64>,
}

fn inverse_ratio(x: f64, name: &str) -> Result<Ratio<i64>> {
    if x.is_infinite() && x > 0.0 {
        return Ok(Ratio::zero());
    }
    let r = Ratio::<i64>::from_f64(x)
        .or_else(|| Ratio::approximate_float(x))
        .ok_or_else(|| Error::domain(format!("{name} = {x} is not representable as a rational")))?;
    if r <= Ratio::zero() {
        return Err(Error::domain(format!("{name} must be positive")));
    }
    Ok(r.recip())
}

impl Cutoffs {
    pub fn new(lattice_size: u32, mu: f64, nu: f64) -> Result<Self> {
        Ok(Self { lattice_size: lattice_size as i64, inv_mu: inverse_ratio(mu, "mu")?, inv_nu: inverse_ratio(nu, "nu")? })
    }

    /// `|m̄|/L ≥ 1/μ`.
    #[inline]
    pub fn kbar_ok(&self, mbar: i64) -> bool {
        (mbar.unsigned_abs() as i128) * (*self.inv_mu.denom() as i128) >= (self.lattice_size as i128) * (*self.inv_mu.numer() as i128)
    }

    /// `|d|/L² ≥ 1/ν`.
    #[inline]
    pub fn omega_ok(&self, d: i64) -> bool {
        let l = self.lattice_size as i128;
        (d.unsigned_abs() as i128) * (*self.inv_nu.denom() as i128) >= l * l * (*self.inv_nu.numer() as i128)
    }

    /// Smallest admissible `|m̄|`.
    pub fn min_kbar(&self) -> i64 {
        let (p, q) = (*self.inv_mu.numer() as i128, *self.inv_mu.denom() as i128);
        ((self.lattice_size as i128 * p + q - 1) / q) as i64
    }

    /// Smallest admissible `|d|`.
    pub fn min_omega(&self) -> i64 {
        let (p, q) = (*self.inv_nu.numer() as i128, *self.inv_nu.denom() as i128);
        let l2 = (self.lattice_size as i128).pow(2);
        ((l2 * p + q - 1) / q) as i64
    }

    /// Both one-node inequalities for `(m₁..m₅)` with root `m`.
    #[inline]
    pub fn node_ok(&self, m: i64, c: &[i64; 5]) -> bool {
        self.kbar_ok(c[4] - c[3]) && self.omega_ok(delta_numerator(m, c))
    }
}

/// `d = m² − m₁² + m₂² − m₃² + m₄² − m₅²`.
#[inline]
pub fn delta_numerator(m: i64, c: &[i64; 5]) -> i64 {
    m * m - c[0] * c[0] + c[1] * c[1] - c[2] * c[2] + c[3] * c[3] - c[4] * c[4]
}

/// `m₁ − m₂ + m₃ − m₄ + m₅`.
#[inline]
pub fn alternating_sum(c: &[i64]) -> i64 {
    c.iter().enumerate().map(|(j, &x)| if j % 2 == 0 { x } else { -x }).sum()
}

pub type MomentumTuple = [i64; 5];

struct Window {
    values: Vec<i64>,
    lo: i64,
    mask: Vec<bool>,
}

impl Window {
    fn new(values: Vec<i64>) -> Self {
        let lo = values.first().copied().unwrap_or(0);
        let hi = values.last().copied().unwrap_or(-1);
        let mut mask = vec![false; (hi - lo + 1).max(0) as usize];
        for &v in &values {
            mask[(v - lo) as usize] = true;
        }
        Self { values, lo, mask }
    }

    #[inline]
    fn contains(&self, m: i64) -> bool {
        let i = m - self.lo;
        i >= 0 && (i as usize) < self.mask.len() && self.mask[i as usize]
    }
}

/// Streaming iterator over `C_L(k)` restricted to the profile window, in
/// lexicographic order of `(m₁, m₂, m₃, m₄)`.
pub struct CLIter {
    k: i64,
    cut: Cutoffs,
    window: Window,
    idx: [usize; 4],
    done: bool,
}

impl Iterator for CLIter {
    type Item = MomentumTuple;

    fn next(&mut self) -> Option<MomentumTuple> {
        let n = self.window.values.len();
        while !self.done {
            let w = &self.window.values;
            let (m1, m2, m3, m4) = (w[self.idx[0]], w[self.idx[1]], w[self.idx[2]], w[self.idx[3]]);
            // odometer step
            let mut p = 3;
            loop {
                self.idx[p] += 1;
                if self.idx[p] < n {
                    break;
                }
                self.idx[p] = 0;
                if p == 0 {
                    self.done = true;
                    break;
                }
                p -= 1;
            }
            let m5 = self.k - m1 + m2 - m3 + m4;
            if !self.window.contains(m5) {
                continue;
            }
            let c = [m1, m2, m3, m4, m5];
            if self.cut.node_ok(self.k, &c) {
                return Some(c);
            }
        }
        None
    }
}

/// Tuples of `C_L(k)` whose entries lie in the profile window.
pub fn enumerate_c_l(k: i64, params: &RegimeParams, support: &Profile) -> Result<CLIter> {
    let cut = params.cutoffs()?;
    support.validate()?;
    let window = Window::new(support.window(params.lattice_size));
    let done = window.values.is_empty();
    Ok(CLIter { k, cut, window, idx: [0; 4], done })
}

/// Deterministic parallel fold over `C_L(k)`, partitioned on `m₁`.
pub fn fold_c_l<T, F, M>(k: i64, params: &RegimeParams, support: &Profile, identity: T, fold: F, merge: M) -> Result<T>
where
    T: Send + Clone + Sync,
    F: Fn(&mut T, &MomentumTuple) + Sync + Send,
    M: Fn(T, T) -> T + Sync,
{
    let cut = params.cutoffs()?;
    support.validate()?;
    let window = Window::new(support.window(params.lattice_size));
    let w = &window.values;
    Ok(det_reduce(
        w.len(),
        identity.clone(),
        |i| {
            let mut acc = identity.clone();
            let m1 = w[i];
            for &m2 in w {
                for &m3 in w {
                    for &m4 in w {
                        let m5 = k - m1 + m2 - m3 + m4;
                        if !window.contains(m5) {
                            continue;
                        }
                        let c = [m1, m2, m3, m4, m5];
                        if cut.node_ok(k, &c) {
                            fold(&mut acc, &c);
                        }
                    }
                }
            }
            acc
        },
        merge,
    ))
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else { break };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
    out
}

/// `σ` preserves parity of (1-based) positions.
pub fn preserves_parity(sigma: &[usize]) -> bool {
    sigma.iter().enumerate().all(|(j, &s)| j % 2 == s % 2)
}

/// The 12 permutations of five slots that keep odd and even positions apart.
/// A permutation `σ` acts as `k⃗_σ = (k_{σ(1)}, …, k_{σ(5)})` (0-based here).
pub fn parity_permutations() -> Vec<[usize; 5]> {
    permutations(5)
        .into_iter()
        .filter(|s| preserves_parity(s))
        .map(|s| [s[0], s[1], s[2], s[3], s[4]])
        .collect()
}

pub fn apply_permutation<T: Copy>(k: &[T], sigma: &[usize]) -> Vec<T> {
    sigma.iter().map(|&s| k[s]).collect()
}

/// Tuples with both `k⃗` and `k⃗_σ` in `C_L(k)`.
pub fn enumerate_c_sigma(
    k: i64,
    sigma: [usize; 5],
    params: &RegimeParams,
    support: &Profile,
) -> Result<impl Iterator<Item = MomentumTuple>> {
    let cut = params.cutoffs()?;
    Ok(enumerate_c_l(k, params, support)?.filter(move |c| {
        let p = [c[sigma[0]], c[sigma[1]], c[sigma[2]], c[sigma[3]], c[sigma[4]]];
        alternating_sum(&p) == k && cut.node_ok(k, &p)
    }))
}

/// `E(conj(g_{k⃗₁}) g_{k⃗₂})` through the chaos algebra.
pub fn pairing_expectation(k1: &[i64], k2: &[i64], idx: &ComplexGaussianIndexing) -> Result<Complex64> {
    if k1.len() != k2.len() {
        return Err(Error::domain(format!("arity mismatch: {} vs {}", k1.len(), k2.len())));
    }
    let w1 = gaussian_word_slice(k1, idx);
    let w2 = gaussian_word_slice(k2, idx);
    Ok(pair_expectation_slices(&w1, &w2))
}

/// Key of a Gaussian word: sorted entries at odd positions, sorted entries at
/// even positions. Two words have a nonzero pairing iff their keys agree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordKey {
    pub plus: Vec<i64>,
    pub minus: Vec<i64>,
}

impl WordKey {
    pub fn of(k: &[i64]) -> Self {
        let mut plus: Vec<i64> = k.iter().step_by(2).copied().collect();
        let mut minus: Vec<i64> = k.iter().skip(1).step_by(2).copied().collect();
        plus.sort_unstable();
        minus.sort_unstable();
        Self { plus, minus }
    }

    /// `E|g_{k⃗}|² = Π_m p_m! q_m!` where `p_m`, `q_m` count the plain and
    /// conjugated occurrences of momentum `m`.
    pub fn self_pairing(&self) -> f64 {
        let mut counts: BTreeMap<i64, (u32, u32)> = BTreeMap::new();
        for &m in &self.plus {
            counts.entry(m).or_default().0 += 1;
        }
        for &m in &self.minus {
            counts.entry(m).or_default().1 += 1;
        }
        counts.values().map(|&(p, q)| factorial_f64(p) * factorial_f64(q)).product()
    }

    /// `Π_m |a(m)|²` over all entries.
    pub fn amplitude_sq(&self, profile: &Profile, lattice_size: u32) -> f64 {
        self.plus.iter().chain(&self.minus).map(|&m| profile.at_mode(m, lattice_size).powi(2)).product()
    }
}

fn factorial_f64(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Closed-form pairing (the factorization of the expectation over modes).
pub fn pairing_closed_form(k1: &[i64], k2: &[i64]) -> f64 {
    let (a, b) = (WordKey::of(k1), WordKey::of(k2));
    if a == b {
        a.self_pairing()
    } else {
        0.0
    }
}

/// Order of the stabiliser of `k⃗` in the full symmetric group.
pub fn stabilizer_order(k: &[i64]) -> u64 {
    let mut counts: BTreeMap<i64, u32> = BTreeMap::new();
    for &m in k {
        *counts.entry(m).or_default() += 1;
    }
    counts.values().map(|&c| (1..=c as u64).product::<u64>()).product()
}

/// Per-node table: for each root momentum, the admissible child-root tuples.
#[derive(Debug, Default)]
struct NodeTable {
    by_root: BTreeMap<i64, Vec<[i64; 5]>>,
    counts: BTreeMap<i64, u64>,
}

/// Enumerates `C_T(k)` for general trees. Node constraints only involve the
/// node's own momentum and its children's roots, so admissible labelings are
/// assembled from per-subtree tables.
pub struct LabelingEnumerator {
    window: Window,
    cut: Cutoffs,
    tables: HashMap<QuinticTree, Rc<NodeTable>>,
    cap: u64,
}

pub const DEFAULT_LABELING_CAP: u64 = 50_000_000;

impl LabelingEnumerator {
    pub fn new(params: &RegimeParams, support: &Profile) -> Result<Self> {
        support.validate()?;
        Ok(Self {
            window: Window::new(support.window(params.lattice_size)),
            cut: params.cutoffs()?,
            tables: HashMap::new(),
            cap: DEFAULT_LABELING_CAP,
        })
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn window(&self) -> &[i64] {
        &self.window.values
    }

    fn table(&mut self, t: &QuinticTree) -> Rc<NodeTable> {
        if let Some(tb) = self.tables.get(t) {
            return tb.clone();
        }
        let tb = match t {
            QuinticTree::Leaf => NodeTable {
                by_root: BTreeMap::new(),
                counts: self.window.values.iter().map(|&m| (m, 1)).collect(),
            },
            QuinticTree::Node(ch) => {
                let kids: Vec<Rc<NodeTable>> = ch.iter().map(|c| self.table(c)).collect();
                let keys: Vec<Vec<(i64, u64)>> = kids.iter().map(|k| k.counts.iter().map(|(&a, &b)| (a, b)).collect()).collect();
                let mut tb = NodeTable::default();
                for &(m1, c1) in &keys[0] {
                    for &(m2, c2) in &keys[1] {
                        for &(m3, c3) in &keys[2] {
                            for &(m4, c4) in &keys[3] {
                                for &(m5, c5) in &keys[4] {
                                    let c = [m1, m2, m3, m4, m5];
                                    let m = alternating_sum(&c);
                                    if self.cut.node_ok(m, &c) {
                                        tb.by_root.entry(m).or_default().push(c);
                                        *tb.counts.entry(m).or_default() += c1 * c2 * c3 * c4 * c5;
                                    }
                                }
                            }
                        }
                    }
                }
                tb
            }
        };
        let tb = Rc::new(tb);
        self.tables.insert(t.clone(), tb.clone());
        tb
    }

    /// `|C_T(k)|` within the window.
    pub fn count(&mut self, t: &QuinticTree, k: i64) -> u64 {
        self.table(t).counts.get(&k).copied().unwrap_or(0)
    }

    /// Calls `f` on every `k⃗ ∈ C_T(k)` (leaf order), deterministically.
    pub fn for_each(&mut self, t: &QuinticTree, k: i64, f: &mut dyn FnMut(&[i64])) -> Result<()> {
        let n = self.count(t, k);
        if n > self.cap {
            return Err(Error::resource(format!("{n} labelings exceed the cap of {}", self.cap)));
        }
        let mut buf = Vec::with_capacity(t.leaf_count());
        self.visit(t, k, &mut buf, &mut |b: &mut Vec<i64>| f(b));
        Ok(())
    }

    pub fn collect(&mut self, t: &QuinticTree, k: i64) -> Result<Vec<Vec<i64>>> {
        let mut out = Vec::new();
        self.for_each(t, k, &mut |kv| out.push(kv.to_vec()))?;
        Ok(out)
    }

    fn visit(&self, t: &QuinticTree, m: i64, buf: &mut Vec<i64>, k: &mut dyn FnMut(&mut Vec<i64>)) {
        match t {
            QuinticTree::Leaf => {
                if self.window.contains(m) {
                    buf.push(m);
                    k(buf);
                    buf.pop();
                }
            }
            QuinticTree::Node(ch) => {
                let tb = &self.tables[t];
                if let Some(list) = tb.by_root.get(&m) {
                    for roots in list {
                        self.visit_seq(ch, roots, 0, buf, k);
                    }
                }
            }
        }
    }

    fn visit_seq(&self, ch: &[QuinticTree; 5], roots: &[i64; 5], i: usize, buf: &mut Vec<i64>, k: &mut dyn FnMut(&mut Vec<i64>)) {
        if i == 5 {
            k(buf);
            return;
        }
        self.visit(&ch[i], roots[i], buf, &mut |b: &mut Vec<i64>| self.visit_seq(ch, roots, i + 1, b, k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{admissible, LabelAssignment};

    fn params(l: u32, mu: f64, nu: f64) -> RegimeParams {
        RegimeParams::new(l, mu, nu)
    }

    #[test]
    fn profiles_vanish_outside_support() {
        for p in [Profile::smooth_bump(1.0), Profile::poly_bump(1.0)] {
            assert_eq!(p.eval(1.0), 0.0);
            assert_eq!(p.eval(-1.5), 0.0);
            assert!(p.eval(0.3) > 0.0);
        }
        assert_eq!(Profile::poly_bump(2.0).eval(0.0), 1.0);
        assert!((Profile::smooth_bump(1.0).eval(0.0) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(Profile::poly_bump(1.0).window(2), vec![-1, 0, 1]);
        assert_eq!(Profile::poly_bump(0.5).window(8), vec![-3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn fourier_of_even_bump_is_real() {
        let p = Profile::poly_bump(1.0);
        let f0 = p.fourier(0.0).unwrap();
        // ∫(1-x²)^4 = 256/315
        assert!((f0.re - 256.0 / 315.0 / (2.0 * PI).sqrt()).abs() < 1e-13);
        let f = p.fourier(1.7).unwrap();
        assert!(f.im.abs() < 1e-14);
    }

    #[test]
    fn cutoff_arithmetic_is_exact() {
        let c = Cutoffs::new(4, 8.0, 2.0).unwrap();
        assert!(!c.kbar_ok(0));
        assert!(c.kbar_ok(1)); // 1/4 >= 1/8
        assert!(c.omega_ok(8)); // 8/16 >= 1/2
        assert!(!c.omega_ok(7));
        let inf = Cutoffs::new(4, f64::INFINITY, f64::INFINITY).unwrap();
        assert!(inf.kbar_ok(0) && inf.omega_ok(0));
        assert_eq!(Cutoffs::new(4, 2.0, 1.0).unwrap().min_kbar(), 2);
    }

    #[test]
    fn hand_examples() {
        let c = Cutoffs::new(1, 1.0, 1.0).unwrap();
        assert!(c.node_ok(3, &[2, 1, 1, 0, 1]));
        assert!(!c.node_ok(1, &[1, 0, 0, 0, 0]));
    }

    fn brute_c_l(k: i64, w: &[i64], cut: &Cutoffs) -> Vec<MomentumTuple> {
        let mut out = Vec::new();
        for &a in w {
            for &b in w {
                for &c in w {
                    for &d in w {
                        for &e in w {
                            let t = [a, b, c, d, e];
                            if alternating_sum(&t) == k && cut.node_ok(k, &t) {
                                out.push(t);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn small_window_count_matches_brute_force() {
        // support {-1,0,1} at L = 1 needs radius in (1, 2]
        let prof = Profile::poly_bump(1.5);
        let p = params(1, 2.0, 2.0);
        assert_eq!(prof.window(1), vec![-1, 0, 1]);
        let got: Vec<_> = enumerate_c_l(0, &p, &prof).unwrap().collect();
        let brute = brute_c_l(0, &[-1, 0, 1], &p.cutoffs().unwrap());
        assert_eq!(got, brute);
        // frozen count from an independent brute-force script over 3^4 candidates
        assert_eq!(got.len(), 14);
    }

    #[test]
    fn infinite_cutoffs_keep_every_linear_solution() {
        let prof = Profile::poly_bump(1.5);
        let p = params(1, f64::INFINITY, f64::INFINITY);
        let n = enumerate_c_l(0, &p, &prof).unwrap().count();
        // (m1..m4) free in {-1,0,1}, m5 = m1 - m2 + m3 - m4 must stay in the window
        let mut expect = 0;
        for a in -1..=1i64 {
            for b in -1..=1i64 {
                for c in -1..=1i64 {
                    for d in -1..=1i64 {
                        if (a - b + c - d).abs() <= 1 {
                            expect += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(n, expect);
    }

    #[test]
    fn enumeration_agrees_with_tree_admissibility() {
        let prof = Profile::smooth_bump(1.2);
        let p = params(2, 2.0, 3.0);
        let w = prof.window(2);
        let t = QuinticTree::one_node();
        for k in -3..=3 {
            let got: Vec<_> = enumerate_c_l(k, &p, &prof).unwrap().collect();
            let mut expect = Vec::new();
            for &a in &w {
                for &b in &w {
                    for &c in &w {
                        for &d in &w {
                            for &e in &w {
                                let a5 = LabelAssignment::new(vec![a, b, c, d, e], 2);
                                if admissible(&t, &a5, k, 2.0, 3.0).unwrap() {
                                    expect.push([a, b, c, d, e]);
                                }
                            }
                        }
                    }
                }
            }
            assert_eq!(got, expect, "k = {k}");
        }
    }

    #[test]
    fn parity_set() {
        let a = parity_permutations();
        assert_eq!(a.len(), 12);
        assert!(a.contains(&[0, 1, 2, 3, 4]));
        assert!(!a.contains(&[1, 0, 2, 3, 4]));
        assert_eq!(permutations(5).len(), 120);
    }

    #[test]
    fn c_sigma_properties() {
        let prof = Profile::poly_bump(0.8);
        let p = params(4, 4.0, 4.0);
        let id: Vec<_> = enumerate_c_sigma(0, [0, 1, 2, 3, 4], &p, &prof).unwrap().collect();
        let all: Vec<_> = enumerate_c_l(0, &p, &prof).unwrap().collect();
        assert_eq!(id, all);
        for s in parity_permutations() {
            let got: Vec<_> = enumerate_c_sigma(0, s, &p, &prof).unwrap().collect();
            let cut = p.cutoffs().unwrap();
            // Δ is invariant under parity-preserving σ: only the k̄ cutoff can fail
            let expect: Vec<_> = all.iter().copied().filter(|c| cut.kbar_ok(c[s[4]] - c[s[3]])).collect();
            assert_eq!(got, expect);
        }
        for s in permutations(5) {
            let mut inv = [0usize; 5];
            for (j, &x) in s.iter().enumerate() {
                inv[x] = j;
            }
            let s5 = [s[0], s[1], s[2], s[3], s[4]];
            let a = enumerate_c_sigma(1, s5, &p, &prof).unwrap().count();
            let b = enumerate_c_sigma(1, inv, &p, &prof).unwrap().count();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fold_matches_stream() {
        let prof = Profile::poly_bump(1.0);
        let p = params(6, 3.0, 5.0);
        let n = fold_c_l(1, &p, &prof, 0u64, |a, _| *a += 1, |a, b| a + b).unwrap();
        assert_eq!(n as usize, enumerate_c_l(1, &p, &prof).unwrap().count());
    }

    #[test]
    fn pairing_expectations() {
        let idx = ComplexGaussianIndexing;
        let k = [3, -1, 0, 2, 5];
        let e = pairing_expectation(&k, &k, &idx).unwrap();
        assert!((e - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let swapped = [-1, 3, 0, 2, 5];
        assert!(pairing_expectation(&k, &swapped, &idx).unwrap().norm() < 1e-14);
        let rep = [1, 0, 1, 2, 2];
        let e = pairing_expectation(&rep, &rep, &idx).unwrap();
        assert!((e.re - pairing_closed_form(&rep, &rep)).abs() < 1e-12 && e.im.abs() < 1e-14);
        assert!(pairing_expectation(&k, &k[..3], &idx).is_err());
    }

    #[test]
    fn labeling_enumerator_matches_brute_force() {
        let prof = Profile::poly_bump(1.0);
        let p = params(2, 4.0, 4.0);
        let mut en = LabelingEnumerator::new(&p, &prof).unwrap();
        let t1 = QuinticTree::one_node();
        for k in -4..=4 {
            let got: Vec<Vec<i64>> = en.collect(&t1, k).unwrap();
            let expect: Vec<Vec<i64>> = enumerate_c_l(k, &p, &prof).unwrap().map(|c| c.to_vec()).collect();
            assert_eq!(got, expect);
        }
        let t2 = QuinticTree::parse("((⊥,⊥,⊥,⊥,⊥),⊥,⊥,⊥,⊥)").unwrap();
        let got = en.collect(&t2, 0).unwrap();
        assert_eq!(got.len() as u64, en.count(&t2, 0));
        for kv in &got {
            assert!(admissible(&t2, &LabelAssignment::new(kv.clone(), 2), 0, 4.0, 4.0).unwrap());
        }
        assert!(!got.is_empty());
        let capped = LabelingEnumerator::new(&p, &prof).unwrap().with_cap(1).for_each(&t2, 0, &mut |_| {});
        assert!(matches!(capped, Err(Error::Resource(_))));
    }
}
