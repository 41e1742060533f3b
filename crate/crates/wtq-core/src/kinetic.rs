//! Kinetic-limit pipeline: lattice sums `I_{ε,L}`, test-function pairings,
//! the continuum pre-limit integral, the δ-reduced collision integral, the
//! mod-3 residue table behind the one-third branch, and the regime validator.
//!
//! Lattice momenta are integers `m` (`k = m/L`), lattice frequencies are
//! integers `d` (`Δ = d/L²`), exactly as in [`crate::lattice`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{delta_numerator, fold_c_l, enumerate_c_sigma, Cutoffs, Profile, RegimeParams};
use crate::numerics::quadrature::{gauss_kronrod, gauss_legendre, GkOptions};
use crate::numerics::special::sine_integral;
use crate::numerics::{det_reduce, genz_malik, CubatureOptions, Estimate, Neumaier};

/// Largest `L` for which literal phases `Δ·t·ε⁻²` are reduced with integer
/// arithmetic instead of the algebraic identity.
pub const LITERAL_PHASE_MAX_L: u32 = 20;

// ---------------------------------------------------------------------------
// ε-regime and phases

/// `ε⁻² = 2πL²2^L + ρ`, stored through its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRegime {
    pub lattice_size: u32,
    pub rho: f64,
    pub log_inv_eps_sq: f64,
    pub exact_phase_mode: bool,
}

impl EpsilonRegime {
    pub fn new(lattice_size: u32, rho: f64, exact_phase_mode: bool) -> Result<Self> {
        if lattice_size == 0 {
            return Err(Error::domain("L must be positive"));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::domain(format!("rho must be positive and finite, got {rho}")));
        }
        let l = lattice_size as f64;
        let log_main = (2.0 * PI * l * l).ln() + l * std::f64::consts::LN_2;
        let log_inv_eps_sq = log_main + (rho.ln() - log_main).exp().ln_1p();
        Ok(Self { lattice_size, rho, log_inv_eps_sq, exact_phase_mode })
    }

    /// `ε⁻²` as a float; `inf` once it leaves the `f64` range.
    pub fn inv_eps_sq(&self) -> f64 {
        self.log_inv_eps_sq.exp()
    }

    pub fn epsilon(&self) -> f64 {
        (-0.5 * self.log_inv_eps_sq).exp()
    }
}

/// Arithmetic class of a rational time as far as the phase reduction cares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeClass {
    /// `t = a / 2^q`.
    Dyadic { q: u32 },
    /// `t = a / (3·2^q)` with `3 ∤ a`.
    OneThird { a_mod3: u8, q: u32 },
    Other,
}

pub fn classify_time(t: Ratio<i64>) -> TimeClass {
    let b = *t.denom();
    let q = b.trailing_zeros();
    match b >> q {
        1 => TimeClass::Dyadic { q },
        3 => TimeClass::OneThird { a_mod3: t.numer().rem_euclid(3) as u8, q },
        _ => TimeClass::Other,
    }
}

/// The residue `x_L = a·2^{L−q} mod 3` selecting the one-third branch.
pub fn third_branch(t: Ratio<i64>, lattice_size: u32) -> Option<u8> {
    match classify_time(t) {
        TimeClass::OneThird { a_mod3, q } if q <= lattice_size => {
            let two_pow = if (lattice_size - q) % 2 == 0 { 1 } else { 2 };
            Some((a_mod3 * two_pow) % 3)
        }
        _ => None,
    }
}

/// Values `sin(Δ t ε⁻²)/Δ` for `d ∈ [lo, hi]`, `Δ = d/L²`.
struct PhaseTable {
    lo: i64,
    values: Vec<f64>,
}

impl PhaseTable {
    fn new(regime: &EpsilonRegime, t: Ratio<i64>, lo: i64, hi: i64) -> Result<Self> {
        let l = regime.lattice_size;
        let l2 = (l as f64).powi(2);
        let tf = t.to_f64().unwrap_or(f64::NAN);
        let tau = tf * regime.rho;
        if *t.numer() < 0 {
            return Err(Error::domain("time must be non-negative"));
        }
        let phase: Box<dyn Fn(i64) -> f64> = if regime.exact_phase_mode {
            match classify_time(t) {
                TimeClass::Dyadic { q } if q <= l => Box::new(move |d| (d as f64 / l2 * tau).sin()),
                TimeClass::OneThird { .. } => {
                    let x = third_branch(t, l).ok_or_else(|| {
                        Error::domain(format!("phase identity for t = {t} needs L ≥ its dyadic rank"))
                    })?;
                    Box::new(move |d| {
                        let (b, c) = kappa_weights((d.rem_euclid(3) as u8 * x) % 3);
                        let th = d as f64 / l2 * tau;
                        th.sin() * b + th.cos() * c
                    })
                }
                TimeClass::Dyadic { q } => {
                    return Err(Error::domain(format!("dyadic t with rank {q} > L = {l}: phase identity not yet valid")))
                }
                TimeClass::Other => {
                    return Err(Error::domain(format!(
                        "exact phase mode supports dyadic t and t ∈ 1/3 + dyadic only, got {t}"
                    )))
                }
            }
        } else {
            if l > LITERAL_PHASE_MAX_L {
                return Err(Error::domain(format!(
                    "literal phases need L ≤ {LITERAL_PHASE_MAX_L}, got {l}; enable exact_phase_mode"
                )));
            }
            // Δ·t·ε⁻² = 2π·d·a·2^L/b + d·a·ρ/(b·L²); the first term is reduced mod 2π exactly
            let (a, b) = (*t.numer() as i128, *t.denom() as i128);
            let two_l = (1i128 << l) % b;
            let rho = regime.rho;
            Box::new(move |d| {
                let r = ((d as i128).rem_euclid(b) * a.rem_euclid(b) % b * two_l).rem_euclid(b);
                let ph = 2.0 * PI * (r as f64) / (b as f64) + (d as f64) * (a as f64) * rho / ((b as f64) * l2);
                ph.sin()
            })
        };
        // d = 0: the Δ → 0 limit of the summand actually used — tρ for reduced
        // phases, t·ε⁻² for literal ones (NaN when that overflows; callers check)
        let zero = if regime.exact_phase_mode { tau } else { tf * regime.inv_eps_sq() };
        let values = (lo..=hi)
            .map(|d| if d == 0 { if zero.is_finite() { zero } else { f64::NAN } } else { phase(d) * l2 / d as f64 })
            .collect();
        Ok(Self { lo, values })
    }

    #[inline]
    fn get(&self, d: i64) -> f64 {
        self.values[(d - self.lo) as usize]
    }
}

fn check_regime(regime: &EpsilonRegime, params: &RegimeParams) -> Result<Cutoffs> {
    if regime.lattice_size != params.lattice_size {
        return Err(Error::domain(format!(
            "regime L = {} does not match params L = {}",
            regime.lattice_size, params.lattice_size
        )));
    }
    params.cutoffs()
}

fn zero_guard(cut: &Cutoffs, tab: &PhaseTable) -> Result<()> {
    if cut.min_omega() == 0 && tab.lo <= 0 && tab.get(0).is_nan() {
        return Err(Error::domain("d = 0 tuples are admitted but t·ε⁻² overflows; use a finite ν cutoff"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// mod-3 residues

/// `d mod 3` for the residue tuple `(x, x₁, …, x₄)`.
pub fn residue_class(x: [u8; 5]) -> u8 {
    let [x0, x1, x2, x3, x4] = x.map(|v| v as i64);
    let x5 = x0 - x1 + x2 - x3 + x4;
    (x0 * x0 - x1 * x1 + x2 * x2 - x3 * x3 + x4 * x4 - x5 * x5).rem_euclid(3) as u8
}

/// Counts of the 243 residue tuples with `d ≡ 0, 1, 2 (mod 3)`.
pub fn residue_count() -> (u64, u64, u64) {
    let mut n = [0u64; 3];
    for x in residue_tuples() {
        n[residue_class(x) as usize] += 1;
    }
    (n[0], n[1], n[2])
}

fn residue_tuples() -> impl Iterator<Item = [u8; 5]> {
    (0..243u32).map(|mut i| {
        let mut x = [0u8; 5];
        for v in x.iter_mut().rev() {
            *v = (i % 3) as u8;
            i /= 3;
        }
        x
    })
}

fn kappa_weights(r: u8) -> (f64, f64) {
    let s = 3f64.sqrt() / 2.0;
    match r {
        0 => (1.0, 0.0),
        1 => (-0.5, s),
        _ => (-0.5, -s),
    }
}

/// Cosine/sine weights `(b_κ, c_κ)` of the extra phase `2π·x_L·d/3`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaTable {
    pub x_l: u8,
    pub residues: BTreeMap<[u8; 5], (f64, f64)>,
}

impl KappaTable {
    pub fn new(x_l: u8) -> Result<Self> {
        if !(x_l == 1 || x_l == 2) {
            return Err(Error::domain(format!("branch residue must be 1 or 2, got {x_l}")));
        }
        let residues = residue_tuples().map(|x| (x, kappa_weights((residue_class(x) * x_l) % 3))).collect();
        Ok(Self { x_l, residues })
    }

    pub fn net_b(&self) -> f64 {
        self.residues.values().map(|w| w.0).sum()
    }

    pub fn net_c(&self) -> f64 {
        self.residues.values().map(|w| w.1).sum()
    }

    /// `(b = 1, b = −1/2, c = 0, c = +√3/2, c = −√3/2)` counts.
    pub fn counts(&self) -> [usize; 5] {
        let mut n = [0; 5];
        for &(b, c) in self.residues.values() {
            n[if b == 1.0 { 0 } else { 1 }] += 1;
            n[if c == 0.0 {
                2
            } else if c > 0.0 {
                3
            } else {
                4
            }] += 1;
        }
        n
    }
}

/// Dyadic versus one-third kinetic coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThirdCase {
    pub net_b: f64,
    pub net_c: f64,
    /// Pre-limit coefficients in front of the 5-fold integral.
    pub dyadic_prelimit: f64,
    pub third_prelimit: f64,
    /// Limit coefficients in front of the δ-reduced integral.
    pub dyadic_coefficient: f64,
    pub third_coefficient: f64,
    pub ratio: f64,
}

pub fn third_case_coefficients() -> ThirdCase {
    let tab = KappaTable::new(1).expect("valid branch");
    let net_b = tab.net_b();
    let base = 2.0 / (2.0 * PI).powi(5);
    let n_perm = crate::lattice::parity_permutations().len() as f64;
    let dyadic_prelimit = n_perm * base;
    let third_prelimit = dyadic_prelimit * net_b / 243.0;
    ThirdCase {
        net_b,
        net_c: tab.net_c(),
        dyadic_prelimit,
        third_prelimit,
        dyadic_coefficient: PI * dyadic_prelimit,
        third_coefficient: PI * third_prelimit,
        ratio: dyadic_prelimit / third_prelimit,
    }
}

// ---------------------------------------------------------------------------
// lattice sums

#[inline]
fn parity_weight(cut: &Cutoffs, c: &[i64; 5]) -> f64 {
    let mut pairs = 0u32;
    for e in [0, 2, 4] {
        for o in [1, 3] {
            pairs += cut.kbar_ok(c[e] - c[o]) as u32;
        }
    }
    2.0 * pairs as f64
}

fn max_abs_mode(profile: &Profile, lattice_size: u32) -> i64 {
    profile.window(lattice_size).iter().map(|m| m.abs()).max().unwrap_or(0)
}

/// `I_{ε,L}(k, t)` at lattice momentum `k` (integer mode).
pub fn i_eps_sum(k: i64, t: Ratio<i64>, regime: &EpsilonRegime, params: &RegimeParams, profile: &Profile) -> Result<f64> {
    let cut = check_regime(regime, params)?;
    profile.validate()?;
    let l = params.lattice_size;
    let mm = max_abs_mode(profile, l);
    let dmax = k * k + 5 * mm * mm;
    let tab = PhaseTable::new(regime, t, -dmax, dmax)?;
    if t.is_zero() {
        return Ok(0.0);
    }
    zero_guard(&cut, &tab)?;
    let amp2 = |m: i64| profile.at_mode(m, l).powi(2);
    let s = fold_c_l(
        k,
        params,
        profile,
        Neumaier::new(),
        |acc, c| {
            let w = parity_weight(&cut, c);
            acc.add(w * tab.get(delta_numerator(k, c)) * c.iter().map(|&m| amp2(m)).product::<f64>());
        },
        Neumaier::merge,
    )?;
    Ok(2.0 / (2.0 * PI * l as f64).powi(4) * s.value())
}

/// The same sum written literally as `Σ_σ Σ_{k⃗ ∈ C_σ(k)}`, visiting the
/// permutations in the given order.
pub fn i_eps_sum_by_sigma(
    k: i64,
    t: Ratio<i64>,
    regime: &EpsilonRegime,
    params: &RegimeParams,
    profile: &Profile,
    sigmas: &[[usize; 5]],
) -> Result<f64> {
    let cut = check_regime(regime, params)?;
    let l = params.lattice_size;
    let mm = max_abs_mode(profile, l);
    let dmax = k * k + 5 * mm * mm;
    let tab = PhaseTable::new(regime, t, -dmax, dmax)?;
    zero_guard(&cut, &tab)?;
    let mut acc = Neumaier::new();
    for &s in sigmas {
        for c in enumerate_c_sigma(k, s, params, profile)? {
            let a: f64 = c.iter().map(|&m| profile.at_mode(m, l).powi(2)).product();
            acc.add(tab.get(delta_numerator(k, &c)) * a);
        }
    }
    Ok(2.0 / (2.0 * PI * l as f64).powi(4) * acc.value())
}

/// `Re(f̂(k/L)·conj(ĝ(k/L)))` for integer `k ∈ [lo, hi]`.
fn spectral_table(f: &Profile, g: &Profile, lattice_size: u32, lo: i64, hi: i64) -> Result<Vec<f64>> {
    let l = lattice_size as f64;
    (lo..=hi)
        .map(|k| {
            let x = k as f64 / l;
            Ok((f.fourier(x)? * g.fourier(x)?.conj()).re)
        })
        .collect()
}

/// `I_L(t) = (2πL)⁻¹ Σ_k Re(f̂ ĝ̄)(k/L) I_{ε,L}(k, t)`, summed directly over
/// five-tuples in the amplitude window.
pub fn i_l_pairing(
    t: Ratio<i64>,
    regime: &EpsilonRegime,
    params: &RegimeParams,
    profile: &Profile,
    f: &Profile,
    g: &Profile,
) -> Result<f64> {
    let cut = check_regime(regime, params)?;
    profile.validate()?;
    f.validate()?;
    g.validate()?;
    let l = params.lattice_size;
    let w = profile.window(l);
    if w.is_empty() || t.is_zero() {
        return Ok(0.0);
    }
    let (lo, hi) = (w[0], *w.last().unwrap());
    let (klo, khi) = (5 * lo - 4 * hi, 5 * hi - 4 * lo);
    let mm = lo.abs().max(hi.abs());
    let dmax = 27 * mm * mm;
    let tab = PhaseTable::new(regime, t, -dmax, dmax)?;
    zero_guard(&cut, &tab)?;
    let fg = spectral_table(f, g, l, klo, khi)?;
    let amp2: Vec<f64> = w.iter().map(|&m| profile.at_mode(m, l).powi(2)).collect();
    let mk = cut.min_kbar();
    let md = cut.min_omega();
    let ok = |x: i64| x.abs() >= mk;
    let s = det_reduce(
        w.len(),
        Neumaier::new(),
        |i1| {
            let mut acc = Neumaier::new();
            let c1 = w[i1];
            for (i2, &c2) in w.iter().enumerate() {
                let b12 = ok(c1 - c2) as u32;
                for (i3, &c3) in w.iter().enumerate() {
                    let b32 = ok(c3 - c2) as u32;
                    let a123 = amp2[i1] * amp2[i2] * amp2[i3];
                    for (i4, &c4) in w.iter().enumerate() {
                        let base = b12 + b32 + ok(c1 - c4) as u32 + ok(c3 - c4) as u32 + 1;
                        let s4 = c1 - c2 + c3 - c4;
                        let e4 = -c1 * c1 + c2 * c2 - c3 * c3 + c4 * c4;
                        let a4 = a123 * amp2[i4];
                        let mut inner = 0.0;
                        for (i5, &c5) in w.iter().enumerate() {
                            if !ok(c5 - c4) {
                                continue;
                            }
                            let d = s4 * s4 + 2 * s4 * c5 + e4;
                            if d.abs() < md {
                                continue;
                            }
                            let wgt = 2 * (base + ok(c5 - c2) as u32);
                            inner += wgt as f64 * tab.get(d) * amp2[i5] * fg[(s4 + c5 - klo) as usize];
                        }
                        acc.add(inner * a4);
                    }
                }
            }
            acc
        },
        Neumaier::merge,
    );
    let lf = l as f64;
    Ok(s.value() * 2.0 / (2.0 * PI * lf).powi(4) / (2.0 * PI * lf))
}

/// Reference form of [`i_l_pairing`]: the outer `k`-sum over [`i_eps_sum`].
pub fn i_l_pairing_by_k(
    t: Ratio<i64>,
    regime: &EpsilonRegime,
    params: &RegimeParams,
    profile: &Profile,
    f: &Profile,
    g: &Profile,
) -> Result<f64> {
    let l = params.lattice_size;
    let w = profile.window(l);
    if w.is_empty() {
        return Ok(0.0);
    }
    let (lo, hi) = (w[0], *w.last().unwrap());
    let (klo, khi) = (5 * lo - 4 * hi, 5 * hi - 4 * lo);
    let fg = spectral_table(f, g, l, klo, khi)?;
    let mut acc = Neumaier::new();
    for k in klo..=khi {
        let v = fg[(k - klo) as usize];
        if v != 0.0 {
            acc.add(v * i_eps_sum(k, t, regime, params, profile)?);
        }
    }
    Ok(acc.value() / (2.0 * PI * l as f64))
}

// ---------------------------------------------------------------------------
// continuum integrals

/// How the twelve parity permutations enter the continuum integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationModel {
    /// Weight 12 on `|k − k₁ + k₂ − k₃| ≥ 1/μ`.
    Symmetric,
    /// Each permutation carries its own cutoff, as the lattice sum does.
    PerPermutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Dyadic,
    OneThird,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
    pub model: PermutationModel,
    pub branch: Branch,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-3, abs_tol: 1e-16, max_evals: 10_000_000, model: PermutationModel::Symmetric, branch: Branch::Dyadic }
    }
}

/// Chebyshev interpolant of `Re(f̂ ĝ̄)` on the reachable `k` range.
struct SpectralProduct {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralProduct {
    const N: usize = 128;

    fn new(f: &Profile, g: &Profile, lo: f64, hi: f64) -> Result<Self> {
        let n = Self::N;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for j in 0..n {
            let th = PI * (2 * j + 1) as f64 / (2 * n) as f64;
            let s = th.cos();
            let x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * s;
            nodes.push(s);
            weights.push(if j % 2 == 0 { th.sin() } else { -th.sin() });
            values.push((f.fourier(x)? * g.fourier(x)?.conj()).re);
        }
        Ok(Self { lo, hi, nodes, weights, values })
    }

    fn eval(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        let s = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..self.nodes.len() {
            let dx = s - self.nodes[j];
            if dx == 0.0 {
                return self.values[j];
            }
            let q = self.weights[j] / dx;
            num += q * self.values[j];
            den += q;
        }
        num / den
    }
}

struct Outer {
    k1: f64,
    k2: f64,
    k3: f64,
    kb: f64,
    dbar: f64,
    pref: f64,
    /// `1 + [|k₁−k₂| ≥ m] + [|k₃−k₂| ≥ m]` — the pairs not involving `k₄`, `k₅`.
    base: u32,
}

struct Kernel<'a> {
    a: &'a Profile,
    m: f64,
    model: PermutationModel,
    fg: SpectralProduct,
}

impl<'a> Kernel<'a> {
    fn new(a: &'a Profile, mu: f64, model: PermutationModel, f: &Profile, g: &Profile) -> Result<Self> {
        a.validate()?;
        f.validate()?;
        g.validate()?;
        if !(mu > 0.0) {
            return Err(Error::domain(format!("mu must be positive, got {mu}")));
        }
        let (c, r) = (a.center, a.radius);
        let fg = SpectralProduct::new(f, g, c - 5.0 * r, c + 5.0 * r)?;
        Ok(Self { a, m: if mu.is_finite() { 1.0 / mu } else { 0.0 }, model, fg })
    }

    /// Integration boxes in `(k₂, u₁ = k₁−k₂, u₃ = k₃−k₂, k̄)`: split at the
    /// cutoffs, geometrically in `|k̄|` (the resonant surface steepens as
    /// `k̄ → 0`), and on a coarse uniform grid otherwise.
    fn boxes(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let (c, r, m) = (self.a.center, self.a.radius, self.m);
        if m >= 2.0 * r {
            return vec![];
        }
        let uniform = |a: f64, b: f64, n: usize| -> Vec<(f64, f64)> {
            (0..n).map(|i| (a + (b - a) * i as f64 / n as f64, a + (b - a) * (i + 1) as f64 / n as f64)).collect()
        };
        let u_cuts: Vec<(f64, f64)> = match self.model {
            PermutationModel::PerPermutation if m > 0.0 => {
                let mut v = uniform(-2.0 * r, -m, 2);
                v.push((-m, m));
                v.extend(uniform(m, 2.0 * r, 2));
                v
            }
            _ => uniform(-2.0 * r, 2.0 * r, 4),
        };
        let mut kb_pos = vec![];
        let floor = if m > 0.0 { m } else { 2.0 * r * 2f64.powi(-12) };
        let mut lo = floor;
        while lo < 2.0 * r {
            let hi = (2.0 * lo).min(2.0 * r);
            kb_pos.push((lo, hi));
            lo = hi;
        }
        if m == 0.0 {
            kb_pos.insert(0, (0.0, floor));
        }
        let kb_cuts: Vec<(f64, f64)> = kb_pos.iter().map(|&(a, b)| (-b, -a)).chain(kb_pos.iter().copied()).collect();
        let mut out = Vec::new();
        for &(k2a, k2b) in &uniform(c - r, c + r, 2) {
            for &(u1a, u1b) in &u_cuts {
                for &(u3a, u3b) in &u_cuts {
                    for &(ka, kb) in &kb_cuts {
                        out.push((vec![k2a, u1a, u3a, ka], vec![k2b, u1b, u3b, kb]));
                    }
                }
            }
        }
        out
    }

    fn total_volume(&self) -> f64 {
        self.boxes().iter().map(|(lo, hi)| lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>()).sum()
    }

    #[inline]
    fn a2(&self, x: f64) -> f64 {
        self.a.eval(x).powi(2)
    }

    fn outer(&self, x: &[f64]) -> Option<Outer> {
        let (k2, u1, u3, kb) = (x[0], x[1], x[2], x[3]);
        if kb.abs() < self.m || kb == 0.0 {
            return None;
        }
        let (k1, k3) = (k2 + u1, k2 + u3);
        let a123 = self.a2(k1) * self.a2(k2) * self.a2(k3);
        if a123 == 0.0 {
            return None;
        }
        let k = kb + u1 + k2 + u3;
        let fg = self.fg.eval(k);
        if fg == 0.0 {
            return None;
        }
        let dbar = k * k - k1 * k1 + k2 * k2 - k3 * k3 - kb * kb;
        let base = 1 + (u1.abs() >= self.m) as u32 + (u3.abs() >= self.m) as u32;
        Some(Outer { k1, k2, k3, kb, dbar, pref: a123 * fg, base })
    }

    #[inline]
    fn weight(&self, o: &Outer, k4: f64) -> f64 {
        match self.model {
            PermutationModel::Symmetric => 12.0,
            PermutationModel::PerPermutation => {
                let m = self.m;
                let k5 = o.kb + k4;
                let n = o.base
                    + ((k5 - o.k2).abs() >= m) as u32
                    + ((o.k1 - k4).abs() >= m) as u32
                    + ((o.k3 - k4).abs() >= m) as u32;
                2.0 * n as f64
            }
        }
    }

    #[inline]
    fn a4(&self, o: &Outer, k4: f64) -> f64 {
        self.a2(k4) * self.a2(o.kb + k4)
    }

    /// Smooth pieces `(lo, hi, W)` of the `k₄` integrand.
    fn pieces(&self, o: &Outer) -> Vec<(f64, f64, f64)> {
        let (s0, s1) = self.a.support();
        let lo = s0.max(s0 - o.kb);
        let hi = s1.min(s1 - o.kb);
        if lo >= hi {
            return vec![];
        }
        let mut cuts = vec![lo, hi];
        if self.model == PermutationModel::PerPermutation && self.m > 0.0 {
            for p in [o.k1, o.k3, o.k2 - o.kb] {
                for q in [p - self.m, p + self.m] {
                    if q > lo && q < hi {
                        cuts.push(q);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1], self.weight(o, 0.5 * (w[0] + w[1]))))
            .collect()
    }

    /// `π/(2|k̄|)·W·|a(k₄*)|²|a(k₅*)|²` times the outer factor.
    fn resonant(&self, x: &[f64]) -> f64 {
        let Some(o) = self.outer(x) else { return 0.0 };
        let k4 = o.dbar / (2.0 * o.kb);
        let a = self.a4(&o, k4);
        if a == 0.0 {
            return 0.0;
        }
        o.pref * PI / (2.0 * o.kb.abs()) * self.weight(&o, k4) * a
    }

    /// `∫ dk₄ W·|a(k₄)|²|a(k₅)|² sin(τΔ)/Δ` times the outer factor.
    fn oscillatory(&self, x: &[f64], tau: f64, rules: &Rules) -> f64 {
        let Some(o) = self.outer(x) else { return 0.0 };
        let mut acc = 0.0;
        let two_kb = 2.0 * o.kb;
        for (p, q, w) in self.pieces(&o) {
            let (xa, xb) = {
                let (u, v) = (o.dbar - two_kb * p, o.dbar - two_kb * q);
                (u.min(v), u.max(v))
            };
            let h = |xx: f64| w * self.a4(&o, (o.dbar - xx) / two_kb);
            acc += osc_sinc(&h, xa, xb, tau, rules);
        }
        o.pref * acc / two_kb.abs()
    }
}

/// Quadrature rules reused by every panel.
struct Rules {
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
    cheb_nodes: Vec<f64>,
    /// `cheb_cos[n][j] = cos(n·θ_j)`.
    cheb_cos: Vec<Vec<f64>>,
}

const FILON_N: usize = 16;
const FILON_OMEGA: f64 = 40.0;

fn rules() -> &'static Rules {
    static R: OnceLock<Rules> = OnceLock::new();
    R.get_or_init(|| {
        let (gl_nodes, gl_weights) = gauss_legendre(48);
        let th: Vec<f64> = (0..FILON_N).map(|j| PI * (j as f64 + 0.5) / FILON_N as f64).collect();
        Rules {
            gl_nodes,
            gl_weights,
            cheb_nodes: th.iter().map(|t| t.cos()).collect(),
            cheb_cos: (0..FILON_N).map(|n| th.iter().map(|t| (n as f64 * t).cos()).collect()).collect(),
        }
    })
}

/// Monomial coefficients of `T₀ … T_{N−1}`.
fn cheb_to_mono() -> &'static Vec<Vec<f64>> {
    static M: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    M.get_or_init(|| {
        let mut t = vec![vec![0.0; FILON_N]; FILON_N];
        t[0][0] = 1.0;
        t[1][1] = 1.0;
        for n in 1..FILON_N - 1 {
            for j in 0..FILON_N {
                let up = if j > 0 { 2.0 * t[n][j - 1] } else { 0.0 };
                t[n + 1][j] = up - t[n - 1][j];
            }
        }
        t
    })
}

/// `∫_{-1}^{1} s^j e^{iωs} ds` for `j < N`, by upward recurrence (`ω ≫ N`).
fn filon_moments(omega: f64) -> [Complex64; FILON_N] {
    let mut mu = [Complex64::new(0.0, 0.0); FILON_N];
    let e_p = Complex64::from_polar(1.0, omega);
    let e_m = e_p.conj();
    let iw = Complex64::new(0.0, omega);
    mu[0] = Complex64::new(2.0 * omega.sin() / omega, 0.0);
    for j in 1..FILON_N {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        mu[j] = (e_p - e_m * sign) / iw - mu[j - 1] * (j as f64) / iw;
    }
    mu
}

/// `∫_p^q g(x) sin(τx) dx` on one panel.
fn sin_panel<G: Fn(f64) -> f64>(g: &G, p: f64, q: f64, tau: f64, r: &Rules) -> f64 {
    let hw = 0.5 * (q - p);
    let mid = 0.5 * (p + q);
    let omega = tau * hw;
    if omega <= FILON_OMEGA {
        let mut s = 0.0;
        for (x, w) in r.gl_nodes.iter().zip(&r.gl_weights) {
            let xx = mid + hw * x;
            s += w * g(xx) * (tau * xx).sin();
        }
        return s * hw;
    }
    let vals: Vec<f64> = r.cheb_nodes.iter().map(|s| g(mid + hw * s)).collect();
    let n = FILON_N as f64;
    let mono = cheb_to_mono();
    let mut coef = [0.0; FILON_N];
    for (k, row) in r.cheb_cos.iter().enumerate() {
        let mut ck: f64 = row.iter().zip(&vals).map(|(c, v)| c * v).sum::<f64>() * 2.0 / n;
        if k == 0 {
            ck *= 0.5;
        }
        for j in 0..FILON_N {
            coef[j] += ck * mono[k][j];
        }
    }
    let mu = filon_moments(omega);
    let z: Complex64 = coef.iter().zip(mu.iter()).map(|(c, m)| m * c).sum();
    hw * (Complex64::from_polar(1.0, tau * mid) * z).im
}

/// `∫_{xa}^{xb} h(x) sin(τx)/x dx` for smooth `h`, with the value at the
/// point of the interval nearest 0 subtracted and integrated through `Si`.
fn osc_sinc<H: Fn(f64) -> f64>(h: &H, xa: f64, xb: f64, tau: f64, r: &Rules) -> f64 {
    if tau == 0.0 || xb <= xa {
        return 0.0;
    }
    let x0 = 0f64.clamp(xa, xb);
    let s0 = h(x0);
    let width = xb - xa;
    let eps = 1e-7 * width;
    let g = |x: f64| {
        if x == 0.0 {
            (h(eps) - h(-eps)) / (2.0 * eps)
        } else {
            (h(x) - s0) / x
        }
    };
    let mut total = s0 * (sine_integral(tau * xb) - sine_integral(tau * xa));
    let unit = width / 6.0;
    // panels graded towards 0 when it sits just outside the interval
    let mut bounds = vec![0.0];
    let dist = x0.abs();
    if x0 != 0.0 && dist < unit {
        let mut o = dist;
        while o < width {
            bounds.push(o);
            o = 2.0 * (dist + o) - dist;
        }
    }
    bounds.push(width);
    let dir = if x0 == xb { -1.0 } else { 1.0 };
    let start = if x0 == xb { xb } else { xa };
    for w in bounds.windows(2) {
        let len = w[1] - w[0];
        let n = (len / unit).ceil().max(1.0) as usize;
        for i in 0..n {
            let a = start + dir * (w[0] + len * i as f64 / n as f64);
            let b = start + dir * (w[0] + len * (i + 1) as f64 / n as f64);
            total += sin_panel(&g, a.min(b), a.max(b), tau, r);
        }
    }
    total
}

fn branch_factor(branch: Branch) -> f64 {
    match branch {
        Branch::Dyadic => 1.0,
        Branch::OneThird => KappaTable::new(1).expect("valid branch").net_b() / 243.0,
    }
}

/// `(2/(2π)⁵) ∫_B W sin(Δtρ)/Δ Π|a(k_j)|² Re(f̂ ĝ̄)(k) dk dk₁…dk₄`.
pub fn continuum_integral(
    t: f64,
    rho: f64,
    mu: f64,
    profile: &Profile,
    f: &Profile,
    g: &Profile,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    if !(t >= 0.0 && t.is_finite() && rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain("continuum_integral needs t ≥ 0 and finite ρ > 0"));
    }
    let kern = Kernel::new(profile, mu, cfg.model, f, g)?;
    let tau = t * rho;
    if tau == 0.0 {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let boxes = kern.boxes();
    if boxes.is_empty() {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let r = rules();
    let opts = CubatureOptions { abs_tol: cfg.abs_tol, rel_tol: cfg.rel_tol, max_evals: cfg.max_evals };
    let c = 2.0 / (2.0 * PI).powi(5) * branch_factor(cfg.branch);
    Ok(genz_malik(|x| kern.oscillatory(x, tau, r), &boxes, opts).map_err(|e| scale_err(e, c))?.scale(c))
}

fn scale_err(e: Error, c: f64) -> Error {
    match e {
        Error::Numerical { message, partial, error } => Error::Numerical { message, partial: partial * c, error: error * c },
        other => other,
    }
}

/// Plain Monte Carlo over the same four outer variables (the `k₄` integral
/// stays deterministic); an independent check on the cubature.
#[allow(clippy::too_many_arguments)]
pub fn continuum_integral_mc(
    t: f64,
    rho: f64,
    mu: f64,
    profile: &Profile,
    f: &Profile,
    g: &Profile,
    cfg: &QuadConfig,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let kern = Kernel::new(profile, mu, cfg.model, f, g)?;
    let tau = t * rho;
    let boxes = kern.boxes();
    if boxes.is_empty() || tau == 0.0 || samples == 0 {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let vol = kern.total_volume();
    let vols: Vec<f64> = boxes.iter().map(|(lo, hi)| lo.iter().zip(hi).map(|(a, b)| b - a).product()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rules();
    let (mut s1, mut s2) = (Neumaier::new(), Neumaier::new());
    let mut x = [0.0; 4];
    for _ in 0..samples {
        let mut u = rng.random::<f64>() * vol;
        let mut bi = 0;
        while bi + 1 < vols.len() && u >= vols[bi] {
            u -= vols[bi];
            bi += 1;
        }
        let (lo, hi) = &boxes[bi];
        for j in 0..4 {
            x[j] = lo[j] + (hi[j] - lo[j]) * rng.random::<f64>();
        }
        let v = kern.oscillatory(&x, tau, r) * vol;
        s1.add(v);
        s2.add(v * v);
    }
    let n = samples as f64;
    let mean = s1.value() / n;
    let var = (s2.value() / n - mean * mean).max(0.0);
    let c = 2.0 / (2.0 * PI).powi(5) * branch_factor(cfg.branch);
    Ok(Estimate::new(mean * c, (var / n).sqrt() * c))
}

/// The δ-reduced integral on `|k̄| ≥ 1/μ`, i.e. the `ρ → ∞` limit of
/// [`continuum_integral`] at the same cutoff.
pub fn delta_reduced_at_cutoff(mu: f64, profile: &Profile, f: &Profile, g: &Profile, cfg: &QuadConfig) -> Result<Estimate> {
    let kern = Kernel::new(profile, mu, cfg.model, f, g)?;
    let boxes = kern.boxes();
    if boxes.is_empty() {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let opts = CubatureOptions { abs_tol: cfg.abs_tol, rel_tol: cfg.rel_tol, max_evals: cfg.max_evals };
    let c = 2.0 / (2.0 * PI).powi(5) * branch_factor(cfg.branch);
    Ok(genz_malik(|x| kern.resonant(x), &boxes, opts).map_err(|e| scale_err(e, c))?.scale(c))
}

/// `continuum_integral − delta_reduced_at_cutoff`, integrated as one
/// pointwise difference so that the two quadrature errors do not swamp it.
pub fn continuum_delta_gap(
    t: f64,
    rho: f64,
    mu: f64,
    profile: &Profile,
    f: &Profile,
    g: &Profile,
    cfg: &QuadConfig,
) -> Result<Estimate> {
    if !(t > 0.0 && t.is_finite() && rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain("continuum_delta_gap needs t > 0 and finite ρ > 0"));
    }
    let kern = Kernel::new(profile, mu, cfg.model, f, g)?;
    let boxes = kern.boxes();
    if boxes.is_empty() {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let tau = t * rho;
    let r = rules();
    let opts = CubatureOptions { abs_tol: cfg.abs_tol, rel_tol: cfg.rel_tol, max_evals: cfg.max_evals };
    let c = 2.0 / (2.0 * PI).powi(5) * branch_factor(cfg.branch);
    Ok(genz_malik(|x| kern.oscillatory(x, tau, r) - kern.resonant(x), &boxes, opts)
        .map_err(|e| scale_err(e, c))?
        .scale(c))
}

/// Cutoffs used for the `μ → ∞` extrapolation.
pub const RICHARDSON_MU: [f64; 3] = [8.0, 16.0, 32.0];

/// The δ-reduced kinetic integral with the `1/|k̄|` cutoff removed by
/// two-level Richardson extrapolation in `1/μ`.
pub fn delta_reduced(profile: &Profile, f: &Profile, g: &Profile, cfg: &QuadConfig) -> Result<Estimate> {
    // a level that runs out of budget still contributes its partial value, with its error
    let v: Vec<Estimate> = RICHARDSON_MU
        .iter()
        .map(|&mu| match delta_reduced_at_cutoff(mu, profile, f, g, cfg) {
            Err(Error::Numerical { partial, error, .. }) => Ok(Estimate::new(partial, error)),
            other => other,
        })
        .collect::<Result<_>>()?;
    let r1 = 2.0 * v[1].value - v[0].value;
    let r2 = 2.0 * v[2].value - v[1].value;
    let lim = (4.0 * r2 - r1) / 3.0;
    let quad = v.iter().map(|e| e.error).sum::<f64>() * 4.0;
    Ok(Estimate::new(lim, (lim - r2).abs() + quad))
}

/// `∫_ℝ (1 − cos ξ)/ξ² dξ` by quadrature plus a closed-form tail.
pub fn sinc_mass_identity() -> Result<Estimate> {
    let x_max = 40.0 * PI;
    let bps: Vec<f64> = (1..40).map(|j| j as f64 * PI).collect();
    let opts = GkOptions { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 4000 };
    let core = gauss_kronrod(
        |x| {
            if x.abs() < 1e-4 {
                0.5 - x * x / 24.0
            } else {
                let s = (0.5 * x).sin();
                2.0 * s * s / (x * x)
            }
        },
        0.0,
        x_max,
        &bps,
        opts,
    )?;
    let tail = (1.0 - x_max.cos()) / x_max + PI / 2.0 - sine_integral(x_max);
    Ok(Estimate::new(2.0 * (core.value + tail), 2.0 * core.error))
}

// ---------------------------------------------------------------------------
// regime validator

/// Power-law regime `ν = L^{α_ν}`, `μ = L^{β_μ}`, `ρ = L^{γ_ρ}` together with
/// the exponent `α` of the first assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeExponents {
    pub alpha_nu: f64,
    pub beta_mu: f64,
    pub gamma_rho: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub symbolic: String,
    pub pass: bool,
    /// `(L, ratio)` samples of the quantity that must tend to 0 (or ∞).
    pub samples: Vec<(u64, f64)>,
    /// Whether the sampled ratios already move in the right direction.
    pub numeric_trend_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub exponents: RegimeExponents,
    pub conditions: Vec<ConditionReport>,
    pub ordered_exponents: bool,
    pub all_pass: bool,
}

pub fn regime_check(e: RegimeExponents, l_samples: &[u64]) -> RegimeReport {
    let RegimeExponents { alpha_nu: a, beta_mu: b, gamma_rho: g, alpha } = e;
    let pw = |l: u64, p: f64| (l as f64).powf(p);
    type Ratio = Box<dyn Fn(u64) -> f64>;
    let mut specs: Vec<(&str, String, bool, Ratio, bool)> = vec![
        (
            "nu^(1+alpha) = o(L^(1/2))",
            format!("alpha_nu*(1+alpha) = {} < 1/2", a * (1.0 + alpha)),
            alpha > 0.0 && a * (1.0 + alpha) < 0.5,
            Box::new(move |l| pw(l, a * (1.0 + alpha)) / pw(l, 0.5)),
            true,
        ),
        (
            "rho = o(mu)",
            format!("gamma_rho = {g} < beta_mu = {b}"),
            g < b,
            Box::new(move |l| pw(l, g) / pw(l, b)),
            true,
        ),
        (
            "rho*mu = o(nu)",
            format!("gamma_rho + beta_mu = {} < alpha_nu = {a}", g + b),
            g + b < a,
            Box::new(move |l| pw(l, g + b) / pw(l, a)),
            true,
        ),
        (
            "ln^2(mu) = o(rho^(1/4))",
            format!("gamma_rho = {g} > 0"),
            g > 0.0,
            Box::new(move |l| (b * (l as f64).ln()).powi(2) / pw(l, g / 4.0)),
            true,
        ),
        ("mu -> inf", format!("beta_mu = {b} > 0"), b > 0.0, Box::new(move |l| pw(l, b)), false),
        ("rho -> inf", format!("gamma_rho = {g} > 0"), g > 0.0, Box::new(move |l| pw(l, g)), false),
    ];
    let conditions: Vec<ConditionReport> = specs
        .drain(..)
        .map(|(name, symbolic, pass, ratio, to_zero)| {
            let samples: Vec<(u64, f64)> = l_samples.iter().map(|&l| (l, ratio(l))).collect();
            let numeric_trend_ok = samples.windows(2).all(|w| if to_zero { w[1].1 < w[0].1 } else { w[1].1 > w[0].1 });
            ConditionReport { name: name.to_string(), symbolic, pass, samples, numeric_trend_ok }
        })
        .collect();
    let ordered_exponents = 0.0 < g && g < b && b < a && a < 0.5 && b + g < a;
    let all_pass = conditions.iter().all(|c| c.pass);
    RegimeReport { exponents: e, conditions, ordered_exponents, all_pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::parity_permutations;
    use proptest::prelude::*;
    use rand::Rng;

    fn r(a: i64, b: i64) -> Ratio<i64> {
        Ratio::new(a, b)
    }

    #[test]
    fn residues() {
        assert_eq!(residue_count(), (99, 72, 72));
        let (a, b, c) = residue_count();
        assert_eq!(a + b + c, 243);
    }

    #[test]
    fn kappa_counts_and_nets() {
        let t = KappaTable::new(1).unwrap();
        assert_eq!(t.residues.len(), 243);
        assert_eq!(t.counts(), [99, 144, 99, 72, 72]);
        assert!((t.net_b() - 27.0).abs() < 1e-12);
        assert!(t.net_c().abs() < 1e-12);
        let t2 = KappaTable::new(2).unwrap();
        assert_eq!(t2.counts(), [99, 144, 99, 72, 72]);
        for (k, v) in &t.residues {
            assert_eq!(v.0, t2.residues[k].0);
            assert_eq!(v.1, -t2.residues[k].1);
        }
        assert!(KappaTable::new(0).is_err());
    }

    #[test]
    fn constants() {
        let c = third_case_coefficients();
        assert_eq!(c.net_b, 27.0);
        assert!((c.ratio - 9.0).abs() < 1e-12);
        assert!((c.dyadic_coefficient - 3.0 / (4.0 * PI.powi(4))).abs() < 1e-15);
        assert!((c.third_coefficient - 1.0 / (12.0 * PI.powi(4))).abs() < 1e-15);
        assert!((c.dyadic_prelimit - 3.0 / (4.0 * PI.powi(5))).abs() < 1e-15);
        assert!((c.third_prelimit - 1.0 / (12.0 * PI.powi(5))).abs() < 1e-15);
    }

    #[test]
    fn time_classes() {
        assert_eq!(classify_time(r(1, 2)), TimeClass::Dyadic { q: 1 });
        assert_eq!(classify_time(r(0, 1)), TimeClass::Dyadic { q: 0 });
        assert_eq!(classify_time(r(1, 3)), TimeClass::OneThird { a_mod3: 1, q: 0 });
        assert_eq!(classify_time(r(5, 12)), TimeClass::OneThird { a_mod3: 2, q: 2 });
        assert_eq!(classify_time(r(1, 5)), TimeClass::Other);
        // 2^L ≡ 1 (mod 3) for even L
        assert_eq!(third_branch(r(1, 3), 8), Some(1));
        assert_eq!(third_branch(r(1, 3), 7), Some(2));
    }

    #[test]
    fn regime_log_form() {
        let e = EpsilonRegime::new(10, 8.0, true).unwrap();
        let direct = 2.0 * PI * 100.0 * 1024.0 + 8.0;
        assert!((e.inv_eps_sq() / direct - 1.0).abs() < 1e-13);
        let big = EpsilonRegime::new(4000, 8.0, true).unwrap();
        assert!(big.log_inv_eps_sq.is_finite() && big.inv_eps_sq().is_infinite());
        assert!(big.epsilon() == 0.0 || big.epsilon() < 1e-300);
    }

    fn setup(l: u32) -> (RegimeParams, Profile) {
        (RegimeParams::new(l, 4.0, (l * l) as f64).with_rho(8.0), Profile::poly_bump(0.5))
    }

    #[test]
    fn exact_equals_literal_for_dyadic_t() {
        let (p, a) = setup(8);
        let ex = EpsilonRegime::new(8, 8.0, true).unwrap();
        let lit = EpsilonRegime::new(8, 8.0, false).unwrap();
        for t in [r(1, 2), r(3, 4), r(5, 1)] {
            for k in [0, 1, -2] {
                let u = i_eps_sum(k, t, &ex, &p, &a).unwrap();
                let v = i_eps_sum(k, t, &lit, &p, &a).unwrap();
                assert!((u - v).abs() <= 1e-10 * u.abs().max(1e-30), "{t} {k}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn exact_equals_literal_for_third_t() {
        for l in [7, 8] {
            let (p, a) = setup(l);
            let ex = EpsilonRegime::new(l, 8.0, true).unwrap();
            let lit = EpsilonRegime::new(l, 8.0, false).unwrap();
            for t in [r(1, 3), r(5, 6)] {
                let u = i_eps_sum(1, t, &ex, &p, &a).unwrap();
                let v = i_eps_sum(1, t, &lit, &p, &a).unwrap();
                assert!((u - v).abs() <= 1e-9 * u.abs(), "L={l} {t}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn unsupported_times() {
        let (p, a) = setup(8);
        let ex = EpsilonRegime::new(8, 8.0, true).unwrap();
        assert!(matches!(i_eps_sum(0, r(1, 5), &ex, &p, &a), Err(Error::Domain(_))));
        assert!(matches!(i_eps_sum(0, r(1, 512), &ex, &p, &a), Err(Error::Domain(_))));
        let big = EpsilonRegime::new(24, 8.0, false).unwrap();
        let (p24, _) = setup(24);
        assert!(i_eps_sum(0, r(1, 2), &big, &p24, &a).is_err());
        let wrong = EpsilonRegime::new(9, 8.0, true).unwrap();
        assert!(i_eps_sum(0, r(1, 2), &wrong, &p, &a).is_err());
    }

    #[test]
    fn zero_frequency_needs_cutoff() {
        let p = RegimeParams::new(8, 4.0, f64::INFINITY).with_rho(8.0);
        let a = Profile::poly_bump(0.5);
        let lit = EpsilonRegime::new(8, 8.0, false).unwrap();
        // finite ε⁻² at L = 8: d = 0 term contributes t·ε⁻²
        assert!(i_eps_sum(0, r(1, 2), &lit, &p, &a).unwrap().is_finite());
    }

    #[test]
    fn t_zero_vanishes() {
        let (p, a) = setup(8);
        let ex = EpsilonRegime::new(8, 8.0, true).unwrap();
        assert_eq!(i_eps_sum(0, r(0, 1), &ex, &p, &a).unwrap(), 0.0);
        assert_eq!(i_l_pairing(r(0, 1), &ex, &p, &a, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn sigma_order_is_irrelevant() {
        let (p, a) = setup(8);
        let ex = EpsilonRegime::new(8, 8.0, true).unwrap();
        let sig = parity_permutations();
        let mut rev = sig.clone();
        rev.reverse();
        let w = i_eps_sum(1, r(1, 2), &ex, &p, &a).unwrap();
        let u = i_eps_sum_by_sigma(1, r(1, 2), &ex, &p, &a, &sig).unwrap();
        let v = i_eps_sum_by_sigma(1, r(1, 2), &ex, &p, &a, &rev).unwrap();
        assert!((u - v).abs() <= 1e-12 * u.abs());
        assert!((u - w).abs() <= 1e-12 * u.abs());
    }

    #[test]
    fn pairing_two_ways() {
        let (p, a) = setup(8);
        let ex = EpsilonRegime::new(8, 8.0, true).unwrap();
        let f = Profile::poly_bump(1.0);
        let g = Profile::smooth_bump(1.0).with_center(0.2);
        let u = i_l_pairing(r(1, 2), &ex, &p, &a, &f, &g).unwrap();
        let v = i_l_pairing_by_k(r(1, 2), &ex, &p, &a, &f, &g).unwrap();
        assert!((u - v).abs() <= 1e-11 * u.abs(), "{u} vs {v}");
    }

    #[test]
    fn residue_class_matches_frequency() {
        let (p, a) = setup(8);
        for k in [-1, 0, 2] {
            for c in crate::lattice::enumerate_c_l(k, &p, &a).unwrap().take(500) {
                let x = [k, c[0], c[1], c[2], c[3]].map(|v| v.rem_euclid(3) as u8);
                assert_eq!(residue_class(x) as i64, delta_numerator(k, &c).rem_euclid(3));
            }
        }
    }

    #[test]
    fn filon_moments_match_quadrature() {
        for omega in [45.0, 120.0, 1e4] {
            let mu = filon_moments(omega);
            for j in [0usize, 3, 8, 15] {
                let opts = GkOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 20000 };
                let re = gauss_kronrod(|s| s.powi(j as i32) * (omega * s).cos(), -1.0, 1.0, &[], opts).unwrap();
                let im = gauss_kronrod(|s| s.powi(j as i32) * (omega * s).sin(), -1.0, 1.0, &[], opts).unwrap();
                assert!((mu[j].re - re.value).abs() < 1e-10, "{omega} {j}");
                assert!((mu[j].im - im.value).abs() < 1e-10, "{omega} {j}");
            }
        }
    }

    #[test]
    fn osc_sinc_against_brute_force() {
        let h = |x: f64| (1.0 - (x / 3.0).powi(2)).max(0.0).powi(4) * (1.0 + 0.3 * x);
        let rr = rules();
        for &(xa, xb) in &[(-2.0, 2.5), (0.05, 2.0), (-1.5, -0.01), (0.0, 1.0)] {
            for tau in [0.5, 7.0, 300.0] {
                let got = osc_sinc(&h, xa, xb, tau, rr);
                let n = (tau * (xb - xa) / PI).ceil() as usize + 1;
                let bps: Vec<f64> = (1..n).map(|i| xa + (xb - xa) * i as f64 / n as f64).collect();
                let opts = GkOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 100000 };
                let want = gauss_kronrod(
                    |x| if x == 0.0 { h(0.0) * tau } else { h(x) * (tau * x).sin() / x },
                    xa,
                    xb,
                    &bps,
                    opts,
                )
                .unwrap();
                assert!((got - want.value).abs() < 1e-9, "[{xa},{xb}] τ={tau}: {got} vs {}", want.value);
            }
        }
        // large τ → π·h(0)
        let got = osc_sinc(&h, -2.0, 2.5, 1e6, rr);
        assert!((got - PI * h(0.0)).abs() < 1e-4);
    }

    #[test]
    fn oscillatory_integrand_tends_to_resonant() {
        let a = Profile::poly_bump(0.5);
        let f = Profile::poly_bump(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [PermutationModel::Symmetric, PermutationModel::PerPermutation] {
            let kern = Kernel::new(&a, 8.0, model, &f, &f).unwrap();
            let boxes = kern.boxes();
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..400 {
                let (lo, hi) = &boxes[i % boxes.len()];
                let x: Vec<f64> = (0..4).map(|j| lo[j] + (hi[j] - lo[j]) * rng.random::<f64>()).collect();
                let res = kern.resonant(&x);
                let osc = kern.oscillatory(&x, 1e6, rules());
                scale = scale.max(res.abs());
                worst = worst.max((res - osc).abs());
            }
            eprintln!("{model:?}: worst {worst:e} scale {scale:e}");
            assert!(worst <= 1e-3 * scale, "{model:?}: {worst:e} vs {scale:e}");
        }
    }

    #[test]
    fn spectral_interpolant() {
        let f = Profile::poly_bump(1.0);
        let g = Profile::smooth_bump(1.0).with_center(0.2);
        let sp = SpectralProduct::new(&f, &g, -2.5, 2.5).unwrap();
        for x in [-2.4, -1.0, 0.0, 0.37, 2.2] {
            let want = (f.fourier(x).unwrap() * g.fourier(x).unwrap().conj()).re;
            assert!((sp.eval(x) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sinc_mass() {
        let v = sinc_mass_identity().unwrap();
        assert!((v.value - PI).abs() < 1e-8, "{}", v.value);
    }

    fn quick() -> QuadConfig {
        QuadConfig { rel_tol: 1e-3, max_evals: 200_000, ..Default::default() }
    }

    #[test]
    fn continuum_trivia() {
        let a = Profile::poly_bump(0.5);
        let f = Profile::poly_bump(1.0);
        assert_eq!(continuum_integral(0.0, 8.0, 8.0, &a, &f, &f, &quick()).unwrap().value, 0.0);
        // small τ: linear in τ
        let u = continuum_integral(1e-3, 1.0, 8.0, &a, &f, &f, &quick()).unwrap().value;
        let v = continuum_integral(2e-3, 1.0, 8.0, &a, &f, &f, &quick()).unwrap().value;
        assert!((v / u - 2.0).abs() < 1e-3, "{u} {v}");
        // one-third branch is one ninth of the dyadic branch
        let d = continuum_integral(0.5, 8.0, 8.0, &a, &f, &f, &quick()).unwrap().value;
        let cfg3 = QuadConfig { branch: Branch::OneThird, ..quick() };
        let th = continuum_integral(0.5, 8.0, 8.0, &a, &f, &f, &cfg3).unwrap().value;
        assert!((d / th - 9.0).abs() < 1e-9);
    }

    #[test]
    fn continuum_cubature_vs_monte_carlo() {
        let a = Profile::poly_bump(0.5);
        let f = Profile::poly_bump(1.0);
        let cfg = QuadConfig { model: PermutationModel::PerPermutation, rel_tol: 1e-2, ..quick() };
        let q = continuum_integral(0.5, 8.0, 8.0, &a, &f, &f, &cfg).unwrap();
        let m = continuum_integral_mc(0.5, 8.0, 8.0, &a, &f, &f, &cfg, 20_000, 3).unwrap();
        assert!((q.value - m.value).abs() < 5.0 * m.error + q.error, "{q:?} {m:?}");
    }

    #[test]
    fn gap_shrinks_with_rho() {
        let a = Profile::poly_bump(0.5);
        let f = Profile::poly_bump(1.0);
        let cfg = QuadConfig { rel_tol: 1e-2, abs_tol: 1e-14, max_evals: 2_000_000, ..Default::default() };
        let d = delta_reduced_at_cutoff(8.0, &a, &f, &f, &QuadConfig { rel_tol: 1e-2, ..quick() }).unwrap().value;
        let g1 = continuum_delta_gap(0.5, 20.0, 8.0, &a, &f, &f, &cfg).unwrap().value;
        let g2 = continuum_delta_gap(0.5, 100.0, 8.0, &a, &f, &f, &cfg).unwrap().value;
        assert!(g2.abs() < g1.abs() && g2.abs() < 0.05 * d, "{g1} {g2} {d}");
    }

    #[test]
    fn delta_reduced_small_support() {
        let f = Profile::poly_bump(1.0);
        let cfg = QuadConfig { rel_tol: 1e-2, ..quick() };
        let big = delta_reduced_at_cutoff(8.0, &Profile::poly_bump(0.5), &f, &f, &cfg).unwrap().value;
        let small = delta_reduced_at_cutoff(200.0, &Profile::poly_bump(0.01), &f, &f, &cfg).unwrap().value;
        assert!(big > 0.0 && small.abs() < 1e-4 * big, "{big} {small}");
        // support below the cutoff: empty resonance set
        assert_eq!(delta_reduced_at_cutoff(8.0, &Profile::poly_bump(0.01), &f, &f, &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn reference_regime_passes() {
        let e = RegimeExponents { alpha_nu: 0.4, beta_mu: 0.3, gamma_rho: 0.05, alpha: 0.2 };
        let rep = regime_check(e, &[1 << 10, 1 << 20, 1 << 30]);
        assert!(rep.all_pass && rep.ordered_exponents);
        let bad = regime_check(RegimeExponents { gamma_rho: 0.3, ..e }, &[16, 64]);
        assert!(!bad.conditions.iter().find(|c| c.name == "rho = o(mu)").unwrap().pass);
        let bad = regime_check(RegimeExponents { alpha_nu: 0.5, ..e }, &[16, 64]);
        assert!(!bad.conditions[0].pass && !bad.all_pass);
    }

    proptest! {
        #[test]
        fn residue_class_is_frequency_mod_3(k in -50i64..50, c in prop::array::uniform4(-50i64..50)) {
            let t = [c[0], c[1], c[2], c[3], k - c[0] + c[1] - c[2] + c[3]];
            let x = [k, c[0], c[1], c[2], c[3]].map(|v| v.rem_euclid(3) as u8);
            prop_assert_eq!(residue_class(x) as i64, delta_numerator(k, &t).rem_euclid(3));
        }

        #[test]
        fn sine_weights_cancel_in_pairs(x in prop::array::uniform5(0u8..3)) {
            let t1 = KappaTable::new(1).unwrap();
            let t2 = KappaTable::new(2).unwrap();
            prop_assert!((t1.residues[&x].1 + t2.residues[&x].1).abs() < 1e-15);
        }

        #[test]
        fn log_regime_matches_direct(l in 1u32..40, rho in 0.5f64..1e4) {
            let e = EpsilonRegime::new(l, rho, true).unwrap();
            let direct = 2.0 * PI * (l as f64).powi(2) * 2f64.powi(l as i32) + rho;
            prop_assert!((e.log_inv_eps_sq - direct.ln()).abs() < 1e-12 * direct.ln().abs().max(1.0));
        }
    }
}
