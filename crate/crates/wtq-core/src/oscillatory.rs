//! Exact oscillatory polynomials `Σ c · t^p · e^{iωt}` with rational `ω`,
//! the time-ordered integrals `G_M`, tree amplitudes `F_T`, the resonance
//! case classifier, and an independent spectral quadrature oracle.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::chaos::Coefficient;
use crate::error::{Error, Result};
use crate::trees::{linear_extensions_capped, omega_labels, LabelAssignment, NodeAddress, QuinticTree, DEFAULT_TREE_CAP};
use crate::Freq;

const PRUNE_REL: f64 = 1e-14;

fn freq_f64(w: &Freq) -> f64 {
    *w.numer() as f64 / *w.denom() as f64
}

/// One term `c · t^p · e^{iωt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub freq: Freq,
    pub power: u32,
    pub coeff: Complex64,
}

/// Finite sum of terms, sorted by `(ω, p)` with no duplicate keys.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OscPoly {
    terms: Vec<Term>,
}

impl OscPoly {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(Freq::zero(), 0, c)
    }

    pub fn monomial(freq: Freq, power: u32, coeff: Complex64) -> Self {
        let mut p = Self { terms: vec![Term { freq, power, coeff }] };
        p.normalize();
        p
    }

    /// `e^{iωt}`.
    pub fn exp(freq: Freq) -> Self {
        Self::monomial(freq, 0, Complex64::new(1.0, 0.0))
    }

    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut p = Self { terms: terms.into_iter().collect() };
        p.normalize();
        p
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| a.freq.cmp(&b.freq).then(a.power.cmp(&b.power)));
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.last_mut() {
                Some(last) if last.freq == t.freq && last.power == t.power => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        let max = out.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max);
        out.retain(|t| t.coeff.norm() > PRUNE_REL * max && t.coeff.norm() > 0.0);
        self.terms = out;
    }

    pub fn add(&self, o: &OscPoly) -> OscPoly {
        let mut p = Self { terms: self.terms.iter().chain(&o.terms).copied().collect() };
        p.normalize();
        p
    }

    pub fn sub(&self, o: &OscPoly) -> OscPoly {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> OscPoly {
        let mut p = Self { terms: self.terms.iter().map(|t| Term { coeff: t.coeff * s, ..*t }).collect() };
        p.terms.retain(|t| t.coeff.norm() > 0.0);
        p
    }

    pub fn mul(&self, o: &OscPoly) -> OscPoly {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                terms.push(Term { freq: a.freq + b.freq, power: a.power + b.power, coeff: a.coeff * b.coeff });
            }
        }
        let mut p = Self { terms };
        p.normalize();
        p
    }

    /// Pointwise complex conjugate for real `t`.
    pub fn conj(&self) -> OscPoly {
        let mut p = Self { terms: self.terms.iter().map(|t| Term { freq: -t.freq, power: t.power, coeff: t.coeff.conj() }).collect() };
        p.normalize();
        p
    }

    /// Multiplies by `e^{iωt}`.
    pub fn shift(&self, w: Freq) -> OscPoly {
        Self { terms: self.terms.iter().map(|t| Term { freq: t.freq + w, ..*t }).collect() }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut acc = crate::numerics::NeumaierC::new();
        for term in &self.terms {
            acc.add(term.coeff * t.powi(term.power as i32) * Complex64::from_polar(1.0, freq_f64(&term.freq) * t));
        }
        acc.value()
    }

    /// Exact time derivative.
    pub fn derivative(&self) -> OscPoly {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            let w = freq_f64(&t.freq);
            if w != 0.0 {
                terms.push(Term { coeff: t.coeff * Complex64::new(0.0, w), ..*t });
            }
            if t.power > 0 {
                terms.push(Term { freq: t.freq, power: t.power - 1, coeff: t.coeff * t.power as f64 });
            }
        }
        Self::from_terms(terms)
    }

    /// `t ↦ ∫₀ᵗ e^{iΩτ} p(τ) dτ`, exact, resonant terms handled per term.
    pub fn primitive(&self, omega: Freq) -> OscPoly {
        let mut terms = Vec::new();
        for t in &self.terms {
            let alpha = t.freq + omega;
            let n = t.power;
            if alpha.is_zero() {
                terms.push(Term { freq: alpha, power: n + 1, coeff: t.coeff / (n + 1) as f64 });
                continue;
            }
            // ∫₀ᵗ e^{iατ} τⁿ dτ = e^{iαt}/(iα) Σ_k (−1/(iα))^k n!/(n−k)! t^{n−k} + (−1/(iα))^{n+1} n!
            let ia = Complex64::new(0.0, freq_f64(&alpha));
            let r = -1.0 / ia;
            let mut fall = 1.0; // n!/(n−k)!
            let mut rk = Complex64::new(1.0, 0.0);
            for k in 0..=n {
                terms.push(Term { freq: alpha, power: n - k, coeff: t.coeff * rk * fall / ia });
                fall *= (n - k) as f64;
                rk *= r;
            }
            let nfact: f64 = (1..=n).map(f64::from).product();
            terms.push(Term { freq: Freq::zero(), power: 0, coeff: t.coeff * rk * nfact });
        }
        Self::from_terms(terms)
    }

    pub fn max_power(&self) -> Option<u32> {
        self.terms.iter().map(|t| t.power).max()
    }

    /// Terms of the highest power, as `(ω, c)`.
    pub fn leading_terms(&self) -> (u32, Vec<(Freq, Complex64)>) {
        let p = self.max_power().unwrap_or(0);
        (p, self.terms.iter().filter(|t| t.power == p).map(|t| (t.freq, t.coeff)).collect())
    }

    /// The part of the polynomial carrying exactly `t^p`.
    pub fn power_part(&self, p: u32) -> OscPoly {
        Self { terms: self.terms.iter().filter(|t| t.power == p).copied().collect() }
    }

    /// Sorted term list as CSV rows `p,omega,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,omega,re,im\n");
        let mut rows: Vec<&Term> = self.terms.iter().collect();
        rows.sort_by(|a, b| a.power.cmp(&b.power).then(a.freq.cmp(&b.freq)));
        for t in rows {
            let _ = writeln!(s, "{},{},{:e},{:e}", t.power, t.freq, t.coeff.re, t.coeff.im);
        }
        s
    }
}

impl Coefficient for OscPoly {
    fn zero() -> Self {
        OscPoly::zero()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add_assign(&mut self, other: &Self) {
        self.terms.extend_from_slice(&other.terms);
        self.normalize();
    }
    fn scale(&self, s: Complex64) -> Self {
        OscPoly::scale(self, s)
    }
    fn mul(&self, other: &Self) -> Self {
        OscPoly::mul(self, other)
    }
    fn conj(&self) -> Self {
        OscPoly::conj(self)
    }
    fn eval(&self, t: f64) -> Complex64 {
        OscPoly::eval(self, t)
    }
    fn to_json(&self) -> Value {
        json!(self.terms.iter().map(|t| json!([t.power, t.freq.to_string(), t.coeff.re, t.coeff.im])).collect::<Vec<_>>())
    }
}

/// Accumulates many polynomials before a single normalisation.
#[derive(Debug, Default, Clone)]
pub struct OscAccumulator {
    terms: Vec<Term>,
}

impl OscAccumulator {
    pub fn add(&mut self, p: &OscPoly) {
        self.terms.extend_from_slice(&p.terms);
        if self.terms.len() > 4096 {
            self.compact();
        }
    }

    pub fn add_scaled(&mut self, p: &OscPoly, s: Complex64) {
        self.terms.extend(p.terms.iter().map(|t| Term { coeff: t.coeff * s, ..*t }));
        if self.terms.len() > 4096 {
            self.compact();
        }
    }

    fn compact(&mut self) {
        // merge without pruning; pruning is relative and must see the final sum
        self.terms.sort_by(|a, b| a.freq.cmp(&b.freq).then(a.power.cmp(&b.power)));
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.last_mut() {
                Some(last) if last.freq == t.freq && last.power == t.power => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        self.terms = out;
    }

    pub fn finish(self) -> OscPoly {
        OscPoly::from_terms(self.terms)
    }
}

/// `∫₀ᵗ e^{iΩτ} p(τ) dτ`.
pub fn osc_primitive(p: &OscPoly, omega: Freq) -> OscPoly {
    p.primitive(omega)
}

/// `G_M` as an exact polynomial: `G_0 = 1`, `G_j = ∫₀ᵗ e^{iΩ_j τ} G_{j−1}(τ) dτ`.
pub fn g_m_poly(omegas: &[Freq]) -> OscPoly {
    omegas.iter().fold(OscPoly::one(), |g, &w| g.primitive(w))
}

pub fn g_m(omegas: &[Freq], t: f64) -> Complex64 {
    g_m_poly(omegas).eval(t)
}

/// Spectral (Chebyshev) iterated integration on `[0, t]`.
struct ChebGrid {
    n: usize,
    t: f64,
    nodes: Vec<f64>,
    cos: Vec<f64>,
}

impl ChebGrid {
    fn new(n: usize, t: f64) -> Self {
        // x_j = cos(πj/n); s_j = t(1 + x_j)/2, so j = 0 is s = t
        let nodes = (0..=n).map(|j| 0.5 * t * (1.0 + (PI * j as f64 / n as f64).cos())).collect();
        let cos = (0..2 * n).map(|m| (PI * m as f64 / n as f64).cos()).collect();
        Self { n, t, nodes, cos }
    }

    fn ck(&self, j: usize, k: usize) -> f64 {
        self.cos[(j * k) % (2 * self.n)]
    }

    /// Values of `s ↦ ∫₀ˢ f` at the nodes, from values of `f` at the nodes.
    fn integrate(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut a = vec![Complex64::new(0.0, 0.0); n + 3];
        for (k, ak) in a.iter_mut().enumerate().take(n + 1) {
            let mut s = Complex64::new(0.0, 0.0);
            for (j, fj) in f.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += fj * (w * self.ck(j, k));
            }
            *ak = s * (2.0 / n as f64);
        }
        a[0] *= 0.5;
        a[n] *= 0.5;
        let mut b = vec![Complex64::new(0.0, 0.0); n + 2];
        b[1] = a[0] - a[2] * 0.5;
        for k in 2..=n + 1 {
            b[k] = (a[k - 1] - a[k + 1]) / (2.0 * k as f64);
        }
        // F(−1) = 0
        b[0] = -(1..=n + 1).map(|k| if k % 2 == 0 { b[k] } else { -b[k] }).sum::<Complex64>();
        let half = 0.5 * self.t;
        (0..=n)
            .map(|j| {
                let mut s = b[0];
                for (k, bk) in b.iter().enumerate().skip(1) {
                    s += bk * self.ck(j, k);
                }
                s * half
            })
            .collect()
    }

    fn phase(&self, w: f64) -> Vec<Complex64> {
        self.nodes.iter().map(|&s| Complex64::from_polar(1.0, w * s)).collect()
    }
}

fn adaptive_spectral<F: Fn(&ChebGrid) -> Complex64>(t: f64, tol: f64, f: F) -> Result<Complex64> {
    if t == 0.0 {
        return Ok(f(&ChebGrid::new(2, 0.0)));
    }
    let mut n = 16;
    let mut prev = f(&ChebGrid::new(n, t));
    while n < 4096 {
        n *= 2;
        let cur = f(&ChebGrid::new(n, t));
        let diff = (cur - prev).norm();
        if diff <= 0.1 * tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numerical { message: format!("spectral quadrature did not reach tolerance {tol:e}"), partial: prev.re, error: f64::NAN })
}

/// Independent evaluation of `G_M(t)` by iterated spectral quadrature over the
/// ordered simplex, to absolute tolerance `tol`.
pub fn g_m_oracle(omegas: &[Freq], t: f64, tol: f64) -> Result<Complex64> {
    if omegas.len() > 5 {
        return Err(Error::resource(format!("g_m_oracle supports M <= 5, got {}", omegas.len())));
    }
    if t < 0.0 {
        return Err(Error::domain("g_m_oracle needs t >= 0"));
    }
    let ws: Vec<f64> = omegas.iter().map(freq_f64).collect();
    adaptive_spectral(t, tol, |grid| {
        let mut g = vec![Complex64::new(1.0, 0.0); grid.n + 1];
        for &w in &ws {
            let ph = grid.phase(w);
            let integrand: Vec<Complex64> = g.iter().zip(&ph).map(|(a, b)| a * b).collect();
            g = grid.integrate(&integrand);
        }
        g[0]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CaseKind {
    EvenResonantChain,
    EvenGeneric,
    Odd1,
    Odd2,
    Odd3,
    Odd4,
    Odd5,
    Odd6,
}

impl CaseKind {
    pub const ALL: [CaseKind; 8] = [
        CaseKind::EvenResonantChain,
        CaseKind::EvenGeneric,
        CaseKind::Odd1,
        CaseKind::Odd2,
        CaseKind::Odd3,
        CaseKind::Odd4,
        CaseKind::Odd5,
        CaseKind::Odd6,
    ];
}

/// Classification of `G_M` with its predicted leading power and, where the
/// closed form is known, the predicted leading terms `(ω, c)` as stated
/// (only their moduli are meaningful, see [`CaseTag::modulus_matches`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseTag {
    pub kind: CaseKind,
    pub power: u32,
    #[serde(skip)]
    pub predicted: Option<Vec<(Freq, Complex64)>>,
}

impl CaseTag {
    /// Compares the moduli of the predicted leading coefficients with the
    /// leading terms of the exact polynomial, frequency by frequency.
    pub fn modulus_matches(&self, g: &OscPoly, rel_tol: f64) -> Option<bool> {
        let pred = self.predicted.as_ref()?;
        let (p, lead) = g.leading_terms();
        if p != self.power || lead.len() != pred.len() {
            return Some(false);
        }
        let got: BTreeMap<Freq, Complex64> = lead.into_iter().collect();
        Some(pred.iter().all(|(w, c)| {
            got.get(w).is_some_and(|x| (x.norm() - c.norm()).abs() <= rel_tol * c.norm())
        }))
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn inv_i(w: &Freq) -> Complex64 {
    1.0 / Complex64::new(0.0, freq_f64(w))
}

/// Resonance classification of the frequency list (entries nonzero).
pub fn classify_leading(omegas: &[Freq]) -> CaseTag {
    let m = omegas.len();
    // 1-based accessor
    let w = |j: usize| omegas[j - 1];
    if m % 2 == 0 {
        let chain = (1..=m / 2).all(|j| (w(2 * j - 1) + w(2 * j)).is_zero());
        if chain {
            let c = (1..=m / 2).map(|j| 1.0 / freq_f64(&w(2 * j))).product::<f64>() / factorial((m / 2) as u32);
            return CaseTag { kind: CaseKind::EvenResonantChain, power: (m / 2) as u32, predicted: Some(vec![(Freq::zero(), Complex64::new(c, 0.0))]) };
        }
        return CaseTag { kind: CaseKind::EvenGeneric, power: (m / 2 - 1) as u32, predicted: None };
    }
    let r = ((m - 1) / 2) as u32;
    let sign = |e: u32| if e % 2 == 0 { 1.0 } else { -1.0 };
    let odd_prod = || (0..=r as usize).map(|j| inv_i(&w(2 * j + 1))).product::<Complex64>();
    if m == 1 {
        let c = inv_i(&w(1));
        return CaseTag { kind: CaseKind::Odd1, power: 0, predicted: Some(vec![(Freq::zero(), -c), (w(1), c)]) };
    }
    let wm = w(m);
    if (1..=r as usize).all(|j| w(2 * j) == -wm && w(2 * j - 1) == wm) {
        let base = Complex64::new(0.0, freq_f64(&wm)).powi(-(((m + 1) / 2) as i32)) * sign(r) / factorial(r);
        let mut pred = vec![(Freq::zero(), -base), (wm, base)];
        pred.sort_by(|a, b| a.0.cmp(&b.0));
        return CaseTag { kind: CaseKind::Odd2, power: r, predicted: Some(pred) };
    }
    if (1..=r as usize).all(|j| (w(2 * j) + w(2 * j - 1)).is_zero()) {
        let c = odd_prod() * sign(r) / factorial(r);
        return CaseTag { kind: CaseKind::Odd3, power: r, predicted: Some(vec![(wm, c)]) };
    }
    if (1..=r as usize).all(|j| (w(2 * j) + w(2 * j + 1)).is_zero()) {
        let c = odd_prod() * sign(r + 1) / factorial(r);
        return CaseTag { kind: CaseKind::Odd4, power: r, predicted: Some(vec![(Freq::zero(), c)]) };
    }
    let case5 = (1..=r as usize).any(|j0| {
        (w(2 * j0 + 1) + w(2 * j0) + w(2 * j0 - 1)).is_zero()
            && (j0 + 1..=r as usize).all(|j| (w(2 * j + 1) + w(2 * j)).is_zero())
            && (1..j0).all(|j| (w(2 * j) + w(2 * j - 1)).is_zero())
    });
    if case5 {
        let c = odd_prod() * sign(r) / factorial(r);
        return CaseTag { kind: CaseKind::Odd5, power: r, predicted: Some(vec![(Freq::zero(), c)]) };
    }
    CaseTag { kind: CaseKind::Odd6, power: r - 1, predicted: None }
}

/// Slope of `log|G_M(t)|` against `log t` on `[t_lo, t_hi]`. Samples are
/// taken at `t = nP + θ`, with `P` the common period of all frequencies and
/// `θ` maximising the modulus of the leading trigonometric factor.
pub fn fit_leading_power(omegas: &[Freq], t_lo: f64, t_hi: f64, samples: usize) -> Result<f64> {
    let g = g_m_poly(omegas);
    let (p, lead) = g.leading_terms();
    let q = omegas.iter().fold(1i64, |acc, w| acc.lcm(w.denom()));
    let num_gcd = lead.iter().fold(0i64, |acc, (w, _)| acc.gcd(&(w * Freq::from(q)).to_integer()));
    let period = 2.0 * PI * q as f64 / num_gcd.max(1) as f64;
    let trig = |th: f64| lead.iter().map(|(w, c)| c * Complex64::from_polar(1.0, freq_f64(w) * th)).sum::<Complex64>().norm();
    let theta = (0..4096).map(|i| period * i as f64 / 4096.0).max_by(|a, b| trig(*a).total_cmp(&trig(*b))).unwrap();
    if trig(theta) == 0.0 {
        return Err(Error::Numerical { message: "vanishing leading term".into(), partial: p as f64, error: f64::NAN });
    }
    let (n_lo, n_hi) = ((t_lo / period).ceil().max(1.0), (t_hi / period).floor());
    if n_hi <= n_lo || samples < 2 {
        return Err(Error::domain("fit window too short for the period"));
    }
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let n = (n_lo * (n_hi / n_lo).powf(i as f64 / (samples - 1) as f64)).round();
            let t = n * period + theta;
            (t.ln(), g.eval(t).norm().ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / samples as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / samples as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Root-frame frequencies of a labelled tree as rationals `d/L²`.
pub fn tree_frequencies(t: &QuinticTree, a: &LabelAssignment) -> Result<BTreeMap<NodeAddress, Freq>> {
    let l2 = (a.lattice_size as i64).pow(2);
    Ok(omega_labels(t, a)?.into_iter().map(|(n, d)| (n, Freq::new(d, l2))).collect())
}

/// `(−i)^{N}`.
pub fn minus_i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// `F_T = (−i)^{N_T} Σ_{φ ∈ 𝔖_T} G(Ω(φ(1)), …, Ω(φ(n)))` from given frequencies.
pub fn f_tree_poly_from(t: &QuinticTree, freqs: &BTreeMap<NodeAddress, Freq>, cap: usize) -> Result<OscPoly> {
    let mut acc = OscAccumulator::default();
    for ext in linear_extensions_capped(t, cap)? {
        let ws: Vec<Freq> = ext.iter().map(|n| freqs[n]).collect();
        acc.add(&g_m_poly(&ws));
    }
    Ok(acc.finish().scale(minus_i_pow(t.sign_exponent())))
}

pub fn f_tree_poly(t: &QuinticTree, a: &LabelAssignment) -> Result<OscPoly> {
    f_tree_poly_from(t, &tree_frequencies(t, a)?, DEFAULT_TREE_CAP)
}

pub fn f_tree(t: &QuinticTree, a: &LabelAssignment, time: f64) -> Result<Complex64> {
    Ok(f_tree_poly(t, a)?.eval(time))
}

/// `F_T` from its recursive definition: `F_⊥ = 1` and
/// `F_T = −i ∫₀ᵗ e^{iΔτ} F_{T₁} conj(F_{T₂}) F_{T₃} conj(F_{T₄}) F_{T₅} dτ`
/// with each node's own (unsigned) resonance numerator.
pub fn f_tree_recursive(t: &QuinticTree, a: &LabelAssignment) -> Result<OscPoly> {
    let freqs = tree_frequencies(t, a)?;
    Ok(rec(t, &freqs, &mut Vec::new()))
}

fn rec(t: &QuinticTree, freqs: &BTreeMap<NodeAddress, Freq>, path: &mut Vec<u8>) -> OscPoly {
    match t {
        QuinticTree::Leaf => OscPoly::one(),
        QuinticTree::Node(ch) => {
            let mut prod = OscPoly::one();
            for (j, c) in ch.iter().enumerate() {
                path.push(j as u8 + 1);
                let f = rec(c, freqs, path);
                path.pop();
                prod = prod.mul(&if j % 2 == 1 { f.conj() } else { f });
            }
            let node = NodeAddress::node(path);
            // undo the root-frame sign to get the node's own Δ
            let own = freqs[&node] * Freq::from(node.frame_sign());
            prod.primitive(own).scale(Complex64::new(0.0, -1.0))
        }
    }
}

/// Independent evaluation of `F_T(t)` by spectral quadrature over the region
/// `I_T(t)`, nested along the tree (each subtree integrates up to its parent's
/// time).
pub fn f_tree_region_oracle(t: &QuinticTree, a: &LabelAssignment, time: f64, tol: f64) -> Result<Complex64> {
    let freqs = tree_frequencies(t, a)?;
    let v = adaptive_spectral(time, tol, |grid| region(t, &freqs, &mut Vec::new(), grid)[0])?;
    Ok(v * minus_i_pow(t.sign_exponent()))
}

fn region(t: &QuinticTree, freqs: &BTreeMap<NodeAddress, Freq>, path: &mut Vec<u8>, grid: &ChebGrid) -> Vec<Complex64> {
    match t {
        QuinticTree::Leaf => vec![Complex64::new(1.0, 0.0); grid.n + 1],
        QuinticTree::Node(ch) => {
            let w = freq_f64(&freqs[&NodeAddress::node(path)]);
            let mut f = grid.phase(w);
            for (j, c) in ch.iter().enumerate() {
                if c.is_leaf() {
                    continue;
                }
                path.push(j as u8 + 1);
                let h = region(c, freqs, path, grid);
                path.pop();
                for (x, y) in f.iter_mut().zip(h) {
                    *x *= y;
                }
            }
            grid.integrate(&f)
        }
    }
}

/// One frequency vector per case tag.
pub fn case_instances() -> Vec<(CaseKind, Vec<Freq>)> {
    vec![
        (CaseKind::EvenResonantChain, freqs(&[-1, 1, -2, 2])),
        (CaseKind::EvenGeneric, freqs(&[1, -1, 2, 3])),
        (CaseKind::Odd1, freqs(&[2])),
        (CaseKind::Odd2, freqs(&[3, -3, 3])),
        (CaseKind::Odd3, freqs(&[1, -1, 2])),
        (CaseKind::Odd4, freqs(&[1, 2, -2])),
        (CaseKind::Odd5, freqs(&[1, 2, -3])),
        (CaseKind::Odd6, freqs(&[1, 2, 5])),
    ]
}

/// Integer frequency helper for tests and studies.
pub fn freqs(ws: &[i64]) -> Vec<Freq> {
    ws.iter().map(|&w| Freq::from(w)).collect()
}

/// `Π 1/Ω` style magnitudes for reporting.
pub fn freq_to_f64(w: &Freq) -> f64 {
    w.to_f64().unwrap_or(f64::NAN)
}

#[allow(dead_code)]
fn _assert_one(_: Freq) -> bool {
    Freq::one().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::enumerate_trees;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn primitive_examples() {
        let one = OscPoly::one();
        let w = Freq::new(3, 4);
        let p = osc_primitive(&one, w);
        let t = 1.3;
        let expect = (Complex64::from_polar(1.0, 0.75 * t) - 1.0) / c(0.0, 0.75);
        assert!((p.eval(t) - expect).norm() < 1e-15);
        assert_eq!(osc_primitive(&one, Freq::zero()), OscPoly::monomial(Freq::zero(), 1, c(1.0, 0.0)));
        let te = OscPoly::monomial(Freq::new(2, 1), 1, c(1.0, 0.0));
        assert_eq!(osc_primitive(&te, Freq::new(-2, 1)), OscPoly::monomial(Freq::zero(), 2, c(0.5, 0.0)));
    }

    #[test]
    fn g_m_examples() {
        assert_eq!(g_m(&[], 3.0), c(1.0, 0.0));
        // Ω = π is irrational; use the closed form with a rational Ω and compare
        let w = Freq::new(355, 113);
        let v = g_m(&[w], 1.0);
        let x = 355.0 / 113.0;
        let expect = (Complex64::from_polar(1.0, x) - 1.0) / c(0.0, x);
        assert!((v - expect).norm() < 1e-15);
        // at Ω = π exactly the closed form gives 2i/π
        let pi_val = (Complex64::from_polar(1.0, PI) - 1.0) / c(0.0, PI);
        assert!((pi_val - c(0.0, 2.0 / PI)).norm() < 1e-15);
        let ws = freqs(&[-1, 1]);
        let o = g_m_oracle(&ws, 1.0, 1e-12).unwrap();
        assert!((g_m(&ws, 1.0) - o).norm() < 1e-10);
        // all zero: t^M / M!
        let z = vec![Freq::zero(); 4];
        assert!((g_m(&z, 2.0) - c(16.0 / 24.0, 0.0)).norm() < 1e-14);
        assert!((g_m_oracle(&z, 2.0, 1e-12).unwrap() - c(16.0 / 24.0, 0.0)).norm() < 1e-11);
        assert_eq!(g_m_oracle(&[], 2.0, 1e-12).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn oracle_agrees_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let m = rng.random_range(0..=4);
            let l2 = [1i64, 4, 9, 16][rng.random_range(0..4)];
            let ws: Vec<Freq> = (0..m).map(|_| Freq::new(rng.random_range(-12..=12), l2)).collect();
            let t = rng.random_range(0.0..5.0);
            let a = g_m(&ws, t);
            let b = g_m_oracle(&ws, t, 1e-10).unwrap();
            assert!((a - b).norm() < 1e-8, "{ws:?} t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn derivative_identity() {
        for ws in [freqs(&[1, -1, 2]), freqs(&[3, 0, -3, 2]), vec![Freq::new(1, 4), Freq::new(-1, 4)]] {
            let (last, head) = ws.split_last().unwrap();
            let lhs = g_m_poly(&ws).derivative();
            let rhs = g_m_poly(head).shift(*last);
            let diff = lhs.sub(&rhs);
            let scale = rhs.terms().iter().map(|t| t.coeff.norm()).fold(0.0, f64::max);
            assert!(diff.terms().iter().all(|t| t.coeff.norm() < 1e-13 * scale), "{ws:?}");
        }
    }

    #[test]
    fn classification_examples() {
        let tag = classify_leading(&freqs(&[-1, 1, -2, 2]));
        assert_eq!((tag.kind, tag.power), (CaseKind::EvenResonantChain, 2));
        let tag = classify_leading(&freqs(&[3, -3, 3]));
        assert_eq!((tag.kind, tag.power), (CaseKind::Odd2, 1));
        let tag = classify_leading(&freqs(&[1, 2, 5]));
        assert_eq!((tag.kind, tag.power), (CaseKind::Odd6, 0));
        assert_eq!(classify_leading(&freqs(&[2])).kind, CaseKind::Odd1);
        assert_eq!(classify_leading(&freqs(&[1, -1, 2])).kind, CaseKind::Odd3);
        assert_eq!(classify_leading(&freqs(&[1, 2, -2])).kind, CaseKind::Odd4);
        assert_eq!(classify_leading(&freqs(&[1, 2, -3])).kind, CaseKind::Odd5);
        assert_eq!(classify_leading(&freqs(&[1, -1, 2, 3])).kind, CaseKind::EvenGeneric);
    }

    #[test]
    fn leading_power_fits_and_moduli() {
        for (kind, ws) in case_instances() {
            let tag = classify_leading(&ws);
            assert_eq!(tag.kind, kind);
            let slope = fit_leading_power(&ws, 1e2, 1e4, 25).unwrap();
            assert!((slope - tag.power as f64).abs() < 0.1, "{kind:?}: slope {slope} vs {}", tag.power);
            if let Some(ok) = tag.modulus_matches(&g_m_poly(&ws), 1e-6) {
                assert!(ok, "{kind:?}: {:?} vs {:?}", tag.predicted, g_m_poly(&ws).leading_terms());
            }
        }
    }

    #[test]
    fn tree_amplitude_examples() {
        let leaf = QuinticTree::Leaf;
        assert_eq!(f_tree(&leaf, &LabelAssignment::new(vec![3], 2), 1.7).unwrap(), c(1.0, 0.0));
        let one = QuinticTree::one_node();
        let a = LabelAssignment::new(vec![2, 1, 1, 0, 1], 1);
        let delta = 4.0;
        let t = 0.9;
        let expect = c(0.0, -1.0) * (Complex64::from_polar(1.0, delta * t) - 1.0) / c(0.0, delta);
        assert!((f_tree(&one, &a, t).unwrap() - expect).norm() < 1e-15);
    }

    fn random_assignment(t: &QuinticTree, rng: &mut ChaCha8Rng) -> LabelAssignment {
        LabelAssignment::new((0..t.leaf_count()).map(|_| rng.random_range(-3..=3)).collect(), 2)
    }

    #[test]
    fn three_ways_to_a_tree_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            for t in enumerate_trees(n).unwrap() {
                let a = random_assignment(&t, &mut rng);
                let time = rng.random_range(0.2..2.5);
                let chains = f_tree_poly(&t, &a).unwrap();
                let recursive = f_tree_recursive(&t, &a).unwrap();
                let region = f_tree_region_oracle(&t, &a, time, 1e-11).unwrap();
                let x = chains.eval(time);
                assert!((x - recursive.eval(time)).norm() < 1e-9, "{t}");
                assert!((x - region).norm() < 1e-8, "{t}: {x} vs {region}");
            }
        }
    }

    proptest! {
        #[test]
        fn conj_and_eval_commute(ws in proptest::collection::vec(-6i64..=6, 0..4), t in 0.0f64..4.0) {
            let g = g_m_poly(&freqs(&ws));
            prop_assert!((g.conj().eval(t) - g.eval(t).conj()).norm() < 1e-12);
        }

        #[test]
        fn product_evaluates_pointwise(a in proptest::collection::vec(-4i64..=4, 0..3), b in proptest::collection::vec(-4i64..=4, 0..3), t in 0.0f64..3.0) {
            let (p, q) = (g_m_poly(&freqs(&a)), g_m_poly(&freqs(&b)));
            let lhs = p.mul(&q).eval(t);
            let rhs = p.eval(t) * q.eval(t);
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        }

        #[test]
        fn primitive_vanishes_at_zero(ws in proptest::collection::vec(-5i64..=5, 1..5)) {
            prop_assert!(g_m(&freqs(&ws), 0.0).norm() < 1e-12);
        }
    }
}
