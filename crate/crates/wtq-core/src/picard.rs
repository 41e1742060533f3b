//! Picard/Wick iterates `v_n(k, t)` with exact `OscPoly` coefficients, the
//! diagrammatic tree sum, the `n = 1` mass derivative and pairing sums.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::chaos::{
    mc_pair_expectation, pair_expectation_slices, wick_combine, wick_slices, ChaosExpansion, ComplexGaussianIndexing,
    MultiIndex, Slice,
};
use crate::error::{Error, Result};
use crate::lattice::{
    alternating_sum, apply_permutation, delta_numerator, fold_c_l, pairing_closed_form, pairing_expectation,
    parity_permutations, Cutoffs, LabelingEnumerator, Profile, RegimeParams, WordKey,
};
use crate::oscillatory::{g_m_poly, minus_i_pow, OscAccumulator, OscPoly};
use crate::trees::{compositions, enumerate_trees, linear_extensions, NodeAddress, QuinticTree};
use crate::Freq;

pub const MAX_ORDER: usize = 2;
/// Upper bound on inner-loop tuple visits for a single recursion level.
pub const MAX_TUPLE_VISITS: u64 = 2_000_000_000;

type Level = BTreeMap<i64, Slice<OscPoly>>;

fn check_order(n: usize) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::resource(format!("order {n} exceeds the supported maximum {MAX_ORDER}")));
    }
    Ok(())
}

/// `1/(2πL)²`.
fn vertex_norm(l: u32) -> f64 {
    (2.0 * PI * l as f64).powi(-2)
}

fn freq(d: i64, l: u32) -> Freq {
    Freq::new(d, (l as i64) * (l as i64))
}

/// `v_n` for all modes in its support.
#[derive(Debug, Clone)]
pub struct PicardState {
    pub order: usize,
    pub params: RegimeParams,
    pub profile: Profile,
    pub coefficients: ChaosExpansion<OscPoly>,
}

impl PicardState {
    pub fn slice(&self, mode: i64) -> Slice<OscPoly> {
        self.coefficients.mode_slice(mode)
    }

    pub fn modes(&self) -> BTreeSet<i64> {
        self.coefficients.mode_set()
    }

    /// Coefficients at `mode` evaluated at time `t`.
    pub fn slice_at(&self, mode: i64, t: f64) -> Slice<Complex64> {
        self.slice(mode).into_iter().map(|(a, p)| (a, p.eval(t))).filter(|(_, c)| c.norm() > 0.0).collect()
    }

    /// `E|v_n(k, t)|²` as an exact function of `t`.
    pub fn mass(&self, mode: i64) -> OscPoly {
        let s = self.slice(mode);
        pair_expectation_slices(&s, &s)
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "order": self.order,
            "params": self.params,
            "profile": self.profile,
            "coefficients": self.coefficients.to_json(),
        })
    }
}

fn initial_level(params: &RegimeParams, profile: &Profile) -> Level {
    let idx = ComplexGaussianIndexing;
    profile
        .window(params.lattice_size)
        .into_iter()
        .filter_map(|m| {
            let a = profile.at_mode(m, params.lattice_size);
            (a != 0.0).then(|| (m, idx.gaussian_slice(m, false).into_iter().map(|(al, c)| (al, OscPoly::constant(c * a))).collect()))
        })
        .collect()
}

fn conj_level(l: &Level) -> Level {
    l.iter().map(|(&m, s)| (m, s.iter().map(|(a, p)| (a.clone(), p.conj())).collect())).collect()
}

/// Constant slice of a time-independent level entry.
fn constant_slice(s: &Slice<OscPoly>) -> Option<Slice<Complex64>> {
    s.iter()
        .map(|(a, p)| match p.terms() {
            [] => Some((a.clone(), Complex64::new(0.0, 0.0))),
            [t] if t.power == 0 && t.freq == Freq::from(0) => Some((a.clone(), t.coeff)),
            _ => None,
        })
        .collect()
}

/// Key of a group of tuples sharing the resonance numerator and the
/// non-constant factors.
type GroupKey = (i64, Vec<(usize, usize, i64)>);

fn next_level(levels: &[Level], conj: &[Level], modes: Option<&[i64]>, params: &RegimeParams) -> Result<Level> {
    let n = levels.len();
    let l = params.lattice_size;
    let cut = params.cutoffs()?;
    let comps = compositions(n - 1, 5);
    let supports: Vec<Vec<i64>> = levels.iter().map(|lv| lv.keys().copied().collect()).collect();
    let range = |comp: &[usize]| -> (i64, i64) {
        let (mut lo, mut hi) = (0, 0);
        for (j, &o) in comp.iter().enumerate() {
            let (a, b) = (supports[o].first().copied().unwrap_or(0), supports[o].last().copied().unwrap_or(-1));
            if j % 2 == 0 {
                lo += a;
                hi += b;
            } else {
                lo -= b;
                hi -= a;
            }
        }
        (lo, hi)
    };
    let targets: Vec<i64> = match modes {
        Some(m) => m.to_vec(),
        None => {
            let (mut lo, mut hi) = (i64::MAX, i64::MIN);
            for c in &comps {
                let (a, b) = range(c);
                lo = lo.min(a);
                hi = hi.max(b);
            }
            if lo > hi { Vec::new() } else { (lo..=hi).collect() }
        }
    };
    let visits: u64 = comps.iter().map(|c| c[..4].iter().map(|&o| supports[o].len() as u64).product::<u64>()).sum::<u64>()
        * targets.len() as u64;
    if visits > MAX_TUPLE_VISITS {
        return Err(Error::resource(format!("{visits} tuple visits exceed the cap of {MAX_TUPLE_VISITS}")));
    }
    let constants = |src: &[Level]| -> Vec<BTreeMap<i64, Slice<Complex64>>> {
        src.iter().map(|lv| lv.iter().filter_map(|(&m, s)| constant_slice(s).map(|c| (m, c))).collect()).collect()
    };
    // index 0: plain factors, 1: conjugated factors
    let constants = [constants(levels), constants(conj)];
    let pref = Complex64::new(0.0, -vertex_norm(l));

    let per_mode = |k: i64| -> (i64, Slice<OscPoly>) {
        let mut groups: BTreeMap<GroupKey, BTreeMap<MultiIndex, Complex64>> = BTreeMap::new();
        for comp in &comps {
            let s = &supports;
            let mut c = [0i64; 5];
            for &c1 in &s[comp[0]] {
                c[0] = c1;
                for &c2 in &s[comp[1]] {
                    c[1] = c2;
                    for &c3 in &s[comp[2]] {
                        c[2] = c3;
                        for &c4 in &s[comp[3]] {
                            c[3] = c4;
                            c[4] = k - c1 + c2 - c3 + c4;
                            if !levels[comp[4]].contains_key(&c[4]) || !cut.node_ok(k, &c) {
                                continue;
                            }
                            let d = delta_numerator(k, &c);
                            let mut varying = Vec::new();
                            let mut cst: Slice<Complex64> = vec![(MultiIndex::zero(), Complex64::new(1.0, 0.0))];
                            for j in 0..5 {
                                match constants[j % 2][comp[j]].get(&c[j]) {
                                    Some(sl) => cst = wick_slices(&cst, sl),
                                    None => varying.push((j, comp[j], c[j])),
                                }
                            }
                            let g = groups.entry((d, varying)).or_default();
                            for (a, v) in cst {
                                *g.entry(a).or_insert(Complex64::new(0.0, 0.0)) += v;
                            }
                        }
                    }
                }
            }
        }
        // bucket by resonance numerator, integrate once per bucket
        let mut buckets: BTreeMap<i64, BTreeMap<MultiIndex, OscAccumulator>> = BTreeMap::new();
        for ((d, varying), cst) in groups {
            let cst: Slice<Complex64> = cst.into_iter().collect();
            let mut prod: Vec<(MultiIndex, OscAccumulator)> =
                cst.iter().map(|(a, c)| (a.clone(), { let mut acc = OscAccumulator::default(); acc.add(&OscPoly::constant(*c)); acc })).collect();
            for (j, o, m) in varying {
                let src = if j % 2 == 1 { &conj[o][&m] } else { &levels[o][&m] };
                let mut next: BTreeMap<MultiIndex, OscAccumulator> = BTreeMap::new();
                for (a, acc) in prod {
                    let pa = acc.finish();
                    for (b, pb) in src {
                        let (al, w) = wick_combine(&a, b);
                        next.entry(al).or_default().add(&pa.mul(pb).scale(Complex64::new(w, 0.0)));
                    }
                }
                prod = next.into_iter().collect();
            }
            let bucket = buckets.entry(d).or_default();
            for (a, acc) in prod {
                bucket.entry(a).or_default().add(&acc.finish());
            }
        }
        let mut out: BTreeMap<MultiIndex, OscAccumulator> = BTreeMap::new();
        for (d, b) in buckets {
            let w = freq(d, l);
            for (a, acc) in b {
                out.entry(a).or_default().add(&acc.finish().primitive(w).scale(pref));
            }
        }
        (k, out.into_iter().map(|(a, acc)| (a, acc.finish())).filter(|(_, p)| !p.is_zero()).collect())
    };
    Ok(targets.into_par_iter().map(per_mode).filter(|(_, s)| !s.is_empty()).collect::<Vec<_>>().into_iter().collect())
}

fn build_levels(n: usize, final_modes: Option<&[i64]>, params: &RegimeParams, profile: &Profile) -> Result<Vec<Level>> {
    check_order(n)?;
    params.validate()?;
    profile.validate()?;
    let mut levels = vec![initial_level(params, profile)];
    if let Some(m) = final_modes.filter(|_| n == 0) {
        levels[0].retain(|k, _| m.contains(k));
    }
    let mut conj = vec![conj_level(&levels[0])];
    for j in 1..=n {
        let modes = if j == n { final_modes } else { None };
        let lv = next_level(&levels, &conj, modes, params)?;
        conj.push(conj_level(&lv));
        levels.push(lv);
    }
    Ok(levels)
}

fn state_from_level(n: usize, level: &Level, params: &RegimeParams, profile: &Profile) -> PicardState {
    let mut e = ChaosExpansion::new(params.lattice_size);
    for (&m, s) in level {
        for (a, p) in s {
            e.add_term(a.clone(), m, p.clone());
        }
    }
    PicardState { order: n, params: params.clone(), profile: profile.clone(), coefficients: e }
}

/// `v_n` at every mode of its support.
pub fn picard_recursion(n: usize, params: &RegimeParams, profile: &Profile) -> Result<PicardState> {
    let levels = build_levels(n, None, params, profile)?;
    Ok(state_from_level(n, &levels[n], params, profile))
}

/// `v_n` restricted to the given output modes (lower orders are still built
/// on their full support).
pub fn picard_recursion_at(n: usize, modes: &[i64], params: &RegimeParams, profile: &Profile) -> Result<PicardState> {
    let levels = build_levels(n, Some(modes), params, profile)?;
    Ok(state_from_level(n, &levels[n], params, profile))
}

/// Preorder node data of a tree, used on the hot labelling paths.
struct TreeInfo {
    tree: QuinticTree,
    sign: Complex64,
    /// linear extensions as indices into the preorder node list
    extensions: Vec<Vec<usize>>,
}

impl TreeInfo {
    fn new(tree: QuinticTree) -> Result<Self> {
        let nodes = tree.node_addresses();
        let pos: HashMap<&NodeAddress, usize> = nodes.iter().enumerate().map(|(i, a)| (a, i)).collect();
        let extensions = linear_extensions(&tree)?.iter().map(|e| e.iter().map(|a| pos[a]).collect()).collect();
        Ok(Self { sign: minus_i_pow(tree.sign_exponent()), tree, extensions })
    }

    /// `Σ_φ G(Ω(φ(1)), …)` without the `(−i)^{N_T}` factor.
    fn g_sum(&self, d: &[i64], l: u32) -> OscPoly {
        let mut acc = OscAccumulator::default();
        for e in &self.extensions {
            let ws: Vec<Freq> = e.iter().map(|&i| freq(d[i], l)).collect();
            acc.add(&g_m_poly(&ws));
        }
        acc.finish()
    }

    fn g_ext(&self, ext: usize, d: &[i64], l: u32) -> OscPoly {
        let ws: Vec<Freq> = self.extensions[ext].iter().map(|&i| freq(d[i], l)).collect();
        g_m_poly(&ws)
    }
}

/// Root-frame resonance numerators in preorder; returns the subtree root
/// momentum, or `None` if a node cutoff fails (only when `cut` is given).
fn walk(t: &QuinticTree, kv: &[i64], pos: &mut usize, sign: i64, out: &mut Vec<i64>, cut: Option<&Cutoffs>) -> Option<i64> {
    match t {
        QuinticTree::Leaf => {
            let m = kv[*pos];
            *pos += 1;
            Some(m)
        }
        QuinticTree::Node(ch) => {
            let slot = out.len();
            out.push(0);
            let mut c = [0i64; 5];
            for (j, child) in ch.iter().enumerate() {
                c[j] = walk(child, kv, pos, if j % 2 == 0 { sign } else { -sign }, out, cut)?;
            }
            let m = alternating_sum(&c);
            if cut.is_some_and(|cu| !cu.node_ok(m, &c)) {
                return None;
            }
            out[slot] = sign * delta_numerator(m, &c);
            Some(m)
        }
    }
}

fn tree_deltas(t: &QuinticTree, kv: &[i64]) -> Vec<i64> {
    let mut out = Vec::new();
    walk(t, kv, &mut 0, 1, &mut out, None);
    out
}

fn word_from_key(key: &WordKey) -> Vec<i64> {
    let mut w = Vec::with_capacity(key.plus.len() + key.minus.len());
    for (j, &p) in key.plus.iter().enumerate() {
        w.push(p);
        if let Some(&m) = key.minus.get(j) {
            w.push(m);
        }
    }
    w
}

/// `W_κ(t) = Σ_{T ∈ 𝒯_n} Σ_{k⃗ ∈ C_T(k), key(k⃗) = κ} A_{k⃗} F_{T,k⃗}(t)`, grouped by
/// Gaussian word key (the Wick product is commutative, so `g_{k⃗}` only
/// depends on the key).
pub fn grouped_amplitudes(n: usize, k: i64, params: &RegimeParams, profile: &Profile) -> Result<BTreeMap<WordKey, OscPoly>> {
    check_order(n)?;
    params.validate()?;
    let l = params.lattice_size;
    let mut en = LabelingEnumerator::new(params, profile)?;
    let amp: HashMap<i64, f64> = en.window().iter().map(|&m| (m, profile.at_mode(m, l))).collect();
    let trees: Vec<TreeInfo> = enumerate_trees(n)?.into_iter().map(TreeInfo::new).collect::<Result<_>>()?;
    let mut groups: HashMap<WordKey, HashMap<(usize, Vec<i64>), f64>> = HashMap::new();
    for (ti, info) in trees.iter().enumerate() {
        en.for_each(&info.tree, k, &mut |kv| {
            let a: f64 = kv.iter().map(|m| amp[m]).product();
            if a == 0.0 {
                return;
            }
            let d = tree_deltas(&info.tree, kv);
            *groups.entry(WordKey::of(kv)).or_default().entry((ti, d)).or_insert(0.0) += a;
        })?;
    }
    let mut cache: HashMap<(usize, Vec<i64>), OscPoly> = HashMap::new();
    let mut keys: Vec<WordKey> = groups.keys().cloned().collect();
    keys.sort();
    let mut out = BTreeMap::new();
    for key in keys {
        let mut entries: Vec<((usize, Vec<i64>), f64)> = groups.remove(&key).unwrap().into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut acc = OscAccumulator::default();
        for ((ti, d), a) in entries {
            let f = cache
                .entry((ti, d.clone()))
                .or_insert_with(|| trees[ti].g_sum(&d, l).scale(trees[ti].sign));
            acc.add_scaled(f, Complex64::new(a, 0.0));
        }
        let w = acc.finish();
        if !w.is_zero() {
            out.insert(key, w);
        }
    }
    Ok(out)
}

/// Diagrammatic assembly
/// `v_n(k) = (2πL)^{−2n} Σ_T Σ_{k⃗ ∈ C_T(k)} F_{T,k⃗} A_{k⃗} g_{k⃗}` as chaos
/// coefficients at mode `k`.
pub fn tree_sum(n: usize, k: i64, params: &RegimeParams, profile: &Profile) -> Result<BTreeMap<MultiIndex, OscPoly>> {
    let groups = grouped_amplitudes(n, k, params, profile)?;
    let idx = ComplexGaussianIndexing;
    let norm = vertex_norm(params.lattice_size).powi(n as i32);
    let mut acc: BTreeMap<MultiIndex, OscAccumulator> = BTreeMap::new();
    for (key, w) in &groups {
        for (a, c) in crate::trees::gaussian_word_slice(&word_from_key(key), &idx) {
            acc.entry(a).or_default().add_scaled(w, c * norm);
        }
    }
    Ok(acc.into_iter().map(|(a, x)| (a, x.finish())).filter(|(_, p)| !p.is_zero()).collect())
}

/// Largest coefficientwise deviation at time `t`, relative to the largest
/// coefficient (`‖a − b‖_∞ / ‖b‖_∞`).
pub fn relative_deviation(a: &BTreeMap<MultiIndex, OscPoly>, b: &BTreeMap<MultiIndex, OscPoly>, t: f64) -> f64 {
    let keys: BTreeSet<&MultiIndex> = a.keys().chain(b.keys()).collect();
    let zero = OscPoly::zero();
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for k in keys {
        let x = a.get(k).unwrap_or(&zero).eval(t);
        let y = b.get(k).unwrap_or(&zero).eval(t);
        diff = diff.max((x - y).norm());
        scale = scale.max(y.norm());
    }
    if scale == 0.0 { diff } else { diff / scale }
}

/// `E|v_n(k, t)|²` from the grouped diagram amplitudes.
pub fn mass_poly(n: usize, k: i64, params: &RegimeParams, profile: &Profile) -> Result<OscPoly> {
    let groups = grouped_amplitudes(n, k, params, profile)?;
    let norm = vertex_norm(params.lattice_size).powi(2 * n as i32);
    let mut acc = OscAccumulator::default();
    for (key, w) in &groups {
        acc.add_scaled(&w.conj().mul(w), Complex64::new(key.self_pairing() * norm, 0.0));
    }
    Ok(acc.finish())
}

/// Parts of `∂_t E|v₁(k, t)|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassDerivative {
    /// `Σ_{σ ∈ 𝔄} Σ_{k⃗ ∈ C_σ(k)} 2/(2πL)⁴ · sin(Δt)/Δ · Π|a(k_j)|²`
    pub main: f64,
    /// exact corrections from coincident-momentum tuples
    pub remainder: f64,
    /// `main + remainder`, the exact derivative
    pub exact: f64,
    /// part of `main` carried by tuples with a repeated momentum
    pub literal_remainder: f64,
}

fn sinc_t(d: i64, l: u32, t: f64) -> f64 {
    if d == 0 {
        return t;
    }
    let w = d as f64 / (l as f64 * l as f64);
    (w * t).sin() / w
}

fn has_repeat(c: &[i64]) -> bool {
    (0..c.len()).any(|i| (i + 1..c.len()).any(|j| c[i] == c[j]))
}

pub fn mass_derivative_n1_parts(k: i64, t: f64, params: &RegimeParams, profile: &Profile) -> Result<MassDerivative> {
    let l = params.lattice_size;
    let cut = params.cutoffs()?;
    let parity = parity_permutations();
    let idx = ComplexGaussianIndexing;
    let norm = 2.0 * vertex_norm(l).powi(2);
    let window = profile.window(l);
    let lo = window.first().copied().unwrap_or(0);
    let amp2: Vec<f64> = (lo..=window.last().copied().unwrap_or(lo - 1)).map(|m| profile.at_mode(m, l).powi(2)).collect();
    // (main, literal, remainder)
    let (main, lit, rem) = fold_c_l(
        k,
        params,
        profile,
        (0.0, 0.0, 0.0),
        |acc, c| {
            let w: f64 = c.iter().map(|&m| amp2[(m - lo) as usize]).product();
            if w == 0.0 {
                return;
            }
            let s = sinc_t(delta_numerator(k, c), l, t) * w;
            // σ ∈ 𝔄 keeps the alternating sum and Δ; only k̄ = c_{σ(5)} − c_{σ(4)}
            // changes, and each (σ(5), σ(4)) pair is hit by 2 permutations
            let mut pairs = 0u32;
            for e in [0, 2, 4] {
                for o in [1, 3] {
                    pairs += cut.kbar_ok(c[e] - c[o]) as u32;
                }
            }
            let main_w = 2.0 * pairs as f64;
            acc.0 += s * main_w;
            if has_repeat(c) {
                acc.1 += s * main_w;
                let distinct: BTreeSet<[i64; 5]> = parity
                    .iter()
                    .map(|sg| [c[sg[0]], c[sg[1]], c[sg[2]], c[sg[3]], c[sg[4]]])
                    .filter(|p| cut.kbar_ok(p[4] - p[3]))
                    .collect();
                let exact_w: f64 = distinct.iter().map(|p| pairing_weight(c, p, &idx)).sum();
                acc.2 += s * (exact_w - main_w);
            }
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
    )?;
    Ok(MassDerivative { main: norm * main, remainder: norm * rem, exact: norm * (main + rem), literal_remainder: norm * lit })
}

/// `E(ḡ_{k⃗} g_{k⃗′})`, memoised per word pair through the chaos algebra.
fn pairing_weight(a: &[i64; 5], b: &[i64; 5], idx: &ComplexGaussianIndexing) -> f64 {
    use std::cell::RefCell;
    thread_local! {
        static MEMO: RefCell<HashMap<(WordKey, Vec<i64>, Vec<i64>), f64>> = RefCell::new(HashMap::new());
    }
    // the value only depends on the relative pattern of coincidences, so
    // memoise on the relabelled words
    let mut ids: BTreeMap<i64, i64> = BTreeMap::new();
    let mut relabel = |w: &[i64]| -> Vec<i64> {
        w.iter().map(|m| { let n = ids.len() as i64; *ids.entry(*m).or_insert(n) }).collect()
    };
    let (ra, rb) = (relabel(a), relabel(b));
    let key = (WordKey::of(&ra), ra.clone(), rb.clone());
    MEMO.with(|m| {
        *m.borrow_mut().entry(key).or_insert_with(|| pairing_expectation(&ra, &rb, idx).map(|z| z.re).unwrap_or(0.0))
    })
}

/// `∂_t E|v₁(k, t)|²`: the main parity-pairing sum, plus the exact
/// coincident-tuple corrections when `include_remainder` is set.
pub fn mass_derivative_n1(k: i64, t: f64, params: &RegimeParams, profile: &Profile, include_remainder: bool) -> Result<f64> {
    let p = mass_derivative_n1_parts(k, t, params, profile)?;
    Ok(if include_remainder { p.exact } else { p.main })
}

/// How each `k⃗` is weighted in a pairing sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairingWeight {
    Plain,
    /// `1/|{σ ∈ 𝔄 : k⃗_σ = k⃗}|` (one-vertex words only)
    ParityStabilizer,
    /// `1/|Stab_{S_{4n+1}}(k⃗)|`
    FullStabilizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingValue {
    /// normalised with `(2πL)^{−4n}`
    pub value: Complex64,
    /// unnormalised sum
    pub raw: Complex64,
    /// the `t^{n−1}` part of `∂_t G`, normalised
    pub secular: Complex64,
}

/// `V(T₁,T₂,σ,k,φ₁,φ₂)`: sum over `k⃗ ∈ C_{T₁}(k)` with `k⃗_σ ∈ C_{T₂}(k)` of
/// `∂_t[conj(F^{φ₁}_{T₁,k⃗}) F^{φ₂}_{T₂,k⃗_σ}] conj(A_{k⃗}) A_{k⃗_σ} E(ḡ_{k⃗} g_{k⃗_σ})`,
/// including the `(−i)^{N_{T₂}−N_{T₁}}` pair factor. `φ` index the
/// extensions returned by [`linear_extensions`].
#[allow(clippy::too_many_arguments)]
pub fn pairing_sum(
    t1: &QuinticTree,
    t2: &QuinticTree,
    sigma: &[usize],
    phi1: usize,
    phi2: usize,
    k: i64,
    t: f64,
    params: &RegimeParams,
    profile: &Profile,
    weight: PairingWeight,
) -> Result<PairingValue> {
    let n = t1.node_count();
    check_order(n)?;
    if t2.node_count() != n {
        return Err(Error::domain("pairing_sum needs trees with the same number of nodes"));
    }
    let mut sorted = sigma.to_vec();
    sorted.sort_unstable();
    if sorted != (0..4 * n + 1).collect::<Vec<_>>() {
        return Err(Error::domain(format!("sigma must be a permutation of 0..{}", 4 * n + 1)));
    }
    let (i1, i2) = (TreeInfo::new(t1.clone())?, TreeInfo::new(t2.clone())?);
    if phi1 >= i1.extensions.len() || phi2 >= i2.extensions.len() {
        return Err(Error::domain("linear extension index out of range"));
    }
    let l = params.lattice_size;
    let cut = params.cutoffs()?;
    let window: BTreeSet<i64> = profile.window(l).into_iter().collect();
    let parity = parity_permutations();
    let mut en = LabelingEnumerator::new(params, profile)?;
    let mut acc = OscAccumulator::default();
    let mut cache: HashMap<(Vec<i64>, Vec<i64>), OscPoly> = HashMap::new();
    en.for_each(t1, k, &mut |kv| {
        let ks = apply_permutation(kv, sigma);
        if !ks.iter().all(|m| window.contains(m)) {
            return;
        }
        let mut d2 = Vec::new();
        if walk(t2, &ks, &mut 0, 1, &mut d2, Some(&cut)) != Some(k) {
            return;
        }
        let e = pairing_closed_form(kv, &ks);
        if e == 0.0 {
            return;
        }
        let a: f64 = kv.iter().chain(&ks).map(|&m| profile.at_mode(m, l)).product();
        let w = match weight {
            PairingWeight::Plain => 1.0,
            PairingWeight::FullStabilizer => 1.0 / crate::lattice::stabilizer_order(kv) as f64,
            PairingWeight::ParityStabilizer => {
                1.0 / parity.iter().filter(|sg| sg.len() == kv.len() && apply_permutation(kv, &sg[..]) == kv).count().max(1) as f64
            }
        };
        let d1 = tree_deltas(t1, kv);
        let g = cache.entry((d1.clone(), d2.clone())).or_insert_with(|| {
            i1.g_ext(phi1, &d1, l).conj().mul(&i2.g_ext(phi2, &d2, l)).derivative()
        });
        acc.add_scaled(g, Complex64::new(a * e * w, 0.0));
    })?;
    let pair = minus_i_pow(t2.sign_exponent()) * minus_i_pow(t1.sign_exponent()).conj();
    let dg = acc.finish().scale(pair);
    let norm = vertex_norm(l).powi(2 * n as i32);
    let raw = dg.eval(t);
    let secular = if n >= 1 { dg.power_part(n as u32 - 1).eval(t) } else { Complex64::new(0.0, 0.0) };
    Ok(PairingValue { value: raw * norm, raw, secular: secular * norm })
}

/// Sum of [`pairing_sum`] over all `(T₁, T₂, φ₁, φ₂, σ ∈ S_{4n+1})` with
/// full-stabiliser weights, i.e. `∂_t E|v_n(k, t)|²`, together with its
/// secular (`t^{n−1}`) part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingTotal {
    pub n: usize,
    pub lattice_size: u32,
    pub t: f64,
    pub value: f64,
    pub secular: f64,
    pub raw_value: f64,
    pub raw_secular: f64,
}

pub fn pairing_total(n: usize, k: i64, t: f64, params: &RegimeParams, profile: &Profile) -> Result<PairingTotal> {
    let m = mass_poly(n, k, params, profile)?;
    let norm = vertex_norm(params.lattice_size).powi(2 * n as i32);
    let d = m.derivative();
    let value = d.eval(t).re;
    let secular = if n >= 1 { d.power_part(n as u32 - 1).eval(t).re } else { 0.0 };
    Ok(PairingTotal { n, lattice_size: params.lattice_size, t, value, secular, raw_value: value / norm, raw_secular: secular / norm })
}

/// Monte-Carlo estimate of `E|v_n(k, t)|²` with its standard error.
pub fn monte_carlo_mass(n: usize, k: i64, t: f64, params: &RegimeParams, profile: &Profile, samples: u64, seed: u64) -> Result<(f64, f64)> {
    let s = picard_recursion_at(n, &[k], params, profile)?.slice_at(k, t);
    let (m, se) = mc_pair_expectation(&s, &s, samples, seed);
    Ok((m.re, se))
}

/// Monte-Carlo estimate of `E(conj(v_{n₁}(k, t)) v_{n₂}(k, t))`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_cross(
    n1: usize,
    n2: usize,
    k: i64,
    t: f64,
    params: &RegimeParams,
    profile: &Profile,
    samples: u64,
    seed: u64,
) -> Result<(Complex64, f64)> {
    let a = picard_recursion_at(n1, &[k], params, profile)?.slice_at(k, t);
    let b = picard_recursion_at(n2, &[k], params, profile)?.slice_at(k, t);
    Ok(mc_pair_expectation(&a, &b, samples, seed))
}
