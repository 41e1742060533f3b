//! Quintic (5-ary) interaction trees: enumeration, node addresses, the
//! parenthood order and its linear extensions, momentum / frequency labels,
//! admissibility, and the amplitude and Gaussian weights of a labelling.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chaos::{wick_slices, ChaosExpansion, ComplexGaussianIndexing, Slice};
use crate::error::{Error, Result};
use crate::lattice::{Cutoffs, Profile};

pub const DEFAULT_TREE_CAP: usize = 4;

/// Unlabelled quintic tree. The derived order (`Leaf < Node`, then children
/// lexicographically) is the canonical enumeration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuinticTree {
    Leaf,
    Node(Box<[QuinticTree; 5]>),
}

impl QuinticTree {
    pub fn node(children: [QuinticTree; 5]) -> Self {
        QuinticTree::Node(Box::new(children))
    }

    pub fn one_node() -> Self {
        Self::node(std::array::from_fn(|_| QuinticTree::Leaf))
    }

    /// One-node subtree placed in `slot` (1-based) of an otherwise bare root.
    pub fn with_child_at(slot: usize, child: QuinticTree) -> Self {
        let mut ch: [QuinticTree; 5] = std::array::from_fn(|_| QuinticTree::Leaf);
        ch[slot - 1] = child;
        Self::node(ch)
    }

    /// The four-node tree with an inner node in slot 0 (which itself carries
    /// a node in slot 4) and a node in slot 4; it has three linear extensions.
    pub fn four_node_example() -> Self {
        let inner = QuinticTree::with_child_at(4, QuinticTree::one_node());
        let mut ch: [QuinticTree; 5] = std::array::from_fn(|_| QuinticTree::Leaf);
        ch[0] = inner;
        ch[4] = QuinticTree::one_node();
        QuinticTree::node(ch)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, QuinticTree::Leaf)
    }

    pub fn children(&self) -> Option<&[QuinticTree; 5]> {
        match self {
            QuinticTree::Leaf => None,
            QuinticTree::Node(c) => Some(c),
        }
    }

    /// n(T).
    pub fn node_count(&self) -> usize {
        match self {
            QuinticTree::Leaf => 0,
            QuinticTree::Node(c) => 1 + c.iter().map(|t| t.node_count()).sum::<usize>(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            QuinticTree::Leaf => 1,
            QuinticTree::Node(c) => c.iter().map(|t| t.leaf_count()).sum(),
        }
    }

    /// N_⊥ = 0, N_T = 1 − Σ_j (−1)^j N_{T_j}.
    pub fn sign_exponent(&self) -> i64 {
        match self {
            QuinticTree::Leaf => 0,
            QuinticTree::Node(c) => {
                1 - c.iter().enumerate().map(|(j, t)| if j % 2 == 1 { t.sign_exponent() } else { -t.sign_exponent() }).sum::<i64>()
            }
        }
    }

    /// N(T), in preorder (root first, then slots 1..5).
    pub fn node_addresses(&self) -> Vec<NodeAddress> {
        let mut out = Vec::new();
        self.collect_addresses(&mut Vec::new(), &mut out, false);
        out
    }

    /// Ñ(T): nodes and leaves, in preorder.
    pub fn all_addresses(&self) -> Vec<NodeAddress> {
        let mut out = Vec::new();
        self.collect_addresses(&mut Vec::new(), &mut out, true);
        out
    }

    fn collect_addresses(&self, path: &mut Vec<u8>, out: &mut Vec<NodeAddress>, leaves: bool) {
        match self {
            QuinticTree::Leaf => {
                if leaves {
                    out.push(NodeAddress { path: path.clone(), leaf: true });
                }
            }
            QuinticTree::Node(c) => {
                out.push(NodeAddress { path: path.clone(), leaf: false });
                for (j, t) in c.iter().enumerate() {
                    path.push(j as u8 + 1);
                    t.collect_addresses(path, out, leaves);
                    path.pop();
                }
            }
        }
    }

    /// Subtree at a path, if it exists.
    pub fn subtree(&self, path: &[u8]) -> Option<&QuinticTree> {
        let mut t = self;
        for &j in path {
            t = t.children()?.get((j as usize).checked_sub(1)?)?;
        }
        Some(t)
    }

    pub fn contains_node(&self, a: &NodeAddress) -> bool {
        !a.leaf && self.subtree(&a.path).is_some_and(|t| !t.is_leaf())
    }

    /// Bracket rendering, e.g. `((⊥,⊥,⊥,⊥,⊥),⊥,⊥,⊥,⊥)`.
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Parses the rendering produced by [`Self::render`]; `_` is accepted for `⊥`.
    pub fn parse(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let t = parse_tree(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(Error::domain(format!("trailing input in tree literal {s:?}")));
        }
        Ok(t)
    }
}

fn parse_tree(c: &[char], pos: &mut usize) -> Result<QuinticTree> {
    match c.get(*pos) {
        Some('⊥') | Some('_') => {
            *pos += 1;
            Ok(QuinticTree::Leaf)
        }
        Some('(') => {
            *pos += 1;
            let mut kids = Vec::with_capacity(5);
            loop {
                kids.push(parse_tree(c, pos)?);
                match c.get(*pos) {
                    Some(',') => *pos += 1,
                    Some(')') => {
                        *pos += 1;
                        break;
                    }
                    other => return Err(Error::domain(format!("unexpected {other:?} in tree literal"))),
                }
            }
            let kids: [QuinticTree; 5] =
                kids.try_into().map_err(|v: Vec<_>| Error::domain(format!("a node needs 5 children, got {}", v.len())))?;
            Ok(QuinticTree::node(kids))
        }
        other => Err(Error::domain(format!("unexpected {other:?} in tree literal"))),
    }
}

impl fmt::Display for QuinticTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuinticTree::Leaf => write!(f, "⊥"),
            QuinticTree::Node(c) => {
                write!(f, "(")?;
                for (j, t) in c.iter().enumerate() {
                    if j > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Child-index path into a tree (root = empty path, printed `0`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeAddress {
    pub path: Vec<u8>,
    pub leaf: bool,
}

impl NodeAddress {
    pub fn root() -> Self {
        Self { path: Vec::new(), leaf: false }
    }

    pub fn node(path: &[u8]) -> Self {
        Self { path: path.to_vec(), leaf: false }
    }

    pub fn leaf(path: &[u8]) -> Self {
        Self { path: path.to_vec(), leaf: true }
    }

    /// Product of `(−1)^{j+1}` along the path: the sign carried into the
    /// root frame.
    pub fn frame_sign(&self) -> i64 {
        if self.path.iter().filter(|&&j| j % 2 == 0).count() % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            return write!(f, "0");
        }
        write!(f, "(")?;
        for j in &self.path {
            write!(f, "{j},")?;
        }
        write!(f, "0)")
    }
}

/// All trees with `n` nodes, in canonical order, with the default cap.
pub fn enumerate_trees(n: usize) -> Result<Vec<QuinticTree>> {
    enumerate_trees_capped(n, DEFAULT_TREE_CAP)
}

pub fn enumerate_trees_capped(n: usize, cap: usize) -> Result<Vec<QuinticTree>> {
    if n > cap {
        return Err(Error::resource(format!("tree enumeration at n = {n} exceeds the cap {cap}")));
    }
    let mut by_size: Vec<Vec<QuinticTree>> = vec![vec![QuinticTree::Leaf]];
    for size in 1..=n {
        let mut level = Vec::new();
        for comp in compositions(size - 1, 5) {
            let mut partial: Vec<Vec<QuinticTree>> = vec![Vec::new()];
            for &nj in &comp {
                let mut next = Vec::with_capacity(partial.len() * by_size[nj].len());
                for p in &partial {
                    for t in &by_size[nj] {
                        let mut q = p.clone();
                        q.push(t.clone());
                        next.push(q);
                    }
                }
                partial = next;
            }
            level.extend(partial.into_iter().map(|v| QuinticTree::node(v.try_into().unwrap())));
        }
        level.sort();
        level.dedup();
        by_size.push(level);
    }
    Ok(by_size.swap_remove(n))
}

/// Ordered compositions of `n` into `parts` non-negative parts, lexicographic.
pub fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Relation of two nodes under the parenthood order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRelation {
    Less,
    Greater,
    Equal,
    Incomparable,
}

/// `l₁ R_T l₂` (reported as `Less`) iff `l₂` is a strict ancestor of `l₁`.
pub fn node_order(t: &QuinticTree, l1: &NodeAddress, l2: &NodeAddress) -> Result<NodeRelation> {
    for l in [l1, l2] {
        if !t.contains_node(l) {
            return Err(Error::domain(format!("{l} is not a node of {t}")));
        }
    }
    Ok(relation(&l1.path, &l2.path))
}

fn relation(a: &[u8], b: &[u8]) -> NodeRelation {
    match a.len().cmp(&b.len()) {
        Ordering::Equal if a == b => NodeRelation::Equal,
        Ordering::Greater if a.starts_with(b) => NodeRelation::Less,
        Ordering::Less if b.starts_with(a) => NodeRelation::Greater,
        _ => NodeRelation::Incomparable,
    }
}

/// Linear extensions of `(N(T), R_T)`: sequences `(φ(1), …, φ(n))` in which
/// every node appears after all of its descendants. Ordered lexicographically
/// by preorder index.
pub fn linear_extensions(t: &QuinticTree) -> Result<Vec<Vec<NodeAddress>>> {
    linear_extensions_capped(t, DEFAULT_TREE_CAP)
}

pub fn linear_extensions_capped(t: &QuinticTree, cap: usize) -> Result<Vec<Vec<NodeAddress>>> {
    let nodes = t.node_addresses();
    if nodes.len() > cap {
        return Err(Error::resource(format!("tree has {} nodes, above the cap {cap}", nodes.len())));
    }
    // pending[i] = number of direct child nodes of node i not yet placed
    let parent: Vec<Option<usize>> = nodes
        .iter()
        .map(|a| {
            if a.path.is_empty() {
                None
            } else {
                nodes.iter().position(|b| b.path == a.path[..a.path.len() - 1])
            }
        })
        .collect();
    let mut pending = vec![0usize; nodes.len()];
    for p in parent.iter().flatten() {
        pending[*p] += 1;
    }
    let mut out = Vec::new();
    let mut used = vec![false; nodes.len()];
    let mut seq = Vec::with_capacity(nodes.len());
    extend(&nodes, &parent, &mut pending, &mut used, &mut seq, &mut out);
    Ok(out)
}

fn extend(
    nodes: &[NodeAddress],
    parent: &[Option<usize>],
    pending: &mut [usize],
    used: &mut [bool],
    seq: &mut Vec<usize>,
    out: &mut Vec<Vec<NodeAddress>>,
) {
    if seq.len() == nodes.len() {
        out.push(seq.iter().map(|&i| nodes[i].clone()).collect());
        return;
    }
    for i in 0..nodes.len() {
        if used[i] || pending[i] > 0 {
            continue;
        }
        used[i] = true;
        seq.push(i);
        if let Some(p) = parent[i] {
            pending[p] -= 1;
        }
        extend(nodes, parent, pending, used, seq, out);
        if let Some(p) = parent[i] {
            pending[p] += 1;
        }
        seq.pop();
        used[i] = false;
    }
}

/// A labelling `k⃗ = (m₁/L, …, m_{4n+1}/L)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub k_vec: Vec<i64>,
    pub lattice_size: u32,
}

impl LabelAssignment {
    pub fn new(k_vec: Vec<i64>, lattice_size: u32) -> Self {
        Self { k_vec, lattice_size }
    }

    fn check(&self, t: &QuinticTree) -> Result<()> {
        if self.k_vec.len() != t.leaf_count() {
            return Err(Error::domain(format!(
                "labelling has {} entries but the tree has {} leaves",
                self.k_vec.len(),
                t.leaf_count()
            )));
        }
        if self.lattice_size == 0 {
            return Err(Error::domain("lattice size must be positive"));
        }
        Ok(())
    }
}

/// Momentum labels on Ñ(T) as integers `m` (k = m/L).
pub fn momentum_labels(t: &QuinticTree, a: &LabelAssignment) -> Result<BTreeMap<NodeAddress, i64>> {
    a.check(t)?;
    let mut out = BTreeMap::new();
    label_rec(t, &a.k_vec, &mut Vec::new(), &mut out);
    Ok(out)
}

fn label_rec(t: &QuinticTree, k: &[i64], path: &mut Vec<u8>, out: &mut BTreeMap<NodeAddress, i64>) -> i64 {
    match t {
        QuinticTree::Leaf => {
            out.insert(NodeAddress::leaf(path), k[0]);
            k[0]
        }
        QuinticTree::Node(c) => {
            let root: i64 = k.iter().enumerate().map(|(j, &x)| if j % 2 == 0 { x } else { -x }).sum();
            out.insert(NodeAddress::node(path), root);
            let mut off = 0;
            for (j, ct) in c.iter().enumerate() {
                let len = ct.leaf_count();
                path.push(j as u8 + 1);
                label_rec(ct, &k[off..off + len], path, out);
                path.pop();
                off += len;
            }
            root
        }
    }
}

/// Own six-momentum resonance numerator of a node (`Δ = d/L²`), keyed by
/// node, from a complete momentum label map.
fn own_delta(labels: &BTreeMap<NodeAddress, i64>, node: &NodeAddress, t: &QuinticTree) -> i64 {
    let sub = t.subtree(&node.path).unwrap();
    let m = labels[node];
    let mut d = m * m;
    for (j, ct) in sub.children().unwrap().iter().enumerate() {
        let mut p = node.path.clone();
        p.push(j as u8 + 1);
        let addr = if ct.is_leaf() { NodeAddress::leaf(&p) } else { NodeAddress::node(&p) };
        let x = labels[&addr];
        d += if j % 2 == 0 { -x * x } else { x * x };
    }
    d
}

/// Root-frame frequencies Ω_{T,k⃗} on N(T), as numerators over `L²`.
pub fn omega_labels(t: &QuinticTree, a: &LabelAssignment) -> Result<BTreeMap<NodeAddress, i64>> {
    let labels = momentum_labels(t, a)?;
    Ok(t.node_addresses().into_iter().map(|n| {
        let d = own_delta(&labels, &n, t) * n.frame_sign();
        (n, d)
    }).collect())
}

/// `k⃗ ∈ C_T(k)` with `k = m/L`, cutoffs `1/μ` and `1/ν`.
pub fn admissible(t: &QuinticTree, a: &LabelAssignment, m: i64, mu: f64, nu: f64) -> Result<bool> {
    let cut = Cutoffs::new(a.lattice_size, mu, nu)?;
    admissible_with(t, a, m, &cut)
}

pub fn admissible_with(t: &QuinticTree, a: &LabelAssignment, m: i64, cut: &Cutoffs) -> Result<bool> {
    let labels = momentum_labels(t, a)?;
    if labels[&t.all_addresses()[0]] != m {
        return Ok(false);
    }
    for n in t.node_addresses() {
        let child = |j: u8| {
            let mut p = n.path.clone();
            p.push(j);
            let leaf = t.subtree(&p).unwrap().is_leaf();
            labels[&NodeAddress { path: p, leaf }]
        };
        let kbar = child(1) - child(2) + child(3) - labels[&n];
        if !cut.kbar_ok(kbar) || !cut.omega_ok(own_delta(&labels, &n, t)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `A_{k⃗} = Π a(k_j)` at odd positions and `conj(a(k_j))` at even ones.
pub fn amplitude_weight(profile: &Profile, a: &LabelAssignment) -> Complex64 {
    // real profiles: conjugation is the identity
    Complex64::new(a.k_vec.iter().map(|&m| profile.at_mode(m, a.lattice_size)).product(), 0.0)
}

/// Single-mode slice of `g_{k⃗} = ◇_j g_{k_j,(−1)^{j+1}}`.
pub fn gaussian_word_slice(k: &[i64], idx: &ComplexGaussianIndexing) -> Slice<Complex64> {
    let mut acc: Slice<Complex64> = vec![(crate::chaos::MultiIndex::zero(), Complex64::new(1.0, 0.0))];
    for (j, &m) in k.iter().enumerate() {
        acc = wick_slices(&acc, &idx.gaussian_slice(m, j % 2 == 1));
    }
    acc
}

/// `g_{k⃗}` as an expansion placed at the root momentum.
pub fn gaussian_word(a: &LabelAssignment, idx: &ComplexGaussianIndexing) -> ChaosExpansion<Complex64> {
    let root: i64 = a.k_vec.iter().enumerate().map(|(j, &x)| if j % 2 == 0 { x } else { -x }).sum();
    ChaosExpansion::from_slice(a.lattice_size, root, gaussian_word_slice(&a.k_vec, idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{pair_expectation, pair_expectation_slices};
    use crate::lattice::permutations;

    pub(crate) fn t2() -> QuinticTree {
        QuinticTree::with_child_at(1, QuinticTree::one_node())
    }

    /// Four nodes: 0, (1,0), (1,4,0), (5,0).
    pub(crate) fn t4() -> QuinticTree {
        QuinticTree::four_node_example()
    }

    fn binom(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn fuss_catalan_counts() {
        for n in 0..=4usize {
            let trees = enumerate_trees(n).unwrap();
            let expect = binom(5 * n as u64, n as u64) / (4 * n as u64 + 1);
            assert_eq!(trees.len() as u64, expect, "n = {n}");
            assert!(trees.windows(2).all(|w| w[0] < w[1]));
            for t in &trees {
                assert_eq!(t.leaf_count(), 4 * n + 1);
                assert_eq!(t.node_count(), n);
                assert_eq!(t.node_addresses().len(), n);
            }
        }
        assert_eq!(enumerate_trees(2).unwrap().len(), 5);
        assert_eq!(enumerate_trees(3).unwrap().len(), 35);
        assert!(matches!(enumerate_trees(5), Err(Error::Resource(_))));
        assert_eq!(enumerate_trees_capped(5, 5).unwrap().len(), 2530);
    }

    #[test]
    fn rendering_roundtrip() {
        assert_eq!(t2().render(), "((⊥,⊥,⊥,⊥,⊥),⊥,⊥,⊥,⊥)");
        for t in enumerate_trees(3).unwrap() {
            assert_eq!(QuinticTree::parse(&t.render()).unwrap(), t);
        }
        assert_eq!(QuinticTree::parse("(_,_,_,_,_)").unwrap(), QuinticTree::one_node());
        assert!(QuinticTree::parse("(⊥,⊥)").is_err());
        assert_eq!(NodeAddress::node(&[1, 4]).to_string(), "(1,4,0)");
        assert_eq!(NodeAddress::root().to_string(), "0");
    }

    #[test]
    fn sign_exponents() {
        assert_eq!(QuinticTree::Leaf.sign_exponent(), 0);
        assert_eq!(QuinticTree::one_node().sign_exponent(), 1);
        assert_eq!(QuinticTree::with_child_at(2, QuinticTree::one_node()).sign_exponent(), 0);
        assert_eq!(QuinticTree::with_child_at(1, QuinticTree::one_node()).sign_exponent(), 2);
    }

    #[test]
    fn worked_order_examples() {
        let t = t4();
        let root = NodeAddress::root();
        let a10 = NodeAddress::node(&[1]);
        let a140 = NodeAddress::node(&[1, 4]);
        let a50 = NodeAddress::node(&[5]);
        assert_eq!(node_order(&t, &a140, &a10).unwrap(), NodeRelation::Less);
        assert_eq!(node_order(&t, &a10, &root).unwrap(), NodeRelation::Less);
        assert_eq!(node_order(&t, &a50, &root).unwrap(), NodeRelation::Less);
        assert_eq!(node_order(&t, &a140, &a50).unwrap(), NodeRelation::Incomparable);
        assert_eq!(node_order(&t, &a10, &a50).unwrap(), NodeRelation::Incomparable);
        assert_eq!(node_order(&t, &root, &a140).unwrap(), NodeRelation::Greater);
        assert_eq!(node_order(&t, &a50, &a50).unwrap(), NodeRelation::Equal);
        assert!(node_order(&t, &NodeAddress::node(&[2]), &root).is_err());
        for n in t.node_addresses() {
            assert_ne!(node_order(&t, &n, &root).unwrap(), NodeRelation::Greater);
        }
    }

    fn brute_extensions(t: &QuinticTree) -> Vec<Vec<NodeAddress>> {
        let nodes = t.node_addresses();
        permutations(nodes.len())
            .into_iter()
            .map(|p| p.into_iter().map(|i| nodes[i].clone()).collect::<Vec<_>>())
            .filter(|seq| {
                seq.iter().enumerate().all(|(i, a)| {
                    seq.iter().enumerate().all(|(j, b)| relation(&a.path, &b.path) != NodeRelation::Less || i <= j)
                })
            })
            .collect()
    }

    #[test]
    fn linear_extension_counts() {
        assert_eq!(linear_extensions(&QuinticTree::one_node()).unwrap().len(), 1);
        let e = linear_extensions(&t2()).unwrap();
        assert_eq!(e, vec![vec![NodeAddress::node(&[1]), NodeAddress::root()]]);
        assert_eq!(linear_extensions(&t4()).unwrap().len(), 3);
        assert_eq!(brute_extensions(&t4()).len(), 3);
    }

    #[test]
    fn extensions_match_brute_force_up_to_four_nodes() {
        for n in 0..=4 {
            for t in enumerate_trees(n).unwrap() {
                let mut a = linear_extensions(&t).unwrap();
                let mut b = brute_extensions(&t);
                a.sort();
                b.sort();
                assert_eq!(a, b, "{t}");
            }
        }
    }

    #[test]
    fn label_examples() {
        let one = QuinticTree::one_node();
        let a = LabelAssignment::new(vec![2, 1, 1, 0, 1], 1);
        let labels = momentum_labels(&one, &a).unwrap();
        assert_eq!(labels[&NodeAddress::root()], 2 - 1 + 1 - 0 + 1);
        assert_eq!(labels[&NodeAddress::leaf(&[3])], 1);
        let om = omega_labels(&one, &a).unwrap();
        assert_eq!(om[&NodeAddress::root()], 9 - 4 + 1 - 1 + 0 - 1);

        let l0 = momentum_labels(&QuinticTree::Leaf, &LabelAssignment::new(vec![7], 3)).unwrap();
        assert_eq!(l0[&NodeAddress::leaf(&[])], 7);
        assert!(momentum_labels(&one, &LabelAssignment::new(vec![1, 2], 1)).is_err());

        // t2: node (1,0) gets j1 - j2 + j3 - j4 + j5
        let j = [3, -1, 4, 1, -5];
        let rest = [2, 6, -2, 0];
        let kv: Vec<i64> = j.iter().chain(rest.iter()).copied().collect();
        let a2 = LabelAssignment::new(kv, 1);
        let labels = momentum_labels(&t2(), &a2).unwrap();
        let k1 = j[0] - j[1] + j[2] - j[3] + j[4];
        assert_eq!(labels[&NodeAddress::node(&[1])], k1);
        let k = k1 - rest[0] + rest[1] - rest[2] + rest[3];
        assert_eq!(labels[&NodeAddress::root()], k);
        let om = omega_labels(&t2(), &a2).unwrap();
        let delta1 = k * k - k1 * k1 + rest[0].pow(2) - rest[1].pow(2) + rest[2].pow(2) - rest[3].pow(2);
        let delta2 = k1 * k1 - j[0].pow(2) + j[1].pow(2) - j[2].pow(2) + j[3].pow(2) - j[4].pow(2);
        assert_eq!(om[&NodeAddress::root()], delta1);
        assert_eq!(om[&NodeAddress::node(&[1])], delta2);
    }

    #[test]
    fn even_slot_flips_omega() {
        // the inner node sees the same five leaf labels in both placements
        let a1 = LabelAssignment::new(vec![3, -1, 4, 1, -5, 2, 6, -2, 0], 1);
        let a2 = LabelAssignment::new(vec![2, 3, -1, 4, 1, -5, 6, -2, 0], 1);
        let odd = omega_labels(&QuinticTree::with_child_at(1, QuinticTree::one_node()), &a1).unwrap();
        let even = omega_labels(&QuinticTree::with_child_at(2, QuinticTree::one_node()), &a2).unwrap();
        assert_eq!(odd[&NodeAddress::node(&[1])], -even[&NodeAddress::node(&[2])]);
    }

    #[test]
    fn admissibility_examples() {
        let one = QuinticTree::one_node();
        assert!(admissible(&one, &LabelAssignment::new(vec![2, 1, 1, 0, 1], 1), 3, 1.0, 1.0).unwrap());
        assert!(!admissible(&one, &LabelAssignment::new(vec![1, 0, 0, 0, 0], 1), 1, 1.0, 1.0).unwrap());
        let leaf = QuinticTree::Leaf;
        assert!(admissible(&leaf, &LabelAssignment::new(vec![4], 2), 4, 1.0, 1.0).unwrap());
        assert!(!admissible(&leaf, &LabelAssignment::new(vec![4], 2), 3, 1.0, 1.0).unwrap());
    }

    #[test]
    fn amplitude_and_words() {
        let prof = Profile::poly_bump(1.0);
        let a = LabelAssignment::new(vec![0, 1, -1, 0, 5], 4);
        assert_eq!(amplitude_weight(&prof, &a), Complex64::new(0.0, 0.0));
        let a0 = LabelAssignment::new(vec![1], 4);
        assert_eq!(amplitude_weight(&prof, &a0).re, prof.eval(0.25));

        let idx = ComplexGaussianIndexing;
        let g = gaussian_word(&a0, &idx);
        assert_eq!(g, idx.gaussian(4, 1, false, 1));
        let distinct = LabelAssignment::new(vec![0, 1, 2, 3, 4], 4);
        let w = gaussian_word(&distinct, &idx);
        assert_eq!(w.degrees().into_iter().collect::<Vec<_>>(), vec![5]);
        let e = pair_expectation(&w, &w, 2, 2);
        assert!((e.re - 1.0).abs() < 1e-13 && e.im.abs() < 1e-13);
        // repeated momentum, paired against a parity-breaking transposition of slots 1 and 2
        let rep = [1, 2, 1, 3, 4];
        let swapped = [2, 1, 1, 3, 4];
        let e = pair_expectation_slices(&gaussian_word_slice(&rep, &idx), &gaussian_word_slice(&swapped, &idx));
        assert!(e.norm() < 1e-13);
        let e = pair_expectation_slices(&gaussian_word_slice(&rep, &idx), &gaussian_word_slice(&rep, &idx));
        assert!((e.re - 2.0).abs() < 1e-13);
    }
}
