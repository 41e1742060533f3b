use num_complex::Complex64;
use rayon::prelude::*;

/// Neumaier (improved Kahan) compensated accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn merge(mut self, other: Neumaier) -> Neumaier {
        self.add(other.sum);
        self.add(other.comp);
        self
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Complex compensated accumulator (componentwise Neumaier).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierC {
    re: Neumaier,
    im: Neumaier,
}

impl NeumaierC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    pub fn merge(self, other: NeumaierC) -> NeumaierC {
        NeumaierC { re: self.re.merge(other.re), im: self.im.merge(other.im) }
    }
}

/// Deterministic parallel map-reduce over `n_chunks` work items.
///
/// Chunk results are collected in index order and folded with a fixed
/// balanced binary tree, so the result is bitwise independent of the number
/// of rayon workers.
pub fn det_reduce<T, F, M>(n_chunks: usize, identity: T, f: F, merge: M) -> T
where
    T: Send + Clone,
    F: Fn(usize) -> T + Sync + Send,
    M: Fn(T, T) -> T + Sync,
{
    let parts: Vec<T> = (0..n_chunks).into_par_iter().map(&f).collect();
    tree_fold(parts, identity, &merge)
}

fn tree_fold<T: Clone, M: Fn(T, T) -> T>(mut parts: Vec<T>, identity: T, merge: &M) -> T {
    if parts.is_empty() {
        return identity;
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap()
}
