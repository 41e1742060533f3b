//! Globally adaptive Genz–Malik cubature (degree-7 rule with an embedded
//! degree-5 rule) on unions of axis-aligned boxes.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::numerics::{Estimate, Neumaier};

#[derive(Debug, Clone, Copy)]
pub struct CubatureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for CubatureOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-6, max_evals: 20_000_000 }
    }
}

struct Rule {
    dim: usize,
    l2: f64,
    l4: f64,
    l5: f64,
    w: [f64; 5],
    wp: [f64; 4],
}

impl Rule {
    fn new(dim: usize) -> Self {
        let d = dim as f64;
        Rule {
            dim,
            l2: (9.0f64 / 70.0).sqrt(),
            l4: (9.0f64 / 10.0).sqrt(),
            l5: (9.0f64 / 19.0).sqrt(),
            w: [
                (12824.0 - 9120.0 * d + 400.0 * d * d) / 19683.0,
                980.0 / 6561.0,
                (1820.0 - 400.0 * d) / 19683.0,
                200.0 / 19683.0,
                6859.0 / 19683.0 / 2f64.powi(dim as i32),
            ],
            wp: [
                (729.0 - 950.0 * d + 50.0 * d * d) / 729.0,
                245.0 / 486.0,
                (265.0 - 100.0 * d) / 1458.0,
                25.0 / 729.0,
            ],
        }
    }

    fn points(&self) -> usize {
        let d = self.dim;
        1 + 4 * d + 2 * d * (d - 1) + (1 << d)
    }

    /// Returns (degree-7 value, degree-5 value, axis with largest fourth difference).
    fn apply<F: FnMut(&[f64]) -> f64>(&self, f: &mut F, c: &[f64], h: &[f64]) -> (f64, f64, usize) {
        let d = self.dim;
        let mut x = c.to_vec();
        let f0 = f(&x);
        let (mut s2, mut s3, mut s4, mut s5) = (0.0, 0.0, 0.0, 0.0);
        let ratio = (self.l2 * self.l2) / (self.l4 * self.l4);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in 0..d {
            x[i] = c[i] - self.l2 * h[i];
            let a = f(&x);
            x[i] = c[i] + self.l2 * h[i];
            let b = f(&x);
            x[i] = c[i] - self.l4 * h[i];
            let p = f(&x);
            x[i] = c[i] + self.l4 * h[i];
            let q = f(&x);
            x[i] = c[i];
            s2 += a + b;
            s3 += p + q;
            let diff = ((a + b - 2.0 * f0) - ratio * (p + q - 2.0 * f0)).abs();
            if diff > best.0 {
                best = (diff, i);
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                for (si, sj) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    x[i] = c[i] + si * self.l4 * h[i];
                    x[j] = c[j] + sj * self.l4 * h[j];
                    s4 += f(&x);
                }
                x[i] = c[i];
                x[j] = c[j];
            }
        }
        for mask in 0..(1usize << d) {
            for i in 0..d {
                let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                x[i] = c[i] + s * self.l5 * h[i];
            }
            s5 += f(&x);
        }
        let vol: f64 = h.iter().map(|hi| 2.0 * hi).product();
        let i7 = vol * (self.w[0] * f0 + self.w[1] * s2 + self.w[2] * s3 + self.w[3] * s4 + self.w[4] * s5);
        let i5 = vol * (self.wp[0] * f0 + self.wp[1] * s2 + self.wp[2] * s3 + self.wp[3] * s4);
        (i7, i5, best.1)
    }
}

struct Region {
    c: Vec<f64>,
    h: Vec<f64>,
    value: f64,
    err: f64,
    axis: usize,
    id: usize,
}

impl PartialEq for Region {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err && self.id == o.id
    }
}
impl Eq for Region {}
impl PartialOrd for Region {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Region {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err).then(o.id.cmp(&self.id))
    }
}

/// Integrates `f` over the union of the boxes `[lo, hi]` (which must not
/// overlap). Splitting the domain up front at known discontinuities is the
/// caller's way to make the integrand piecewise smooth.
pub fn genz_malik<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    boxes: &[(Vec<f64>, Vec<f64>)],
    opts: CubatureOptions,
) -> Result<Estimate> {
    let dim = boxes.first().map(|b| b.0.len()).unwrap_or(0);
    if dim < 2 {
        return Err(Error::domain("genz_malik needs dimension >= 2"));
    }
    let rule = Rule::new(dim);
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut next_id = 0usize;
    let mut push = |heap: &mut BinaryHeap<Region>, c: Vec<f64>, h: Vec<f64>, f: &mut F, evals: &mut usize| {
        let (i7, i5, axis) = rule.apply(f, &c, &h);
        *evals += rule.points();
        let err = (i7 - i5).abs();
        heap.push(Region { c, h, value: i7, err, axis, id: next_id });
        next_id += 1;
        (i7, err)
    };
    for (lo, hi) in boxes {
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::domain("box dimension mismatch"));
        }
        if lo.iter().zip(hi).any(|(a, b)| b <= a) {
            continue;
        }
        let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let h: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        push(&mut heap, c, h, &mut f, &mut evals);
    }
    // running totals are only used for the stopping test; the returned value
    // is re-summed in creation order.
    let mut total: f64 = heap.iter().map(|r| r.value).sum();
    let mut err: f64 = heap.iter().map(|r| r.err).sum();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= tol || heap.is_empty() {
            break;
        }
        if evals >= opts.max_evals {
            let est = canonical(&heap);
            return Err(Error::Numerical {
                message: format!("cubature budget of {} evaluations exhausted", opts.max_evals),
                partial: est.value,
                error: est.error,
            });
        }
        let r = heap.pop().unwrap();
        total -= r.value;
        err -= r.err;
        let mut h = r.h.clone();
        h[r.axis] *= 0.5;
        for s in [-1.0, 1.0] {
            let mut c = r.c.clone();
            c[r.axis] += s * h[r.axis];
            let (v, e) = push(&mut heap, c, h.clone(), &mut f, &mut evals);
            total += v;
            err += e;
        }
    }
    Ok(canonical(&heap))
}

fn canonical(heap: &BinaryHeap<Region>) -> Estimate {
    let mut items: Vec<&Region> = heap.iter().collect();
    items.sort_by_key(|r| r.id);
    let mut v = Neumaier::new();
    let mut e = Neumaier::new();
    for r in items {
        v.add(r.value);
        e.add(r.err);
    }
    Estimate::new(v.value(), e.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_in_three_dimensions() {
        let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
        let b = vec![(vec![-1.0; 3], vec![1.0; 3])];
        let r = genz_malik(f, &b, CubatureOptions { rel_tol: 1e-9, ..Default::default() }).unwrap();
        let one_d = std::f64::consts::PI.sqrt() * 0.8427007929497149;
        assert!((r.value - one_d.powi(3)).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn polynomial_degree_seven_is_exact() {
        let f = |x: &[f64]| x[0].powi(4) * x[1].powi(2) + x[0] * x[1] + 1.0;
        let b = vec![(vec![0.0, 0.0], vec![1.0, 2.0])];
        let r = genz_malik(f, &b, CubatureOptions::default()).unwrap();
        let exact = (1.0 / 5.0) * (8.0 / 3.0) + 0.5 * 2.0 + 2.0;
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn budget_failure_reports_partial_value() {
        let f = |x: &[f64]| 1.0 / (x[0] * x[0] + x[1] * x[1]).sqrt().max(1e-300).sqrt();
        let b = vec![(vec![0.0, 0.0], vec![1.0, 1.0])];
        let opts = CubatureOptions { abs_tol: 0.0, rel_tol: 1e-14, max_evals: 2000 };
        match genz_malik(f, &b, opts) {
            Err(Error::Numerical { partial, .. }) => assert!(partial > 0.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
