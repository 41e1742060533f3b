use num_complex::Complex64;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::numerics::{Estimate, NeumaierC};

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = if n == 1 { 2.0 } else { 2.0 / ((1.0 - z * z) * dp * dp) };
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Options for adaptive Gauss–Kronrod integration.
#[derive(Debug, Clone, Copy)]
pub struct GkOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for GkOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 2000 }
    }
}

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += s * WGK[j];
        if j % 2 == 1 {
            resg += s * WG[j / 2];
        }
    }
    let k = resk * h;
    let g = resg * h;
    (k, (k - g).norm())
}

struct Interval {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    id: usize,
}

impl PartialEq for Interval {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err && self.id == o.id
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Interval {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err).then(o.id.cmp(&self.id))
    }
}

/// Globally adaptive G7/K15 integration of a complex integrand over [a, b],
/// with optional interior breakpoints (known kinks or discontinuities).
pub fn gauss_kronrod_c<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: GkOptions,
) -> Result<(Complex64, f64)> {
    if a == b {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > lo && p < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(hi);

    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    for w in pts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        heap.push(Interval { a: w[0], b: w[1], value: v, err: e, id: next_id });
        next_id += 1;
    }
    loop {
        let (total, err) = totals(&heap);
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if err <= tol {
            return Ok((total * sign, err));
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Numerical {
                message: format!("Gauss-Kronrod did not converge within {} intervals", opts.max_intervals),
                partial: total.re * sign,
                error: err,
            });
        }
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // Interval cannot be split further in floating point; accept it.
            let (total, err) = totals(&heap);
            return Ok(((total + worst.value) * sign, err + worst.err));
        }
        for (x0, x1) in [(worst.a, m), (m, worst.b)] {
            let (v, e) = gk15(&mut f, x0, x1);
            heap.push(Interval { a: x0, b: x1, value: v, err: e, id: next_id });
            next_id += 1;
        }
    }
}

fn totals(heap: &BinaryHeap<Interval>) -> (Complex64, f64) {
    // Canonical order (by creation id) so the sum does not depend on heap layout.
    let mut items: Vec<&Interval> = heap.iter().collect();
    items.sort_by_key(|i| i.id);
    let mut acc = NeumaierC::new();
    let mut err = 0.0;
    for i in items {
        acc.add(i.value);
        err += i.err;
    }
    (acc.value(), err)
}

/// Real-valued adaptive Gauss–Kronrod integration.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: GkOptions,
) -> Result<Estimate> {
    let (v, e) = gauss_kronrod_c(|x| Complex64::new(f(x), 0.0), a, b, breakpoints, opts)?;
    Ok(Estimate::new(v.re, e))
}
