use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

/// Sine integral Si(x) = ∫₀ˣ sin(s)/s ds.
pub fn sine_integral(x: f64) -> f64 {
    if x < 0.0 {
        return -sine_integral(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x <= 4.0 {
        // power series; terms decay quickly on this range
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0u32;
        loop {
            n += 1;
            let k = (2 * n) as f64;
            term *= -x2 / (k * (k + 1.0));
            let contrib = term / (k + 1.0);
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    // continued fraction for E1(ix) (modified Lentz); Si(x) = π/2 + Im E1(ix)
    let z = Complex64::new(0.0, x);
    let tiny = Complex64::new(1e-300, 0.0);
    let mut f = z + 1.0;
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for n in 1..10_000 {
        let a = -((n * n) as f64);
        let b = z + (2 * n + 1) as f64;
        d = b + d * a;
        if d.norm() == 0.0 {
            d = tiny;
        }
        d = d.inv();
        c = b + c.inv() * a;
        if c.norm() == 0.0 {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    let e1 = (-z).exp() / f;
    FRAC_PI_2 + e1.im
}
