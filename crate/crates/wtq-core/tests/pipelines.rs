//! End-to-end checks that go through several modules at once.

use wtq::kinetic::{i_eps_sum, i_eps_sum_by_sigma, i_l_pairing, i_l_pairing_by_k, EpsilonRegime};
use wtq::lattice::{parity_permutations, Profile, RegimeParams};
use wtq::picard::{mass_derivative_n1, mass_poly, monte_carlo_mass, pairing_total};
use wtq::trees::{enumerate_trees, linear_extensions};
use wtq::Ratio;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn pairing_total_is_the_time_derivative_of_the_mass() {
    let p = RegimeParams::new(2, 4.0, 4.0);
    let prof = Profile::poly_bump(1.0);
    for n in [1, 2] {
        let m = mass_poly(n, 0, &p, &prof).unwrap();
        for t in [0.5, 1.5] {
            let h = 1e-4;
            let fd = (m.eval(t + h).re - m.eval(t - h).re) / (2.0 * h);
            let tot = pairing_total(n, 0, t, &p, &prof).unwrap();
            assert!(rel(tot.value, fd) < 1e-6, "n={n} t={t}: {} vs {fd}", tot.value);
        }
    }
    let exact = mass_derivative_n1(1, 0.75, &p, &prof, true).unwrap();
    assert!(rel(pairing_total(1, 1, 0.75, &p, &prof).unwrap().value, exact) < 1e-12);
}

#[test]
fn monte_carlo_mass_agrees_with_exact() {
    let p = RegimeParams::new(2, 4.0, 4.0);
    let prof = Profile::poly_bump(1.0);
    let exact = mass_poly(1, 0, &p, &prof).unwrap().eval(1.0).re;
    let (mc, se) = monte_carlo_mass(1, 0, 1.0, &p, &prof, 50_000, 9).unwrap();
    assert!((mc - exact).abs() < 5.0 * se, "{mc} ± {se} vs {exact}");
}

#[test]
fn lattice_pairing_two_ways() {
    let (a, f) = (Profile::poly_bump(0.5), Profile::poly_bump(1.0));
    for (l, t) in [(8u32, Ratio::new(1, 2)), (8, Ratio::new(1, 3)), (12, Ratio::new(3, 4))] {
        let regime = EpsilonRegime::new(l, 8.0, true).unwrap();
        let params = RegimeParams::new(l, 8.0, (l * l) as f64).with_rho(8.0);
        let direct = i_l_pairing(t, &regime, &params, &a, &f, &f).unwrap();
        let by_k = i_l_pairing_by_k(t, &regime, &params, &a, &f, &f).unwrap();
        assert!(rel(direct, by_k) < 1e-10, "L={l} t={t}: {direct} vs {by_k}");
    }
}

#[test]
fn parity_weight_is_the_sum_over_parity_permutations() {
    let a = Profile::poly_bump(0.5);
    let l = 8;
    let regime = EpsilonRegime::new(l, 8.0, true).unwrap();
    let params = RegimeParams::new(l, 8.0, 64.0).with_rho(8.0);
    let sigmas = parity_permutations();
    for k in [0, 1, 3] {
        let t = Ratio::new(1, 2);
        let whole = i_eps_sum(k, t, &regime, &params, &a).unwrap();
        let split = i_eps_sum_by_sigma(k, t, &regime, &params, &a, &sigmas).unwrap();
        assert!(rel(whole, split) < 1e-12 || (whole - split).abs() < 1e-300, "k={k}: {whole} vs {split}");
    }
}

#[test]
fn extensions_over_all_small_trees() {
    // Σ_T |𝔖_T| / |T|! over trees of order n equals the number of increasing
    // 5-ary trees divided by n!, i.e. Π_{j<n} (4j + 1) / n!
    for n in 1..=4usize {
        let total: usize = enumerate_trees(n).unwrap().iter().map(|t| linear_extensions(t).unwrap().len()).sum();
        let expect: usize = (0..n).map(|j| 4 * j + 1).product();
        assert_eq!(total, expect, "n = {n}");
    }
}
