//! Subcommand bodies. Each returns a [`Report`]; nothing here touches disk.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde_json::json;
use wtq::kinetic::{
    continuum_delta_gap, continuum_integral, delta_reduced, delta_reduced_at_cutoff, i_l_pairing, regime_check,
    residue_count, sinc_mass_identity, third_case_coefficients, EpsilonRegime, PermutationModel, QuadConfig,
    RegimeExponents,
};
use wtq::lattice::{Profile, RegimeParams};
use wtq::oscillatory::{case_instances, classify_leading, fit_leading_power, g_m, g_m_oracle, g_m_poly};
use wtq::picard::{mass_derivative_n1_parts, mass_poly, monte_carlo_mass, picard_recursion, relative_deviation, tree_sum};
use wtq::trees::{enumerate_trees_capped, linear_extensions_capped};
use wtq::{Error, Freq};

use crate::config::ExperimentConfig;
use crate::output::{num, Report, Table};
use crate::{CliError, GlobalOpts};

fn fuss_catalan(n: u64) -> u64 {
    // binom(5n, n) / (4n + 1)
    let mut b: u128 = 1;
    for i in 0..n as u128 {
        b = b * (5 * n as u128 - i) / (i + 1);
    }
    (b / (4 * n as u128 + 1)) as u64
}

pub fn trees(n: Option<usize>, cfg: &ExperimentConfig, opts: &GlobalOpts) -> Result<Report, CliError> {
    let n = n.or_else(|| cfg.orders.as_ref().and_then(|v| v.first().copied())).unwrap_or(3);
    let ts = enumerate_trees_capped(n, opts.cap_trees)?;
    let mut tab = Table::new("trees", &["index", "tree", "nodes", "leaves", "sign_exponent", "linear_extensions"]);
    let mut total_ext = 0usize;
    for (i, t) in ts.iter().enumerate() {
        let ext = linear_extensions_capped(t, opts.cap_trees)?.len();
        total_ext += ext;
        tab.push(vec![
            i.to_string(),
            t.to_string(),
            t.node_count().to_string(),
            t.leaf_count().to_string(),
            t.sign_exponent().to_string(),
            ext.to_string(),
        ]);
    }
    let summary = json!({
        "n": n,
        "count": ts.len(),
        "fuss_catalan": fuss_catalan(n as u64),
        "linear_extensions_total": total_ext,
    });
    Ok(Report { tables: vec![tab], documents: vec![], summary })
}

fn fmt_freqs(ws: &[Freq]) -> String {
    ws.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn gm(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let instances: Vec<Vec<Freq>> = match &cfg.frequencies {
        Some(v) => v.iter().map(|ws| ws.iter().map(|w| w.parse()).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?,
        None => case_instances().into_iter().map(|(_, ws)| ws).collect(),
    };
    let times = cfg.times_or(&[(1, 2), (1, 1), (2, 1), (5, 1)])?;
    let mut tab = Table::new(
        "gm",
        &["instance", "omegas", "kind", "predicted_power", "fitted_power", "modulus_ok", "t", "re", "im", "oracle_abs_diff"],
    );
    let mut worst = 0.0f64;
    for (i, ws) in instances.iter().enumerate() {
        if ws.iter().any(|w| *w == Freq::from_integer(0)) {
            return Err(Error::domain(format!("instance {i}: frequencies must be nonzero")).into());
        }
        let tag = classify_leading(ws);
        let fitted = fit_leading_power(ws, 1e2, 1e4, 25)?;
        let modulus = match tag.modulus_matches(&g_m_poly(ws), 1e-6) {
            Some(b) => b.to_string(),
            None => String::new(),
        };
        for t in &times {
            let tf = *t.numer() as f64 / *t.denom() as f64;
            let v = g_m(ws, tf);
            let diff = if ws.len() <= 5 {
                let o = g_m_oracle(ws, tf, 1e-11)?;
                let d = (o - v).norm();
                worst = worst.max(d);
                num(d)
            } else {
                String::new()
            };
            tab.push(vec![
                i.to_string(),
                fmt_freqs(ws),
                format!("{:?}", tag.kind),
                tag.power.to_string(),
                format!("{fitted:.4}"),
                modulus.clone(),
                t.to_string(),
                num(v.re),
                num(v.im),
                diff,
            ]);
        }
    }
    Ok(Report { tables: vec![tab], documents: vec![], summary: json!({ "instances": instances.len(), "max_oracle_abs_diff": worst }) })
}

fn small_params(cfg: &ExperimentConfig) -> (RegimeParams, Profile) {
    (cfg.params.unwrap_or_else(|| RegimeParams::new(2, 4.0, 4.0)), cfg.profile.unwrap_or_else(|| Profile::poly_bump(1.0)))
}

fn check_lattice(work: f64, opts: &GlobalOpts, what: &str) -> Result<(), CliError> {
    if work > opts.cap_lattice as f64 {
        return Err(Error::resource(format!("{what} would visit ~{work:.3e} tuples, above --cap-lattice {}", opts.cap_lattice)).into());
    }
    Ok(())
}

pub fn picard(cfg: &ExperimentConfig, opts: &GlobalOpts) -> Result<Report, CliError> {
    let (params, profile) = small_params(cfg);
    let orders = cfg.orders.clone().unwrap_or_else(|| vec![1, 2]);
    let times: Vec<f64> = cfg.times_or(&[(1, 2), (1, 1)])?.iter().map(|t| *t.numer() as f64 / *t.denom() as f64).collect();
    let w = profile.window(params.lattice_size).len() as f64;
    let mut tab = Table::new("picard", &["n", "k", "t", "coefficients", "max_rel_dev"]);
    let mut worst = 0.0f64;
    for &n in &orders {
        check_lattice(w.powi(4 * n as i32), opts, "the tree sum")?;
        let state = picard_recursion(n, &params, &profile)?;
        let modes: Vec<i64> = cfg.modes.clone().unwrap_or_else(|| state.modes().into_iter().collect());
        for &k in &modes {
            let a = tree_sum(n, k, &params, &profile)?;
            let b: BTreeMap<_, _> = state.slice(k).into_iter().collect();
            for &t in &times {
                let d = relative_deviation(&a, &b, t);
                worst = worst.max(d);
                tab.push(vec![n.to_string(), k.to_string(), num(t), b.len().to_string(), num(d)]);
            }
        }
    }
    Ok(Report { tables: vec![tab], documents: vec![], summary: json!({ "max_rel_dev": worst }) })
}

pub fn mass(cfg: &ExperimentConfig, opts: &GlobalOpts) -> Result<Report, CliError> {
    let base = cfg.params.unwrap_or_else(|| RegimeParams::new(8, 4.0, 4.0));
    let profile = cfg.profile.unwrap_or_else(|| Profile::poly_bump(1.0));
    let sizes = cfg.lattice_sizes.clone().unwrap_or_else(|| vec![base.lattice_size]);
    let modes = cfg.modes.clone().unwrap_or_else(|| vec![0]);
    let times: Vec<f64> = cfg.times_or(&[(1, 1)])?.iter().map(|t| *t.numer() as f64 / *t.denom() as f64).collect();
    let samples = cfg.samples.unwrap_or(0);
    let seed = opts.seed.or(cfg.seed).unwrap_or(0);
    let mut tab = Table::new(
        "mass",
        &[
            "lattice_size", "k", "t", "exact", "main", "remainder", "literal_remainder", "finite_difference", "mc_mass",
            "mc_stderr", "exact_mass",
        ],
    );
    for &l in &sizes {
        let params = RegimeParams { lattice_size: l, ..base };
        let w = profile.window(l).len() as f64;
        check_lattice(12.0 * w.powi(4), opts, "the n = 1 mass derivative")?;
        for &k in &modes {
            let m = mass_poly(1, k, &params, &profile)?;
            for &t in &times {
                let parts = mass_derivative_n1_parts(k, t, &params, &profile)?;
                let h = 1e-3 * t.max(1.0);
                let fd = (m.eval(t + h).re - m.eval(t - h).re) / (2.0 * h);
                let (mc, se) = if samples > 0 {
                    let (a, b) = monte_carlo_mass(1, k, t, &params, &profile, samples, seed)?;
                    (num(a), num(b))
                } else {
                    (String::new(), String::new())
                };
                tab.push(vec![
                    l.to_string(),
                    k.to_string(),
                    num(t),
                    num(parts.exact),
                    num(parts.main),
                    num(parts.remainder),
                    num(parts.literal_remainder),
                    num(fd),
                    mc,
                    se,
                    num(m.eval(t).re),
                ]);
            }
        }
    }
    Ok(Report { tables: vec![tab], documents: vec![], summary: json!({ "rows": sizes.len() * modes.len() * times.len(), "seed": seed }) })
}

/// Profiles used by the kinetic studies unless the config overrides them.
pub fn kinetic_profiles(cfg: &ExperimentConfig) -> (Profile, Profile, Profile) {
    (
        cfg.profile.unwrap_or_else(|| Profile::poly_bump(0.5)),
        cfg.test_f.unwrap_or_else(|| Profile::poly_bump(1.0)),
        cfg.test_g.unwrap_or_else(|| Profile::poly_bump(1.0)),
    )
}

fn ratio_f64(t: &Ratio<i64>) -> f64 {
    *t.numer() as f64 / *t.denom() as f64
}

pub fn kinetic_sum(cfg: &ExperimentConfig, opts: &GlobalOpts) -> Result<Report, CliError> {
    let (a, f, g) = kinetic_profiles(cfg);
    let rho = cfg.rho.unwrap_or(8.0);
    let mu = cfg.mu.unwrap_or(8.0);
    let sizes = cfg.lattice_sizes.clone().unwrap_or_else(|| vec![16, 32]);
    let times = cfg.times_or(&[(1, 2)])?;
    let exact = cfg.exact_phase_mode.unwrap_or(true);
    let quad = cfg.quad.unwrap_or(QuadConfig { model: PermutationModel::PerPermutation, ..QuadConfig::default() });
    let mut tab = Table::new(
        "kinetic_sum",
        &["lattice_size", "t", "rho", "mu", "value", "continuum", "continuum_error", "abs_gap", "rel_gap"],
    );
    for t in &times {
        let tf = ratio_f64(t);
        let cont = match continuum_integral(tf, rho, mu, &a, &f, &g, &quad) {
            // keep the table usable; the estimate carries its own error
            Err(Error::Numerical { partial, error, .. }) => wtq::numerics::Estimate::new(partial, error),
            other => other?,
        };
        for &l in &sizes {
            let w = a.window(l).len() as f64;
            check_lattice(w.powi(5), opts, "the lattice pairing")?;
            let regime = EpsilonRegime::new(l, rho, exact)?;
            // ν = L² removes exactly the d = 0 tuples
            let params = RegimeParams::new(l, mu, (l as f64).powi(2)).with_rho(rho);
            let v = i_l_pairing(*t, &regime, &params, &a, &f, &g)?;
            let gap = (v - cont.value).abs();
            tab.push(vec![
                l.to_string(),
                t.to_string(),
                num(rho),
                num(mu),
                num(v),
                num(cont.value),
                num(cont.error),
                num(gap),
                num(gap / cont.value.abs()),
            ]);
        }
    }
    Ok(Report { tables: vec![tab], documents: vec![], summary: json!({ "exact_phase_mode": exact }) })
}

pub fn kinetic_limit(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (a, f, g) = kinetic_profiles(cfg);
    let mu = cfg.mu.unwrap_or(8.0);
    let rhos = cfg.rhos.clone().unwrap_or_else(|| vec![1e2, 1e3, 1e4]);
    let times = cfg.times_or(&[(1, 2)])?;
    let quad = cfg.quad.unwrap_or_default();
    let gap_quad = QuadConfig { rel_tol: 1e-2, abs_tol: 1e-14, ..quad };
    let settle = |r: wtq::Result<wtq::numerics::Estimate>| match r {
        Err(Error::Numerical { partial, error, .. }) => Ok(wtq::numerics::Estimate::new(partial, error)),
        other => other,
    };
    let delta = settle(delta_reduced_at_cutoff(mu, &a, &f, &g, &quad))?;
    let mut tab = Table::new(
        "kinetic_limit",
        &["rho", "t", "mu", "continuum", "continuum_error", "gap", "gap_error", "delta_reduced", "delta_reduced_error"],
    );
    for t in &times {
        let tf = ratio_f64(t);
        for &rho in &rhos {
            let c = settle(continuum_integral(tf, rho, mu, &a, &f, &g, &quad))?;
            let gap = settle(continuum_delta_gap(tf, rho, mu, &a, &f, &g, &gap_quad))?;
            tab.push(vec![
                num(rho),
                t.to_string(),
                num(mu),
                num(c.value),
                num(c.error),
                num(gap.value),
                num(gap.error),
                num(delta.value),
                num(delta.error),
            ]);
        }
    }
    let limit = delta_reduced(&a, &f, &g, &quad)?;
    let sinc = sinc_mass_identity()?;
    let summary = json!({
        "delta_reduced_at_mu": delta.value,
        "delta_reduced_mu_to_infinity": limit.value,
        "delta_reduced_mu_to_infinity_error": limit.error,
        "sinc_mass": sinc.value,
        "sinc_mass_minus_pi": sinc.value - std::f64::consts::PI,
    });
    Ok(Report { tables: vec![tab], documents: vec![], summary })
}

pub fn residues() -> Report {
    let (a, b, c) = residue_count();
    let mut tab = Table::new("residues", &["residue", "count"]);
    for (r, n) in [a, b, c].into_iter().enumerate() {
        tab.push(vec![r.to_string(), n.to_string()]);
    }
    Report { tables: vec![tab], documents: vec![], summary: json!({ "total": a + b + c }) }
}

pub fn default_exponents() -> RegimeExponents {
    RegimeExponents { alpha_nu: 0.4, beta_mu: 0.3, gamma_rho: 0.05, alpha: 0.2 }
}

pub fn regime(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let e = cfg.exponents.unwrap_or_else(default_exponents);
    let ls = cfg.l_samples.clone().unwrap_or_else(|| vec![1 << 10, 1 << 20, 1 << 30]);
    let rep = regime_check(e, &ls);
    let mut tab = Table::new("regime", &["condition", "symbolic", "pass", "numeric_trend_ok", "lattice_size", "ratio"]);
    for c in &rep.conditions {
        for &(l, r) in &c.samples {
            tab.push(vec![c.name.clone(), c.symbolic.clone(), c.pass.to_string(), c.numeric_trend_ok.to_string(), l.to_string(), num(r)]);
        }
    }
    let doc = serde_json::to_value(&rep).expect("report serialises");
    Ok(Report {
        tables: vec![tab],
        documents: vec![("regime".into(), doc)],
        summary: json!({ "all_pass": rep.all_pass, "ordered_exponents": rep.ordered_exponents }),
    })
}

pub fn discontinuity() -> Report {
    let c = third_case_coefficients();
    let mut tab = Table::new(
        "discontinuity",
        &["branch", "net_cosine_weight", "prelimit_coefficient", "limit_coefficient", "dyadic_over_branch"],
    );
    tab.push(vec!["dyadic".into(), num(243.0), num(c.dyadic_prelimit), num(c.dyadic_coefficient), num(1.0)]);
    tab.push(vec!["one_third".into(), num(c.net_b), num(c.third_prelimit), num(c.third_coefficient), num(c.ratio)]);
    Report { tables: vec![tab], documents: vec![], summary: json!({ "ratio": c.ratio, "net_b": c.net_b, "net_c": c.net_c }) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuss_catalan_numbers() {
        assert_eq!((0..5).map(fuss_catalan).collect::<Vec<_>>(), vec![1, 1, 5, 35, 285]);
    }
}
