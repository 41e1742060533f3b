//! Python bindings: profiles, regime parameters, trees, the oscillatory
//! engine, Picard/mass tables and the kinetic sums. Heavy results come back
//! as plain dicts (via JSON) so the Python side needs no extra classes.

use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use wtq::kinetic::{self, EpsilonRegime, PermutationModel, QuadConfig, RegimeExponents};
use wtq::lattice::{self, ProfileKind};
use wtq::{oscillatory, picard, trees, Complex64, Freq, Ratio};

fn to_py(e: wtq::Error) -> PyErr {
    match e {
        wtq::Error::Domain(m) => PyValueError::new_err(m),
        wtq::Error::Resource(m) => PyMemoryError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let loads = py.import("json")?.getattr("loads")?;
    Ok(loads.call1((v.to_string(),))?.unbind())
}

/// Accepts `int`, `fractions.Fraction`, or a string such as `"3/4"`.
fn rational(ob: &Bound<'_, PyAny>) -> PyResult<Ratio<i64>> {
    if let Ok(v) = ob.extract::<i64>() {
        return Ok(Ratio::from_integer(v));
    }
    if let Ok(s) = ob.extract::<String>() {
        let bad = || PyValueError::new_err(format!("cannot parse {s:?} as a rational"));
        return match s.split_once('/') {
            Some((a, b)) => {
                let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if b == 0 {
                    return Err(bad());
                }
                Ok(Ratio::new(a, b))
            }
            None => s.trim().parse().map(Ratio::from_integer).map_err(|_| bad()),
        };
    }
    let n: i64 = ob.getattr("numerator")?.extract()?;
    let d: i64 = ob.getattr("denominator")?.extract()?;
    Ok(Ratio::new(n, d))
}

fn freqs(obs: &[Bound<'_, PyAny>]) -> PyResult<Vec<Freq>> {
    obs.iter().map(rational).collect()
}

#[pyclass(name = "Profile", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyProfile(lattice::Profile);

#[pymethods]
impl PyProfile {
    /// `kind` is `"poly_bump"` or `"smooth_bump"`.
    #[new]
    #[pyo3(signature = (radius, kind = "poly_bump", center = 0.0, amplitude = 1.0))]
    fn new(radius: f64, kind: &str, center: f64, amplitude: f64) -> PyResult<Self> {
        let base = match kind {
            "poly_bump" => lattice::Profile::poly_bump(radius),
            "smooth_bump" => lattice::Profile::smooth_bump(radius),
            _ => return Err(PyValueError::new_err(format!("unknown profile kind {kind:?}"))),
        };
        let p = base.with_center(center).with_amplitude(amplitude);
        p.validate().map_err(to_py)?;
        Ok(Self(p))
    }

    fn __call__(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    fn window(&self, lattice_size: u32) -> Vec<i64> {
        self.0.window(lattice_size)
    }

    fn fourier(&self, k: f64) -> PyResult<Complex64> {
        self.0.fourier(k).map_err(to_py)
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius
    }

    fn __repr__(&self) -> String {
        let kind = match self.0.kind {
            ProfileKind::PolyBump => "poly_bump",
            ProfileKind::SmoothBump => "smooth_bump",
        };
        format!("Profile(radius={}, kind={kind:?}, center={}, amplitude={})", self.0.radius, self.0.center, self.0.amplitude)
    }
}

#[pyclass(name = "RegimeParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyParams(lattice::RegimeParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (lattice_size, mu, nu, rho = 1.0))]
    fn new(lattice_size: u32, mu: f64, nu: f64, rho: f64) -> PyResult<Self> {
        let p = lattice::RegimeParams::new(lattice_size, mu, nu).with_rho(rho);
        p.validate().map_err(to_py)?;
        Ok(Self(p))
    }

    #[getter]
    fn lattice_size(&self) -> u32 {
        self.0.lattice_size
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!("RegimeParams(lattice_size={}, mu={}, nu={}, rho={})", p.lattice_size, p.mu, p.nu, p.rho)
    }
}

/// Bracket forms of all quintic trees with `n` nodes.
#[pyfunction]
fn enumerate_trees(n: usize) -> PyResult<Vec<String>> {
    Ok(trees::enumerate_trees(n).map_err(to_py)?.iter().map(|t| t.to_string()).collect())
}

/// Number of linear extensions of a tree given in bracket form.
#[pyfunction]
fn linear_extension_count(tree: &str) -> PyResult<usize> {
    let t = trees::QuinticTree::parse(tree).map_err(to_py)?;
    Ok(trees::linear_extensions(&t).map_err(to_py)?.len())
}

#[pyfunction]
fn parity_permutations() -> Vec<[usize; 5]> {
    lattice::parity_permutations()
}

#[pyfunction]
fn g_m(omegas: Vec<Bound<'_, PyAny>>, t: f64) -> PyResult<Complex64> {
    Ok(oscillatory::g_m(&freqs(&omegas)?, t))
}

#[pyfunction]
#[pyo3(signature = (omegas, t, tol = 1e-11))]
fn g_m_oracle(omegas: Vec<Bound<'_, PyAny>>, t: f64, tol: f64) -> PyResult<Complex64> {
    oscillatory::g_m_oracle(&freqs(&omegas)?, t, tol).map_err(to_py)
}

/// `(case name, predicted leading power)`.
#[pyfunction]
fn classify_leading(omegas: Vec<Bound<'_, PyAny>>) -> PyResult<(String, u32)> {
    let tag = oscillatory::classify_leading(&freqs(&omegas)?);
    Ok((format!("{:?}", tag.kind), tag.power))
}

#[pyfunction]
fn residue_count() -> (u64, u64, u64) {
    kinetic::residue_count()
}

#[pyfunction]
fn discontinuity(py: Python<'_>) -> PyResult<Py<PyAny>> {
    let c = kinetic::third_case_coefficients();
    json_to_py(
        py,
        &serde_json::json!({
            "dyadic_coefficient": c.dyadic_coefficient,
            "third_coefficient": c.third_coefficient,
            "ratio": c.ratio,
            "net_b": c.net_b,
            "net_c": c.net_c,
        }),
    )
}

/// Exact `E|v_n(k, t)|²`.
#[pyfunction]
fn mass(n: usize, k: i64, t: f64, params: PyParams, profile: PyProfile) -> PyResult<f64> {
    Ok(picard::mass_poly(n, k, &params.0, &profile.0).map_err(to_py)?.eval(t).re)
}

#[pyfunction]
#[pyo3(signature = (k, t, params, profile, include_remainder = true))]
fn mass_derivative_n1(k: i64, t: f64, params: PyParams, profile: PyProfile, include_remainder: bool) -> PyResult<f64> {
    picard::mass_derivative_n1(k, t, &params.0, &profile.0, include_remainder).map_err(to_py)
}

/// `(estimate, standard error)` of `E|v_n(k, t)|²`.
#[pyfunction]
#[pyo3(signature = (n, k, t, params, profile, samples = 100_000, seed = 0))]
fn monte_carlo_mass(
    n: usize,
    k: i64,
    t: f64,
    params: PyParams,
    profile: PyProfile,
    samples: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    picard::monte_carlo_mass(n, k, t, &params.0, &profile.0, samples, seed).map_err(to_py)
}

/// Largest coefficientwise relative deviation between the tree sum and the
/// Picard recursion at order `n`, mode `k`.
#[pyfunction]
fn tree_vs_picard(n: usize, k: i64, t: f64, params: PyParams, profile: PyProfile) -> PyResult<f64> {
    let a = picard::tree_sum(n, k, &params.0, &profile.0).map_err(to_py)?;
    let b = picard::picard_recursion(n, &params.0, &profile.0).map_err(to_py)?.slice(k).into_iter().collect();
    Ok(picard::relative_deviation(&a, &b, t))
}

#[pyfunction]
fn pairing_total(py: Python<'_>, n: usize, k: i64, t: f64, params: PyParams, profile: PyProfile) -> PyResult<Py<PyAny>> {
    let tot = picard::pairing_total(n, k, t, &params.0, &profile.0).map_err(to_py)?;
    json_to_py(py, &serde_json::to_value(tot).expect("serialisable"))
}

/// Lattice pairing `I_L(t)` with `ν = L²`; `t` is a rational.
#[pyfunction]
#[pyo3(signature = (t, lattice_size, rho, mu, a, f, g, exact_phase_mode = true))]
#[allow(clippy::too_many_arguments)]
fn i_l_pairing(
    py: Python<'_>,
    t: Bound<'_, PyAny>,
    lattice_size: u32,
    rho: f64,
    mu: f64,
    a: PyProfile,
    f: PyProfile,
    g: PyProfile,
    exact_phase_mode: bool,
) -> PyResult<f64> {
    let t = rational(&t)?;
    let regime = EpsilonRegime::new(lattice_size, rho, exact_phase_mode).map_err(to_py)?;
    let params = lattice::RegimeParams::new(lattice_size, mu, (lattice_size as f64).powi(2)).with_rho(rho);
    py.detach(|| kinetic::i_l_pairing(t, &regime, &params, &a.0, &f.0, &g.0)).map_err(to_py)
}

fn quad(rel_tol: f64, per_permutation: bool) -> QuadConfig {
    let model = if per_permutation { PermutationModel::PerPermutation } else { PermutationModel::Symmetric };
    QuadConfig { rel_tol, model, ..QuadConfig::default() }
}

/// `(value, error estimate)` of the continuum integral.
#[pyfunction]
#[pyo3(signature = (t, rho, mu, a, f, g, rel_tol = 1e-3, per_permutation = false))]
#[allow(clippy::too_many_arguments)]
fn continuum_integral(
    py: Python<'_>,
    t: f64,
    rho: f64,
    mu: f64,
    a: PyProfile,
    f: PyProfile,
    g: PyProfile,
    rel_tol: f64,
    per_permutation: bool,
) -> PyResult<(f64, f64)> {
    let cfg = quad(rel_tol, per_permutation);
    let e = py.detach(|| kinetic::continuum_integral(t, rho, mu, &a.0, &f.0, &g.0, &cfg)).map_err(to_py)?;
    Ok((e.value, e.error))
}

/// `(value, error estimate)` of the δ-reduced integral at cutoff `mu`.
#[pyfunction]
#[pyo3(signature = (mu, a, f, g, rel_tol = 1e-3))]
fn delta_reduced(py: Python<'_>, mu: f64, a: PyProfile, f: PyProfile, g: PyProfile, rel_tol: f64) -> PyResult<(f64, f64)> {
    let cfg = quad(rel_tol, false);
    let e = py.detach(|| kinetic::delta_reduced_at_cutoff(mu, &a.0, &f.0, &g.0, &cfg)).map_err(to_py)?;
    Ok((e.value, e.error))
}

#[pyfunction]
#[pyo3(signature = (alpha_nu, beta_mu, gamma_rho, alpha, l_samples = vec![1 << 10, 1 << 20, 1 << 30]))]
fn regime_check(py: Python<'_>, alpha_nu: f64, beta_mu: f64, gamma_rho: f64, alpha: f64, l_samples: Vec<u64>) -> PyResult<Py<PyAny>> {
    let rep = kinetic::regime_check(RegimeExponents { alpha_nu, beta_mu, gamma_rho, alpha }, &l_samples);
    json_to_py(py, &serde_json::to_value(rep).expect("serialisable"))
}

#[pymodule]
#[pyo3(name = "wtq")]
fn wtq_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(enumerate_trees, m)?)?;
    m.add_function(wrap_pyfunction!(linear_extension_count, m)?)?;
    m.add_function(wrap_pyfunction!(parity_permutations, m)?)?;
    m.add_function(wrap_pyfunction!(g_m, m)?)?;
    m.add_function(wrap_pyfunction!(g_m_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(classify_leading, m)?)?;
    m.add_function(wrap_pyfunction!(residue_count, m)?)?;
    m.add_function(wrap_pyfunction!(discontinuity, m)?)?;
    m.add_function(wrap_pyfunction!(mass, m)?)?;
    m.add_function(wrap_pyfunction!(mass_derivative_n1, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_mass, m)?)?;
    m.add_function(wrap_pyfunction!(tree_vs_picard, m)?)?;
    m.add_function(wrap_pyfunction!(pairing_total, m)?)?;
    m.add_function(wrap_pyfunction!(i_l_pairing, m)?)?;
    m.add_function(wrap_pyfunction!(continuum_integral, m)?)?;
    m.add_function(wrap_pyfunction!(delta_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(regime_check, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
