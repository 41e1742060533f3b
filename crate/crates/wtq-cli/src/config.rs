//! Declarative experiment configuration (a single JSON document).

use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use wtq::kinetic::{QuadConfig, RegimeExponents};
use wtq::lattice::{Profile, RegimeParams};

use crate::CliError;

/// A rational written either as a JSON integer or as a string such as `"1/2"`,
/// `"-3"` or `"0.25"` (finite decimals only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalSpec {
    Int(i64),
    Text(String),
}

impl RationalSpec {
    pub fn parse(&self) -> Result<Ratio<i64>, CliError> {
        match self {
            RationalSpec::Int(v) => Ok(Ratio::from_integer(*v)),
            RationalSpec::Text(s) => parse_rational(s),
        }
    }
}

pub fn parse_rational(s: &str) -> Result<Ratio<i64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse {s:?} as a rational"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(a, b));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10i64.pow(frac.len() as u32);
        let neg = int.starts_with('-');
        let i: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let f: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = i.abs() * den + f;
        return Ok(Ratio::new(if neg { -num } else { num }, den));
    }
    s.parse::<i64>().map(Ratio::from_integer).map_err(|_| bad())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: Option<RegimeParams>,
    pub profile: Option<Profile>,
    pub test_f: Option<Profile>,
    pub test_g: Option<Profile>,
    /// Orders `n` (trees, picard).
    pub orders: Option<Vec<usize>>,
    pub times: Option<Vec<RationalSpec>>,
    pub lattice_sizes: Option<Vec<u32>>,
    pub rhos: Option<Vec<f64>>,
    pub modes: Option<Vec<i64>>,
    /// Frequency vectors for `gm`.
    pub frequencies: Option<Vec<Vec<RationalSpec>>>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub exact_phase_mode: Option<bool>,
    pub exponents: Option<RegimeExponents>,
    pub l_samples: Option<Vec<u64>>,
    pub quad: Option<QuadConfig>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.params {
            p.validate()?;
        }
        for p in [&self.profile, &self.test_f, &self.test_g].into_iter().flatten() {
            p.validate()?;
        }
        for t in self.times.iter().flatten() {
            if *t.parse()?.numer() < 0 {
                return Err(CliError::Config("times must be non-negative".into()));
            }
        }
        for w in self.frequencies.iter().flatten().flatten() {
            w.parse()?;
        }
        if self.lattice_sizes.iter().flatten().any(|&l| l == 0) {
            return Err(CliError::Config("lattice sizes must be positive".into()));
        }
        if self.rhos.iter().flatten().chain(self.rho.iter()).chain(self.mu.iter()).any(|&v| !(v > 0.0)) {
            return Err(CliError::Config("rho and mu must be positive".into()));
        }
        Ok(())
    }

    pub fn times_or(&self, default: &[(i64, i64)]) -> Result<Vec<Ratio<i64>>, CliError> {
        match &self.times {
            Some(v) => v.iter().map(RationalSpec::parse).collect(),
            None => Ok(default.iter().map(|&(a, b)| Ratio::new(a, b)).collect()),
        }
    }
}
