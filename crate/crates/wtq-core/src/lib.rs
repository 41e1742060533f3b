//! Computational toolkit for the weak-turbulence limit of the quintic
//! Schrödinger equation on a large torus.
//!
//! The crate is organised bottom-up:
//!
//! * [`chaos`] — truncated Wiener-chaos expansions and the Wick product;
//! * [`trees`] — quintic (5-ary) interaction trees, their labels and constraints;
//! * [`oscillatory`] — exact time-ordered oscillatory integrals (`OscPoly`);
//! * [`lattice`] — profiles, regime parameters, resonance-constrained tuples;
//! * [`picard`] — Picard iterates in the chaos algebra and their tree sums;
//! * [`kinetic`] — lattice sums, continuum integrals, the δ-reduced limit and
//!   the mod-3 residue analysis behind the dyadic / one-third discontinuity.
//!
//! [`numerics`] holds the quadrature and summation infrastructure shared by all
//! of the above.

pub mod chaos;
pub mod error;
pub mod kinetic;
pub mod lattice;
pub mod numerics;
pub mod oscillatory;
pub mod picard;
pub mod trees;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use num_rational::Ratio;

/// Exact rational frequency (denominator `L²` for lattice frequencies).
pub type Freq = Ratio<i64>;
