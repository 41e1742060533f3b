//! Shared numerical infrastructure: compensated summation with a fixed
//! reduction tree, 1-D and multi-dimensional adaptive quadrature, and the
//! sine integral.

pub mod cubature;
pub mod quadrature;
pub mod special;
pub mod summation;

pub use cubature::{genz_malik, CubatureOptions};
pub use quadrature::{gauss_kronrod, gauss_legendre, GkOptions};
pub use summation::{det_reduce, Neumaier, NeumaierC};

/// An integral value together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }

    pub fn scale(self, s: f64) -> Self {
        Self { value: self.value * s, error: self.error * s.abs() }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate { value: self.value + o.value, error: self.error + o.error }
    }
}

impl std::ops::Sub for Estimate {
    type Output = Estimate;
    fn sub(self, o: Estimate) -> Estimate {
        Estimate { value: self.value - o.value, error: self.error + o.error }
    }
}
