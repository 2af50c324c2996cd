//! Split-exponent complex numbers: `z · e^{ln_scale}`.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A complex value stored as a mantissa and a natural-log scale, so that
/// magnitudes far outside the `f64` range can be accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplex {
    pub ln_scale: f64,
    pub z: Complex64,
}

impl ScaledComplex {
    pub fn zero() -> Self {
        ScaledComplex { ln_scale: 0.0, z: Complex64::new(0.0, 0.0) }
    }

    pub fn new(z: Complex64, ln_scale: f64) -> Self {
        ScaledComplex { ln_scale, z }.normalized()
    }

    pub fn from_complex(z: Complex64) -> Self {
        ScaledComplex::new(z, 0.0)
    }

    /// `e^w` without forming the exponential of `Re w`.
    pub fn from_exp(w: Complex64) -> Self {
        ScaledComplex { ln_scale: w.re, z: Complex64::from_polar(1.0, w.im) }
    }

    pub fn is_zero(&self) -> bool {
        self.z.re == 0.0 && self.z.im == 0.0
    }

    fn normalized(self) -> Self {
        let n = self.z.norm();
        if n == 0.0 || !n.is_finite() {
            return self;
        }
        let l = n.ln();
        ScaledComplex { ln_scale: self.ln_scale + l, z: self.z / n }
    }

    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.ln_scale + self.z.norm().ln()
        }
    }

    pub fn log10_abs(&self) -> f64 {
        self.ln_abs() / std::f64::consts::LN_10
    }

    pub fn arg(&self) -> f64 {
        self.z.arg()
    }

    /// Value as an ordinary complex number (may overflow).
    pub fn to_complex(&self) -> Complex64 {
        self.z * self.ln_scale.exp()
    }

    /// Value divided by `e^{ln_ref}`.
    pub fn relative_to(&self, ln_ref: f64) -> Complex64 {
        if self.is_zero() {
            return self.z;
        }
        self.z * (self.ln_scale - ln_ref).exp()
    }

    pub fn mul_complex(&self, c: Complex64) -> Self {
        ScaledComplex { ln_scale: self.ln_scale, z: self.z * c }.normalized()
    }

    pub fn scale_exp(&self, r: f64) -> Self {
        ScaledComplex { ln_scale: self.ln_scale + r, z: self.z }
    }
}

impl Add for ScaledComplex {
    type Output = ScaledComplex;
    fn add(self, o: ScaledComplex) -> ScaledComplex {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        let l = self.ln_scale.max(o.ln_scale);
        let z = self.z * (self.ln_scale - l).exp() + o.z * (o.ln_scale - l).exp();
        ScaledComplex::new(z, l)
    }
}

impl Mul for ScaledComplex {
    type Output = ScaledComplex;
    fn mul(self, o: ScaledComplex) -> ScaledComplex {
        ScaledComplex::new(self.z * o.z, self.ln_scale + o.ln_scale)
    }
}
