//! Numerical laboratory for a continuous Beurling prime system.
//!
//! The crate builds the parameter sequences of the system, evaluates its
//! zeta function, locates and certifies the saddle points of the Perron
//! integrand, integrates along composite contours, discretizes the prime
//! measure into random generalized primes, and evaluates convolution powers
//! with the Dirichlet hyperbola method.

pub mod appendix;
pub mod discretize;
pub mod error;
pub mod measure;
pub mod numeric;
pub mod perron;
pub mod saddle;
pub mod system;
pub mod verify;
pub mod zeta;

pub use error::{Error, Result};
