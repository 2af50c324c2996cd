//! Shared numeric substrate: dual-precision arithmetic, root finding,
//! quadrature, contours and split-exponent accumulation.

pub mod hp;
pub mod path;
pub mod quad;
pub mod roots;
pub mod scaled;

use serde::{Deserialize, Serialize};

pub use hp::{reduce_mod_2pi, signed_dist_2pi, wrap_pi, Hp, HpComplex, Reduced};
pub use path::{integrate_path, ContourPath, Param, PathIntegral, Segment, SegmentKind, Side};
pub use quad::{breakpoints, integrate, integrate_pieces, integrate_real, QuadOptions, QuadResult};
pub use roots::{find_root_bracketed, find_root_bracketed_hp, newton_complex, NewtonResult};
pub use scaled::ScaledComplex;

/// Precision of the high-precision mode and unit roundoff of the fast mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionContext {
    pub bits: usize,
    pub eps_machine: f64,
}

impl PrecisionContext {
    pub fn new(bits: usize) -> Self {
        PrecisionContext { bits, eps_machine: f64::EPSILON / 2.0 }
    }

    /// Bits needed to resolve a value of binary magnitude `log2_mag` modulo 2π
    /// with 96 guard bits.
    pub fn bits_for(log2_mag: f64) -> usize {
        (log2_mag.max(0.0).ceil() as usize).saturating_add(96)
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        PrecisionContext::new(256)
    }
}
