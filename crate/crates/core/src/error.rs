use thiserror::Error;

/// Errors raised by the library operations.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("function evaluated to a non-finite value at {at}")]
    NonFinite { at: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("derivative vanished at iteration {iteration}")]
    DerivativeVanished { iteration: usize },
    #[error("insufficient precision: {bits} bits, {required} required")]
    InsufficientPrecision { bits: usize, required: usize },
    #[error("tolerance not met: value {value}, achieved error {error:e}")]
    ToleranceNotMet { value: f64, error: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("measure has mass {0} at u = 1")]
    MassAtOne(f64),
    #[error("enumeration exceeded cap {0}")]
    Overflow(usize),
    #[error("tail diverges for Re s = {0}")]
    DivergentTail(f64),
    #[error("search failed in window [{lo}, {hi}]: {reason}")]
    SearchFailed { lo: f64, hi: f64, reason: String },
    #[error("evaluation at the pole s = 1")]
    PoleAt1,
    #[error("point {re} + {im}i lies on the branch cut (0, 1)")]
    BranchCut { re: f64, im: f64 },
    #[error("tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailTooLarge { bound: f64, tol: f64 },
    #[error("residue methods disagree: {a} vs {b}")]
    MethodsDisagree { a: f64, b: f64 },
    #[error("evaluation at the pole s = i tau")]
    PoleAtITau,
    #[error("Newton iteration failed for m = {m}: {reason}")]
    NewtonFailed { m: i64, reason: String },
    #[error("winding number {winding} != 1 for m = {m}")]
    WindingNot1 { m: i64, winding: i64 },
    #[error("descent path lost at theta = {theta}")]
    PathLost { theta: f64 },
    #[error("phase violation for m = {m}: |phi| = {phi}")]
    PhaseViolation { m: i64, phi: f64 },
    #[error("segment {tag} dominates the saddle contribution")]
    SegmentDominates { tag: String },
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("tail diverges: theta = {0} >= 1")]
    TailDivergent(f64),
    #[error("depth {n} exceeds configured maximum {max}")]
    DepthExceeded { n: usize, max: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
