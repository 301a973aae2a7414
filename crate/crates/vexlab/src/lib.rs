//! Variable-exponent p(x)-Laplacian laboratory.
//!
//! Solves the quasilinear equation `div(|grad u|^{p(x)-2} grad u) = g + div(F)`
//! on rectangles with piecewise-linear elements and measures the quantities
//! that drive Hölder regularity: modulars and Luxemburg norms, gradient-energy
//! decay over shrinking balls, p(x)-harmonic comparison energies, and
//! oscillation-based Hölder exponent estimates.
//!
//! Module map:
//! - [`mesh`]: criss-cross triangulation, ball patches, exact quadrature.
//! - [`spaces`]: exponent fields, modulars, Luxemburg norms, assumption checks.
//! - [`solver`]: energy, weak residual, Dirichlet solver, harmonic replacement.
//! - [`regularity`]: decay profiles, exponent/constant formulas, verdict checks.
//! - [`harness`]: manufactured problems, radial oracle, experiments, reports.

// Negated comparisons (`!(x > y)`) are used deliberately throughout: unlike
// `x <= y` they fail closed when either side is NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod harness;
pub mod mesh;
pub mod regularity;
pub mod solver;
pub mod spaces;

pub use mesh::{Grid, Patch, Rect, Region};
pub use solver::{CellVectorField, ScalarField, SolveDiagnostics, SolverSettings};
pub use spaces::{ExponentField, ProblemSpec};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate rectangle: {0}")]
    DegenerateRectangle(String),
    #[error("grid needs at least 2 nodes per side, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },
    #[error("ball radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("under-resolved ball: no triangle fits inside radius {radius} around ({x}, {y})")]
    UnderResolvedBall { x: f64, y: f64, radius: f64 },
    #[error("expected {expected} per-triangle values, got {got}")]
    ValueCountMismatch { expected: usize, got: usize },
    #[error("expected {expected} per-node values, got {got}")]
    NodeCountMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty region")]
    EmptyRegion,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solver produced a non-finite energy: {0}")]
    NonFiniteEnergy(String),
    #[error("decay profile must be non-decreasing in r: {0}")]
    DecreasingProfile(String),
    #[error("too few usable points: {got} (need at least {need})")]
    TooFewPoints { got: usize, need: usize },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("bad preset parameter: {0}")]
    BadParams(String),
    #[error("bad experiment config: {0}")]
    BadConfig(String),
    #[error("no exact solution or oracle attached to this problem")]
    MissingOracle,
    #[error("table format error: {0}")]
    TableFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
