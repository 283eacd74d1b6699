//! Numerical toolkit for finite-variable reductions of the dispersionless
//! Toda hierarchy with logarithmic Landau–Ginzburg potentials.

pub mod cmath;
pub mod fd;
pub mod fixtures;
pub mod frobenius;
pub mod geometry;
pub mod hydro;
pub mod lax;
pub mod loewner;
pub mod poly;
pub mod potential;
pub mod series;

pub use num_complex::Complex64 as C64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("series: {0}")]
    Series(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error("inversion failed: {0}")]
    Inversion(String),
    #[error("singular jacobian: {0}")]
    SingularJacobian(String),
    #[error("continuation breakdown: {0}")]
    ContinuationBreakdown(String),
}

pub type Result<T> = std::result::Result<T, Error>;
